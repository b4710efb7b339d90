//! Minimal L2-gain bound of the discretized mass-spring-damper on 0.2 P over a few rate
//! bounds and decay rates, with an empirical check of each bound by simulation.

use lpvcert::assemble::DecayRate;
use lpvcert::benchmark::{mass_spring_damper_dt, msd_parameter_box, msd_rate_box};
use lpvcert::certify::{min_l2_gain, CertifyOptions};
use lpvcert::oracle::{empirical_gain, Clock};

fn main() -> lpvcert::Result<()> {
    let sys = mass_spring_damper_dt();
    let p = msd_parameter_box().scaled(0.2)?;
    let opts = CertifyOptions::default();
    println!("{:>10} {:>6} {:>10} {:>10} {:>12}", "dk_max", "eps", "gamma", "empirical", "dissipation");
    for eps in [0.0, 0.01, 0.02] {
        for dk in [1e-5, 0.00825, 100.0] {
            let v = min_l2_gain(&sys, &p, &msd_rate_box(dk, 0.0), DecayRate::epsilon_dt(eps)?, &opts)?;
            match &v.certificate {
                Some(cert) => {
                    let g = empirical_gain(&sys, cert, 50, 500, 1, Clock::Discrete)?;
                    println!(
                        "{dk:>10} {eps:>6} {:>10.5} {:>10.5} {:>12.2e}",
                        cert.gamma.unwrap(),
                        g.max_ratio,
                        g.dissipation.worst_relative_violation
                    );
                }
                None => println!("{dk:>10} {eps:>6} {:>10}  ({:?})", v.outcome, v.diagnostics.note),
            }
        }
    }
    Ok(())
}
