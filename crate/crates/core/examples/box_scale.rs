//! Largest certifiable scaling of the mass-spring-damper parameter box, for a few rate
//! bounds and decay rates, plus the common-Lyapunov baseline.

use lpvcert::assemble::DecayRate;
use lpvcert::benchmark::{mass_spring_damper_dt, msd_parameter_box, msd_rate_box};
use lpvcert::certify::{max_box_scale, snap_to_percent, CertifyOptions, Method};

fn main() -> lpvcert::Result<()> {
    let sys = mass_spring_damper_dt();
    let p = msd_parameter_box();
    let opts = CertifyOptions::default();
    let mut common = opts.clone();
    common.assembly.common_lyapunov = true;

    println!("{:>10} {:>6} {:>10} {:>8}", "dk_max", "eps", "lambda*", "snapped");
    for eps in [0.0, 0.04] {
        for dk in [1e-5, 1e-2, 100.0] {
            let t = std::time::Instant::now();
            let r = max_box_scale(&sys, &p, &msd_rate_box(dk, 0.0), DecayRate::epsilon_dt(eps)?, Method::RateBounded, 1e-3, &opts)?;
            println!("{dk:>10} {eps:>6} {:>10.4} {:>8.2}   ({:.2?}, {} probes)", r.best, snap_to_percent(r.best), t.elapsed(), r.trace.len());
        }
    }
    let r = max_box_scale(&sys, &p, &msd_rate_box(1e-5, 0.0), DecayRate::EpsilonDt(0.0), Method::RateBounded, 1e-3, &common)?;
    println!("common Lyapunov matrix: lambda* = {:.4}", r.best);
    Ok(())
}
