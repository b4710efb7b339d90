//! Largest certifiable decay rate of the discretized mass-spring-damper on a shrunken
//! parameter box, next to the eigenvalue ceiling at the box center.

use lpvcert::benchmark::{mass_spring_damper_dt, msd_parameter_box, msd_rate_box};
use lpvcert::certify::{check_eig_precondition, max_decay_rate, CertifyOptions, Method};
use lpvcert::DecayRate;

fn main() -> lpvcert::Result<()> {
    let sys = mass_spring_damper_dt();
    let p = msd_parameter_box().scaled(0.2)?;
    let opts = CertifyOptions::default();
    let ceiling = check_eig_precondition(&sys, &p, DecayRate::EpsilonDt(0.0))?.rate_ceiling;
    println!("eigenvalue ceiling on eps: {ceiling:.6}");
    for dk in [1e-5, 1e-2, 100.0] {
        let (rate, res) = max_decay_rate(&sys, &p, &msd_rate_box(dk, 0.0), Method::RateBounded, 1e-4, &opts)?;
        let note = if res.saw_unknown() { "  (some probes inconclusive)" } else { "" };
        println!("dk_max = {dk:>8}: {rate}{note}");
    }
    Ok(())
}
