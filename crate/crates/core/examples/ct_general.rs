//! Continuous-time mass-spring-damper with the general test: largest decay rate `alpha`
//! for a slowly varying schedule, then an RK4 re-check of the resulting certificate.

use lpvcert::benchmark::{mass_spring_damper_ct, msd_parameter_box, msd_rate_box};
use lpvcert::certify::{max_decay_rate, CertifyOptions, Method};
use lpvcert::oracle::{check_decay, random_schedule, random_unit_state, simulate, Clock};

fn main() -> lpvcert::Result<()> {
    let sys = mass_spring_damper_ct(1.0, 1.0);
    let p = msd_parameter_box().scaled(0.5)?;
    let v = msd_rate_box(0.1, 0.1);
    let (rate, res) = max_decay_rate(&sys, &p, &v, Method::General, 1e-3, &CertifyOptions::default())?;
    println!("largest certified rate: {rate} ({} probes)", res.trace.len());
    let Some(cert) = res.certificate else {
        println!("no certificate");
        return Ok(());
    };
    println!("K(p) bounds: a = {:.4}, b = {:.4}", cert.a, cert.b);
    let clock = Clock::Continuous { h: 1e-2 };
    let mut passed = 0;
    for seed in 0..20 {
        let sched = random_schedule(&p, &v, 2000, seed, clock)?;
        let traj = simulate(&sys, Some(&cert), &random_unit_state(2, seed), &sched, None)?;
        passed += usize::from(check_decay(&traj, &cert)?.passed);
    }
    println!("decay bound held on {passed}/20 simulated trajectories over 20 s");
    Ok(())
}
