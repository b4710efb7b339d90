//! Independent re-checks of one certificate: dense-grid evaluation of the semi-infinite
//! condition, trajectory decay on random schedules, and the vertex-maximum property of a
//! partially convex cubic next to a concave one.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lpvcert::benchmark::{mass_spring_damper_dt, msd_parameter_box, msd_rate_box};
use lpvcert::certify::{certify_aqs, validate_certificate, CertifyOptions, Method, ValidationOptions};
use lpvcert::oracle::{grid_max_eig, CubicMatrixFunction};
use lpvcert::{DecayRate, ParamBox};

fn main() -> lpvcert::Result<()> {
    let sys = mass_spring_damper_dt();
    let (p, v) = (msd_parameter_box().scaled(0.46)?, msd_rate_box(100.0, 0.0));
    let verdict = certify_aqs(&sys, &p, &v, DecayRate::EpsilonDt(0.0), Method::RateBounded, &CertifyOptions::default())?;
    let cert = verdict.certificate.expect("certified");
    for density in [3, 11, 41] {
        let g = grid_max_eig(&sys, &cert, density)?;
        println!("grid {density:>2}: max eig {:+.3e} over {} points (tolerance {:.1e})", g.max_eig, g.points, g.tolerance);
    }
    let opts = ValidationOptions { trials: 100, horizon: 500, ..ValidationOptions::default() };
    let s = validate_certificate(&sys, &cert, &opts)?;
    println!("decay held on {}/{} random schedules", s.decay_passed, s.decay_trials);

    let bx = ParamBox::symmetric(&[1.0, 0.5])?;
    let f = CubicMatrixFunction::random_with_curvature(&mut ChaCha8Rng::seed_from_u64(1), 3, &bx, 1e-3);
    let r = f.vertex_max_check(&bx, 41)?;
    println!("convex cubic: grid max {:.4}, vertex max {:.4}", r.grid_max, r.vertex_max);
    let mut g = CubicMatrixFunction::zeros(1, 1);
    g.q2[0][0] = DMatrix::from_element(1, 1, -1.0);
    let r = g.vertex_max_check(&ParamBox::symmetric(&[1.0])?, 41)?;
    println!("-p^2: grid max {:.4} at {:?}, vertex max {:.4}", r.grid_max, r.grid_argmax, r.vertex_max);
    Ok(())
}
