//! Mass-spring-damper benchmark with time-varying stiffness and damping.
//!
//! `k(t) = k_0 (1 + p_1(t))`, `c(t) = c_0 (1 + p_2(t))`, state `(position, velocity)`,
//! force input and position output.

use nalgebra::DMatrix;

use crate::system::{AffineMatrixFamily, LpvSystem, ParamBox, TimeDomain};

/// Sampling time of the bundled discrete-time model.
pub const MSD_SAMPLING_TIME: f64 = 1.0 / 20.0;

pub fn mass_spring_damper_ct(k0: f64, c0: f64) -> LpvSystem {
    let m = |v: &[f64]| DMatrix::from_row_slice(2, 2, v);
    let a = AffineMatrixFamily::new(vec![
        m(&[0.0, 1.0, -k0, -c0]),
        m(&[0.0, 0.0, -k0, 0.0]),
        m(&[0.0, 0.0, 0.0, -c0]),
    ])
    .expect("consistent shapes");
    let b = AffineMatrixFamily::constant(DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), 2);
    let c = AffineMatrixFamily::constant(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), 2);
    let d = AffineMatrixFamily::zeros(1, 1, 2);
    LpvSystem::new(TimeDomain::Continuous, a, b, c, d).expect("consistent dimensions")
}

/// `k_0 = c_0 = 1`, forward-Euler discretized with `T_s = 1/20`.
pub fn mass_spring_damper_dt() -> LpvSystem {
    mass_spring_damper_ct(1.0, 1.0)
        .discretize_first_order(MSD_SAMPLING_TIME)
        .expect("positive sampling time")
}

/// `[-1, 1] x [-1, 1]`.
pub fn msd_parameter_box() -> ParamBox {
    ParamBox::symmetric(&[1.0, 1.0]).expect("valid box")
}

/// `[-dk_max, dk_max] x [-dc_max, dc_max]`.
pub fn msd_rate_box(dk_max: f64, dc_max: f64) -> ParamBox {
    ParamBox::symmetric(&[dk_max, dc_max]).expect("nonnegative rate bounds")
}

/// Log-spaced grid of `n` points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| {
                    if k == 0 {
                        lo
                    } else if k + 1 == n {
                        hi
                    } else {
                        10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}
