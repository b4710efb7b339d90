use nalgebra::DMatrix;

use crate::assemble::DecayRate;
use crate::certify::{CertMethod, LyapunovCertificate};
use crate::error::{input_err, Result};
use crate::linalg;
use crate::system::LpvSystem;

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    /// Largest eigenvalue of the decrease (or gain) condition over the grid.
    pub max_eig: f64,
    /// Grid point `(p, r)` where it was attained.
    pub worst: (Vec<f64>, Vec<f64>),
    /// Smallest eigenvalue of `K(p)` over the `P` grid.
    pub min_k_eig: f64,
    /// Pass threshold for `max_eig`: `1e-6 (1 + b)`, plus `gamma` for gain certificates.
    pub tolerance: f64,
    pub points: usize,
}

impl GridReport {
    pub fn passed(&self) -> bool {
        self.max_eig <= self.tolerance
    }
}

/// The matrix that must be negative semidefinite at `(p, r)`.
///
/// `r` is a rate sample for every kind of certificate except vertex-pair ones, where it
/// is the next parameter value `l` and the condition is `A(p)^T K(l) A(p) - (1-eps) K(p)`.
pub fn condition_at(sys: &LpvSystem, cert: &LyapunovCertificate, p: &[f64], r: &[f64]) -> Result<DMatrix<f64>> {
    let f = sys.frozen(p)?;
    let kp = cert.k.eval(p)?;
    let k0 = cert.k.coeff(0);
    let a = &f.a;
    let at = a.transpose();
    let decrease = |rate: DecayRate| -> Result<DMatrix<f64>> {
        let dk = cert.k.eval(r)? - k0;
        Ok(match rate {
            DecayRate::AlphaCt(al) => &at * &kp + &kp * a + &kp * (2.0 * al) + dk,
            _ => {
                let c = rate.contraction().expect("discrete");
                &at * (&kp + dk) * a - &kp * c
            }
        })
    };
    Ok(match cert.method {
        CertMethod::RateBoundedDt | CertMethod::GeneralDt | CertMethod::GeneralCt => decrease(cert.rate)?,
        CertMethod::VertexPairDt => {
            let kl = cert.k.eval(r)?;
            let c = cert.rate.contraction().unwrap_or(1.0);
            &at * kl * a - &kp * c
        }
        CertMethod::L2Gain => {
            let g = cert.gamma.unwrap_or(0.0);
            let (nx, nw, nz) = (sys.n_x(), sys.n_w(), sys.n_z());
            let n = nx + nw + nz;
            let mut m = DMatrix::zeros(n, n);
            m.view_mut((0, 0), (nx, nx)).copy_from(&decrease(cert.rate)?);
            let kb = &kp * &f.b;
            m.view_mut((0, nx), (nx, nw)).copy_from(&kb);
            m.view_mut((nx, 0), (nw, nx)).copy_from(&kb.transpose());
            m.view_mut((0, nx + nw), (nx, nz)).copy_from(&f.c.transpose());
            m.view_mut((nx + nw, 0), (nz, nx)).copy_from(&f.c);
            m.view_mut((nx, nx + nw), (nw, nz)).copy_from(&f.d.transpose());
            m.view_mut((nx + nw, nx), (nz, nw)).copy_from(&f.d);
            for j in nx..n {
                m[(j, j)] = -g;
            }
            m
        }
    })
}

/// Maximum eigenvalue of the certificate's condition over a `density`-point-per-axis grid
/// on `P x V` (or `P x P` for vertex-pair certificates), and the smallest eigenvalue of
/// `K(p)` over the `P` grid.
pub fn grid_max_eig(sys: &LpvSystem, cert: &LyapunovCertificate, density: usize) -> Result<GridReport> {
    if density < 2 {
        return input_err("grid density must be at least 2");
    }
    sys.check_box(&cert.p, "parameter")?;
    let pg = cert.p.grid(density);
    let rg = match cert.method {
        CertMethod::VertexPairDt => pg.clone(),
        _ => cert.v.grid(density),
    };
    let mut max_eig = f64::NEG_INFINITY;
    let mut worst = (Vec::new(), Vec::new());
    let mut min_k_eig = f64::INFINITY;
    for p in &pg {
        min_k_eig = min_k_eig.min(linalg::min_eig(&cert.k.eval(p)?));
        for r in &rg {
            let e = linalg::max_eig(&condition_at(sys, cert, p, r)?);
            if e > max_eig {
                max_eig = e;
                worst = (p.clone(), r.clone());
            }
        }
    }
    let tolerance = 1e-6 * (1.0 + cert.b + cert.gamma.unwrap_or(0.0));
    Ok(GridReport { max_eig, worst, min_k_eig, tolerance, points: pg.len() * rg.len() })
}
