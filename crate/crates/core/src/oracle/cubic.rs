use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{dim_err, input_err, Result};
use crate::linalg;
use crate::system::ParamBox;

/// Symmetric-matrix-valued cubic polynomial
/// `L(p) = Q0 + sum_i Q_i p_i + sum_ij Q_ij p_i p_j + sum_ijk Q_ijk p_i p_j p_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicMatrixFunction {
    pub q0: DMatrix<f64>,
    pub q1: Vec<DMatrix<f64>>,
    /// `q2[i][j]`.
    pub q2: Vec<Vec<DMatrix<f64>>>,
    /// `q3[i][j][k]`.
    pub q3: Vec<Vec<Vec<DMatrix<f64>>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexMaxReport {
    /// Whether the curvature condition holds at every `(axis, vertex)`.
    pub condition_holds: bool,
    /// `(axis, vertex, lambda_min)` wherever the curvature condition fails.
    pub violations: Vec<(usize, Vec<f64>, f64)>,
    pub grid_max: f64,
    pub grid_argmax: Vec<f64>,
    pub vertex_max: f64,
    pub scale: f64,
    /// `grid_max <= vertex_max + 1e-8 scale`. Only asserted when the condition holds.
    pub max_at_vertex: bool,
}

impl CubicMatrixFunction {
    pub fn zeros(n: usize, n_p: usize) -> Self {
        let z = DMatrix::zeros(n, n);
        Self {
            q0: z.clone(),
            q1: vec![z.clone(); n_p],
            q2: vec![vec![z.clone(); n_p]; n_p],
            q3: vec![vec![vec![z; n_p]; n_p]; n_p],
        }
    }

    pub fn dim(&self) -> usize {
        self.q0.nrows()
    }

    pub fn n_p(&self) -> usize {
        self.q1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let np = self.n_p();
        let all = std::iter::once(&self.q0)
            .chain(&self.q1)
            .chain(self.q2.iter().flatten())
            .chain(self.q3.iter().flatten().flatten());
        for m in all {
            if m.shape() != (n, n) || !linalg::is_symmetric(m, 1e-12) {
                return dim_err("cubic coefficients must be symmetric and of equal size");
            }
        }
        if self.q2.len() != np
            || self.q2.iter().any(|r| r.len() != np)
            || self.q3.len() != np
            || self.q3.iter().any(|r| r.len() != np || r.iter().any(|s| s.len() != np))
        {
            return dim_err("cubic coefficient arrays must be n_p x n_p (x n_p)");
        }
        Ok(())
    }

    pub fn eval(&self, p: &[f64]) -> DMatrix<f64> {
        let np = self.n_p();
        let mut out = self.q0.clone();
        for i in 0..np {
            out += &self.q1[i] * p[i];
            for j in 0..np {
                out += &self.q2[i][j] * (p[i] * p[j]);
                for k in 0..np {
                    out += &self.q3[i][j][k] * (p[i] * p[j] * p[k]);
                }
            }
        }
        out
    }

    /// Half the second derivative along axis `i` at `u`:
    /// `Q_ii + sum_j (Q_jii + Q_iji + Q_iij) u_j`.
    pub fn curvature(&self, i: usize, u: &[f64]) -> DMatrix<f64> {
        let mut m = self.q2[i][i].clone();
        for (j, uj) in u.iter().enumerate() {
            m += (&self.q3[j][i][i] + &self.q3[i][j][i] + &self.q3[i][i][j]) * *uj;
        }
        m
    }

    fn scale(&self) -> f64 {
        1.0 + self.q0.norm()
            + self.q1.iter().map(|m| m.norm()).sum::<f64>()
            + self.q2.iter().flatten().map(|m| m.norm()).sum::<f64>()
            + self.q3.iter().flatten().flatten().map(|m| m.norm()).sum::<f64>()
    }

    /// Checks the curvature condition at every `(axis, vertex)` and compares the largest
    /// eigenvalue over a dense grid with the largest one over the vertices.
    pub fn vertex_max_check(&self, bx: &ParamBox, density: usize) -> Result<VertexMaxReport> {
        self.validate()?;
        if density < 3 {
            return input_err("vertex-maximum check needs a grid density of at least 3");
        }
        if bx.dim() != self.n_p() {
            return dim_err("box dimension does not match the cubic function");
        }
        let verts = bx.vertices();
        let mut violations = Vec::new();
        for i in 0..self.n_p() {
            if bx.is_degenerate(i) {
                continue;
            }
            for u in &verts {
                let m = linalg::min_eig(&self.curvature(i, u));
                if m < 0.0 {
                    violations.push((i, u.clone(), m));
                }
            }
        }
        let vertex_max = verts.iter().map(|u| linalg::max_eig(&self.eval(u))).fold(f64::NEG_INFINITY, f64::max);
        let (mut grid_max, mut grid_argmax) = (f64::NEG_INFINITY, Vec::new());
        for p in bx.grid(density) {
            let e = linalg::max_eig(&self.eval(&p));
            if e > grid_max {
                grid_max = e;
                grid_argmax = p;
            }
        }
        let scale = self.scale();
        Ok(VertexMaxReport {
            condition_holds: violations.is_empty(),
            violations,
            grid_max,
            grid_argmax,
            vertex_max,
            scale,
            max_at_vertex: grid_max <= vertex_max + 1e-8 * scale,
        })
    }

    /// Random instance with entries uniform in `[-1, 1]` whose diagonal quadratic
    /// coefficients are shifted so that the curvature condition holds at every vertex of
    /// `bx` with the given margin.
    pub fn random_with_curvature<R: Rng>(rng: &mut R, n: usize, bx: &ParamBox, margin: f64) -> Self {
        let np = bx.dim();
        let mut sym = || {
            let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            linalg::symmetrize(&m)
        };
        let mut f = Self::zeros(n, np);
        f.q0 = sym();
        for i in 0..np {
            f.q1[i] = sym();
            for j in 0..np {
                f.q2[i][j] = sym();
                for k in 0..np {
                    f.q3[i][j][k] = sym();
                }
            }
        }
        // the curvature is affine in q2[i][i], so one shift per axis fixes every vertex
        for i in 0..np {
            let worst = bx
                .vertices()
                .iter()
                .map(|u| linalg::min_eig(&f.curvature(i, u)))
                .fold(f64::INFINITY, f64::min);
            let shift = (margin - worst).max(0.0);
            f.q2[i][i] += DMatrix::identity(n, n) * shift;
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(q2: f64) -> CubicMatrixFunction {
        let mut f = CubicMatrixFunction::zeros(1, 1);
        f.q2[0][0] = DMatrix::from_element(1, 1, q2);
        f
    }

    #[test]
    fn constant_function() {
        let mut f = CubicMatrixFunction::zeros(2, 2);
        f.q0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]);
        let r = f.vertex_max_check(&ParamBox::symmetric(&[1.0, 2.0]).unwrap(), 11).unwrap();
        assert_eq!(r.grid_max, r.vertex_max);
        assert!(r.condition_holds && r.max_at_vertex);
    }

    #[test]
    fn convex_parabola() {
        let r = scalar(2.0).vertex_max_check(&ParamBox::symmetric(&[1.0]).unwrap(), 41).unwrap();
        assert!(r.condition_holds);
        assert_eq!(r.vertex_max, 2.0);
        assert_eq!(r.grid_max, 2.0);
    }

    #[test]
    fn concave_parabola_has_interior_maximum() {
        let r = scalar(-1.0).vertex_max_check(&ParamBox::symmetric(&[1.0]).unwrap(), 41).unwrap();
        assert!(!r.condition_holds);
        assert_eq!(r.violations.len(), 2);
        assert_eq!(r.vertex_max, -1.0);
        assert_eq!(r.grid_max, 0.0);
        assert_eq!(r.grid_argmax, vec![0.0]);
        assert!(!r.max_at_vertex);
    }
}
