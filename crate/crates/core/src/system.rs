//! Affine LPV systems, scheduling boxes and first-order discretization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, input_err, LpvError, Result};
use crate::linalg;

/// Continuous time (`d/dt`) or discrete time (shift operator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeDomain {
    #[serde(rename = "ct")]
    Continuous,
    #[serde(rename = "dt")]
    Discrete,
}

impl std::fmt::Display for TimeDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeDomain::Continuous => f.write_str("ct"),
            TimeDomain::Discrete => f.write_str("dt"),
        }
    }
}

/// `M(p) = M_0 + sum_i M_i p_i`, all coefficients of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixFamily {
    coeffs: Vec<DMatrix<f64>>,
}

impl AffineMatrixFamily {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return input_err("an affine family needs at least the constant coefficient");
        };
        let shape = first.shape();
        if let Some((i, m)) = coeffs.iter().enumerate().find(|(_, m)| m.shape() != shape) {
            return dim_err(format!(
                "coefficient {i} is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                shape.0,
                shape.1
            ));
        }
        Ok(Self { coeffs })
    }

    /// Parameter-independent family with `n_p` zero slope coefficients.
    pub fn constant(m: DMatrix<f64>, n_p: usize) -> Self {
        let (r, c) = m.shape();
        let mut coeffs = vec![m];
        coeffs.extend((0..n_p).map(|_| DMatrix::zeros(r, c)));
        Self { coeffs }
    }

    pub fn zeros(rows: usize, cols: usize, n_p: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols), n_p)
    }

    pub fn n_p(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coeffs[0].shape()
    }

    pub fn coeff(&self, i: usize) -> &DMatrix<f64> {
        &self.coeffs[i]
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// `M_0 + sum_i M_i p_i`.
    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        if p.len() != self.n_p() {
            return dim_err(format!(
                "parameter has length {}, family expects {}",
                p.len(),
                self.n_p()
            ));
        }
        let mut out = self.coeffs[0].clone();
        for (m, &pi) in self.coeffs[1..].iter().zip(p) {
            if pi != 0.0 {
                out += m * pi;
            }
        }
        Ok(out)
    }

    /// `true` when every slope coefficient is exactly zero.
    pub fn is_parameter_independent(&self) -> bool {
        self.coeffs[1..].iter().all(|m| m.iter().all(|&x| x == 0.0))
    }

    pub fn map(&self, mut f: impl FnMut(usize, &DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self {
            coeffs: self.coeffs.iter().enumerate().map(|(i, m)| f(i, m)).collect(),
        }
    }
}

/// Affine family whose coefficients are all symmetric and square, e.g. `K(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricAffineFamily(AffineMatrixFamily);

impl SymmetricAffineFamily {
    pub fn new(coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let fam = AffineMatrixFamily::new(coeffs)?;
        for (i, m) in fam.coeffs().iter().enumerate() {
            if !linalg::is_symmetric(m, 1e-12) {
                return input_err(format!("coefficient K_{i} is not symmetric"));
            }
        }
        Ok(Self(fam))
    }

    pub fn dim(&self) -> usize {
        self.0.shape().0
    }

    pub fn n_p(&self) -> usize {
        self.0.n_p()
    }

    pub fn coeff(&self, i: usize) -> &DMatrix<f64> {
        self.0.coeff(i)
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        self.0.coeffs()
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.0.eval(p)
    }

    pub fn as_family(&self) -> &AffineMatrixFamily {
        &self.0
    }
}

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_n, upper_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return dim_err(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            ));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) {
                return input_err(format!("box coordinate {i} has a non-finite bound"));
            }
            if l > u {
                return input_err(format!("box coordinate {i}: lower {l} exceeds upper {u}"));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-h_i, h_i]`.
    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        Self::new(half_widths.iter().map(|h| -h).collect(), half_widths.to_vec())
    }

    /// Degenerate box containing the single point `p`.
    pub fn point(p: &[f64]) -> Self {
        Self { lower: p.to_vec(), upper: p.to_vec() }
    }

    pub fn zero_point(n: usize) -> Self {
        Self::point(&vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }

    pub fn is_point(&self) -> bool {
        (0..self.dim()).all(|i| self.is_degenerate(i))
    }

    /// Corners in binary-counting order with coordinate 0 fastest. Degenerate
    /// coordinates contribute a single value, so exact duplicates never appear.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let free: Vec<usize> = (0..self.dim()).filter(|&i| !self.is_degenerate(i)).collect();
        (0..1usize << free.len())
            .map(|k| {
                let mut v = self.lower.clone();
                for (bit, &i) in free.iter().enumerate() {
                    if k >> bit & 1 == 1 {
                        v[i] = self.upper[i];
                    }
                }
                v
            })
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// `{ lambda * p : p in self }`, scaling about the origin.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return input_err(format!("box scale must be a finite nonnegative number, got {lambda}"));
        }
        Ok(Self {
            lower: self.lower.iter().map(|x| x * lambda).collect(),
            upper: self.upper.iter().map(|x| x * lambda).collect(),
        })
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
    }

    /// Nearest point of the box.
    pub fn clamp(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| x.clamp(*l, *u))
            .collect()
    }

    /// Uniform grid with `density` points per non-degenerate axis, coordinate 0 fastest.
    pub fn grid(&self, density: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| {
                if self.is_degenerate(i) || density < 2 {
                    vec![self.center()[i]]
                } else {
                    let (l, u) = (self.lower[i], self.upper[i]);
                    (0..density)
                        .map(|k| {
                            if k + 1 == density {
                                u
                            } else {
                                l + (u - l) * k as f64 / (density - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        (0..total)
            .map(|mut k| {
                axes.iter()
                    .map(|ax| {
                        let x = ax[k % ax.len()];
                        k /= ax.len();
                        x
                    })
                    .collect()
            })
            .collect()
    }

    /// Box `[lower - upper, upper - lower]` of all differences of two points.
    pub fn difference_box(&self) -> Self {
        Self {
            lower: self.lower.iter().zip(&self.upper).map(|(l, u)| l - u).collect(),
            upper: self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect(),
        }
    }
}

/// LPV state-space model `xi x = A(p) x + B(p) w`, `z = C(p) x + D(p) w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpvSystem {
    pub domain: TimeDomain,
    pub a: AffineMatrixFamily,
    pub b: AffineMatrixFamily,
    pub c: AffineMatrixFamily,
    pub d: AffineMatrixFamily,
}

impl LpvSystem {
    pub fn new(
        domain: TimeDomain,
        a: AffineMatrixFamily,
        b: AffineMatrixFamily,
        c: AffineMatrixFamily,
        d: AffineMatrixFamily,
    ) -> Result<Self> {
        let (nx, nx2) = a.shape();
        if nx != nx2 {
            return dim_err(format!("A must be square, got {nx}x{nx2}"));
        }
        let (bx, nw) = b.shape();
        let (nz, cx) = c.shape();
        let (dz, dw) = d.shape();
        if bx != nx {
            return dim_err(format!("B has {bx} rows, expected n_x = {nx}"));
        }
        if cx != nx {
            return dim_err(format!("C has {cx} columns, expected n_x = {nx}"));
        }
        if (dz, dw) != (nz, nw) {
            return dim_err(format!("D is {dz}x{dw}, expected {nz}x{nw}"));
        }
        let np = a.n_p();
        if [b.n_p(), c.n_p(), d.n_p()].iter().any(|&k| k != np) {
            return dim_err("A, B, C, D must share the number of scheduling parameters");
        }
        Ok(Self { domain, a, b, c, d })
    }

    /// System without exogenous input or performance output.
    pub fn autonomous(domain: TimeDomain, a: AffineMatrixFamily) -> Result<Self> {
        let (nx, _) = a.shape();
        let np = a.n_p();
        Self::new(
            domain,
            a,
            AffineMatrixFamily::zeros(nx, 0, np),
            AffineMatrixFamily::zeros(0, nx, np),
            AffineMatrixFamily::zeros(0, 0, np),
        )
    }

    pub fn n_x(&self) -> usize {
        self.a.shape().0
    }

    pub fn n_w(&self) -> usize {
        self.b.shape().1
    }

    pub fn n_z(&self) -> usize {
        self.c.shape().0
    }

    pub fn n_p(&self) -> usize {
        self.a.n_p()
    }

    /// Frozen matrices `(A, B, C, D)` at parameter `p`.
    pub fn frozen(&self, p: &[f64]) -> Result<Frozen> {
        Ok(Frozen {
            a: self.a.eval(p)?,
            b: self.b.eval(p)?,
            c: self.c.eval(p)?,
            d: self.d.eval(p)?,
        })
    }

    pub(crate) fn check_box(&self, bx: &ParamBox, what: &str) -> Result<()> {
        if bx.dim() != self.n_p() {
            return dim_err(format!(
                "{what} box has dimension {}, system has n_p = {}",
                bx.dim(),
                self.n_p()
            ));
        }
        Ok(())
    }

    /// Forward-Euler discretization: `A' = I + T_s A`, `B' = T_s B`, `C' = C`, `D' = D`.
    pub fn discretize_first_order(&self, ts: f64) -> Result<LpvSystem> {
        if self.domain != TimeDomain::Continuous {
            return Err(LpvError::Domain("only continuous-time systems can be discretized".into()));
        }
        if !(ts > 0.0) || !ts.is_finite() {
            return input_err(format!("sampling time must be positive, got {ts}"));
        }
        let nx = self.n_x();
        let a = self.a.map(|i, m| {
            if i == 0 {
                DMatrix::identity(nx, nx) + m * ts
            } else {
                m * ts
            }
        });
        let b = self.b.map(|_, m| m * ts);
        LpvSystem::new(TimeDomain::Discrete, a, b, self.c.clone(), self.d.clone())
    }
}

/// System matrices frozen at one parameter value.
#[derive(Debug, Clone)]
pub struct Frozen {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}
