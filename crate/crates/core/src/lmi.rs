//! Affine matrix-inequality problems over symmetric-matrix and scalar variables.
//!
//! A constraint expression is kept in structured form,
//!
//! ```text
//! E(X) = C + sum_t w_t * sym(L_t^T X_{v_t} R_t) + sum_s x_s * S_s,    sym(M) = (M + M^T) / 2,
//! ```
//!
//! so that two assemblies of the same matrix inequality can be compared term by term, and
//! so that the dense coefficient of every scalar decision coordinate can be materialized
//! for the solver.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{dim_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Symmetric `n x n` matrix.
    Symmetric(usize),
    Scalar { nonnegative: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

impl Variable {
    /// Number of free scalar coordinates.
    pub fn n_coords(&self) -> usize {
        match self.kind {
            VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::Scalar { .. } => 1,
        }
    }
}

/// Value taken by one decision variable.
#[derive(Debug, Clone, PartialEq)]
pub enum VarValue {
    Matrix(DMatrix<f64>),
    Scalar(f64),
}

impl VarValue {
    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            VarValue::Matrix(m) => Some(m),
            VarValue::Scalar(_) => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            VarValue::Scalar(s) => Some(*s),
            VarValue::Matrix(_) => None,
        }
    }
}

/// `weight * sym(left^T X right)` with `X` an `m x m` symmetric variable and
/// `left`, `right` both `m x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichTerm {
    pub var: VarId,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub weight: f64,
}

/// `x * coeff` with `x` a scalar variable and `coeff` symmetric `N x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTerm {
    pub var: VarId,
    pub coeff: DMatrix<f64>,
}

fn cmp_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Ordering {
    a.shape().cmp(&b.shape()).then_with(|| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Affine symmetric-matrix-valued expression of size `N x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSymExpr {
    size: usize,
    constant: DMatrix<f64>,
    sandwiches: Vec<SandwichTerm>,
    scalars: Vec<ScalarTerm>,
}

impl AffineSymExpr {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            constant: DMatrix::zeros(size, size),
            sandwiches: Vec::new(),
            scalars: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn constant(&self) -> &DMatrix<f64> {
        &self.constant
    }

    pub fn sandwiches(&self) -> &[SandwichTerm] {
        &self.sandwiches
    }

    pub fn scalars(&self) -> &[ScalarTerm] {
        &self.scalars
    }

    /// Adds the symmetric part of `c`.
    pub fn add_constant(&mut self, c: &DMatrix<f64>) {
        assert_eq!(c.shape(), (self.size, self.size), "constant has wrong shape");
        self.constant += (c + c.transpose()) * 0.5;
    }

    /// Adds `weight * sym(left^T X right)`, merging with an existing term on the same
    /// variable and the same (unordered) pair of outer factors.
    pub fn add_sandwich(&mut self, var: VarId, left: &DMatrix<f64>, right: &DMatrix<f64>, weight: f64) {
        assert_eq!(left.shape(), right.shape(), "sandwich factors differ in shape");
        assert_eq!(left.ncols(), self.size, "sandwich factor has wrong width");
        let is_zero = |m: &DMatrix<f64>| m.iter().all(|&x| x == 0.0);
        if weight == 0.0 || is_zero(left) || is_zero(right) {
            return;
        }
        // sym(L^T X R) == sym(R^T X L): store the lexicographically smaller factor first
        let (l, r) = if cmp_matrix(left, right) == Ordering::Greater {
            (right, left)
        } else {
            (left, right)
        };
        if let Some(t) = self
            .sandwiches
            .iter_mut()
            .find(|t| t.var == var && &t.left == l && &t.right == r)
        {
            t.weight += weight;
        } else {
            self.sandwiches.push(SandwichTerm {
                var,
                left: l.clone(),
                right: r.clone(),
                weight,
            });
        }
        self.sandwiches.retain(|t| t.weight != 0.0);
    }

    /// Adds `x * sym(coeff)`.
    pub fn add_scalar(&mut self, var: VarId, coeff: &DMatrix<f64>) {
        assert_eq!(coeff.shape(), (self.size, self.size), "scalar coefficient has wrong shape");
        let c = (coeff + coeff.transpose()) * 0.5;
        if let Some(t) = self.scalars.iter_mut().find(|t| t.var == var) {
            t.coeff += c;
        } else {
            self.scalars.push(ScalarTerm { var, coeff: c });
        }
    }

    /// Sorts terms into a canonical order; two expressions built from the same terms in a
    /// different order compare equal afterwards.
    pub fn canonicalize(&mut self) {
        self.sandwiches.sort_by(|a, b| {
            a.var
                .cmp(&b.var)
                .then_with(|| cmp_matrix(&a.left, &b.left))
                .then_with(|| cmp_matrix(&a.right, &b.right))
        });
        self.scalars.sort_by_key(|t| t.var);
    }

    pub fn eval(&self, values: &[VarValue]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for t in &self.sandwiches {
            let x = values[t.var.0].as_matrix().expect("sandwich term on a matrix variable");
            let m = t.left.transpose() * x * &t.right;
            out += (&m + m.transpose()) * (0.5 * t.weight);
        }
        for t in &self.scalars {
            let s = values[t.var.0].as_scalar().expect("scalar term on a scalar variable");
            out += &t.coeff * s;
        }
        out
    }

    /// Dense `N x N` coefficient of every scalar coordinate touched by the expression.
    pub fn coordinate_coefficients(&self, layout: &CoordLayout) -> BTreeMap<usize, DMatrix<f64>> {
        let mut out: BTreeMap<usize, DMatrix<f64>> = BTreeMap::new();
        let n = self.size;
        for t in &self.sandwiches {
            let VarKind::Symmetric(m) = layout.kind(t.var) else {
                panic!("sandwich term on a scalar variable");
            };
            for b in 0..m {
                for a in 0..=b {
                    // coordinate x_ab multiplies E_ab = e_a e_b^T + e_b e_a^T (a != b) or e_a e_a^T
                    let la = t.left.row(a);
                    let rb = t.right.row(b);
                    let mut g = la.transpose() * rb;
                    if a != b {
                        g += t.left.row(b).transpose() * t.right.row(a);
                    }
                    let sym = (&g + g.transpose()) * (0.5 * t.weight);
                    if sym.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let k = layout.coord(t.var, a, b);
                    *out.entry(k).or_insert_with(|| DMatrix::zeros(n, n)) += sym;
                }
            }
        }
        for t in &self.scalars {
            let k = layout.offset(t.var);
            *out.entry(k).or_insert_with(|| DMatrix::zeros(n, n)) += &t.coeff;
        }
        out
    }
}

/// Affine matrix expression `sum_t w_t * left_t^T X right_t` required to vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineEqExpr {
    pub rows: usize,
    pub cols: usize,
    pub terms: Vec<SandwichTerm>,
}

impl AffineEqExpr {
    pub fn eval(&self, values: &[VarValue]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for t in &self.terms {
            let x = values[t.var.0].as_matrix().expect("matrix variable");
            out += t.left.transpose() * x * &t.right * t.weight;
        }
        out
    }

    /// One linear row (over all coordinates) per matrix entry, row-major.
    pub fn coordinate_rows(&self, layout: &CoordLayout) -> Vec<BTreeMap<usize, f64>> {
        let mut rows = vec![BTreeMap::new(); self.rows * self.cols];
        for t in &self.terms {
            let VarKind::Symmetric(m) = layout.kind(t.var) else {
                panic!("equality term on a scalar variable");
            };
            for b in 0..m {
                for a in 0..=b {
                    let mut g = t.left.row(a).transpose() * t.right.row(b);
                    if a != b {
                        g += t.left.row(b).transpose() * t.right.row(a);
                    }
                    let k = layout.coord(t.var, a, b);
                    for i in 0..self.rows {
                        for j in 0..self.cols {
                            let v = g[(i, j)] * t.weight;
                            if v != 0.0 {
                                *rows[i * self.cols + j].entry(k).or_insert(0.0) += v;
                            }
                        }
                    }
                }
            }
        }
        rows
    }
}

/// What role a constraint plays in the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintRole {
    /// Lyapunov decrease at a vertex pair.
    Decrease,
    /// Curvature condition along one scheduling axis that moves the maximum to a vertex.
    PartialConvexity,
    /// `K(u) >= I` (or a strict-margin positivity bound) at a vertex.
    Normalization,
    /// Bounded-real block combining decrease, input coupling and output.
    Gain,
    /// `K_i B_i = 0`.
    InputDecoupling,
    /// `gamma >= 0` and similar sign bounds.
    Sign,
}

/// Which certificate rule produced a constraint, and at which vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintTag {
    pub role: ConstraintRole,
    pub rule: &'static str,
    pub u: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub axis: Option<usize>,
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{:?}", self.rule, self.role)?;
        if let Some(u) = &self.u {
            write!(f, " u={u:?}")?;
        }
        if let Some(v) = &self.v {
            write!(f, " v={v:?}")?;
        }
        if let Some(i) = self.axis {
            write!(f, " i={}", i + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdConstraint {
    pub expr: AffineSymExpr,
    pub tag: ConstraintTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqConstraint {
    pub expr: AffineEqExpr,
    pub tag: ConstraintTag,
}

/// Linear objective over scalar variables, minimized.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub terms: Vec<(VarId, f64)>,
}

/// Finite system of affine PSD and equality constraints, optionally with a linear objective.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    pub variables: Vec<Variable>,
    pub psd: Vec<PsdConstraint>,
    pub eqs: Vec<EqConstraint>,
    pub objective: Option<Objective>,
}

impl SdpProblem {
    pub fn add_symmetric(&mut self, name: impl Into<String>, n: usize) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Symmetric(n),
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, nonnegative: bool) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            kind: VarKind::Scalar { nonnegative },
        });
        VarId(self.variables.len() - 1)
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn push_psd(&mut self, mut expr: AffineSymExpr, tag: ConstraintTag) {
        expr.canonicalize();
        self.psd.push(PsdConstraint { expr, tag });
    }

    pub fn push_eq(&mut self, expr: AffineEqExpr, tag: ConstraintTag) {
        self.eqs.push(EqConstraint { expr, tag });
    }

    pub fn layout(&self) -> CoordLayout {
        CoordLayout::new(&self.variables)
    }

    /// Checks that every term refers to a declared variable of the right kind and size.
    pub fn validate(&self) -> Result<()> {
        let check_sandwich = |t: &SandwichTerm, ctx: &str| -> Result<()> {
            match self.variables.get(t.var.0).map(|v| v.kind) {
                Some(VarKind::Symmetric(m)) if t.left.nrows() == m => Ok(()),
                Some(VarKind::Symmetric(m)) => dim_err(format!(
                    "{ctx}: factor has {} rows, variable is {m}x{m}",
                    t.left.nrows()
                )),
                _ => dim_err(format!("{ctx}: term refers to a missing or scalar variable")),
            }
        };
        for c in &self.psd {
            let ctx = c.tag.to_string();
            for t in c.expr.sandwiches() {
                check_sandwich(t, &ctx)?;
            }
            for t in c.expr.scalars() {
                if !matches!(self.variables.get(t.var.0).map(|v| v.kind), Some(VarKind::Scalar { .. })) {
                    return dim_err(format!("{ctx}: scalar term on a non-scalar variable"));
                }
            }
        }
        for c in &self.eqs {
            let ctx = c.tag.to_string();
            for t in &c.expr.terms {
                check_sandwich(t, &ctx)?;
                if t.left.ncols() != c.expr.rows || t.right.ncols() != c.expr.cols {
                    return dim_err(format!("{ctx}: equality factor shape mismatch"));
                }
            }
        }
        if let Some(obj) = &self.objective {
            for (v, _) in &obj.terms {
                if !matches!(self.variables.get(v.0).map(|x| x.kind), Some(VarKind::Scalar { .. })) {
                    return dim_err("objective must be linear in scalar variables");
                }
            }
        }
        Ok(())
    }

    /// Number of PSD blocks with a given role.
    pub fn count_role(&self, role: ConstraintRole) -> usize {
        self.psd.iter().filter(|c| c.tag.role == role).count()
    }
}

/// Maps variables to contiguous scalar coordinates. Symmetric variables use their upper
/// triangle in column-major order, `x_ab` for `a <= b`, with `X = sum x_ab E_ab`.
#[derive(Debug, Clone)]
pub struct CoordLayout {
    offsets: Vec<usize>,
    kinds: Vec<VarKind>,
    total: usize,
}

impl CoordLayout {
    pub fn new(vars: &[Variable]) -> Self {
        let mut offsets = Vec::with_capacity(vars.len());
        let mut total = 0;
        for v in vars {
            offsets.push(total);
            total += v.n_coords();
        }
        Self {
            offsets,
            kinds: vars.iter().map(|v| v.kind).collect(),
            total,
        }
    }

    pub fn n_coords(&self) -> usize {
        self.total
    }

    pub fn offset(&self, v: VarId) -> usize {
        self.offsets[v.0]
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.kinds[v.0]
    }

    /// Coordinate of entry `(a, b)`, `a <= b`, of a symmetric variable.
    pub fn coord(&self, v: VarId, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.offsets[v.0] + b * (b + 1) / 2 + a
    }

    /// Rebuilds variable values from a coordinate vector.
    pub fn unpack(&self, x: &[f64]) -> Vec<VarValue> {
        self.kinds
            .iter()
            .enumerate()
            .map(|(i, kind)| match *kind {
                VarKind::Symmetric(m) => {
                    let mut mat = DMatrix::zeros(m, m);
                    for b in 0..m {
                        for a in 0..=b {
                            let val = x[self.coord(VarId(i), a, b)];
                            mat[(a, b)] = val;
                            mat[(b, a)] = val;
                        }
                    }
                    VarValue::Matrix(mat)
                }
                VarKind::Scalar { .. } => VarValue::Scalar(x[self.offsets[i]]),
            })
            .collect()
    }
}
