//! Solving assembled LMI problems with a conic interior-point solver.
//!
//! Each PSD block `C + sum_j x_j F_j >= 0` becomes a slack `s = svec(C) - (-svec(F)) x`
//! in a PSD-triangle cone; `svec` stacks the upper triangle column by column with
//! off-diagonal entries scaled by `sqrt(2)`, so the trace inner product is preserved.
//! Equalities go to a zero cone after removing linearly dependent rows, and nonnegative
//! scalars to a nonnegative cone.
//!
//! Every `Feasible` answer is re-checked with dense eigenvalue computations: each block
//! must satisfy `lambda_min >= -10 feas_tol * scale` with
//! `scale = 1 + ||C|| + sum_j |x_j| ||F_j||`, and each equality must hold to `1e-9 * scale`.
//! A solution that misses either is reported as `Inaccurate`, never as `Feasible`.

use std::collections::BTreeMap;
use std::fmt;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, PSDTriangleConeT, SolverStatus,
    ZeroConeT,
};
use nalgebra::DMatrix;

use crate::linalg;
use crate::lmi::{SdpProblem, VarKind, VarValue};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Feasibility tolerance, relative to the scale of each constraint.
    pub feas_tol: f64,
    /// Relative duality-gap tolerance for objective problems.
    pub gap_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-6,
            max_iter: 200,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    /// The solver stopped without a trustworthy answer either way. An assignment is
    /// still attached, but it must not be used as a certificate.
    Inaccurate,
    SolverError(SolverFailure),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverFailure {
    Unbounded,
    Malformed(String),
    Backend(String),
}

impl fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unbounded => write!(f, "objective unbounded below"),
            Self::Malformed(m) => write!(f, "malformed problem: {m}"),
            Self::Backend(m) => write!(f, "backend error: {m}"),
        }
    }
}

impl fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Feasible => write!(f, "feasible"),
            Self::Infeasible => write!(f, "infeasible"),
            Self::Inaccurate => write!(f, "inaccurate"),
            Self::SolverError(e) => write!(f, "solver error ({e})"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverStats {
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time: f64,
    /// Raw status string reported by the backend.
    pub raw_status: String,
    /// Smallest `lambda_min(E_k(x)) / scale_k` over the PSD blocks, from the re-check.
    pub worst_psd_margin: Option<f64>,
    /// Largest equality residual relative to its scale, from the re-check.
    pub worst_eq_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpResult {
    pub status: SdpStatus,
    /// Present iff the status is `Feasible` or `Inaccurate`.
    pub assignment: Option<BTreeMap<String, VarValue>>,
    pub objective_value: Option<f64>,
    pub stats: SolverStats,
}

impl SdpResult {
    fn failure(f: SolverFailure) -> Self {
        Self {
            status: SdpStatus::SolverError(f),
            assignment: None,
            objective_value: None,
            stats: SolverStats::default(),
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Feasible
    }

    pub fn matrix(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.assignment.as_ref()?.get(name)?.as_matrix()
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.assignment.as_ref()?.get(name)?.as_scalar()
    }
}

/// A conic solver able to handle PSD constraints.
pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    /// Solves the problem; minimizes the objective if there is one.
    fn solve(&self, problem: &SdpProblem, opts: &SolverOptions) -> SdpResult;
}

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend;

/// Upper triangle, column-major, off-diagonals times `sqrt(2)`.
fn svec_entries(m: &DMatrix<f64>) -> impl Iterator<Item = (usize, f64)> + '_ {
    let n = m.nrows();
    (0..n)
        .flat_map(move |j| (0..=j).map(move |i| (i, j)))
        .enumerate()
        .map(move |(k, (i, j))| {
            let v = if i == j { m[(i, j)] } else { m[(i, j)] * std::f64::consts::SQRT_2 };
            (k, v)
        })
}

/// Orthonormal basis of the row space of `rows` (dense, `m x n`).
fn row_space_basis(rows: &DMatrix<f64>) -> DMatrix<f64> {
    if rows.nrows() == 0 {
        return rows.clone();
    }
    let svd = rows.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > 1e-12 * smax.max(1.0))
        .collect();
    DMatrix::from_fn(keep.len(), rows.ncols(), |r, c| v_t[(keep[r], c)])
}

struct Triplets {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
}

impl Triplets {
    fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.i.push(i);
            self.j.push(j);
            self.v.push(v);
        }
    }
}

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, problem: &SdpProblem, opts: &SolverOptions) -> SdpResult {
        if let Err(e) = problem.validate() {
            return SdpResult::failure(SolverFailure::Malformed(e.to_string()));
        }
        let layout = problem.layout();
        let n = layout.n_coords();
        if n == 0 {
            return SdpResult::failure(SolverFailure::Malformed("problem has no decision variables".into()));
        }

        let mut a = Triplets { i: vec![], j: vec![], v: vec![] };
        let mut b = Vec::new();
        let mut cones = Vec::new();

        // equalities: A_eq x = 0, reduced to an independent set of rows
        let eq_rows: Vec<BTreeMap<usize, f64>> =
            problem.eqs.iter().flat_map(|c| c.expr.coordinate_rows(&layout)).collect();
        if !eq_rows.is_empty() {
            let dense = DMatrix::from_fn(eq_rows.len(), n, |r, c| eq_rows[r].get(&c).copied().unwrap_or(0.0));
            let basis = row_space_basis(&dense);
            if basis.nrows() > 0 {
                for r in 0..basis.nrows() {
                    for c in 0..n {
                        a.push(b.len(), c, basis[(r, c)]);
                    }
                    b.push(0.0);
                }
                cones.push(ZeroConeT(basis.nrows()));
            }
        }

        // sign constraints on scalars: -x + s = 0, s >= 0
        let nonneg: Vec<usize> = problem
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v.kind, VarKind::Scalar { nonnegative: true }))
            .map(|(k, _)| layout.offset(crate::lmi::VarId(k)))
            .collect();
        if !nonneg.is_empty() {
            for &c in &nonneg {
                a.push(b.len(), c, -1.0);
                b.push(0.0);
            }
            cones.push(NonnegativeConeT(nonneg.len()));
        }

        let coeffs: Vec<BTreeMap<usize, DMatrix<f64>>> =
            problem.psd.iter().map(|c| c.expr.coordinate_coefficients(&layout)).collect();
        for (c, f) in problem.psd.iter().zip(&coeffs) {
            let size = c.expr.size();
            let row0 = b.len();
            b.extend(svec_entries(c.expr.constant()).map(|(_, v)| v));
            for (&coord, fm) in f {
                for (k, v) in svec_entries(fm) {
                    a.push(row0 + k, coord, -v);
                }
            }
            cones.push(PSDTriangleConeT(size));
        }

        let m = b.len();
        let a_mat = CscMatrix::new_from_triplets(m, n, a.i, a.j, a.v);
        let p_mat = CscMatrix::<f64>::zeros((n, n));
        let mut q = vec![0.0; n];
        if let Some(obj) = &problem.objective {
            for (v, w) in &obj.terms {
                q[layout.offset(*v)] += w;
            }
        }

        let settings = DefaultSettings {
            verbose: opts.verbose,
            max_iter: opts.max_iter,
            tol_feas: opts.feas_tol,
            tol_gap_rel: opts.gap_tol,
            tol_gap_abs: opts.gap_tol,
            max_threads: 1,
            ..DefaultSettings::default()
        };
        let mut solver = match DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return SdpResult::failure(SolverFailure::Backend(e.to_string())),
        };
        solver.solve();
        let sol = &solver.solution;

        let mut stats = SolverStats {
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            solve_time: sol.solve_time,
            raw_status: format!("{:?}", sol.status),
            ..SolverStats::default()
        };

        let status = match sol.status {
            SolverStatus::Solved => SdpStatus::Feasible,
            SolverStatus::PrimalInfeasible => SdpStatus::Infeasible,
            SolverStatus::DualInfeasible if problem.objective.is_some() => {
                SdpStatus::SolverError(SolverFailure::Unbounded)
            }
            SolverStatus::DualInfeasible => {
                SdpStatus::SolverError(SolverFailure::Backend("dual infeasible feasibility problem".into()))
            }
            SolverStatus::Unsolved => SdpStatus::SolverError(SolverFailure::Backend("solver did not run".into())),
            _ => SdpStatus::Inaccurate,
        };
        if !matches!(status, SdpStatus::Feasible | SdpStatus::Inaccurate) {
            return SdpResult { status, assignment: None, objective_value: None, stats };
        }

        let x = &sol.x;
        let values = layout.unpack(x);
        let (psd_margin, eq_resid) = recheck(problem, &values, &coeffs, x);
        stats.worst_psd_margin = Some(psd_margin);
        stats.worst_eq_residual = Some(eq_resid);
        let status = if status == SdpStatus::Feasible && (psd_margin < -10.0 * opts.feas_tol || eq_resid > 1e-9) {
            SdpStatus::Inaccurate
        } else {
            status
        };
        let objective_value = problem.objective.as_ref().map(|_| sol.obj_val);
        let assignment = problem
            .variables
            .iter()
            .zip(values)
            .map(|(var, val)| (var.name.clone(), val))
            .collect();
        SdpResult { status, assignment: Some(assignment), objective_value, stats }
    }
}

/// Independent re-check of an assignment: worst scaled `lambda_min` over the PSD blocks and
/// worst scaled equality residual.
fn recheck(
    problem: &SdpProblem,
    values: &[VarValue],
    coeffs: &[BTreeMap<usize, DMatrix<f64>>],
    x: &[f64],
) -> (f64, f64) {
    let mut worst_psd = f64::INFINITY;
    for (c, f) in problem.psd.iter().zip(coeffs) {
        let scale = 1.0
            + c.expr.constant().norm()
            + f.iter().map(|(&k, m)| x[k].abs() * m.norm()).sum::<f64>();
        let e = c.expr.eval(values);
        worst_psd = worst_psd.min(linalg::min_eig(&e) / scale);
    }
    let mut worst_eq: f64 = 0.0;
    for c in &problem.eqs {
        let scale = 1.0
            + c.expr
                .terms
                .iter()
                .map(|t| {
                    let xm = values[t.var.0].as_matrix().map_or(0.0, |m| m.norm());
                    t.weight.abs() * t.left.norm() * t.right.norm() * xm
                })
                .sum::<f64>();
        worst_eq = worst_eq.max(c.expr.eval(values).amax() / scale);
    }
    (worst_psd, worst_eq)
}

/// Feasibility test with the default backend.
pub fn solve_feasibility(problem: &SdpProblem, opts: &SolverOptions) -> SdpResult {
    solve_feasibility_with(&ClarabelBackend, problem, opts)
}

pub fn solve_feasibility_with(backend: &dyn SdpBackend, problem: &SdpProblem, opts: &SolverOptions) -> SdpResult {
    if problem.objective.is_some() {
        return SdpResult::failure(SolverFailure::Malformed(
            "feasibility problem must not carry an objective".into(),
        ));
    }
    backend.solve(problem, opts)
}

/// Objective minimization with the default backend.
pub fn minimize(problem: &SdpProblem, opts: &SolverOptions) -> SdpResult {
    minimize_with(&ClarabelBackend, problem, opts)
}

pub fn minimize_with(backend: &dyn SdpBackend, problem: &SdpProblem, opts: &SolverOptions) -> SdpResult {
    if problem.objective.is_none() {
        return SdpResult::failure(SolverFailure::Malformed("minimization needs an objective".into()));
    }
    backend.solve(problem, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{AffineSymExpr, ConstraintRole, ConstraintTag, Objective};

    fn tag() -> ConstraintTag {
        ConstraintTag { role: ConstraintRole::Sign, rule: "toy", u: None, v: None, axis: None }
    }

    fn one(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    fn interval(lo: f64, hi: f64) -> SdpProblem {
        let mut p = SdpProblem::default();
        let k = p.add_symmetric("k", 1);
        let mut e1 = AffineSymExpr::zeros(1);
        e1.add_sandwich(k, &one(1.0), &one(1.0), 1.0);
        e1.add_constant(&one(-lo));
        let mut e2 = AffineSymExpr::zeros(1);
        e2.add_sandwich(k, &one(1.0), &one(1.0), -1.0);
        e2.add_constant(&one(hi));
        p.push_psd(e1, tag());
        p.push_psd(e2, tag());
        p
    }

    #[test]
    fn toy_feasible() {
        let r = solve_feasibility(&interval(1.0, 3.0), &SolverOptions::default());
        assert_eq!(r.status, SdpStatus::Feasible);
        let k = r.matrix("k").unwrap()[(0, 0)];
        assert!((1.0 - 1e-7..=3.0 + 1e-7).contains(&k), "k = {k}");
    }

    #[test]
    fn toy_infeasible() {
        let r = solve_feasibility(&interval(1.0, -1.0), &SolverOptions::default());
        assert_eq!(r.status, SdpStatus::Infeasible);
        assert!(r.assignment.is_none());
    }

    #[test]
    fn toy_minimum() {
        let mut p = SdpProblem::default();
        let g = p.add_scalar("gamma", false);
        let mut e = AffineSymExpr::zeros(1);
        e.add_scalar(g, &one(1.0));
        e.add_constant(&one(-2.5));
        p.push_psd(e, tag());
        p.objective = Some(Objective { terms: vec![(g, 1.0)] });
        let r = minimize(&p, &SolverOptions::default());
        assert_eq!(r.status, SdpStatus::Feasible);
        assert!((r.objective_value.unwrap() - 2.5).abs() < 1e-6);
        assert!((r.scalar("gamma").unwrap() - 2.5).abs() < 1e-6);
    }

    #[test]
    fn unbounded_objective() {
        let mut p = SdpProblem::default();
        let g = p.add_scalar("gamma", false);
        let mut e = AffineSymExpr::zeros(1);
        e.add_scalar(g, &one(-1.0));
        e.add_constant(&one(4.0));
        p.push_psd(e, tag());
        p.objective = Some(Objective { terms: vec![(g, 1.0)] });
        let r = minimize(&p, &SolverOptions::default());
        assert_eq!(r.status, SdpStatus::SolverError(SolverFailure::Unbounded));
    }

    #[test]
    fn objective_contracts() {
        let p = interval(1.0, 3.0);
        assert!(matches!(minimize(&p, &SolverOptions::default()).status, SdpStatus::SolverError(_)));
        let mut q = interval(1.0, 3.0);
        let g = q.add_scalar("g", true);
        q.objective = Some(Objective { terms: vec![(g, 1.0)] });
        assert!(matches!(solve_feasibility(&q, &SolverOptions::default()).status, SdpStatus::SolverError(_)));
    }

    #[test]
    fn svec_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, -1.0, 0.5, 3.0, 0.5, 4.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.3, -1.0, 2.0, -1.0, 2.0, 1.5, 2.0, 1.5, -0.7]);
        let sa: Vec<f64> = svec_entries(&a).map(|(_, v)| v).collect();
        let sb: Vec<f64> = svec_entries(&b).map(|(_, v)| v).collect();
        let dot: f64 = sa.iter().zip(&sb).map(|(x, y)| x * y).sum();
        assert!((dot - a.dot(&b)).abs() < 1e-12);
    }

    #[test]
    fn dependent_equalities_are_reduced() {
        let rows = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]);
        assert_eq!(row_space_basis(&rows).nrows(), 1);
    }
}
