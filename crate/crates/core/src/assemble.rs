//! Finite LMI systems certifying affine quadratic stability and L2-gain bounds.
//!
//! All conditions are imposed at box vertices. Once a vertex `u` is fixed, `A(u)`, `B(u)`,
//! `C(u)`, `D(u)` are constant matrices, so every block is affine in `K_0..K_{n_p}` (and in
//! `gamma`). Cubic dependence of the discrete-time decrease condition on `p` is handled by
//! the partial-convexity blocks, which force the maximum over the box onto its vertices.

use nalgebra::DMatrix;

use crate::error::{input_err, LpvError, Result};
use crate::linalg;
use crate::lmi::{
    AffineEqExpr, AffineSymExpr, ConstraintRole, ConstraintTag, Objective, SandwichTerm, SdpProblem,
    VarId,
};
use crate::system::{LpvSystem, ParamBox, TimeDomain};

/// Guaranteed decay rate attached to a stability certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayRate {
    /// `V(t+1) <= (1 - eps) V(t)`, `0 <= eps < 1`.
    EpsilonDt(f64),
    /// `dV/dt <= -2 alpha V`, `alpha >= 0`.
    AlphaCt(f64),
    /// `V(t+1) <= alpha^2 V(t)`, `0 < alpha <= 1`.
    AlphaDt(f64),
}

impl DecayRate {
    pub fn epsilon_dt(eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return input_err(format!("epsilon must lie in [0, 1), got {eps}"));
        }
        Ok(Self::EpsilonDt(eps))
    }

    pub fn alpha_ct(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return input_err(format!("continuous-time alpha must be >= 0, got {alpha}"));
        }
        Ok(Self::AlphaCt(alpha))
    }

    pub fn alpha_dt(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return input_err(format!("discrete-time alpha must lie in (0, 1], got {alpha}"));
        }
        Ok(Self::AlphaDt(alpha))
    }

    /// Zero decay in the given domain.
    pub fn marginal(domain: TimeDomain) -> Self {
        match domain {
            TimeDomain::Continuous => Self::AlphaCt(0.0),
            TimeDomain::Discrete => Self::EpsilonDt(0.0),
        }
    }

    pub fn domain(&self) -> TimeDomain {
        match self {
            Self::AlphaCt(_) => TimeDomain::Continuous,
            Self::EpsilonDt(_) | Self::AlphaDt(_) => TimeDomain::Discrete,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Self::EpsilonDt(x) | Self::AlphaCt(x) | Self::AlphaDt(x) => x,
        }
    }

    /// Same kind, different value.
    pub fn with_value(&self, value: f64) -> Result<Self> {
        match self {
            Self::EpsilonDt(_) => Self::epsilon_dt(value),
            Self::AlphaCt(_) => Self::alpha_ct(value),
            Self::AlphaDt(_) => Self::alpha_dt(value),
        }
    }

    /// Per-step factor on `V` in discrete time: `1 - eps` or `alpha^2`.
    pub fn contraction(&self) -> Option<f64> {
        match *self {
            Self::EpsilonDt(e) => Some(1.0 - e),
            Self::AlphaDt(a) => Some(a * a),
            Self::AlphaCt(_) => None,
        }
    }

    /// Weighting matrix `M(alpha)` of the quadratic form `[I; A]^T (M (x) K) [I; A]`.
    pub fn weighting(&self) -> [[f64; 2]; 2] {
        match *self {
            Self::AlphaCt(a) => [[2.0 * a, 1.0], [1.0, 0.0]],
            Self::EpsilonDt(_) | Self::AlphaDt(_) => {
                [[-self.contraction().expect("discrete rate"), 0.0], [0.0, 1.0]]
            }
        }
    }

    pub fn is_marginal(&self) -> bool {
        match *self {
            Self::EpsilonDt(x) | Self::AlphaCt(x) => x == 0.0,
            Self::AlphaDt(a) => a == 1.0,
        }
    }
}

impl std::fmt::Display for DecayRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::EpsilonDt(e) => write!(f, "eps={e}"),
            Self::AlphaCt(a) => write!(f, "alpha={a} (ct)"),
            Self::AlphaDt(a) => write!(f, "alpha={a} (dt)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOptions {
    /// Lower bound imposed on `K(u)` at every vertex of `P`.
    pub normalization: f64,
    /// Margin used to turn strict inequalities into `<= -margin * I`. `None` selects
    /// `1e-7 * (1 + max_u ||A(u)||_2)`.
    pub strict_margin: Option<f64>,
    /// Force `K_i = 0` for `i >= 1` (parameter-independent Lyapunov matrix).
    pub common_lyapunov: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            normalization: 1.0,
            strict_margin: None,
            common_lyapunov: false,
        }
    }
}

/// Gain level in the bounded-real block: fixed, or a decision variable to minimize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Fixed(f64),
    Minimize,
}

pub const RULE_RATE_BOUNDED: &str = "rate-bounded-dt";
pub const RULE_VERTEX_PAIR: &str = "vertex-pair-dt";
pub const RULE_GENERAL_CT: &str = "general-ct";
pub const RULE_GENERAL_DT: &str = "general-dt";
pub const RULE_L2: &str = "l2-gain";

/// Name of the `i`-th Lyapunov coefficient variable.
pub fn k_name(i: usize) -> String {
    format!("K{i}")
}

pub const GAMMA: &str = "gamma";

/// Declared Lyapunov coefficient variables; `None` marks a coefficient fixed at zero.
#[derive(Debug, Clone)]
struct KVars {
    ids: Vec<Option<VarId>>,
}

impl KVars {
    fn declare(prob: &mut SdpProblem, nx: usize, np: usize, keep: impl Fn(usize) -> bool) -> Self {
        let ids = (0..=np)
            .map(|i| (i == 0 || keep(i)).then(|| prob.add_symmetric(k_name(i), nx)))
            .collect();
        Self { ids }
    }

    /// Adds `sum_i w_i sym(L^T K_i R)`.
    fn add(&self, e: &mut AffineSymExpr, weights: &[f64], left: &DMatrix<f64>, right: &DMatrix<f64>, scale: f64) {
        for (id, w) in self.ids.iter().zip(weights) {
            if let Some(id) = id {
                e.add_sandwich(*id, left, right, scale * w);
            }
        }
    }
}

/// Weights `(1, u_1, ..., u_n)` of `K(u)`.
fn k_at(u: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(u.iter().copied()).collect()
}

fn tag(role: ConstraintRole, rule: &'static str, u: Option<&[f64]>, v: Option<&[f64]>, axis: Option<usize>) -> ConstraintTag {
    ConstraintTag {
        role,
        rule,
        u: u.map(<[f64]>::to_vec),
        v: v.map(<[f64]>::to_vec),
        axis,
    }
}

fn negate(e: &AffineSymExpr) -> AffineSymExpr {
    let mut out = AffineSymExpr::zeros(e.size());
    out.add_constant(&-e.constant());
    for t in e.sandwiches() {
        out.add_sandwich(t.var, &t.left, &t.right, -t.weight);
    }
    for t in e.scalars() {
        out.add_scalar(t.var, &-&t.coeff);
    }
    out
}

fn require_domain(sys: &LpvSystem, domain: TimeDomain, what: &str) -> Result<()> {
    if sys.domain != domain {
        return Err(LpvError::Domain(format!(
            "{what} needs a {domain} system, got {}",
            sys.domain
        )));
    }
    Ok(())
}

fn require_rate(sys: &LpvSystem, rate: &DecayRate) -> Result<()> {
    if rate.domain() != sys.domain {
        return input_err(format!(
            "decay rate {rate} does not match the {} system",
            sys.domain
        ));
    }
    Ok(())
}

fn check_boxes(sys: &LpvSystem, p: &ParamBox, v: Option<&ParamBox>) -> Result<()> {
    sys.check_box(p, "parameter")?;
    if let Some(v) = v {
        sys.check_box(v, "rate")?;
    }
    Ok(())
}

/// `1e-7 * (1 + max_u ||A(u)||_2)` over the vertices of `P`.
pub fn default_strict_margin(sys: &LpvSystem, p: &ParamBox) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in p.vertices() {
        worst = worst.max(linalg::spectral_norm(&sys.a.eval(&u)?));
    }
    Ok(1e-7 * (1.0 + worst))
}

fn push_normalization(prob: &mut SdpProblem, k: &KVars, nx: usize, u: &[f64], level: f64, rule: &'static str) {
    let mut e = AffineSymExpr::zeros(nx);
    let eye = DMatrix::identity(nx, nx);
    k.add(&mut e, &k_at(u), &eye, &eye, 1.0);
    e.add_constant(&(-level * &eye));
    prob.push_psd(e, tag(ConstraintRole::Normalization, rule, Some(u), None, None));
}

/// Partial-convexity block `m22 (A(u)^T K_i A_i + A_i^T K_i A(u)) + m12 K_i A_i + m21 A_i^T K_i`.
fn convexity_block(k: &KVars, i: usize, a_u: &DMatrix<f64>, a_i: &DMatrix<f64>, m: [[f64; 2]; 2]) -> AffineSymExpr {
    let nx = a_u.nrows();
    let eye = DMatrix::identity(nx, nx);
    let mut e = AffineSymExpr::zeros(nx);
    if let Some(id) = k.ids[i] {
        e.add_sandwich(id, a_u, a_i, 2.0 * m[1][1]);
        e.add_sandwich(id, &eye, a_i, m[0][1] + m[1][0]);
    }
    e
}

/// `[I; A(u)]^T (M (x) K(u)) [I; A(u)] + Q(u, v)`, the decrease expression, embedded through
/// `embed` (`n_x x N`) so the same routine serves the bounded-real block.
fn general_decrease(
    k: &KVars,
    domain: TimeDomain,
    m: [[f64; 2]; 2],
    a_u: &DMatrix<f64>,
    u: &[f64],
    v: &[f64],
    embed: &DMatrix<f64>,
) -> AffineSymExpr {
    let nx = a_u.nrows();
    let eye = embed.clone();
    let a_emb = a_u * embed;
    let mut e = AffineSymExpr::zeros(embed.ncols());
    let ku = k_at(u);
    k.add(&mut e, &ku, &eye, &eye, m[0][0]);
    k.add(&mut e, &ku, &eye, &a_emb, m[0][1] + m[1][0]);
    k.add(&mut e, &ku, &a_emb, &a_emb, m[1][1]);
    // Q(u, v) uses K(v) - K_0 = sum_i K_i v_i
    let mut kv = vec![0.0; u.len() + 1];
    kv[1..].copy_from_slice(v);
    match domain {
        TimeDomain::Continuous => k.add(&mut e, &kv, &eye, &eye, 1.0),
        TimeDomain::Discrete => k.add(&mut e, &kv, &a_emb, &a_emb, 1.0),
    }
    debug_assert_eq!(eye.nrows(), nx);
    e
}

/// Rate-bounded discrete-time test with decay `eps`: at every `(u, v)` in
/// `vert(P) x vert(V)`,
/// `A(u)^T [K(u) + K(v) - K_0] A(u) - (1 - eps) K(u) <= 0`, plus partial convexity
/// `A(u)^T K_i A_i + A_i^T K_i A(u) >= 0` at every `(i, u)` and `K(u) >= I`.
pub fn assemble_aqs_dt(sys: &LpvSystem, p: &ParamBox, v: &ParamBox, eps: f64, opts: &AssemblyOptions) -> Result<SdpProblem> {
    require_domain(sys, TimeDomain::Discrete, "the rate-bounded test")?;
    check_boxes(sys, p, Some(v))?;
    let rate = DecayRate::epsilon_dt(eps)?;
    let (nx, np) = (sys.n_x(), sys.n_p());
    let mut prob = SdpProblem::default();
    let k = KVars::declare(&mut prob, nx, np, |_| !opts.common_lyapunov);
    let eye = DMatrix::identity(nx, nx);
    let contraction = rate.contraction().expect("discrete");
    let pv = p.vertices();
    let vv = v.vertices();
    for u in &pv {
        let a_u = sys.a.eval(u)?;
        for r in &vv {
            // K(u) + K(v) - K_0
            let mut w = vec![1.0 + 1.0 - 1.0];
            w.extend(u.iter().zip(r).map(|(a, b)| a + b));
            let mut l = AffineSymExpr::zeros(nx);
            k.add(&mut l, &w, &a_u, &a_u, 1.0);
            k.add(&mut l, &k_at(u), &eye, &eye, -contraction);
            prob.push_psd(negate(&l), tag(ConstraintRole::Decrease, RULE_RATE_BOUNDED, Some(u), Some(r), None));
        }
    }
    for u in &pv {
        let a_u = sys.a.eval(u)?;
        for i in 1..=np {
            if k.ids[i].is_none() {
                continue;
            }
            let n = convexity_block(&k, i, &a_u, sys.a.coeff(i), [[0.0, 0.0], [0.0, 1.0]]);
            prob.push_psd(n, tag(ConstraintRole::PartialConvexity, RULE_RATE_BOUNDED, Some(u), None, Some(i - 1)));
        }
    }
    for u in &pv {
        push_normalization(&mut prob, &k, nx, u, opts.normalization, RULE_RATE_BOUNDED);
    }
    Ok(prob)
}

/// Rate-free discrete-time test: `A(u)^T K(l) A(u) - (1 - eps) K(u) <= -margin I` for all
/// `(u, l)` in `vert(P) x vert(P)` and `K(u) >= I`.
pub fn assemble_aqs_dt_simple(sys: &LpvSystem, p: &ParamBox, eps: f64, opts: &AssemblyOptions) -> Result<SdpProblem> {
    require_domain(sys, TimeDomain::Discrete, "the vertex-pair test")?;
    check_boxes(sys, p, None)?;
    let rate = DecayRate::epsilon_dt(eps)?;
    let (nx, np) = (sys.n_x(), sys.n_p());
    let margin = match opts.strict_margin {
        Some(m) => m,
        None => default_strict_margin(sys, p)?,
    };
    let mut prob = SdpProblem::default();
    let k = KVars::declare(&mut prob, nx, np, |_| !opts.common_lyapunov);
    let eye = DMatrix::identity(nx, nx);
    let contraction = rate.contraction().expect("discrete");
    let pv = p.vertices();
    for u in &pv {
        let a_u = sys.a.eval(u)?;
        for l in &pv {
            let mut e = AffineSymExpr::zeros(nx);
            k.add(&mut e, &k_at(l), &a_u, &a_u, 1.0);
            k.add(&mut e, &k_at(u), &eye, &eye, -contraction);
            let mut neg = negate(&e);
            neg.add_constant(&(-margin * &eye));
            prob.push_psd(neg, tag(ConstraintRole::Decrease, RULE_VERTEX_PAIR, Some(u), Some(l), None));
        }
    }
    for u in &pv {
        push_normalization(&mut prob, &k, nx, u, opts.normalization.max(margin), RULE_VERTEX_PAIR);
    }
    Ok(prob)
}

/// Unified continuous/discrete-time test with decay `alpha`:
/// `[I; A(u)]^T (M(alpha) (x) K(u)) [I; A(u)] + Q(u, v) <= 0` at every vertex pair, with
/// `M_c = [[2a, 1], [1, 0]]`, `Q_c = K(v) - K_0` or `M_d = [[-a^2, 0], [0, 1]]`,
/// `Q_d = A(u)^T [K(v) - K_0] A(u)`, plus partial convexity and `K(u) >= I`.
pub fn assemble_aqs_general(sys: &LpvSystem, p: &ParamBox, v: &ParamBox, rate: DecayRate, opts: &AssemblyOptions) -> Result<SdpProblem> {
    require_rate(sys, &rate)?;
    check_boxes(sys, p, Some(v))?;
    let (nx, np) = (sys.n_x(), sys.n_p());
    let rule = match sys.domain {
        TimeDomain::Continuous => RULE_GENERAL_CT,
        TimeDomain::Discrete => RULE_GENERAL_DT,
    };
    let m = rate.weighting();
    let mut prob = SdpProblem::default();
    let k = KVars::declare(&mut prob, nx, np, |_| !opts.common_lyapunov);
    let eye = DMatrix::identity(nx, nx);
    let pv = p.vertices();
    let vv = v.vertices();
    for u in &pv {
        let a_u = sys.a.eval(u)?;
        for r in &vv {
            let l = general_decrease(&k, sys.domain, m, &a_u, u, r, &eye);
            prob.push_psd(negate(&l), tag(ConstraintRole::Decrease, rule, Some(u), Some(r), None));
        }
    }
    for u in &pv {
        let a_u = sys.a.eval(u)?;
        for i in 1..=np {
            if k.ids[i].is_none() {
                continue;
            }
            let n = convexity_block(&k, i, &a_u, sys.a.coeff(i), m);
            prob.push_psd(n, tag(ConstraintRole::PartialConvexity, rule, Some(u), None, Some(i - 1)));
        }
    }
    for u in &pv {
        push_normalization(&mut prob, &k, nx, u, opts.normalization, rule);
    }
    Ok(prob)
}

/// Bounded-real test: at every vertex pair
/// ```text
/// [ L(u,v)        K(u) B(u)   C(u)^T ]
/// [ B(u)^T K(u)   -gamma I    D(u)^T ]  <= 0
/// [ C(u)          D(u)        -gamma I ]
/// ```
/// with `L` the decrease expression of [`assemble_aqs_general`], partial convexity at every
/// `(i, u)`, `K_i B_i = 0` for every `i`, and `K(u) >= I`. A slope `B_i` of full row rank
/// forces `K_i = 0`, so that coefficient is not declared at all; `B_i = 0` makes the
/// equality vacuous and it is dropped.
pub fn assemble_l2(
    sys: &LpvSystem,
    p: &ParamBox,
    v: &ParamBox,
    rate: DecayRate,
    gamma: GammaSpec,
    opts: &AssemblyOptions,
) -> Result<SdpProblem> {
    if sys.n_w() == 0 || sys.n_z() == 0 {
        return input_err(
            "the gain test needs at least one input and one performance output; use the stability tests instead",
        );
    }
    require_rate(sys, &rate)?;
    check_boxes(sys, p, Some(v))?;
    if let GammaSpec::Fixed(g) = gamma {
        if !(g >= 0.0) || !g.is_finite() {
            return input_err(format!("gamma must be finite and nonnegative, got {g}"));
        }
    }
    let (nx, nw, nz, np) = (sys.n_x(), sys.n_w(), sys.n_z(), sys.n_p());
    let n = nx + nw + nz;
    let m = rate.weighting();

    let mut eliminated = vec![false; np + 1];
    let mut decoupled = Vec::new();
    for i in 1..=np {
        let b_i = sys.b.coeff(i);
        if b_i.iter().all(|&x| x == 0.0) {
            continue;
        }
        if linalg::rank(b_i, 1e-12) == nx {
            eliminated[i] = true;
        } else {
            decoupled.push(i);
        }
    }

    let mut prob = SdpProblem::default();
    let k = KVars::declare(&mut prob, nx, np, |i| !opts.common_lyapunov && !eliminated[i]);
    let g_var = match gamma {
        GammaSpec::Minimize => Some(prob.add_scalar(GAMMA, true)),
        GammaSpec::Fixed(_) => None,
    };

    let eye_x = DMatrix::identity(nx, nx);
    let sel_x = linalg::embed(&eye_x, nx, n, 0, 0);
    let mut gamma_pattern = DMatrix::zeros(n, n);
    for j in nx..n {
        gamma_pattern[(j, j)] = 1.0;
    }

    let pv = p.vertices();
    let vv = v.vertices();
    for u in &pv {
        let f = sys.frozen(u)?;
        let b_emb = linalg::embed(&f.b, nx, n, 0, nx);
        let mut io = DMatrix::zeros(n, n);
        io.view_mut((nx + nw, 0), (nz, nx)).copy_from(&f.c);
        io.view_mut((0, nx + nw), (nx, nz)).copy_from(&f.c.transpose());
        io.view_mut((nx + nw, nx), (nz, nw)).copy_from(&f.d);
        io.view_mut((nx, nx + nw), (nw, nz)).copy_from(&f.d.transpose());
        for r in &vv {
            let mut blk = general_decrease(&k, sys.domain, m, &f.a, u, r, &sel_x);
            // K(u) B(u) in the (1,2) block and its transpose in (2,1)
            k.add(&mut blk, &k_at(u), &sel_x, &b_emb, 2.0);
            blk.add_constant(&io);
            match (gamma, g_var) {
                (GammaSpec::Fixed(g), _) => blk.add_constant(&(-g * &gamma_pattern)),
                (GammaSpec::Minimize, Some(id)) => blk.add_scalar(id, &-&gamma_pattern),
                _ => unreachable!(),
            }
            prob.push_psd(negate(&blk), tag(ConstraintRole::Gain, RULE_L2, Some(u), Some(r), None));
        }
    }
    for u in &pv {
        let a_u = sys.a.eval(u)?;
        for i in 1..=np {
            if k.ids[i].is_none() {
                continue;
            }
            let nb = convexity_block(&k, i, &a_u, sys.a.coeff(i), m);
            prob.push_psd(nb, tag(ConstraintRole::PartialConvexity, RULE_L2, Some(u), None, Some(i - 1)));
        }
    }
    for &i in &decoupled {
        if let Some(id) = k.ids[i] {
            let expr = AffineEqExpr {
                rows: nx,
                cols: nw,
                terms: vec![SandwichTerm {
                    var: id,
                    left: eye_x.clone(),
                    right: sys.b.coeff(i).clone(),
                    weight: 1.0,
                }],
            };
            prob.push_eq(expr, tag(ConstraintRole::InputDecoupling, RULE_L2, None, None, Some(i - 1)));
        }
    }
    for u in &pv {
        push_normalization(&mut prob, &k, nx, u, opts.normalization, RULE_L2);
    }
    if let Some(id) = g_var {
        prob.objective = Some(Objective { terms: vec![(id, 1.0)] });
    }
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark;
    use crate::lmi::VarValue;
    use crate::system::AffineMatrixFamily;

    fn scalar_sys(a0: f64, a1: f64) -> LpvSystem {
        let fam = AffineMatrixFamily::new(vec![DMatrix::from_element(1, 1, a0), DMatrix::from_element(1, 1, a1)]).unwrap();
        LpvSystem::autonomous(TimeDomain::Discrete, fam).unwrap()
    }

    #[test]
    fn scalar_decrease_matches_expansion() {
        let (a0, a1, eps) = (0.7, 0.2, 0.1);
        let sys = scalar_sys(a0, a1);
        let p = ParamBox::new(vec![-0.5], vec![1.0]).unwrap();
        let v = ParamBox::new(vec![-0.3], vec![0.2]).unwrap();
        let prob = assemble_aqs_dt(&sys, &p, &v, eps, &AssemblyOptions::default()).unwrap();
        let (k0, k1) = (2.3, -0.4);
        let vals = vec![VarValue::Matrix(DMatrix::from_element(1, 1, k0)), VarValue::Matrix(DMatrix::from_element(1, 1, k1))];
        for c in prob.psd.iter().filter(|c| c.tag.role == ConstraintRole::Decrease) {
            let (u, r) = (c.tag.u.as_ref().unwrap()[0], c.tag.v.as_ref().unwrap()[0]);
            let expect = (a0 + a1 * u).powi(2) * (k0 + k1 * u + k1 * r) - (1.0 - eps) * (k0 + k1 * u);
            let got = -c.expr.eval(&vals)[(0, 0)];
            assert!((got - expect).abs() < 1e-14, "{got} vs {expect}");
        }
    }

    #[test]
    fn constant_dynamics_give_zero_convexity_blocks() {
        let sys = scalar_sys(0.5, 0.0);
        let p = ParamBox::symmetric(&[1.0]).unwrap();
        let prob = assemble_aqs_dt(&sys, &p, &ParamBox::zero_point(1), 0.0, &AssemblyOptions::default()).unwrap();
        for c in prob.psd.iter().filter(|c| c.tag.role == ConstraintRole::PartialConvexity) {
            assert!(c.expr.sandwiches().is_empty());
            assert_eq!(c.expr.constant().amax(), 0.0);
        }
    }

    #[test]
    fn msd_block_counts() {
        let sys = benchmark::mass_spring_damper_dt();
        let p = benchmark::msd_parameter_box();
        let v = benchmark::msd_rate_box(0.01, 0.0);
        let prob = assemble_aqs_dt(&sys, &p, &v, 0.0, &AssemblyOptions::default()).unwrap();
        assert_eq!(prob.psd.len(), 20);
        let simple = assemble_aqs_dt_simple(&sys, &p, 0.0, &AssemblyOptions::default()).unwrap();
        assert_eq!(simple.count_role(ConstraintRole::Decrease), 16);
        assert_eq!(simple.count_role(ConstraintRole::Normalization), 4);
        let l2 = assemble_l2(&sys, &p.scaled(0.2).unwrap(), &v, DecayRate::EpsilonDt(0.0), GammaSpec::Minimize, &AssemblyOptions::default()).unwrap();
        assert_eq!(l2.count_role(ConstraintRole::Gain), 8);
        assert!(l2.psd.iter().filter(|c| c.tag.role == ConstraintRole::Gain).all(|c| c.expr.size() == 4));
        // B is parameter independent: every decoupling equality is vacuous
        assert!(l2.eqs.is_empty());
    }

    #[test]
    fn weighting_matrix_ct() {
        assert_eq!(DecayRate::AlphaCt(0.1).weighting(), [[0.2, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn full_row_rank_input_slope_eliminates_coefficient() {
        let a = AffineMatrixFamily::new(vec![DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 0.1)]).unwrap();
        let b = AffineMatrixFamily::new(vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.3)]).unwrap();
        let c = AffineMatrixFamily::constant(DMatrix::from_element(1, 1, 1.0), 1);
        let d = AffineMatrixFamily::zeros(1, 1, 1);
        let sys = LpvSystem::new(TimeDomain::Discrete, a, b, c, d).unwrap();
        let p = ParamBox::symmetric(&[1.0]).unwrap();
        let prob = assemble_l2(&sys, &p, &ParamBox::zero_point(1), DecayRate::EpsilonDt(0.0), GammaSpec::Minimize, &AssemblyOptions::default()).unwrap();
        assert!(prob.var_by_name("K1").is_none());
        assert!(prob.eqs.is_empty());
        assert_eq!(prob.count_role(ConstraintRole::PartialConvexity), 0);
    }

    #[test]
    fn rank_deficient_input_slope_adds_equality() {
        let nx = 2;
        let a = AffineMatrixFamily::new(vec![DMatrix::identity(nx, nx) * 0.5, DMatrix::identity(nx, nx) * 0.1]).unwrap();
        let b = AffineMatrixFamily::new(vec![DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), DMatrix::from_row_slice(2, 1, &[1.0, 0.0])]).unwrap();
        let c = AffineMatrixFamily::constant(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), 1);
        let d = AffineMatrixFamily::zeros(1, 1, 1);
        let sys = LpvSystem::new(TimeDomain::Discrete, a, b, c, d).unwrap();
        let p = ParamBox::symmetric(&[1.0]).unwrap();
        let prob = assemble_l2(&sys, &p, &ParamBox::zero_point(1), DecayRate::EpsilonDt(0.0), GammaSpec::Fixed(3.0), &AssemblyOptions::default()).unwrap();
        assert_eq!(prob.eqs.len(), 1);
        assert_eq!((prob.eqs[0].expr.rows, prob.eqs[0].expr.cols), (2, 1));
    }

    #[test]
    fn gain_test_rejects_missing_channels() {
        let sys = scalar_sys(0.5, 0.1);
        let p = ParamBox::symmetric(&[1.0]).unwrap();
        let r = assemble_l2(&sys, &p, &ParamBox::zero_point(1), DecayRate::EpsilonDt(0.0), GammaSpec::Minimize, &AssemblyOptions::default());
        assert!(matches!(r, Err(LpvError::InvalidInput(_))));
    }

    #[test]
    fn domain_errors() {
        let ct = benchmark::mass_spring_damper_ct(1.0, 1.0);
        let p = benchmark::msd_parameter_box();
        let v = benchmark::msd_rate_box(0.1, 0.0);
        assert!(matches!(assemble_aqs_dt(&ct, &p, &v, 0.0, &AssemblyOptions::default()), Err(LpvError::Domain(_))));
        assert!(matches!(
            assemble_aqs_general(&ct, &p, &v, DecayRate::EpsilonDt(0.0), &AssemblyOptions::default()),
            Err(LpvError::InvalidInput(_))
        ));
        assert!(DecayRate::epsilon_dt(1.0).is_err());
        assert!(DecayRate::alpha_dt(0.0).is_err());
    }
}
