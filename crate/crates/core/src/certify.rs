//! Certification drivers: spectral preconditions, stability and gain certificates, and the
//! bisection searches over box scale and decay rate.

use std::fmt;

use nalgebra::{Complex, DMatrix};

use crate::assemble::{
    assemble_aqs_dt, assemble_aqs_dt_simple, assemble_aqs_general, assemble_l2, k_name, AssemblyOptions,
    DecayRate, GammaSpec, GAMMA,
};
use crate::error::{input_err, LpvError, Result};
use crate::linalg;
use crate::oracle::{self, Clock};
use crate::sdp::{self, SdpResult, SdpStatus, SolverOptions, SolverStats};
use crate::system::{LpvSystem, ParamBox, SymmetricAffineFamily, TimeDomain};

/// Which family of vertex conditions to use for a stability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Discrete time, rate-bounded parameters, decay `eps`.
    RateBounded,
    /// Discrete time, arbitrary parameter jumps inside `P` (the rate box is ignored).
    VertexPair,
    /// Continuous or discrete time with decay `alpha`.
    General,
}

impl Method {
    /// Short identifiers used on the command line.
    pub fn cli_name(&self) -> &'static str {
        match self {
            Method::RateBounded => "thm3",
            Method::VertexPair => "lemma2",
            Method::General => "general",
        }
    }
}

/// The condition a certificate was obtained from; fixes how it is re-checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertMethod {
    RateBoundedDt,
    VertexPairDt,
    GeneralCt,
    GeneralDt,
    L2Gain,
}

impl CertMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertMethod::RateBoundedDt => "rate-bounded-dt",
            CertMethod::VertexPairDt => "vertex-pair-dt",
            CertMethod::GeneralCt => "general-ct",
            CertMethod::GeneralDt => "general-dt",
            CertMethod::L2Gain => "l2-gain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::RateBoundedDt, Self::VertexPairDt, Self::GeneralCt, Self::GeneralDt, Self::L2Gain]
            .into_iter()
            .find(|m| m.as_str() == s)
    }
}

/// Parameter-dependent quadratic Lyapunov function `V(x, p) = x^T K(p) x` with its
/// decay rate and spectral bounds `a I <= K(p) <= b I` on `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub k: SymmetricAffineFamily,
    pub rate: DecayRate,
    pub a: f64,
    pub b: f64,
    pub method: CertMethod,
    pub gamma: Option<f64>,
    /// Scheduling box the certificate covers.
    pub p: ParamBox,
    /// Rate box the certificate covers; for vertex-pair certificates this is the
    /// difference box of `P`, i.e. any jump inside `P`.
    pub v: ParamBox,
}

impl LyapunovCertificate {
    /// Builds a certificate and recomputes `a`, `b` from `K` at the vertices of `P`.
    pub fn new(
        k: SymmetricAffineFamily,
        rate: DecayRate,
        method: CertMethod,
        gamma: Option<f64>,
        p: ParamBox,
        v: ParamBox,
    ) -> Result<Self> {
        if k.n_p() != p.dim() || v.dim() != p.dim() {
            return Err(LpvError::Dimension("certificate boxes do not match K".into()));
        }
        let (a, b) = spectral_bounds(&k, &p)?;
        Ok(Self { k, rate, a, b, method, gamma, p, v })
    }

    pub fn k_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.k.eval(p)
    }

    /// `V(x, p) = x^T K(p) x`.
    pub fn value(&self, x: &[f64], p: &[f64]) -> Result<f64> {
        let k = self.k.eval(p)?;
        if x.len() != k.nrows() {
            return Err(LpvError::Dimension(format!("state has length {}, K is {}x{}", x.len(), k.nrows(), k.nrows())));
        }
        let xv = nalgebra::DVector::from_column_slice(x);
        Ok((xv.transpose() * k * &xv)[(0, 0)])
    }

    pub fn condition_number(&self) -> f64 {
        self.b / self.a
    }

    /// Advertised bound on `||x(t)||^2 / ||x(0)||^2`:
    /// `(b/a)(1-eps)^t`, `(b/a) alpha^(2t)` or `(b/a) e^(-alpha t)`.
    pub fn state_bound(&self, t: f64) -> f64 {
        let decay = match self.rate {
            DecayRate::EpsilonDt(e) => (1.0 - e).powf(t),
            DecayRate::AlphaDt(a) => a.powf(2.0 * t),
            DecayRate::AlphaCt(a) => (-a * t).exp(),
        };
        self.condition_number() * decay
    }

    /// Factor by which `V` may shrink over an interval `dt`: `(1-eps)^dt`, `alpha^(2 dt)`,
    /// `e^(-2 alpha dt)`.
    pub fn lyapunov_decay(&self, dt: f64) -> f64 {
        match self.rate {
            DecayRate::EpsilonDt(e) => (1.0 - e).powf(dt),
            DecayRate::AlphaDt(a) => a.powf(2.0 * dt),
            DecayRate::AlphaCt(a) => (-2.0 * a * dt).exp(),
        }
    }

    pub fn domain(&self) -> TimeDomain {
        self.rate.domain()
    }
}

/// `(min_u lambda_min K(u), max_u lambda_max K(u))` over the vertices of `P`.
pub fn spectral_bounds(k: &SymmetricAffineFamily, p: &ParamBox) -> Result<(f64, f64)> {
    let mut a = f64::INFINITY;
    let mut b = f64::NEG_INFINITY;
    for u in p.vertices() {
        let ev = linalg::sym_eigenvalues(&k.eval(&u)?);
        a = a.min(ev[0]);
        b = b.max(*ev.last().expect("nonempty"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Certified,
    NotCertified,
    /// Numerical trouble: neither a certificate nor a refutation.
    Unknown,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Certified => "CERTIFIED",
            Outcome::NotCertified => "NOT CERTIFIED",
            Outcome::Unknown => "UNKNOWN",
        })
    }
}

/// Spectrum of `A` at the box center against the threshold implied by the decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionReport {
    pub holds: bool,
    pub center: Vec<f64>,
    pub spectrum: Vec<Complex<f64>>,
    /// Spectral radius (discrete time) or spectral abscissa (continuous time).
    pub measure: f64,
    /// The measure must be strictly below this value.
    pub threshold: f64,
    /// Largest decay parameter compatible with the spectrum (`1 - rho^2`, `rho`, or `-abscissa`).
    pub rate_ceiling: f64,
}

/// Eigenvalue test at the center of `P`: `rho < sqrt(1 - eps)`, `rho < alpha` (discrete
/// time) or `max Re(lambda) < -alpha` (continuous time).
pub fn check_eig_precondition(sys: &LpvSystem, p: &ParamBox, rate: DecayRate) -> Result<PreconditionReport> {
    if rate.domain() != sys.domain {
        return input_err(format!("decay rate {rate} does not match the {} system", sys.domain));
    }
    sys.check_box(p, "parameter")?;
    let center = p.center();
    let a = sys.a.eval(&center)?;
    let spectrum = linalg::eigenvalues(&a);
    let (measure, threshold, rate_ceiling) = match rate {
        DecayRate::EpsilonDt(e) => {
            let rho = linalg::spectral_radius(&a);
            (rho, (1.0 - e).sqrt(), 1.0 - rho * rho)
        }
        DecayRate::AlphaDt(al) => {
            let rho = linalg::spectral_radius(&a);
            (rho, al, rho)
        }
        DecayRate::AlphaCt(al) => {
            let abscissa = linalg::spectral_abscissa(&a);
            (abscissa, -al, -abscissa)
        }
    };
    Ok(PreconditionReport {
        holds: measure < threshold,
        center,
        spectrum,
        measure,
        threshold,
        rate_ceiling,
    })
}

/// Independent re-checks run on every certificate before it is returned.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub grid_density: usize,
    pub trials: usize,
    /// Steps per trajectory (discrete time) or integration steps (continuous time).
    pub horizon: usize,
    pub seed: u64,
    /// Continuous-time integration step.
    pub ct_step: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            grid_density: 21,
            trials: 10,
            horizon: 200,
            seed: 0,
            ct_step: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub assembly: AssemblyOptions,
    pub solver: SolverOptions,
    /// `None` skips the oracle re-check (only for callers that run it themselves).
    pub validation: Option<ValidationOptions>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            assembly: AssemblyOptions::default(),
            solver: SolverOptions::default(),
            validation: Some(ValidationOptions::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub grid_max_eig: f64,
    pub grid_tolerance: f64,
    pub grid_min_k_eig: f64,
    pub decay_passed: usize,
    pub decay_trials: usize,
}

impl ValidationSummary {
    pub fn passed(&self, a: f64) -> bool {
        self.grid_max_eig <= self.grid_tolerance
            && self.grid_min_k_eig >= a - 1e-8
            && self.decay_passed == self.decay_trials
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub precondition: Option<PreconditionReport>,
    pub solver_status: Option<SdpStatus>,
    pub solver_stats: Option<SolverStats>,
    pub validation: Option<ValidationSummary>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertVerdict {
    pub outcome: Outcome,
    /// Present iff `outcome == Certified`.
    pub certificate: Option<LyapunovCertificate>,
    pub diagnostics: Diagnostics,
}

impl CertVerdict {
    pub fn is_certified(&self) -> bool {
        self.outcome == Outcome::Certified
    }

    pub fn gamma(&self) -> Option<f64> {
        self.certificate.as_ref().and_then(|c| c.gamma)
    }

    fn rejected(outcome: Outcome, diagnostics: Diagnostics) -> Self {
        Self { outcome, certificate: None, diagnostics }
    }
}

fn cert_method(method: Method, domain: TimeDomain) -> CertMethod {
    match (method, domain) {
        (Method::RateBounded, _) => CertMethod::RateBoundedDt,
        (Method::VertexPair, _) => CertMethod::VertexPairDt,
        (Method::General, TimeDomain::Continuous) => CertMethod::GeneralCt,
        (Method::General, TimeDomain::Discrete) => CertMethod::GeneralDt,
    }
}

fn extract_k(res: &SdpResult, nx: usize, np: usize) -> Result<SymmetricAffineFamily> {
    let coeffs = (0..=np)
        .map(|i| res.matrix(&k_name(i)).cloned().unwrap_or_else(|| DMatrix::zeros(nx, nx)))
        .map(|m| linalg::symmetrize(&m))
        .collect();
    SymmetricAffineFamily::new(coeffs)
}

/// Turns a solver answer into a verdict, re-checking any certificate with the oracles.
fn finish(
    sys: &LpvSystem,
    res: SdpResult,
    mut diag: Diagnostics,
    build: impl FnOnce(SymmetricAffineFamily, Option<f64>) -> Result<LyapunovCertificate>,
    validation: Option<&ValidationOptions>,
) -> Result<CertVerdict> {
    diag.solver_status = Some(res.status.clone());
    diag.solver_stats = Some(res.stats.clone());
    match &res.status {
        SdpStatus::Infeasible => return Ok(CertVerdict::rejected(Outcome::NotCertified, diag)),
        SdpStatus::Inaccurate => {
            diag.note = Some("solver returned an inaccurate solution".into());
            return Ok(CertVerdict::rejected(Outcome::Unknown, diag));
        }
        SdpStatus::SolverError(e) => {
            diag.note = Some(e.to_string());
            return Ok(CertVerdict::rejected(Outcome::Unknown, diag));
        }
        SdpStatus::Feasible => {}
    }
    let k = extract_k(&res, sys.n_x(), sys.n_p())?;
    let cert = build(k, res.scalar(GAMMA))?;
    if !(cert.a > 0.0 && cert.a <= cert.b) {
        diag.note = Some(format!("recovered K is not positive definite on P (a = {:e})", cert.a));
        return Ok(CertVerdict::rejected(Outcome::Unknown, diag));
    }
    if let Some(vopts) = validation {
        let summary = validate_certificate(sys, &cert, vopts)?;
        let ok = summary.passed(cert.a);
        diag.validation = Some(summary);
        if !ok {
            diag.note = Some("certificate failed the independent grid/trajectory re-check".into());
            return Ok(CertVerdict::rejected(Outcome::Unknown, diag));
        }
    }
    Ok(CertVerdict { outcome: Outcome::Certified, certificate: Some(cert), diagnostics: diag })
}

/// Grid check of the semi-infinite condition plus decay checks on random schedules.
pub fn validate_certificate(sys: &LpvSystem, cert: &LyapunovCertificate, opts: &ValidationOptions) -> Result<ValidationSummary> {
    let grid = oracle::grid_max_eig(sys, cert, opts.grid_density)?;
    let clock = match sys.domain {
        TimeDomain::Discrete => Clock::Discrete,
        TimeDomain::Continuous => Clock::Continuous { h: opts.ct_step },
    };
    let mut passed = 0;
    for trial in 0..opts.trials {
        let seed = opts.seed.wrapping_add(trial as u64);
        let sched = oracle::random_schedule(&cert.p, &cert.v, opts.horizon, seed, clock)?;
        let x0 = oracle::random_unit_state(sys.n_x(), seed);
        let traj = oracle::simulate(sys, Some(cert), &x0, &sched, None)?;
        if oracle::check_decay(&traj, cert)?.passed {
            passed += 1;
        }
    }
    Ok(ValidationSummary {
        grid_max_eig: grid.max_eig,
        grid_tolerance: grid.tolerance,
        grid_min_k_eig: grid.min_k_eig,
        decay_passed: passed,
        decay_trials: opts.trials,
    })
}

/// Stability certificate by the chosen method. `v` is ignored by [`Method::VertexPair`].
pub fn certify_aqs(
    sys: &LpvSystem,
    p: &ParamBox,
    v: &ParamBox,
    rate: DecayRate,
    method: Method,
    opts: &CertifyOptions,
) -> Result<CertVerdict> {
    if rate.domain() != sys.domain {
        return input_err(format!("decay rate {rate} does not match the {} system", sys.domain));
    }
    let eps = match (method, rate) {
        (Method::General, _) => None,
        (_, DecayRate::EpsilonDt(e)) => Some(e),
        (_, DecayRate::AlphaDt(a)) => Some(1.0 - a * a),
        (m, DecayRate::AlphaCt(_)) => {
            return Err(LpvError::Domain(format!(
                "method {} applies to discrete-time systems only",
                m.cli_name()
            )))
        }
    };
    let pre = check_eig_precondition(sys, p, rate)?;
    let prob = match method {
        Method::RateBounded => assemble_aqs_dt(sys, p, v, eps.expect("dt"), &opts.assembly)?,
        Method::VertexPair => assemble_aqs_dt_simple(sys, p, eps.expect("dt"), &opts.assembly)?,
        Method::General => assemble_aqs_general(sys, p, v, rate, &opts.assembly)?,
    };
    let diag = Diagnostics { precondition: Some(pre.clone()), ..Diagnostics::default() };
    if !pre.holds {
        return Ok(CertVerdict::rejected(Outcome::NotCertified, Diagnostics {
            note: Some("eigenvalue precondition fails at the box center".into()),
            ..diag
        }));
    }
    let res = sdp::solve_feasibility(&prob, &opts.solver);
    let cm = cert_method(method, sys.domain);
    let v_cert = match method {
        Method::VertexPair => p.difference_box(),
        _ => v.clone(),
    };
    finish(
        sys,
        res,
        diag,
        |k, _| LyapunovCertificate::new(k, rate, cm, None, p.clone(), v_cert),
        opts.validation.as_ref(),
    )
}

/// Smallest certifiable gain bound `gamma` together with its storage function.
pub fn min_l2_gain(sys: &LpvSystem, p: &ParamBox, v: &ParamBox, rate: DecayRate, opts: &CertifyOptions) -> Result<CertVerdict> {
    let prob = assemble_l2(sys, p, v, rate, GammaSpec::Minimize, &opts.assembly)?;
    let pre = check_eig_precondition(sys, p, rate)?;
    let diag = Diagnostics { precondition: Some(pre.clone()), ..Diagnostics::default() };
    if !pre.holds {
        return Ok(CertVerdict::rejected(Outcome::NotCertified, Diagnostics {
            note: Some("eigenvalue precondition fails at the box center".into()),
            ..diag
        }));
    }
    let res = sdp::minimize(&prob, &opts.solver);
    finish(
        sys,
        res,
        diag,
        |k, gamma| {
            let g = gamma.ok_or_else(|| LpvError::Solver("solver returned no gamma".into()))?;
            LyapunovCertificate::new(k, rate, CertMethod::L2Gain, Some(g.max(0.0)), p.clone(), v.clone())
        },
        opts.validation.as_ref(),
    )
}

/// One probe of a bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub value: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Largest value certified (0 if none was).
    pub best: f64,
    /// Certificate at `best`, if any.
    pub certificate: Option<LyapunovCertificate>,
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    /// `true` if some probe returned `Unknown`.
    pub fn saw_unknown(&self) -> bool {
        self.trace.iter().any(|t| t.outcome == Outcome::Unknown)
    }
}

/// Bisection on `[lo, hi]` for the largest value at which `probe` certifies. Unknown
/// probes are treated as not certified but kept in the trace.
fn bisect(lo: f64, hi: f64, tol: f64, mut probe: impl FnMut(f64) -> Result<CertVerdict>) -> Result<SearchResult> {
    if !(tol > 0.0) {
        return input_err("bisection tolerance must be positive");
    }
    let mut trace = Vec::new();
    let mut certificate = None;
    let top = probe(hi)?;
    trace.push(TraceEntry { value: hi, outcome: top.outcome });
    if top.is_certified() {
        return Ok(SearchResult { best: hi, certificate: top.certificate, trace });
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut best = lo;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let v = probe(mid)?;
        trace.push(TraceEntry { value: mid, outcome: v.outcome });
        if v.is_certified() {
            lo = mid;
            best = mid;
            certificate = v.certificate;
        } else {
            hi = mid;
        }
    }
    Ok(SearchResult { best, certificate, trace })
}

/// Largest `lambda` in `[0, 1]` such that the stability test passes on `lambda * P`.
pub fn max_box_scale(
    sys: &LpvSystem,
    base_p: &ParamBox,
    v: &ParamBox,
    rate: DecayRate,
    method: Method,
    tol: f64,
    opts: &CertifyOptions,
) -> Result<SearchResult> {
    bisect(0.0, 1.0, tol, |lam| certify_aqs(sys, &base_p.scaled(lam)?, v, rate, method, opts))
}

/// Largest certifiable decay rate: `eps` in discrete time, `alpha` in continuous time,
/// searched below the eigenvalue ceiling at the box center.
pub fn max_decay_rate(
    sys: &LpvSystem,
    p: &ParamBox,
    v: &ParamBox,
    method: Method,
    tol: f64,
    opts: &CertifyOptions,
) -> Result<(DecayRate, SearchResult)> {
    let zero = DecayRate::marginal(sys.domain);
    let pre = check_eig_precondition(sys, p, zero)?;
    let ceiling = match sys.domain {
        TimeDomain::Discrete => pre.rate_ceiling.min(1.0 - tol),
        TimeDomain::Continuous => pre.rate_ceiling,
    };
    if !(ceiling > 0.0) {
        let v0 = certify_aqs(sys, p, v, zero, method, opts)?;
        let trace = vec![TraceEntry { value: 0.0, outcome: v0.outcome }];
        return Ok((zero, SearchResult { best: 0.0, certificate: v0.certificate, trace }));
    }
    let hi = (ceiling - tol).max(0.0);
    let res = bisect(0.0, hi, tol, |r| certify_aqs(sys, p, v, zero.with_value(r)?, method, opts))?;
    Ok((zero.with_value(res.best)?, res))
}

/// Rounds a box scale down to the 0.01 grid used when reporting.
pub fn snap_to_percent(lambda: f64) -> f64 {
    ((lambda * 100.0) + 1e-9).floor() / 100.0
}
