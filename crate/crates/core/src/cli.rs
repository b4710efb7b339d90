//! Command-line front end: JSON system and certificate files, the four subcommands, and
//! CSV sweeps. Commands write their report to a caller-supplied sink and return the
//! process exit code, so they can be driven from tests as well as from the binary.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assemble::DecayRate;
use crate::benchmark::log_space;
use crate::certify::{
    self, check_eig_precondition, max_box_scale, min_l2_gain, CertMethod, CertVerdict,
    CertifyOptions, LyapunovCertificate, Method, Outcome, ValidationOptions,
};
use crate::error::{input_err, LpvError, Result};
use crate::oracle::{self, Clock};
use crate::system::{AffineMatrixFamily, LpvSystem, ParamBox, SymmetricAffineFamily, TimeDomain};

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;

pub const SCALE_HEADER: &str = "dk_max,dc_max,eps,lambda_star,status";
pub const GAIN_HEADER: &str = "dk_max,eps,gamma,status";

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxFile {
    fn to_box(&self) -> Result<ParamBox> {
        ParamBox::new(self.lower.clone(), self.upper.clone())
    }

    fn from_box(b: &ParamBox) -> Self {
        Self { lower: b.lower().to_vec(), upper: b.upper().to_vec() }
    }
}

/// JSON description of an LPV system with its scheduling boxes. Matrices are arrays of
/// rows; each of `A`, `B`, `C`, `D` lists the `n_p + 1` affine coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub domain: TimeDomain,
    pub np: usize,
    pub nx: usize,
    #[serde(default)]
    pub nw: usize,
    #[serde(default)]
    pub nz: usize,
    #[serde(rename = "A")]
    pub a: Vec<Matrix>,
    #[serde(rename = "B", default)]
    pub b: Vec<Matrix>,
    #[serde(rename = "C", default)]
    pub c: Vec<Matrix>,
    #[serde(rename = "D", default)]
    pub d: Vec<Matrix>,
    #[serde(rename = "P")]
    pub p: BoxFile,
    /// Missing means the parameters are constant (zero rate box).
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<BoxFile>,
}

fn to_dmatrix(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
    // an n x 0 matrix may be written either as n empty rows or as []
    if cols == 0 && (m.is_empty() || m.iter().all(Vec::is_empty)) {
        return Ok(DMatrix::zeros(rows, 0));
    }
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(LpvError::Dimension(format!("{what} must be {rows}x{cols}")));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| m[i][j]))
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn family(list: &[Matrix], np: usize, rows: usize, cols: usize, name: &str) -> Result<AffineMatrixFamily> {
    if list.is_empty() && (rows == 0 || cols == 0) {
        return Ok(AffineMatrixFamily::zeros(rows, cols, np));
    }
    if list.len() != np + 1 {
        return Err(LpvError::Dimension(format!("{name} must list {} coefficient matrices, found {}", np + 1, list.len())));
    }
    let coeffs = list
        .iter()
        .enumerate()
        .map(|(i, m)| to_dmatrix(m, rows, cols, &format!("{name}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    AffineMatrixFamily::new(coeffs)
}

impl SystemFile {
    pub fn to_model(&self) -> Result<(LpvSystem, ParamBox, ParamBox)> {
        let (np, nx, nw, nz) = (self.np, self.nx, self.nw, self.nz);
        if nx == 0 {
            return input_err("nx must be at least 1");
        }
        let sys = LpvSystem::new(
            self.domain,
            family(&self.a, np, nx, nx, "A")?,
            family(&self.b, np, nx, nw, "B")?,
            family(&self.c, np, nz, nx, "C")?,
            family(&self.d, np, nz, nw, "D")?,
        )?;
        let p = self.p.to_box()?;
        let v = match &self.v {
            Some(v) => v.to_box()?,
            None => ParamBox::zero_point(np),
        };
        sys.check_box(&p, "P")?;
        sys.check_box(&v, "V")?;
        Ok((sys, p, v))
    }

    pub fn from_model(sys: &LpvSystem, p: &ParamBox, v: Option<&ParamBox>) -> Self {
        let list = |f: &AffineMatrixFamily| f.coeffs().iter().map(from_dmatrix).collect();
        Self {
            domain: sys.domain,
            np: sys.n_p(),
            nx: sys.n_x(),
            nw: sys.n_w(),
            nz: sys.n_z(),
            a: list(&sys.a),
            b: list(&sys.b),
            c: list(&sys.c),
            d: list(&sys.d),
            p: BoxFile::from_box(p),
            v: v.map(BoxFile::from_box),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RateFile {
    Eps(f64),
    AlphaCt(f64),
    AlphaDt(f64),
}

impl RateFile {
    fn to_rate(&self) -> Result<DecayRate> {
        match *self {
            RateFile::Eps(e) => DecayRate::epsilon_dt(e),
            RateFile::AlphaCt(a) => DecayRate::alpha_ct(a),
            RateFile::AlphaDt(a) => DecayRate::alpha_dt(a),
        }
    }

    fn from_rate(r: DecayRate) -> Self {
        match r {
            DecayRate::EpsilonDt(e) => RateFile::Eps(e),
            DecayRate::AlphaCt(a) => RateFile::AlphaCt(a),
            DecayRate::AlphaDt(a) => RateFile::AlphaDt(a),
        }
    }
}

/// JSON form of a [`LyapunovCertificate`]. `a` and `b` are informational; they are
/// recomputed from `K` on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub method: String,
    pub rate: RateFile,
    #[serde(rename = "K")]
    pub k: Vec<Matrix>,
    pub a: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "P")]
    pub p: BoxFile,
    #[serde(rename = "V")]
    pub v: BoxFile,
}

impl CertificateFile {
    pub fn from_cert(c: &LyapunovCertificate) -> Self {
        Self {
            method: c.method.as_str().to_string(),
            rate: RateFile::from_rate(c.rate),
            k: c.k.coeffs().iter().map(from_dmatrix).collect(),
            a: c.a,
            b: c.b,
            gamma: c.gamma,
            p: BoxFile::from_box(&c.p),
            v: BoxFile::from_box(&c.v),
        }
    }

    pub fn to_cert(&self) -> Result<LyapunovCertificate> {
        let method = CertMethod::parse(&self.method)
            .ok_or_else(|| LpvError::InvalidInput(format!("unknown certificate method '{}'", self.method)))?;
        let n = self.k.first().map_or(0, Vec::len);
        let coeffs = self
            .k
            .iter()
            .enumerate()
            .map(|(i, m)| to_dmatrix(m, n, n, &format!("K[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let k = SymmetricAffineFamily::new(coeffs)?;
        LyapunovCertificate::new(k, self.rate.to_rate()?, method, self.gamma, self.p.to_box()?, self.v.to_box()?)
    }
}

#[derive(Debug, Parser)]
#[command(name = "lpvcert", version, about = "Stability and L2-gain certificates for affine LPV systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify (affine) quadratic stability with a guaranteed decay rate.
    Certify(CertifyArgs),
    /// Compute the smallest certifiable L2-gain bound.
    Gain(GainArgs),
    /// Sweep box scale or gain over rate bounds and decay rates; writes CSV.
    Sweep(SweepArgs),
    /// Re-check a certificate by gridding and random simulations.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Rate-bounded discrete-time test (decay eps).
    Thm3,
    /// Discrete-time test for arbitrary jumps inside P (decay eps).
    Lemma2,
    /// Continuous/discrete-time test with decay alpha.
    General,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Thm3 => Method::RateBounded,
            MethodArg::Lemma2 => Method::VertexPair,
            MethodArg::General => Method::General,
        }
    }
}

/// Options shared by the certification commands.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// System description (JSON).
    pub file: PathBuf,
    /// Discrete-time decay rate eps in [0, 1).
    #[arg(long, conflicts_with = "alpha")]
    pub eps: Option<f64>,
    /// Decay rate alpha (continuous time: >= 0; discrete time: in (0, 1]).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Scale the parameter box P about the origin.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Override the rate bound along parameter axis 0 (V_0 = [-dkmax, dkmax]).
    #[arg(long)]
    pub dkmax: Option<f64>,
    /// Override the rate bound along parameter axis 1 (V_1 = [-dcmax, dcmax]).
    #[arg(long)]
    pub dcmax: Option<f64>,
    /// Grid density per axis for the independent re-check.
    #[arg(long, default_value_t = 21)]
    pub grid_density: usize,
    /// Seed for the random re-check trajectories.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the certificate (JSON) here when one is found.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Thm3)]
    pub method: MethodArg,
    /// Use a parameter-independent Lyapunov matrix (quadratic stability).
    #[arg(long)]
    pub common: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GainArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    /// Largest certifiable box scale lambda* per grid point.
    Scale,
    /// Smallest certifiable gain per grid point.
    Gain,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// System description (JSON).
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = SweepMode::Scale)]
    pub mode: SweepMode,
    /// Comma-separated decay rates eps.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_value = "0")]
    pub eps: Vec<f64>,
    /// Explicit comma-separated rate bounds along axis 0; overrides the log axis.
    #[arg(long, value_delimiter = ',')]
    pub dk: Option<Vec<f64>>,
    /// Log-spaced axis along parameter axis 0: lower end.
    #[arg(long, default_value_t = 1e-5)]
    pub dkmin: f64,
    /// Log-spaced axis along parameter axis 0: upper end.
    #[arg(long, default_value_t = 100.0)]
    pub dkmax: f64,
    /// Number of log-spaced points.
    #[arg(long, default_value_t = 25)]
    pub dk_points: usize,
    /// Comma-separated rate bounds along parameter axis 1.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub dcmax: Vec<f64>,
    /// Scale of P (gain mode) or of the base box (ignored in scale mode).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Thm3)]
    pub method: MethodArg,
    /// Use a parameter-independent Lyapunov matrix.
    #[arg(long)]
    pub common: bool,
    /// Bisection tolerance on lambda.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Report lambda* rounded down to multiples of 0.01.
    #[arg(long)]
    pub snap: bool,
    #[arg(long, default_value_t = 21)]
    pub grid_density: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// CSV destination; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// System description (JSON).
    pub file: PathBuf,
    /// Certificate produced by `certify --out` or `gain --out`.
    pub cert: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub horizon: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 21)]
    pub grid_density: usize,
    /// Integration step for continuous-time systems.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

/// Runs a parsed command, printing errors to `err`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let res = match &cli.command {
        Command::Certify(a) => cmd_certify(a, out),
        Command::Gain(a) => cmd_gain(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

fn decay_from(eps: Option<f64>, alpha: Option<f64>, domain: TimeDomain) -> Result<DecayRate> {
    match (eps, alpha, domain) {
        (Some(_), Some(_), _) => input_err("give either --eps or --alpha, not both"),
        (Some(e), None, TimeDomain::Discrete) => DecayRate::epsilon_dt(e),
        (Some(_), None, TimeDomain::Continuous) => input_err("--eps applies to discrete-time systems; use --alpha"),
        (None, Some(a), TimeDomain::Continuous) => DecayRate::alpha_ct(a),
        (None, Some(a), TimeDomain::Discrete) => DecayRate::alpha_dt(a),
        (None, None, d) => Ok(DecayRate::marginal(d)),
    }
}

/// Replaces the rate bounds along axes 0 and 1 by symmetric intervals.
fn override_rates(v: &ParamBox, dk: Option<f64>, dc: Option<f64>) -> Result<ParamBox> {
    let (mut lo, mut hi) = (v.lower().to_vec(), v.upper().to_vec());
    for (axis, val) in [(0, dk), (1, dc)] {
        if let Some(x) = val {
            if axis >= lo.len() {
                return input_err(format!("rate override for axis {axis}, but the system has n_p = {}", lo.len()));
            }
            if !(x >= 0.0) {
                return input_err(format!("rate bounds must be nonnegative, got {x}"));
            }
            lo[axis] = -x;
            hi[axis] = x;
        }
    }
    ParamBox::new(lo, hi)
}

struct Problem {
    sys: LpvSystem,
    p: ParamBox,
    v: ParamBox,
    rate: DecayRate,
    opts: CertifyOptions,
}

fn load_problem(a: &ProblemArgs) -> Result<Problem> {
    let file = SystemFile::load(&a.file)?;
    let (sys, p, v) = file.to_model()?;
    let p = p.scaled(a.lambda)?;
    let v = override_rates(&v, a.dkmax, a.dcmax)?;
    let rate = decay_from(a.eps, a.alpha, sys.domain)?;
    if a.grid_density < 2 {
        return input_err("--grid-density must be at least 2");
    }
    let opts = CertifyOptions {
        validation: Some(ValidationOptions { grid_density: a.grid_density, seed: a.seed, ..ValidationOptions::default() }),
        ..CertifyOptions::default()
    };
    Ok(Problem { sys, p, v, rate, opts })
}

fn exit_code(o: Outcome) -> i32 {
    match o {
        Outcome::Certified => EXIT_CERTIFIED,
        Outcome::NotCertified => EXIT_NOT_CERTIFIED,
        Outcome::Unknown => EXIT_UNKNOWN,
    }
}

fn bound_text(rate: DecayRate) -> String {
    match rate {
        DecayRate::EpsilonDt(e) => format!("||x(t)||^2 <= (b/a) * {}^t * ||x(0)||^2", 1.0 - e),
        DecayRate::AlphaDt(a) => format!("||x(t)||^2 <= (b/a) * {a}^(2t) * ||x(0)||^2"),
        DecayRate::AlphaCt(a) => format!("||x(t)||^2 <= (b/a) * exp(-{a} t) * ||x(0)||^2"),
    }
}

fn report(verdict: &CertVerdict, method: &str, rate: DecayRate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", verdict.outcome);
    let _ = writeln!(s, "method: {method}");
    let _ = writeln!(s, "decay rate: {rate}");
    let d = &verdict.diagnostics;
    if let Some(pre) = &d.precondition {
        let what = match rate.domain() {
            TimeDomain::Discrete => "spectral radius",
            TimeDomain::Continuous => "spectral abscissa",
        };
        let _ = writeln!(
            s,
            "precondition: {what} of A(p_c) = {:.6} vs threshold {:.6} ({})",
            pre.measure,
            pre.threshold,
            if pre.holds { "holds" } else { "fails" }
        );
    }
    if let Some(st) = &d.solver_status {
        let iters = d.solver_stats.as_ref().map_or(0, |x| x.iterations);
        let _ = writeln!(s, "solver: {st} ({iters} iterations)");
    }
    if let Some(c) = &verdict.certificate {
        if let Some(g) = c.gamma {
            let _ = writeln!(s, "gamma: {g:.6}");
        }
        let _ = writeln!(s, "a: {:.9}", c.a);
        let _ = writeln!(s, "b: {:.9}", c.b);
        let _ = writeln!(s, "b/a: {:.9}", c.condition_number());
        let _ = writeln!(s, "bound: {}", bound_text(c.rate));
    }
    if let Some(v) = &d.validation {
        let _ = writeln!(
            s,
            "re-check: grid max eigenvalue {:.3e} (tolerance {:.3e}), min eig K(p) {:.6}, decay {}/{}",
            v.grid_max_eig, v.grid_tolerance, v.grid_min_k_eig, v.decay_passed, v.decay_trials
        );
    }
    if let Some(n) = &d.note {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

fn write_certificate(path: &Path, cert: &LyapunovCertificate) -> Result<()> {
    let text = serde_json::to_string_pretty(&CertificateFile::from_cert(cert))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn cmd_certify(a: &CertifyArgs, out: &mut dyn Write) -> Result<i32> {
    let mut pr = load_problem(&a.problem)?;
    pr.opts.assembly.common_lyapunov = a.common;
    let method: Method = a.method.into();
    let verdict = certify::certify_aqs(&pr.sys, &pr.p, &pr.v, pr.rate, method, &pr.opts)?;
    out.write_all(report(&verdict, method.cli_name(), pr.rate).as_bytes())?;
    if let (Some(path), Some(c)) = (&a.problem.out, &verdict.certificate) {
        write_certificate(path, c)?;
    }
    Ok(exit_code(verdict.outcome))
}

pub fn cmd_gain(a: &GainArgs, out: &mut dyn Write) -> Result<i32> {
    let pr = load_problem(&a.problem)?;
    if pr.sys.n_w() == 0 || pr.sys.n_z() == 0 {
        return input_err("the system has no exogenous input or performance output; use `certify` for stability only");
    }
    let verdict = min_l2_gain(&pr.sys, &pr.p, &pr.v, pr.rate, &pr.opts)?;
    out.write_all(report(&verdict, "l2-gain", pr.rate).as_bytes())?;
    if let (Some(path), Some(c)) = (&a.problem.out, &verdict.certificate) {
        write_certificate(path, c)?;
    }
    Ok(exit_code(verdict.outcome))
}

/// Grid of a sweep: rate bounds along axes 0 and 1 and a list of decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub dk: Vec<f64>,
    pub dc: Vec<f64>,
    pub eps: Vec<f64>,
    pub method: Method,
    pub tol: f64,
    pub snap: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return input_err("the eps list is empty");
        }
        if self.dk.is_empty() || self.dc.is_empty() {
            return input_err("rate axes must not be empty");
        }
        if self.dk.iter().chain(&self.dc).any(|x| !(*x >= 0.0)) {
            return input_err("rate bounds must be nonnegative");
        }
        if self.mode == SweepMode::Gain && self.dc.len() != 1 {
            return input_err("gain sweeps take a single axis-1 rate bound");
        }
        if !(self.tol > 0.0) {
            return input_err("bisection tolerance must be positive");
        }
        Ok(())
    }

    pub fn header(&self) -> &'static str {
        match self.mode {
            SweepMode::Scale => SCALE_HEADER,
            SweepMode::Gain => GAIN_HEADER,
        }
    }

    /// Grid points in output order: eps outermost, then axis 1, then axis 0.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::new();
        for &e in &self.eps {
            for &c in &self.dc {
                for &k in &self.dk {
                    pts.push((k, c, e));
                }
            }
        }
        pts
    }
}

/// One CSV row per grid point, in the order of [`SweepSpec::points`].
pub fn run_sweep(sys: &LpvSystem, p: &ParamBox, v: &ParamBox, spec: &SweepSpec, opts: &CertifyOptions, jobs: usize) -> Result<Vec<String>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LpvError::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let dc_axis = sys.n_p() > 1;
    let row = |&(dk, dc, eps): &(f64, f64, f64)| -> Result<String> {
        let vv = override_rates(v, Some(dk), dc_axis.then_some(dc))?;
        let rate = DecayRate::epsilon_dt(eps)?;
        Ok(match spec.mode {
            SweepMode::Scale => {
                let r = max_box_scale(sys, p, &vv, rate, spec.method, spec.tol, opts)?;
                let status = if r.best == 0.0 {
                    "infeasible-floor"
                } else if r.saw_unknown() {
                    "unknown"
                } else {
                    "ok"
                };
                let lam = if spec.snap { certify::snap_to_percent(r.best) } else { r.best };
                format!("{dk},{dc},{eps},{lam:.6},{status}")
            }
            SweepMode::Gain => {
                let verdict = min_l2_gain(sys, p, &vv, rate, opts)?;
                match (verdict.outcome, verdict.gamma()) {
                    (Outcome::Certified, Some(g)) => format!("{dk},{eps},{g:.6},ok"),
                    (Outcome::Unknown, _) => format!("{dk},{eps},,unknown"),
                    _ => format!("{dk},{eps},,infeasible-floor"),
                }
            }
        })
    };
    let pts = spec.points();
    pool.install(|| pts.par_iter().map(row).collect())
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let file = SystemFile::load(&a.file)?;
    let (sys, p, v) = file.to_model()?;
    if sys.domain != TimeDomain::Discrete {
        return input_err("sweeps are defined over eps and need a discrete-time system");
    }
    let dk = match &a.dk {
        Some(list) => list.clone(),
        None => {
            if !(a.dkmin > 0.0 && a.dkmax >= a.dkmin) || a.dk_points == 0 {
                return input_err("log axis needs 0 < dkmin <= dkmax and at least one point");
            }
            log_space(a.dkmin, a.dkmax, a.dk_points)
        }
    };
    let spec = SweepSpec {
        mode: a.mode,
        dk,
        dc: a.dcmax.clone(),
        eps: a.eps.clone(),
        method: a.method.into(),
        tol: a.tol,
        snap: a.snap,
    };
    spec.validate()?;
    let p = match a.mode {
        SweepMode::Gain => p.scaled(a.lambda)?,
        SweepMode::Scale => p,
    };
    let mut opts = CertifyOptions {
        validation: Some(ValidationOptions { grid_density: a.grid_density, seed: a.seed, ..ValidationOptions::default() }),
        ..CertifyOptions::default()
    };
    opts.assembly.common_lyapunov = a.common;
    // open the destination before the (long) sweep so a bad path fails fast
    let mut file_out = match &a.out {
        Some(path) => Some(std::fs::File::create(path)?),
        None => None,
    };
    let rows = run_sweep(&sys, &p, &v, &spec, &opts, a.jobs)?;
    let mut csv = String::new();
    csv.push_str(spec.header());
    csv.push('\n');
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    match file_out.as_mut() {
        Some(f) => {
            f.write_all(csv.as_bytes())?;
            writeln!(out, "wrote {} rows to {}", spec.points().len(), a.out.as_ref().expect("path").display())?;
        }
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(0)
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    if a.trials == 0 {
        return input_err("--trials must be at least 1");
    }
    if a.horizon == 0 {
        return input_err("--horizon must be at least 1");
    }
    let (sys, _, _) = SystemFile::load(&a.file)?.to_model()?;
    let text = std::fs::read_to_string(&a.cert)?;
    let cert = serde_json::from_str::<CertificateFile>(&text)?.to_cert()?;
    if cert.k.dim() != sys.n_x() || cert.p.dim() != sys.n_p() || cert.domain() != sys.domain {
        return input_err("certificate does not match the system (dimensions or time domain)");
    }
    let clock = match sys.domain {
        TimeDomain::Discrete => Clock::Discrete,
        TimeDomain::Continuous => Clock::Continuous { h: a.step },
    };
    let pre = check_eig_precondition(&sys, &cert.p, cert.rate)?;
    let grid = oracle::grid_max_eig(&sys, &cert, a.grid_density)?;
    let positive = cert.a > 0.0 && grid.min_k_eig >= cert.a - 1e-8;
    writeln!(out, "certificate: {} with {}", cert.method.as_str(), cert.rate)?;
    writeln!(out, "a: {:.9}  b: {:.9}  b/a: {:.9}", cert.a, cert.b, cert.condition_number())?;
    writeln!(out, "precondition: {}", if pre.holds { "holds" } else { "fails" })?;
    writeln!(
        out,
        "grid check: max eigenvalue {:.3e} (tolerance {:.3e}) over {} points: {}",
        grid.max_eig,
        grid.tolerance,
        grid.points,
        if grid.passed() { "pass" } else { "FAIL" }
    )?;
    writeln!(out, "positivity: min eig K(p) on grid {:.6}: {}", grid.min_k_eig, if positive { "pass" } else { "FAIL" })?;
    let mut passed = 0;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..a.trials {
        let seed = a.seed.wrapping_add(trial as u64);
        let sched = oracle::random_schedule(&cert.p, &cert.v, a.horizon, seed, clock)?;
        let x0 = oracle::random_unit_state(sys.n_x(), seed);
        let traj = oracle::simulate(&sys, Some(&cert), &x0, &sched, None)?;
        let rep = oracle::check_decay(&traj, &cert)?;
        worst = worst.max(rep.worst_margin);
        if rep.passed {
            passed += 1;
        }
    }
    writeln!(out, "{passed}/{} decay checks passed (worst relative margin {worst:.3e})", a.trials)?;
    let mut all_ok = pre.holds && grid.passed() && positive && passed == a.trials;
    if let Some(g) = cert.gamma {
        let gain = oracle::empirical_gain(&sys, &cert, a.trials, a.horizon, a.seed, clock)?;
        let below = gain.max_ratio <= g;
        writeln!(
            out,
            "empirical gain: {:.6} vs certified {:.6}: {}",
            gain.max_ratio,
            g,
            if below { "pass" } else { "FAIL" }
        )?;
        writeln!(
            out,
            "dissipation: worst relative violation {:.3e}: {}",
            gain.dissipation.worst_relative_violation,
            if gain.dissipation.passed { "pass" } else { "FAIL" }
        )?;
        all_ok &= below && gain.dissipation.passed;
    }
    Ok(if all_ok { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark;

    #[test]
    fn system_file_round_trip() {
        let sys = benchmark::mass_spring_damper_dt();
        let p = benchmark::msd_parameter_box();
        let v = benchmark::msd_rate_box(0.1, 0.0);
        let f = SystemFile::from_model(&sys, &p, Some(&v));
        let text = serde_json::to_string(&f).unwrap();
        let back: SystemFile = serde_json::from_str(&text).unwrap();
        let (s2, p2, v2) = back.to_model().unwrap();
        assert_eq!(s2, sys);
        assert_eq!((p2, v2), (p, v));
    }

    #[test]
    fn missing_rate_box_means_constant_parameters() {
        let sys = benchmark::mass_spring_damper_dt();
        let f = SystemFile::from_model(&sys, &benchmark::msd_parameter_box(), None);
        let (_, _, v) = f.to_model().unwrap();
        assert!(v.is_point() && v.lower() == [0.0, 0.0]);
    }

    #[test]
    fn inconsistent_dimensions_are_rejected() {
        let sys = benchmark::mass_spring_damper_dt();
        let mut f = SystemFile::from_model(&sys, &benchmark::msd_parameter_box(), None);
        f.nx = 3;
        assert!(f.to_model().is_err());
        let mut g = SystemFile::from_model(&sys, &benchmark::msd_parameter_box(), None);
        g.a.pop();
        assert!(g.to_model().is_err());
    }

    #[test]
    fn sweep_order_and_validation() {
        let spec = SweepSpec {
            mode: SweepMode::Scale,
            dk: vec![1.0, 2.0],
            dc: vec![0.0],
            eps: vec![0.0, 0.5],
            method: Method::RateBounded,
            tol: 1e-3,
            snap: false,
        };
        assert_eq!(spec.points(), vec![(1.0, 0.0, 0.0), (2.0, 0.0, 0.0), (1.0, 0.0, 0.5), (2.0, 0.0, 0.5)]);
        let empty = SweepSpec { eps: vec![], ..spec };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn rate_flags() {
        assert_eq!(decay_from(None, None, TimeDomain::Discrete).unwrap(), DecayRate::EpsilonDt(0.0));
        assert!(decay_from(Some(0.1), None, TimeDomain::Continuous).is_err());
        assert_eq!(decay_from(None, Some(0.2), TimeDomain::Continuous).unwrap(), DecayRate::AlphaCt(0.2));
    }
}
