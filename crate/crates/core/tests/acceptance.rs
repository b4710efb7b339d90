//! End-to-end acceptance run on the mass-spring-damper benchmark plus the randomized
//! identity and oracle suites. Prints one `[PASS]`/`[FAIL]` line per criterion and exits
//! nonzero if any fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lpvcert::assemble::{assemble_aqs_dt, assemble_aqs_general, AssemblyOptions, DecayRate};
use lpvcert::benchmark::{log_space, msd_parameter_box, msd_rate_box, MSD_SAMPLING_TIME};
use lpvcert::certify::{
    check_eig_precondition, max_box_scale, min_l2_gain, validate_certificate, CertifyOptions, LyapunovCertificate,
    Method, ValidationOptions,
};
use lpvcert::cli::SystemFile;
use lpvcert::lmi::{ConstraintRole, VarKind, VarValue};
use lpvcert::oracle::{empirical_gain, Clock, CubicMatrixFunction};
use lpvcert::{AffineMatrixFamily, LpvSystem, ParamBox, TimeDomain};

const SCALE_TOL: f64 = 1e-3;
const DK_POINTS: usize = 25;

struct Outcomes {
    lines: Vec<(usize, bool, String)>,
}

impl Outcomes {
    fn record(&mut self, n: usize, ok: bool, msg: String) {
        println!("[{}] criterion {n}: {msg}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((n, ok, msg));
    }
}

fn bundled_dt() -> LpvSystem {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/msd_dt.json");
    SystemFile::load(path.as_ref()).expect("bundled file").to_model().expect("valid model").0
}

fn within(x: f64, target: f64, abs: f64) -> bool {
    (x - target).abs() <= abs
}

fn within_rel(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target
}

fn dk_grid() -> Vec<f64> {
    log_space(1e-5, 1e2, DK_POINTS)
}

fn main() {
    let mut out = Outcomes { lines: Vec::new() };
    let sys = bundled_dt();
    let p = msd_parameter_box();
    let opts = CertifyOptions::default();
    let mut certs: Vec<(String, LyapunovCertificate)> = Vec::new();

    // 1. box-scale curve endpoints
    let t0 = Instant::now();
    let mut curves: Vec<(f64, Vec<f64>)> = Vec::new();
    for eps in [0.0, 0.04] {
        let rate = DecayRate::epsilon_dt(eps).unwrap();
        let mut row = Vec::new();
        for dk in dk_grid() {
            let r = max_box_scale(&sys, &p, &msd_rate_box(dk, 0.0), rate, Method::RateBounded, SCALE_TOL, &opts).unwrap();
            if let Some(c) = r.certificate {
                certs.push((format!("scale eps={eps} dk={dk:.3e}"), c));
            }
            row.push(r.best);
        }
        curves.push((eps, row));
    }
    let t1 = t0.elapsed().as_secs_f64();
    let (lo, hi, plateau) = (curves[0].1[0], *curves[0].1.last().unwrap(), *curves[1].1.last().unwrap());
    out.record(
        1,
        within(lo, 0.90, 0.02) && within(hi, 0.46, 0.02) && within(plateau, 0.07, 0.02) && t1 < 60.0,
        format!(
            "lambda*(eps=0, dk=1e-5) = {lo:.4} (0.90 +- 0.02), lambda*(eps=0, dk=100) = {hi:.4} (0.46 +- 0.02), \
             lambda*(eps=0.04, dk=100) = {plateau:.4} (0.07 +- 0.02); {} bisections in {t1:.1} s (< 60 s)",
            2 * DK_POINTS
        ),
    );

    // 2. common-K baseline
    let common = CertifyOptions {
        assembly: AssemblyOptions { common_lyapunov: true, ..AssemblyOptions::default() },
        ..opts.clone()
    };
    let mut base = Vec::new();
    for dk in [1e-5, 1e-2, 1.0, 100.0] {
        let r = max_box_scale(&sys, &p, &msd_rate_box(dk, 0.0), DecayRate::EpsilonDt(0.0), Method::RateBounded, SCALE_TOL, &common)
            .unwrap();
        if let Some(c) = r.certificate {
            certs.push((format!("common-K dk={dk:.0e}"), c));
        }
        base.push(r.best);
    }
    let (bmin, bmax) = min_max(&base);
    out.record(
        2,
        base.iter().all(|&b| within(b, 0.46, 0.02)) && bmax - bmin <= SCALE_TOL,
        format!("common-K lambda* in [{bmin:.4}, {bmax:.4}] over dk in {{1e-5, 1e-2, 1, 100}} (0.46 +- 0.02, constant)"),
    );

    // 3. gain sweep on 0.2 P
    let p02 = p.scaled(0.2).unwrap();
    let t0 = Instant::now();
    let mut gains: Vec<(f64, Vec<(f64, Option<f64>)>)> = Vec::new();
    let mut gain_certs = Vec::new();
    for eps in [0.0, 0.01, 0.02, 0.025] {
        let rate = DecayRate::epsilon_dt(eps).unwrap();
        let mut row = Vec::new();
        for dk in dk_grid() {
            let v = min_l2_gain(&sys, &p02, &msd_rate_box(dk, 0.0), rate, &opts).unwrap();
            row.push((dk, v.gamma()));
            if let Some(c) = v.certificate {
                gain_certs.push((format!("gain eps={eps} dk={dk:.3e}"), c));
            }
        }
        gains.push((eps, row));
    }
    let t3 = t0.elapsed().as_secs_f64();
    let g = |e: usize, k: usize| gains[e].1[k].1.unwrap_or(f64::NAN);
    let low = g(0, 0);
    let plateau_ok = |e: usize, target: f64, rel: f64| {
        gains[e].1.iter().filter(|(dk, _)| *dk >= 0.032).all(|(_, g)| g.is_some_and(|g| within_rel(g, target, rel)))
    };
    let hi0 = g(0, DK_POINTS - 1);
    let hi1 = g(1, DK_POINTS - 1);
    let hi2 = g(2, DK_POINTS - 1);
    let hi3 = g(3, DK_POINTS - 1);
    let all_certified = gains.iter().all(|(_, r)| r.iter().all(|(_, g)| g.is_some()));
    out.record(
        3,
        within_rel(low, 1.6446, 0.02)
            && plateau_ok(0, 2.0245, 0.02)
            && within_rel(hi1, 3.2301, 0.02)
            && within_rel(hi2, 7.9835, 0.05)
            && all_certified
            && t3 < 120.0,
        format!(
            "gamma(eps=0, dk=1e-5) = {low:.5} (1.6446 +- 2%), gamma(eps=0, dk>=0.032) all within 2% of 2.0245 \
             (dk=100: {hi0:.5}), eps=0.01 plateau {hi1:.5} (3.2301 +- 2%), eps=0.02 plateau {hi2:.5} \
             (7.9835 +- 5%), eps=0.025 plateau {hi3:.3}; {} points in {t3:.1} s (< 120 s)",
            4 * DK_POINTS
        ),
    );

    // 4. eigenvalue ceiling vs the last feasible labels
    let pre = check_eig_precondition(&sys, &p02, DecayRate::EpsilonDt(0.0)).unwrap();
    let label = min_l2_gain(&sys, &p02, &msd_rate_box(0.00215, 0.0), DecayRate::epsilon_dt(0.0357).unwrap(), &opts).unwrap();
    out.record(
        4,
        within(pre.rate_ceiling, 0.0475, 1e-6) && 0.0357 < pre.rate_ceiling,
        format!(
            "eps ceiling 1 - rho(A(0))^2 = {:.9} (0.0475 +- 1e-6); label eps=0.0357 lies below it \
             (solver verdict at dk=0.00215: {}{})",
            pre.rate_ceiling,
            label.outcome,
            label.gamma().map(|g| format!(", gamma = {g:.2}")).unwrap_or_default()
        ),
    );

    // 5. assembly identities
    let (dt_ok, ct_err) = assembly_identities(50);
    out.record(
        5,
        dt_ok == 50 && ct_err <= 1e-14,
        format!(
            "{dt_ok}/50 random systems with identical rate-bounded(eps) and general-DT(alpha) assemblies; \
             general-CT(alpha=0) vs direct decrease at every vertex pair: max rel. error {ct_err:.1e} (<= 1e-14)"
        ),
    );

    // 6. oracle suite on every certificate from 1-3
    let vopts = ValidationOptions { grid_density: 21, trials: 100, horizon: 500, seed: 2024, ..ValidationOptions::default() };
    let mut worst_grid = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    let all: Vec<_> = certs.iter().chain(&gain_certs).collect();
    for (name, c) in &all {
        let s = validate_certificate(&sys, c, &vopts).unwrap();
        let strict = 1e-6 * (1.0 + c.b);
        worst_grid = worst_grid.max(s.grid_max_eig / strict);
        let ok = s.grid_max_eig <= strict && s.grid_min_k_eig >= c.a - 1e-8 && s.decay_passed == s.decay_trials;
        if !ok {
            failures.push(format!("{name} (grid {:.2e}, decay {}/{})", s.grid_max_eig, s.decay_passed, s.decay_trials));
        }
    }
    out.record(
        6,
        failures.is_empty(),
        format!(
            "{} certificates: grid max eig <= 1e-6 (1 + b) at density 21 (worst ratio {worst_grid:.2}), \
             K(p) >= (a - 1e-8) I, 100/100 decay checks at horizon 500; failures: {:?}",
            all.len(),
            failures
        ),
    );

    // 7. vertex-maximum property of partially convex cubics
    let (held, total, counter) = cubic_suite(500);
    out.record(
        7,
        held == total && counter,
        format!(
            "{held}/{total} random cubics (n=3, n_p=2) attain their grid maximum at a vertex (density 41); \
             L(p) = -p^2 flagged with an interior maximum: {counter}"
        ),
    );

    // 8. gain soundness by simulation
    let mut worst_ratio: f64 = 0.0;
    let mut worst_diss = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for (i, (name, c)) in gain_certs.iter().enumerate() {
        let rep = empirical_gain(&sys, c, 200, 500, 7000 + i as u64, Clock::Discrete).unwrap();
        let gamma = c.gamma.unwrap();
        worst_ratio = worst_ratio.max(rep.max_ratio / gamma);
        worst_diss = worst_diss.max(rep.dissipation.worst_relative_violation);
        if rep.max_ratio > gamma || rep.dissipation.worst_relative_violation > 1e-6 {
            bad.push(name.clone());
        }
    }
    out.record(
        8,
        bad.is_empty() && !gain_certs.is_empty(),
        format!(
            "{} gain certificates x 200 trials: max empirical/certified = {worst_ratio:.4} (<= 1), \
             worst relative dissipation violation {worst_diss:.1e} (<= 1e-6); failures: {bad:?}",
            gain_certs.len()
        ),
    );

    // 9. insensitivity to the damping rate bound
    let mut spreads = Vec::new();
    for dk in [1e-3, 1e-1] {
        let vals: Vec<f64> = log_space(1e-4, 1e2, 7)
            .into_iter()
            .map(|dc| {
                max_box_scale(&sys, &p, &msd_rate_box(dk, dc), DecayRate::EpsilonDt(0.0), Method::RateBounded, SCALE_TOL, &opts)
                    .unwrap()
                    .best
            })
            .collect();
        let (a, b) = min_max(&vals);
        spreads.push((dk, a, b));
    }
    out.record(
        9,
        spreads.iter().all(|(_, a, b)| b - a < 0.05),
        format!(
            "lambda* over dc in [1e-4, 1e2]: {}",
            spreads
                .iter()
                .map(|(dk, a, b)| format!("dk={dk:.0e}: [{a:.4}, {b:.4}] spread {:.4} (< 0.05)", b - a))
                .collect::<Vec<_>>()
                .join("; ")
        ),
    );

    let failed: Vec<usize> = out.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    println!("acceptance: {}/{} criteria passed", out.lines.len() - failed.len(), out.lines.len());
    assert!((MSD_SAMPLING_TIME - 0.05).abs() < 1e-15);
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn random_system(rng: &mut ChaCha8Rng, domain: TimeDomain) -> (LpvSystem, ParamBox, ParamBox) {
    let nx = rng.gen_range(1..=3);
    let np = rng.gen_range(1..=2);
    let coeffs = (0..=np).map(|_| DMatrix::from_fn(nx, nx, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let sys = LpvSystem::autonomous(domain, AffineMatrixFamily::new(coeffs).unwrap()).unwrap();
    let corner = |rng: &mut ChaCha8Rng, s: f64| -> (Vec<f64>, Vec<f64>) {
        (0..np)
            .map(|_| {
                let a = rng.gen_range(-s..s);
                (a, a + rng.gen_range(0.0..s))
            })
            .unzip()
    };
    let (pl, pu) = corner(rng, 1.0);
    let (vl, vu) = corner(rng, 0.3);
    (sys, ParamBox::new(pl, pu).unwrap(), ParamBox::new(vl, vu).unwrap())
}

/// Returns the number of systems whose two discrete-time assemblies coincide exactly and
/// the largest relative deviation between the assembled continuous-time decrease blocks
/// and a direct evaluation of `A(u)^T K(u) + K(u) A(u) + K(v) - K_0`.
fn assembly_identities(n: usize) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ao = AssemblyOptions::default();
    let mut identical = 0;
    for _ in 0..n {
        let (sys, p, v) = random_system(&mut rng, TimeDomain::Discrete);
        // dyadic alpha makes eps = 1 - alpha^2 and alpha^2 = 1 - eps exact
        let alpha = rng.gen_range(1..=1024) as f64 / 1024.0;
        let eps = 1.0 - alpha * alpha;
        let a = assemble_aqs_dt(&sys, &p, &v, eps, &ao).unwrap();
        let b = assemble_aqs_general(&sys, &p, &v, DecayRate::alpha_dt(alpha).unwrap(), &ao).unwrap();
        let same = a.variables == b.variables
            && a.eqs.is_empty()
            && b.eqs.is_empty()
            && a.psd.len() == b.psd.len()
            && a.psd.iter().zip(&b.psd).all(|(x, y)| {
                x.expr == y.expr && x.tag.role == y.tag.role && x.tag.u == y.tag.u && x.tag.v == y.tag.v && x.tag.axis == y.tag.axis
            });
        if same {
            identical += 1;
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (sys, p, v) = random_system(&mut rng, TimeDomain::Continuous);
        let prob = assemble_aqs_general(&sys, &p, &v, DecayRate::AlphaCt(0.0), &ao).unwrap();
        let values: Vec<VarValue> = prob
            .variables
            .iter()
            .map(|var| match var.kind {
                VarKind::Symmetric(m) => {
                    let r = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
                    VarValue::Matrix(&r + r.transpose())
                }
                _ => VarValue::Scalar(rng.gen_range(0.0..1.0)),
            })
            .collect();
        let k: Vec<DMatrix<f64>> = values.iter().map(|x| x.as_matrix().unwrap().clone()).collect();
        let k_at = |w: &[f64]| k.iter().skip(1).zip(w).fold(k[0].clone(), |acc, (ki, wi)| acc + ki * *wi);
        let mut pairs = 0;
        for c in prob.psd.iter().filter(|c| c.tag.role == ConstraintRole::Decrease) {
            let (u, r) = (c.tag.u.as_ref().unwrap(), c.tag.v.as_ref().unwrap());
            let au = sys.a.eval(u).unwrap();
            let ku = k_at(u);
            let direct = au.transpose() * &ku + &ku * &au + k_at(r) - &k[0];
            let assembled = -c.expr.eval(&values);
            let err = (&assembled - &direct).amax() / (1.0 + direct.amax());
            worst = worst.max(err);
            pairs += 1;
        }
        assert_eq!(pairs, p.vertices().len() * v.vertices().len());
    }
    (identical, worst)
}

fn cubic_suite(n: usize) -> (usize, usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut held = 0;
    for _ in 0..n {
        let lo: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.1..2.0)).collect();
        let bx = ParamBox::new(lo, hi).unwrap();
        let f = CubicMatrixFunction::random_with_curvature(&mut rng, 3, &bx, 1e-3);
        let r = f.vertex_max_check(&bx, 41).unwrap();
        if r.condition_holds && r.max_at_vertex {
            held += 1;
        }
    }
    let mut neg = CubicMatrixFunction::zeros(1, 1);
    neg.q2[0][0] = DMatrix::from_element(1, 1, -1.0);
    let r = neg.vertex_max_check(&ParamBox::symmetric(&[1.0]).unwrap(), 41).unwrap();
    let counter = !r.condition_holds && !r.max_at_vertex && r.grid_max > r.vertex_max;
    (held, n, counter)
}
