use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::schedule::{random_schedule, Clock, Schedule};
use crate::certify::LyapunovCertificate;
use crate::error::{dim_err, input_err, LpvError, Result};
use crate::system::{LpvSystem, TimeDomain};

/// States at the schedule samples, and outputs and inputs on each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub clock: Clock,
    pub p: Vec<Vec<f64>>,
    /// `x(t_0), ..., x(t_N)`.
    pub x: Vec<DVector<f64>>,
    /// `w` held on each of the `N` steps.
    pub w: Vec<DVector<f64>>,
    /// `z(t_k) = C(p_k) x_k + D(p_k) w_k` for `k < N`.
    pub z: Vec<DVector<f64>>,
    /// `V(x(t_k), p(t_k))` when a certificate was supplied.
    pub v: Option<Vec<f64>>,
}

/// Simulates the system along a schedule. Discrete time uses the exact recursion;
/// continuous time uses classical RK4 with `p` linear and `w` constant inside each step.
pub fn simulate(
    sys: &LpvSystem,
    cert: Option<&LyapunovCertificate>,
    x0: &[f64],
    schedule: &Schedule,
    w: Option<&[DVector<f64>]>,
) -> Result<Trajectory> {
    let n = schedule.steps();
    if x0.len() != sys.n_x() {
        return dim_err(format!("x0 has length {}, system has n_x = {}", x0.len(), sys.n_x()));
    }
    if schedule.samples.iter().any(|p| p.len() != sys.n_p()) {
        return dim_err("schedule samples do not match n_p");
    }
    let clock_domain = match schedule.clock {
        Clock::Discrete => TimeDomain::Discrete,
        Clock::Continuous { .. } => TimeDomain::Continuous,
    };
    if clock_domain != sys.domain {
        return Err(LpvError::InvalidInput(format!(
            "{} schedule used with a {} system",
            clock_domain, sys.domain
        )));
    }
    let w: Vec<DVector<f64>> = match w {
        Some(w) => {
            if w.len() != n || w.iter().any(|x| x.len() != sys.n_w()) {
                return dim_err(format!("input sequence must have {n} samples of length {}", sys.n_w()));
            }
            w.to_vec()
        }
        None => vec![DVector::zeros(sys.n_w()); n],
    };
    let mut x = Vec::with_capacity(n + 1);
    let mut z = Vec::with_capacity(n);
    x.push(DVector::from_column_slice(x0));
    for k in 0..n {
        let pk = &schedule.samples[k];
        let f = sys.frozen(pk)?;
        let xk = &x[k];
        z.push(&f.c * xk + &f.d * &w[k]);
        let next = match schedule.clock {
            Clock::Discrete => &f.a * xk + &f.b * &w[k],
            Clock::Continuous { h } => {
                let p1 = &schedule.samples[k + 1];
                let pm: Vec<f64> = pk.iter().zip(p1).map(|(a, b)| 0.5 * (a + b)).collect();
                let fm = sys.frozen(&pm)?;
                let f1 = sys.frozen(p1)?;
                let rhs = |a: &DMatrix<f64>, b: &DMatrix<f64>, x: &DVector<f64>| a * x + b * &w[k];
                let k1 = rhs(&f.a, &f.b, xk);
                let k2 = rhs(&fm.a, &fm.b, &(xk + &k1 * (0.5 * h)));
                let k3 = rhs(&fm.a, &fm.b, &(xk + &k2 * (0.5 * h)));
                let k4 = rhs(&f1.a, &f1.b, &(xk + &k3 * h));
                xk + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
            }
        };
        x.push(next);
    }
    let v = match cert {
        Some(c) => Some(
            x.iter()
                .zip(&schedule.samples)
                .map(|(xk, pk)| c.value(xk.as_slice(), pk))
                .collect::<Result<Vec<f64>>>()?,
        ),
        None => None,
    };
    Ok(Trajectory { clock: schedule.clock, p: schedule.samples.clone(), x, w, z, v })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub passed: bool,
    /// Largest relative excess `lhs / rhs - 1` over all checked inequalities (negative
    /// when every check holds with room to spare).
    pub worst_margin: f64,
    pub failures: usize,
}

struct Tally {
    worst: f64,
    failures: usize,
}

impl Tally {
    fn check(&mut self, lhs: f64, rhs: f64, rel_tol: f64) {
        if rhs > 0.0 {
            self.worst = self.worst.max(lhs / rhs - 1.0);
        } else if lhs > 0.0 {
            self.worst = f64::INFINITY;
        }
        if lhs > rhs * (1.0 + rel_tol) + f64::MIN_POSITIVE {
            self.failures += 1;
        }
    }
}

/// Checks the decay guarantees of `cert` along an unforced trajectory: per-step
/// `V(t+1) <= (1-eps) V(t)` in discrete time (relative slack 1e-9), `V(t) <= e^(-2 alpha t) V(0)`
/// in continuous time (slack 1e-6), and the state bound `||x(t)||^2 <= (b/a) decay(t) ||x(0)||^2`.
pub fn check_decay(traj: &Trajectory, cert: &LyapunovCertificate) -> Result<DecayReport> {
    let v = traj
        .v
        .as_ref()
        .ok_or_else(|| LpvError::InvalidInput("trajectory was simulated without a certificate".into()))?;
    let mut tally = Tally { worst: f64::NEG_INFINITY, failures: 0 };
    let h = traj.clock.step();
    let x0 = traj.x[0].norm_squared();
    match traj.clock {
        Clock::Discrete => {
            let c = cert.lyapunov_decay(1.0);
            for k in 0..v.len() - 1 {
                tally.check(v[k + 1], c * v[k], 1e-9);
            }
            for (k, x) in traj.x.iter().enumerate() {
                tally.check(x.norm_squared(), cert.state_bound(k as f64) * x0, 1e-9);
            }
        }
        Clock::Continuous { .. } => {
            for (k, vk) in v.iter().enumerate() {
                let t = k as f64 * h;
                tally.check(*vk, cert.lyapunov_decay(t) * v[0], 1e-6);
                tally.check(traj.x[k].norm_squared(), cert.state_bound(t) * x0, 1e-6);
            }
        }
    }
    Ok(DecayReport { passed: tally.failures == 0, worst_margin: tally.worst, failures: tally.failures })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub passed: bool,
    /// Largest violation of the running dissipation inequality relative to its scale.
    pub worst_relative_violation: f64,
}

/// Running dissipation inequality with storage `gamma V` and supply `gamma^2 |w|^2 - |z|^2`:
/// `gamma V(x_T) <= gamma V(x_0) + sum_{t<T} (gamma^2 |w_t|^2 - |z_t|^2) dt` for every `T`.
/// Relative tolerance 1e-6 in discrete time; continuous-time sums are left-point
/// quadratures, so the tolerance there is `10 h`.
pub fn check_dissipation(traj: &Trajectory, cert: &LyapunovCertificate) -> Result<DissipationReport> {
    let gamma = cert
        .gamma
        .ok_or_else(|| LpvError::InvalidInput("dissipation check needs a gain certificate".into()))?;
    let v = traj
        .v
        .as_ref()
        .ok_or_else(|| LpvError::InvalidInput("trajectory was simulated without a certificate".into()))?;
    let h = traj.clock.step();
    let tol = match traj.clock {
        Clock::Discrete => 1e-6,
        Clock::Continuous { h } => 10.0 * h,
    };
    let mut supply = 0.0;
    let mut magnitude = gamma * v[0].abs();
    let mut worst = f64::NEG_INFINITY;
    for k in 0..traj.z.len() {
        let ww = gamma * gamma * traj.w[k].norm_squared() * h;
        let zz = traj.z[k].norm_squared() * h;
        supply += ww - zz;
        magnitude += ww + zz;
        if magnitude == 0.0 {
            continue;
        }
        let lhs = gamma * v[k + 1];
        let rhs = gamma * v[0] + supply;
        worst = worst.max((lhs - rhs) / magnitude);
    }
    Ok(DissipationReport { passed: worst <= tol, worst_relative_violation: worst })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    pub dissipation: DissipationReport,
}

/// Random unit vector, deterministic in `seed`.
pub fn random_unit_state(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    loop {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return x.iter().map(|a| a / norm).collect();
        }
    }
}

/// Random finite-energy input: white noise on a window, a sinusoid at a log-uniform
/// frequency, a single impulse, or a decaying burst.
fn random_input(rng: &mut ChaCha8Rng, n_w: usize, steps: usize, h: f64) -> Vec<DVector<f64>> {
    loop {
        let dir = DVector::from_fn(n_w, |_, _| StandardNormal.sample(rng));
        let kind = rng.gen_range(0..4);
        let w: Vec<DVector<f64>> = match kind {
            0 => {
                let start = rng.gen_range(0..steps);
                let len = rng.gen_range(1..=steps - start);
                (0..steps)
                    .map(|k| {
                        if k >= start && k < start + len {
                            DVector::from_fn(n_w, |_, _| rng.gen_range(-1.0..1.0))
                        } else {
                            DVector::zeros(n_w)
                        }
                    })
                    .collect()
            }
            1 => {
                let max_freq = std::f64::consts::PI / h;
                let omega = (rng.gen_range((1e-3f64).ln()..max_freq.ln())).exp();
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                (0..steps).map(|k| &dir * (omega * k as f64 * h + phase).sin()).collect()
            }
            2 => {
                let at = rng.gen_range(0..steps);
                (0..steps).map(|k| if k == at { dir.clone() } else { DVector::zeros(n_w) }).collect()
            }
            _ => {
                let tau = rng.gen_range(1.0..steps as f64);
                (0..steps).map(|k| &dir * (-(k as f64) / tau).exp()).collect()
            }
        };
        if w.iter().any(|x| x.norm_squared() > 0.0) {
            return w;
        }
    }
}

/// Largest `||z|| / ||w||` over `trials` random schedules and inputs from `x(0) = 0`,
/// together with the dissipation check along the same trajectories.
pub fn empirical_gain(
    sys: &LpvSystem,
    cert: &LyapunovCertificate,
    trials: usize,
    horizon: usize,
    seed: u64,
    clock: Clock,
) -> Result<GainReport> {
    if cert.gamma.is_none() {
        return input_err("empirical gain needs a certificate with gamma");
    }
    if trials == 0 {
        return input_err("at least one trial is required");
    }
    if sys.n_w() == 0 || sys.n_z() == 0 {
        return input_err("system has no input/output channel");
    }
    let mut ratios = Vec::with_capacity(trials);
    let mut dissipation = DissipationReport { passed: true, worst_relative_violation: f64::NEG_INFINITY };
    let x0 = vec![0.0; sys.n_x()];
    for trial in 0..trials {
        let s = seed.wrapping_add(trial as u64);
        let sched = random_schedule(&cert.p, &cert.v, horizon, s, clock)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let w = random_input(&mut rng, sys.n_w(), horizon, clock.step());
        let traj = simulate(sys, Some(cert), &x0, &sched, Some(&w))?;
        let ww: f64 = traj.w.iter().map(|x| x.norm_squared()).sum();
        let zz: f64 = traj.z.iter().map(|x| x.norm_squared()).sum();
        ratios.push((zz / ww).sqrt());
        let d = check_dissipation(&traj, cert)?;
        dissipation.passed &= d.passed;
        dissipation.worst_relative_violation = dissipation.worst_relative_violation.max(d.worst_relative_violation);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(GainReport { max_ratio, ratios, dissipation })
}
