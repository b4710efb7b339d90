use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{input_err, Result};
use crate::system::ParamBox;

/// Time base of a schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    Discrete,
    /// Continuous time, samples `h` apart with linear interpolation in between.
    Continuous { h: f64 },
}

impl Clock {
    pub fn step(&self) -> f64 {
        match *self {
            Clock::Discrete => 1.0,
            Clock::Continuous { h } => h,
        }
    }
}

/// Parameter trajectory sampled at `t_k = k * clock.step()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub clock: Clock,
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Schedule {
    /// Constant schedule.
    pub fn constant(p: Vec<f64>, steps: usize, clock: Clock) -> Self {
        Self { clock, samples: vec![p; steps + 1], seed: 0 }
    }

    pub fn steps(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    /// Every sample lies in `P` and every difference (or slope) lies in `V`.
    pub fn is_admissible(&self, p: &ParamBox, v: &ParamBox, tol: f64) -> bool {
        let h = self.clock.step();
        self.samples.iter().all(|s| p.contains(s, tol))
            && self.samples.windows(2).all(|w| {
                let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| (b - a) / h).collect();
                v.contains(&d, tol)
            })
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// Random admissible schedule with `horizon` steps.
///
/// Discrete time: `p(t+1) = clamp_P(p(t) + v)` with `v` uniform in `V`. Continuous time:
/// slopes drawn at a random vertex of `V` half the time and uniformly otherwise, held for
/// one step and clamped to `P`. Clamping only shortens a step toward zero, so `V` must
/// contain the origin.
pub fn random_schedule(p: &ParamBox, v: &ParamBox, horizon: usize, seed: u64, clock: Clock) -> Result<Schedule> {
    if p.dim() != v.dim() {
        return input_err("parameter and rate boxes differ in dimension");
    }
    if horizon == 0 {
        return input_err("schedule horizon must be at least 1");
    }
    if let Clock::Continuous { h } = clock {
        if !(h > 0.0) {
            return input_err("continuous-time step must be positive");
        }
    }
    for i in 0..p.dim() {
        if v.lower()[i] > 0.0 || v.upper()[i] < 0.0 {
            return input_err(format!("rate box must contain 0 in coordinate {i}"));
        }
        if p.is_degenerate(i) && !v.is_degenerate(i) {
            return input_err(format!("nonzero rate demanded along degenerate parameter axis {i}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = clock.step();
    let n = p.dim();
    let mut cur: Vec<f64> = (0..n).map(|i| uniform(&mut rng, p.lower()[i], p.upper()[i])).collect();
    let mut samples = Vec::with_capacity(horizon + 1);
    samples.push(cur.clone());
    for _ in 0..horizon {
        let extremal = matches!(clock, Clock::Continuous { .. }) && rng.gen_bool(0.5);
        let rate: Vec<f64> = (0..n)
            .map(|i| {
                let (lo, hi) = (v.lower()[i], v.upper()[i]);
                if extremal {
                    if rng.gen_bool(0.5) { hi } else { lo }
                } else {
                    uniform(&mut rng, lo, hi)
                }
            })
            .collect();
        let next: Vec<f64> = cur.iter().zip(&rate).map(|(x, r)| x + h * r).collect();
        cur = p.clamp(&next);
        samples.push(cur.clone());
    }
    Ok(Schedule { clock, samples, seed })
}
