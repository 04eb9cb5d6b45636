//! Parameter search: seeded random sampling followed by adaptive-step
//! gradient ascent.
//!
//! The search vector holds the free intensities of each basis (the smallest
//! one is pinned to the floor), the conditional probabilities of each basis
//! and `p_Z`; `p_X = 1 - p_Z`. In the constrained mode both bases share one
//! intensity ladder.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::ChannelParams;
use crate::decoy_algebra::{Basis, IntensityLadder, DEFAULT_MIN_SEPARATION};
use crate::error::{Error, Result};
use crate::key_rate::{evaluate, FiniteKeySettings, KeyRateReport, ProtocolParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// independent ladders per basis
    G,
    /// one ladder shared by both bases
    R,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::G => "G",
            Mode::R => "R",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "G" | "g" => Ok(Mode::G),
            "R" | "r" => Ok(Mode::R),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub k_x: usize,
    pub k_z: usize,
    pub mode: Mode,
    /// pinned value of the smallest intensity in each basis
    pub floor: f64,
    pub mu_max: f64,
    /// smallest probability any conditional or basis probability may take
    pub prob_min: f64,
    pub min_separation: f64,
}

impl SearchSpace {
    pub fn new(k_x: usize, k_z: usize, mode: Mode) -> Result<Self> {
        let space = Self {
            k_x,
            k_z,
            mode,
            floor: 1e-6,
            mu_max: 1.0,
            prob_min: 1e-6,
            min_separation: DEFAULT_MIN_SEPARATION,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_x < 2 || self.k_z < 2 {
            return Err(Error::InvalidParameter(format!(
                "k_x = {}, k_z = {} must both be at least 2",
                self.k_x, self.k_z
            )));
        }
        if self.mode == Mode::R && self.k_x != self.k_z {
            return Err(Error::InvalidParameter(
                "shared-ladder mode needs k_x = k_z".into(),
            ));
        }
        let k = self.k_x.max(self.k_z) as f64;
        if !(self.floor >= 0.0 && self.floor + k * self.min_separation < self.mu_max) {
            return Err(Error::InvalidParameter(
                "intensity range too narrow for the ladder".into(),
            ));
        }
        if !(self.prob_min > 0.0 && self.prob_min * k < 1.0) {
            return Err(Error::InvalidParameter("prob_min out of range".into()));
        }
        Ok(())
    }

    /// Length of the search vector.
    pub fn dim(&self) -> usize {
        let mu = match self.mode {
            Mode::G => (self.k_x - 1) + (self.k_z - 1),
            Mode::R => self.k_x - 1,
        };
        mu + self.k_x + self.k_z + 1
    }

    pub fn label(&self) -> String {
        format!("({},{})_{}", self.k_x, self.k_z, self.mode)
    }
}

/// A point of the search space.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub mu_x: Vec<f64>,
    pub p_x: Vec<f64>,
    pub mu_z: Vec<f64>,
    pub p_z: Vec<f64>,
    /// basis probability `p_Z`
    pub basis_z: f64,
}

impl Candidate {
    pub fn protocol(&self) -> Result<ProtocolParams> {
        Ok(ProtocolParams {
            ladder_x: IntensityLadder::new(
                Basis::X,
                self.mu_x.clone(),
                self.p_x.clone(),
                1.0 - self.basis_z,
            )?,
            ladder_z: IntensityLadder::new(
                Basis::Z,
                self.mu_z.clone(),
                self.p_z.clone(),
                self.basis_z,
            )?,
        })
    }

    /// Flattens into the search vector of `space`.
    pub fn encode(&self, space: &SearchSpace) -> Vec<f64> {
        let mut v = Vec::with_capacity(space.dim());
        v.extend_from_slice(&self.mu_x[..space.k_x - 1]);
        if space.mode == Mode::G {
            v.extend_from_slice(&self.mu_z[..space.k_z - 1]);
        }
        v.extend_from_slice(&self.p_x);
        v.extend_from_slice(&self.p_z);
        v.push(self.basis_z);
        v
    }

    /// Rebuilds a candidate from a search vector and projects it onto the
    /// feasible set.
    pub fn decode(v: &[f64], space: &SearchSpace) -> Self {
        let (kx, kz) = (space.k_x, space.k_z);
        let mut at = 0;
        let mut take = |n: usize| {
            let s = v[at..at + n].to_vec();
            at += n;
            s
        };
        let mu_x_free = take(kx - 1);
        let mu_z_free = match space.mode {
            Mode::G => take(kz - 1),
            Mode::R => mu_x_free.clone(),
        };
        let p_x = take(kx);
        let p_z = take(kz);
        let basis_z = take(1)[0];
        let mut c = Self {
            mu_x: mu_x_free,
            p_x,
            mu_z: mu_z_free,
            p_z,
            basis_z,
        };
        c.project(space);
        c
    }

    /// Restores every constraint: descending intensities with the floor
    /// pinned and neighbours at least the minimum separation apart, and
    /// probabilities on the simplex above `prob_min`.
    pub fn project(&mut self, space: &SearchSpace) {
        self.mu_x = project_ladder(&self.mu_x, space.k_x, space);
        self.mu_z = match space.mode {
            Mode::G => project_ladder(&self.mu_z, space.k_z, space),
            Mode::R => self.mu_x.clone(),
        };
        self.p_x = project_simplex(&self.p_x, space.prob_min);
        self.p_z = project_simplex(&self.p_z, space.prob_min);
        let b = if self.basis_z.is_finite() { self.basis_z } else { 0.5 };
        self.basis_z = b.clamp(space.prob_min, 1.0 - space.prob_min);
    }

    pub fn is_feasible(&self, space: &SearchSpace) -> bool {
        let ladder_ok = |mu: &[f64], k: usize| {
            mu.len() == k
                && mu[k - 1] == space.floor
                && mu[0] <= space.mu_max
                && mu.windows(2).all(|w| w[0] - w[1] >= space.min_separation)
        };
        let probs_ok = |p: &[f64]| {
            p.iter().all(|&x| x >= space.prob_min) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-12
        };
        ladder_ok(&self.mu_x, space.k_x)
            && ladder_ok(&self.mu_z, space.k_z)
            && (space.mode == Mode::G || self.mu_x == self.mu_z)
            && probs_ok(&self.p_x)
            && probs_ok(&self.p_z)
            && self.basis_z >= space.prob_min
            && self.basis_z <= 1.0 - space.prob_min
            && self.protocol().is_ok()
    }
}

fn project_ladder(free: &[f64], k: usize, space: &SearchSpace) -> Vec<f64> {
    // a hair over the minimum so the separation survives rounding
    let sep = space.min_separation * (1.0 + 1e-9);
    let mut mu: Vec<f64> = free
        .iter()
        .take(k - 1)
        .map(|&m| if m.is_finite() { m } else { space.mu_max })
        .collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    mu.push(space.floor);
    for i in (0..k - 1).rev() {
        mu[i] = mu[i].max(mu[i + 1] + sep);
    }
    if mu[0] > space.mu_max {
        mu[0] = space.mu_max;
        for i in 1..k - 1 {
            mu[i] = mu[i].min(mu[i - 1] - sep);
        }
    }
    mu
}

fn project_simplex(p: &[f64], min: f64) -> Vec<f64> {
    let clipped: Vec<f64> = p
        .iter()
        .map(|&x| if x.is_finite() { x.max(min) } else { min })
        .collect();
    let total: f64 = clipped.iter().sum();
    let mut out: Vec<f64> = clipped.iter().map(|x| (x / total).max(min)).collect();
    let resid = 1.0 - out.iter().sum::<f64>();
    let big = (0..out.len())
        .max_by(|&a, &b| out[a].total_cmp(&out[b]))
        .unwrap_or(0);
    out[big] += resid;
    out
}

fn simplex_draw<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|d| d / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub samples: usize,
    /// how many of the best random draws are refined by descent
    pub descent_starts: usize,
    pub descent_iterations: usize,
    pub initial_step: f64,
    pub growth: f64,
    pub shrink: f64,
    pub min_step: f64,
    /// central-difference half-width
    pub gradient_step: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            descent_starts: 4,
            descent_iterations: 2_000,
            initial_step: 1e-2,
            growth: 2.0,
            shrink: 0.5,
            min_step: 1e-9,
            gradient_step: 1e-5,
            seed: 2020,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.descent_starts == 0 && self.samples == 0 {
            return Err(Error::InvalidParameter("nothing to search".into()));
        }
        if !(self.growth > 0.0 && self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter(
                "step adaptation factors must be positive, shrink below 1".into(),
            ));
        }
        if !(self.initial_step > 0.0 && self.min_step > 0.0 && self.gradient_step > 0.0) {
            return Err(Error::InvalidParameter("step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Candidate with its objective value; `-inf` marks an infeasible point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub candidate: Candidate,
    pub value: f64,
}

/// Draw `index` of the random search seeded with `seed`.
pub fn random_candidate(space: &SearchSpace, seed: u64, index: u64) -> Candidate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let lo = space.floor;
    let hi = space.mu_max;
    let mu_x: Vec<f64> = (0..space.k_x - 1).map(|_| rng.gen_range(lo..hi)).collect();
    let mu_z: Vec<f64> = match space.mode {
        Mode::G => (0..space.k_z - 1).map(|_| rng.gen_range(lo..hi)).collect(),
        Mode::R => mu_x.clone(),
    };
    let p_x = simplex_draw(&mut rng, space.k_x);
    let p_z = simplex_draw(&mut rng, space.k_z);
    let basis_z = rng.gen_range(space.prob_min..1.0 - space.prob_min);
    let mut c = Candidate {
        mu_x,
        p_x,
        mu_z,
        p_z,
        basis_z,
    };
    c.project(space);
    c
}

fn better(a: &(f64, usize), b: &(f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Evaluates `config.samples` seeded draws in parallel and returns the best
/// `n_best` of them, best first. Ties go to the lower draw index, so the
/// result does not depend on scheduling.
pub fn random_sample_top<F>(
    space: &SearchSpace,
    config: &SearchConfig,
    n_best: usize,
    objective: &F,
) -> Vec<Scored>
where
    F: Fn(&Candidate) -> f64 + Sync,
{
    let mut scored: Vec<(f64, usize)> = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let c = random_candidate(space, config.seed, i as u64);
            let v = objective(&c);
            (if v.is_nan() { f64::NEG_INFINITY } else { v }, i)
        })
        .collect();
    scored.sort_by(|a, b| {
        if better(a, b) {
            std::cmp::Ordering::Less
        } else if better(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    scored
        .into_iter()
        .take(n_best)
        .map(|(value, i)| Scored {
            candidate: random_candidate(space, config.seed, i as u64),
            value,
        })
        .collect()
}

/// Best of `config.samples` seeded random draws; `None` when there were no
/// draws.
pub fn random_sample<F>(space: &SearchSpace, config: &SearchConfig, objective: &F) -> Option<Scored>
where
    F: Fn(&Candidate) -> f64 + Sync,
{
    random_sample_top(space, config, 1, objective).into_iter().next()
}

fn partial<F>(x: &[f64], i: usize, space: &SearchSpace, h: f64, objective: &F, f0: f64) -> f64
where
    F: Fn(&Candidate) -> f64,
{
    let eval = |v: &[f64]| objective(&Candidate::decode(v, space));
    let mut up = x.to_vec();
    let mut down = x.to_vec();
    up[i] += h;
    down[i] -= h;
    let fu = eval(&up);
    let fd = eval(&down);
    // fall back to a one-sided difference at the edge of feasibility
    match (fu.is_finite(), fd.is_finite()) {
        (true, true) => (fu - fd) / (2.0 * h),
        (true, false) => (fu - f0) / h,
        (false, true) => (f0 - fd) / h,
        (false, false) => 0.0,
    }
}

/// Coordinate-wise gradient ascent from `start`. Each coordinate keeps its
/// own step: a sweep moves every coordinate by its step in the direction of
/// its central-difference slope, doubling that step when the move improves
/// the objective and halving it otherwise. Stops when every step is below
/// `min_step` or after `descent_iterations` sweeps. Only improving moves are
/// accepted, so the result is never worse than `start`.
pub fn adaptive_descent<F>(
    start: &Scored,
    space: &SearchSpace,
    config: &SearchConfig,
    objective: &F,
) -> Scored
where
    F: Fn(&Candidate) -> f64,
{
    let mut best = start.clone();
    if !best.value.is_finite() {
        return best;
    }
    let mut x = best.candidate.encode(space);
    let mut steps = vec![config.initial_step; x.len()];
    for _ in 0..config.descent_iterations {
        if steps.iter().all(|&s| s < config.min_step) {
            break;
        }
        for i in 0..x.len() {
            if steps[i] < config.min_step {
                continue;
            }
            let slope = partial(&x, i, space, config.gradient_step, objective, best.value);
            if slope == 0.0 || !slope.is_finite() {
                steps[i] *= config.shrink;
                continue;
            }
            let mut trial = x.clone();
            trial[i] += steps[i] * slope.signum();
            let cand = Candidate::decode(&trial, space);
            let v = objective(&cand);
            if v > best.value {
                x = cand.encode(space);
                best = Scored {
                    candidate: cand,
                    value: v,
                };
                steps[i] *= config.growth;
            } else {
                steps[i] *= config.shrink;
            }
        }
    }
    best
}

/// Random sampling, then descent from each of the `descent_starts` best
/// draws; the best refined point wins (earlier start on ties).
pub fn search<F>(space: &SearchSpace, config: &SearchConfig, objective: &F) -> Option<Scored>
where
    F: Fn(&Candidate) -> f64 + Sync,
{
    let starts = random_sample_top(space, config, config.descent_starts.max(1), objective);
    let refined: Vec<Scored> = starts
        .par_iter()
        .map(|s| adaptive_descent(s, space, config, objective))
        .collect();
    let mut best: Option<Scored> = None;
    for r in refined {
        if best.as_ref().map_or(true, |b| r.value > b.value) {
            best = Some(r);
        }
    }
    best
}

/// Optimised operating point at one distance.
#[derive(Debug, Clone)]
pub struct OptimizedPoint {
    pub distance_km: f64,
    pub candidate: Option<Candidate>,
    pub report: Option<KeyRateReport>,
}

impl OptimizedPoint {
    /// Secure key rate, 0 when nothing feasible was found.
    pub fn rate(&self) -> f64 {
        self.report.as_ref().map_or(0.0, |r| r.rate)
    }
}

/// Objective used by the search: the unclamped rate, so that the ascent can
/// climb out of regions where the clamped rate is flat at zero.
pub fn rate_objective(
    candidate: &Candidate,
    channel: &ChannelParams,
    settings: &FiniteKeySettings,
) -> f64 {
    let Ok(protocol) = candidate.protocol() else {
        return f64::NEG_INFINITY;
    };
    match evaluate(&protocol, channel, settings) {
        Ok(r) if r.raw_rate.is_finite() => r.raw_rate,
        _ => f64::NEG_INFINITY,
    }
}

/// Optimises the protocol parameters at `distance_km`, with the relay in
/// the middle, and re-evaluates the winner from scratch for the report.
pub fn optimize_point(
    distance_km: f64,
    channel: &ChannelParams,
    settings: &FiniteKeySettings,
    space: &SearchSpace,
    config: &SearchConfig,
) -> Result<OptimizedPoint> {
    optimize_channel(&channel.with_distance(distance_km), settings, space, config)
}

/// As [`optimize_point`] for a channel whose fibre lengths are already set.
pub fn optimize_channel(
    channel: &ChannelParams,
    settings: &FiniteKeySettings,
    space: &SearchSpace,
    config: &SearchConfig,
) -> Result<OptimizedPoint> {
    space.validate()?;
    config.validate()?;
    channel.validate()?;
    let distance_km = channel.length_a_km + channel.length_b_km;
    let objective = |c: &Candidate| rate_objective(c, channel, settings);
    let best = search(space, config, &objective).filter(|s| s.value.is_finite());
    let Some(best) = best else {
        return Ok(OptimizedPoint {
            distance_km,
            candidate: None,
            report: None,
        });
    };
    let report = evaluate(&best.candidate.protocol()?, channel, settings)?;
    Ok(OptimizedPoint {
        distance_km,
        candidate: Some(best.candidate),
        report: Some(report),
    })
}
