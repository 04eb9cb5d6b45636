//! Bounds on the vacuum and two-single-photon yields obtained by applying the
//! decoy coefficient sets to gain and error statistics.

use crate::decoy_algebra::{Basis, CoefficientSet, IntensityLadder};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// Gains `Q_{B,i,j}` and error rates `E_{B,i,j}` for every intensity pair in
/// one basis, stored row-major (`i` is Alice's intensity index).
#[derive(Debug, Clone, PartialEq)]
pub struct GainStatistics {
    basis: Basis,
    k: usize,
    gains: Vec<f64>,
    error_rates: Vec<f64>,
    zero_gain: Vec<bool>,
}

impl GainStatistics {
    pub fn new(basis: Basis, k: usize, gains: Vec<f64>, error_rates: Vec<f64>) -> Result<Self> {
        let zero_gain = gains.iter().map(|&q| q == 0.0).collect();
        Self::with_zero_gain_flags(basis, k, gains, error_rates, zero_gain)
    }

    pub(crate) fn with_zero_gain_flags(
        basis: Basis,
        k: usize,
        gains: Vec<f64>,
        error_rates: Vec<f64>,
        zero_gain: Vec<bool>,
    ) -> Result<Self> {
        if gains.len() != k * k || error_rates.len() != k * k || zero_gain.len() != k * k {
            return Err(Error::DimensionMismatch(format!(
                "{basis}: expected {k}x{k} matrices, got {} gains and {} error rates",
                gains.len(),
                error_rates.len()
            )));
        }
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !gains.iter().all(in_unit) || !error_rates.iter().all(in_unit) {
            return Err(Error::InvalidParameter(format!(
                "{basis}: gains and error rates must lie in [0, 1]"
            )));
        }
        Ok(Self {
            basis,
            k,
            gains,
            error_rates,
            zero_gain,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        self.gains[i * self.k + j]
    }

    pub fn e(&self, i: usize, j: usize) -> f64 {
        self.error_rates[i * self.k + j]
    }

    pub fn qe(&self, i: usize, j: usize) -> f64 {
        self.q(i, j) * self.e(i, j)
    }

    /// `Q E-bar = Q (1 - E)`.
    pub fn qe_bar(&self, i: usize, j: usize) -> f64 {
        self.q(i, j) * (1.0 - self.e(i, j))
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn error_rates(&self) -> &[f64] {
        &self.error_rates
    }

    /// True when some intensity pair had zero gain and its error rate was
    /// filled in by convention.
    pub fn has_zero_gain(&self) -> bool {
        self.zero_gain.iter().any(|&z| z)
    }

    /// `<f(i,j)>_{i,j} = sum_{i,j} p_i p_j f(i,j)` with the ladder's
    /// conditional probabilities.
    pub fn pair_mean<F: Fn(usize, usize) -> f64>(&self, ladder: &IntensityLadder, f: F) -> f64 {
        let p = ladder.cond_probs();
        let mut sum = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                sum += p[i] * p[j] * f(i, j);
            }
        }
        sum
    }

    /// `<Q>_{i,j}`
    pub fn mean_gain(&self, ladder: &IntensityLadder) -> f64 {
        self.pair_mean(ladder, |i, j| self.q(i, j))
    }

    /// `<Q E>_{i,j}`
    pub fn mean_error_gain(&self, ladder: &IntensityLadder) -> f64 {
        self.pair_mean(ladder, |i, j| self.qe(i, j))
    }

    /// `<Q E-bar>_{i,j}`
    pub fn mean_correct_gain(&self, ladder: &IntensityLadder) -> f64 {
        self.pair_mean(ladder, |i, j| self.qe_bar(i, j))
    }
}

/// The five yield bounds before clamping.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawYieldBounds {
    pub y0_star_lower: f64,
    pub y11_lower: f64,
    pub ye11_upper: f64,
    pub ye11_lower: f64,
    pub ybar11_lower: f64,
}

/// Yield bounds for one basis, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YieldBounds {
    /// lower bound on `Y_{0,*}`
    pub y0_star_lower: f64,
    /// lower bound on `Y_{1,1}`
    pub y11_lower: f64,
    /// upper bound on `Y_{1,1} e_{1,1}`
    pub ye11_upper: f64,
    /// lower bound on `Y_{1,1} e_{1,1}`
    pub ye11_lower: f64,
    /// lower bound on `Y_{1,1} (1 - e_{1,1})`
    pub ybar11_lower: f64,
    pub raw: RawYieldBounds,
    /// A raw lower bound was `<= 0` or the raw upper bound `>= 1`.
    pub vacuous: bool,
}

fn quadratic_form<F: Fn(usize, usize) -> f64>(a: &[f64], b: &[f64], value: F) -> f64 {
    let mut terms = Vec::with_capacity(a.len() * b.len());
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj != 0.0 {
                terms.push(ai * bj * value(i, j));
            }
        }
    }
    compensated_sum(&mut terms)
}

pub fn compute_bounds(
    stats: &GainStatistics,
    coeffs: &CoefficientSet,
    ladder: &IntensityLadder,
) -> Result<YieldBounds> {
    let k = ladder.k();
    if stats.k() != k || coeffs.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "ladder has k = {k}, statistics k = {}, coefficients k = {}",
            stats.k(),
            coeffs.k()
        )));
    }
    if stats.basis() != ladder.basis() {
        return Err(Error::DimensionMismatch(format!(
            "statistics basis {} differs from ladder basis {}",
            stats.basis(),
            ladder.basis()
        )));
    }

    let c2 = coeffs.c_tail * coeffs.c_tail;
    let a0 = &coeffs.a_even[0];
    let a1 = &coeffs.a_even[1];
    let odd = &coeffs.a_odd;

    let y0_star_lower = quadratic_form(a0, ladder.cond_probs(), |i, j| stats.q(i, j));
    let raw = RawYieldBounds {
        y0_star_lower,
        y11_lower: quadratic_form(odd, odd, |i, j| stats.q(i, j)) - c2,
        ye11_upper: quadratic_form(a1, a1, |i, j| stats.qe(i, j)),
        ye11_lower: quadratic_form(odd, odd, |i, j| stats.qe(i, j)) - c2,
        ybar11_lower: quadratic_form(odd, odd, |i, j| stats.qe_bar(i, j)) - c2,
    };
    let vacuous = raw.y0_star_lower <= 0.0
        || raw.y11_lower <= 0.0
        || raw.ye11_lower <= 0.0
        || raw.ybar11_lower <= 0.0
        || raw.ye11_upper >= 1.0;
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    Ok(YieldBounds {
        y0_star_lower: clamp(raw.y0_star_lower),
        y11_lower: clamp(raw.y11_lower),
        ye11_upper: clamp(raw.ye11_upper),
        ye11_lower: clamp(raw.ye11_lower),
        ybar11_lower: clamp(raw.ybar11_lower),
        raw,
        vacuous,
    })
}

/// `Y_{0,*} = sum_j p_{j|B} Y~_{0,j}`.
pub fn y0_star_decomposition(ladder: &IntensityLadder, vacuum_yields: &[f64]) -> Result<f64> {
    if vacuum_yields.len() != ladder.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} vacuum yields for k = {}",
            vacuum_yields.len(),
            ladder.k()
        )));
    }
    Ok(ladder
        .cond_probs()
        .iter()
        .zip(vacuum_yields)
        .map(|(p, y)| p * y)
        .sum())
}
