//! Vandermonde-inversion machinery for decoy-state estimation.
//!
//! With a phase-randomized Poissonian source, the gain observed at intensity
//! `mu_i` is `e^{-mu_i} sum_a mu_i^a/a! Y_a`. Inverting the `k x k` moment
//! matrix `M_{a+1,i} = mu_i^a / a!` recovers the low-photon yields up to a
//! tail made of the `C_{a+1,I}` coefficients (`I >= k`). The sign pattern of
//! those coefficients decides which subset of intensities yields an upper or a
//! lower bound, which is why the coefficient sets below come in an "even" and
//! an "odd" flavour.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::{elementary_symmetric, exp_tail_over_mu, factorial};

pub const DEFAULT_MIN_SEPARATION: f64 = 1e-4;

const PROB_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::X => f.write_str("X"),
            Basis::Z => f.write_str("Z"),
        }
    }
}

/// Intensities used in one preparation basis, strictly descending, together
/// with the conditional probabilities `p_{i|B}` and the basis probability
/// `p_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityLadder {
    basis: Basis,
    intensities: Vec<f64>,
    cond_probs: Vec<f64>,
    basis_prob: f64,
}

impl IntensityLadder {
    pub fn new(
        basis: Basis,
        intensities: Vec<f64>,
        cond_probs: Vec<f64>,
        basis_prob: f64,
    ) -> Result<Self> {
        Self::with_min_separation(
            basis,
            intensities,
            cond_probs,
            basis_prob,
            DEFAULT_MIN_SEPARATION,
        )
    }

    pub fn with_min_separation(
        basis: Basis,
        intensities: Vec<f64>,
        cond_probs: Vec<f64>,
        basis_prob: f64,
        min_separation: f64,
    ) -> Result<Self> {
        let k = intensities.len();
        if k < 2 {
            return Err(Error::InvalidLadder(format!(
                "{basis}: need at least 2 intensities, got {k}"
            )));
        }
        if cond_probs.len() != k {
            return Err(Error::InvalidLadder(format!(
                "{basis}: {} probabilities for {k} intensities",
                cond_probs.len()
            )));
        }
        if intensities.iter().any(|m| !m.is_finite()) || intensities[k - 1] < 0.0 {
            return Err(Error::InvalidLadder(format!(
                "{basis}: intensities must be finite and non-negative"
            )));
        }
        for w in intensities.windows(2) {
            if w[0] <= w[1] {
                return Err(Error::InvalidLadder(format!(
                    "{basis}: intensities not strictly descending ({} then {})",
                    w[0], w[1]
                )));
            }
            if w[0] - w[1] < min_separation {
                return Err(Error::InvalidLadder(format!(
                    "{basis}: separation {} below minimum {min_separation}",
                    w[0] - w[1]
                )));
            }
        }
        if cond_probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidLadder(format!(
                "{basis}: conditional probabilities must lie in (0, 1]"
            )));
        }
        let total: f64 = cond_probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidLadder(format!(
                "{basis}: conditional probabilities sum to {total}"
            )));
        }
        if !(basis_prob > 0.0 && basis_prob <= 1.0) {
            return Err(Error::InvalidLadder(format!(
                "{basis}: basis probability {basis_prob} outside (0, 1]"
            )));
        }
        Ok(Self {
            basis,
            intensities,
            cond_probs,
            basis_prob,
        })
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn k(&self) -> usize {
        self.intensities.len()
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn cond_probs(&self) -> &[f64] {
        &self.cond_probs
    }

    pub fn basis_prob(&self) -> f64 {
        self.basis_prob
    }

    /// `<f(mu)>_B = sum_i p_{i|B} f(mu_i)`.
    pub fn mean<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.intensities
            .iter()
            .zip(&self.cond_probs)
            .map(|(&m, &p)| p * f(m))
            .sum()
    }

    /// `<e^{-mu}>_B`
    pub fn mean_vacuum(&self) -> f64 {
        self.mean(|m| (-m).exp())
    }

    /// `<mu e^{-mu}>_B`
    pub fn mean_single(&self) -> f64 {
        self.mean(|m| m * (-m).exp())
    }

    /// Indices used by the "even" coefficient set: all intensities when `k`
    /// is even, all but the largest otherwise.
    pub fn even_subset(&self) -> std::ops::Range<usize> {
        if self.k() % 2 == 0 {
            0..self.k()
        } else {
            1..self.k()
        }
    }

    /// Indices used by the "odd" coefficient set.
    pub fn odd_subset(&self) -> std::ops::Range<usize> {
        if self.k() % 2 == 0 {
            1..self.k()
        } else {
            0..self.k()
        }
    }
}

/// Coefficient arrays `A^even_{j,i}` (j = 0, 1), `A^odd_{1,i}` and the tail
/// constant `C_2` for one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub a_even: [Vec<f64>; 2],
    pub a_odd: Vec<f64>,
    pub c_tail: f64,
}

impl CoefficientSet {
    pub fn k(&self) -> usize {
        self.a_odd.len()
    }
}

fn denominator(mu: f64, set: &[f64]) -> Result<f64> {
    let mut den = 1.0;
    for &s in set {
        let d = mu - s;
        if d == 0.0 {
            return Err(Error::DivisionByZero(mu));
        }
        den *= d;
    }
    Ok(den)
}

/// `A_0(mu, S) = -e^mu prod_{s in S} s / prod_{s in S} (mu - s)`.
pub fn generator_a0(mu: f64, set: &[f64]) -> Result<f64> {
    let den = denominator(mu, set)?;
    let num: f64 = set.iter().product();
    Ok(-mu.exp() * num / den)
}

/// `A_1(mu, S) = -e^mu sum_{s in S} prod_{s' != s} s' / prod_{s in S} (mu - s)`.
/// The numerator is `e_{|S|-1}(S)`, which vanishes for an empty set.
pub fn generator_a1(mu: f64, set: &[f64]) -> Result<f64> {
    let den = denominator(mu, set)?;
    let num = if set.is_empty() {
        0.0
    } else {
        elementary_symmetric(set, set.len() - 1)
    };
    Ok(-mu.exp() * num / den)
}

fn others(values: &[f64], skip: usize) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .filter(|&(t, _)| t != skip)
        .map(|(_, &v)| v)
        .collect()
}

/// Builds the coefficient set of a ladder. For even `k` the even set uses all
/// intensities and the odd set drops the largest one; for odd `k` it is the
/// other way round. Entries outside the relevant subset are zero.
pub fn coefficient_sets(ladder: &IntensityLadder) -> Result<CoefficientSet> {
    let mu = ladder.intensities();
    let k = mu.len();
    let mut a_even = [vec![0.0; k], vec![0.0; k]];
    let mut a_odd = vec![0.0; k];

    let even = ladder.even_subset();
    let even_mu = &mu[even.clone()];
    for i in even.clone() {
        let rest = others(even_mu, i - even.start);
        a_even[0][i] = generator_a0(mu[i], &rest)?;
        a_even[1][i] = generator_a1(mu[i], &rest)?;
    }

    let odd = ladder.odd_subset();
    let odd_mu = &mu[odd.clone()];
    for i in odd.clone() {
        let rest = others(odd_mu, i - odd.start);
        a_odd[i] = generator_a1(mu[i], &rest)?;
    }

    Ok(CoefficientSet {
        a_even,
        a_odd,
        c_tail: c_tail(ladder)?,
    })
}

/// Tail constant `C_2` bounding the neglected high-photon contributions in
/// the lower bounds of `Y_{1,1}`, computed on the odd subset `S` (size `n`):
///
/// `C_2 = e_{n-1}(S) sum_{i in S} [e^{mu_i} - sum_{j<n} mu_i^j/j!] / (mu_i prod_{t != i}(mu_i - mu_t))`
///
/// A term with `mu_i = 0` contributes 0.
pub fn c_tail(ladder: &IntensityLadder) -> Result<f64> {
    let mu = &ladder.intensities()[ladder.odd_subset()];
    c_tail_on_subset(mu)
}

pub(crate) fn c_tail_on_subset(mu: &[f64]) -> Result<f64> {
    let n = mu.len();
    let prefactor = elementary_symmetric(mu, n - 1);
    let mut sum = 0.0;
    for (i, &m) in mu.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let den = denominator(m, &others(mu, i))?;
        sum += exp_tail_over_mu(m, n) / den;
    }
    Ok(prefactor * sum)
}

/// Row `a + 1` of the inverse of the moment matrix `M_{a+1,i} = mu_i^a / a!`:
///
/// `(M^{-1})_{a+1,i} = (-1)^{k-a-1} a! S_{ia} / prod_{t != i}(mu_i - mu_t)`
///
/// with `S_{ia}` the elementary symmetric polynomial of degree `k - a - 1`
/// over all intensities except `mu_i`.
pub fn vandermonde_inverse_row(intensities: &[f64], a: usize) -> Result<Vec<f64>> {
    let k = intensities.len();
    if a >= k {
        return Err(Error::InvalidParameter(format!(
            "row index a = {a} out of range for k = {k}"
        )));
    }
    let sign = if (k - a - 1) % 2 == 0 { 1.0 } else { -1.0 };
    let a_fact = factorial(a);
    (0..k)
        .map(|i| {
            let rest = others(intensities, i);
            let den = denominator(intensities[i], &rest)?;
            let s = elementary_symmetric(&rest, k - a - 1);
            Ok(sign * a_fact * s / den)
        })
        .collect()
}

/// `C_{a+1,i} = ((-1)^{k-a} a!/i!) sum_t mu_t^i S_{ta} / prod_{l != t}(mu_t - mu_l)`.
///
/// For `i < k` this is `-delta_{a,i}`; for `i >= k` it is the coefficient
/// of the neglected yield `Y_i` in the inverted estimate of `Y_a`.
pub fn c_coefficient(intensities: &[f64], a: usize, i: usize) -> Result<f64> {
    let k = intensities.len();
    if a >= k {
        return Err(Error::InvalidParameter(format!(
            "row index a = {a} out of range for k = {k}"
        )));
    }
    let sign = if (k - a) % 2 == 0 { 1.0 } else { -1.0 };
    let mut sum = 0.0;
    for (t, &m) in intensities.iter().enumerate() {
        let rest = others(intensities, t);
        let den = denominator(m, &rest)?;
        let s = elementary_symmetric(&rest, k - a - 1);
        sum += m.powi(i as i32) * s / den;
    }
    Ok(sign * factorial(a) / factorial(i) * sum)
}

/// `sum_i mu_i^l / prod_{t != i}(mu_i - mu_t)`; vanishes for `l <= k - 2`.
pub fn divided_power_sum(intensities: &[f64], l: usize) -> Result<f64> {
    let mut sum = 0.0;
    for (i, &m) in intensities.iter().enumerate() {
        let den = denominator(m, &others(intensities, i))?;
        sum += m.powi(l as i32) / den;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder(mu: &[f64]) -> IntensityLadder {
        let k = mu.len();
        IntensityLadder::new(Basis::X, mu.to_vec(), vec![1.0 / k as f64; k], 0.5).unwrap()
    }

    #[test]
    fn a0_zero_element_annihilates() {
        assert_eq!(generator_a0(1.0, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn a0_singleton_value() {
        // -e^0.5 * 0.1 / 0.4
        let v = generator_a0(0.5, &[0.1]).unwrap();
        assert!((v - (-0.412_180_317_675_032_05)).abs() < 1e-15);
    }

    #[test]
    fn a1_singleton_value() {
        let v = generator_a1(0.5, &[0.1]).unwrap();
        assert!((v - (-4.121_803_176_750_320_5)).abs() < 1e-14);
    }

    #[test]
    fn a1_with_zero_keeps_single_summand() {
        let mu: f64 = 0.7;
        let v = generator_a1(mu, &[0.0, 0.3]).unwrap();
        let expect = -mu.exp() * 0.3 / ((mu - 0.0) * (mu - 0.3));
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn generators_reject_coincident_intensity() {
        assert_eq!(
            generator_a0(0.2, &[0.1, 0.2]),
            Err(Error::DivisionByZero(0.2))
        );
        assert!(generator_a1(0.2, &[0.2]).is_err());
    }

    #[test]
    fn a1_empty_set_is_zero() {
        assert_eq!(generator_a1(0.3, &[]).unwrap(), 0.0);
    }

    #[test]
    fn k2_odd_set_degenerates_to_zero() {
        let c = coefficient_sets(&ladder(&[0.5, 0.1])).unwrap();
        assert_eq!(c.a_odd, vec![0.0, 0.0]);
        assert!(c.a_even[0][0] != 0.0 && c.a_even[0][1] != 0.0);
    }

    #[test]
    fn k3_even_set_drops_largest() {
        let c = coefficient_sets(&ladder(&[0.6, 0.2, 0.01])).unwrap();
        assert_eq!(c.a_even[0][0], 0.0);
        assert_eq!(c.a_even[1][0], 0.0);
        assert!(c.a_odd.iter().all(|&a| a != 0.0));
    }

    #[test]
    fn c_tail_k2_value() {
        let v = c_tail(&ladder(&[0.5, 0.1])).unwrap();
        assert!((v - 1.051_709_180_756_476_2).abs() < 1e-14);
    }

    #[test]
    fn c_tail_zero_intensity_term_vanishes() {
        // k = 2 with a vacuum decoy: the only odd-set term sits at mu = 0.
        let v = c_tail(&ladder(&[0.5, 0.0])).unwrap();
        assert_eq!(v, 0.0);
        // k = 3: the mu = 0 term is dropped but the others survive.
        let with_zero = c_tail(&ladder(&[0.5, 0.2, 0.0])).unwrap();
        assert!(with_zero > 0.0);
    }

    #[test]
    fn ladder_validation() {
        assert!(IntensityLadder::new(Basis::Z, vec![0.5], vec![1.0], 0.5).is_err());
        assert!(IntensityLadder::new(Basis::Z, vec![0.1, 0.5], vec![0.5, 0.5], 0.5).is_err());
        assert!(
            IntensityLadder::new(Basis::Z, vec![0.5, 0.49995], vec![0.5, 0.5], 0.5).is_err()
        );
        assert!(IntensityLadder::new(Basis::Z, vec![0.5, 0.1], vec![0.5, 0.6], 0.5).is_err());
        assert!(IntensityLadder::new(Basis::Z, vec![0.5, 0.1], vec![1.0, 0.0], 0.5).is_err());
        assert!(IntensityLadder::new(Basis::Z, vec![0.5, -0.1], vec![0.5, 0.5], 0.5).is_err());
        assert!(IntensityLadder::new(Basis::Z, vec![0.5, 0.0], vec![0.5, 0.5], 0.5).is_ok());
    }

    #[test]
    fn inverse_row_k1() {
        assert_eq!(vandermonde_inverse_row(&[0.3], 0).unwrap(), vec![1.0]);
    }

    #[test]
    fn c_coefficient_diagonal_and_offdiagonal() {
        let mu = [0.8, 0.3, 0.05];
        assert!((c_coefficient(&mu, 0, 0).unwrap() + 1.0).abs() < 1e-12);
        assert!(c_coefficient(&mu, 1, 0).unwrap().abs() < 1e-12);
    }
}
