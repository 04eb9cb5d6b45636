//! Analytic gains and error rates of a linear-optics partial Bell-state
//! measurement over lossy fibre with dark counts and misalignment.

use crate::decoy_algebra::{Basis, IntensityLadder};
use crate::error::{Error, Result};
use crate::yield_bounds::GainStatistics;

/// Error rate of a random outcome.
pub const E0: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// misalignment probability `e_d`
    pub misalignment: f64,
    /// dark count probability per detector per gate `p_d`
    pub dark_count: f64,
    /// fibre loss in dB/km
    pub attenuation_db_per_km: f64,
    /// detector efficiency `eta_d`
    pub detector_efficiency: f64,
    /// Alice-to-relay fibre length in km
    pub length_a_km: f64,
    /// Bob-to-relay fibre length in km
    pub length_b_km: f64,
}

impl ChannelParams {
    /// Symmetric placement of the relay: `L_A = L_B = L / 2`.
    pub fn with_distance(mut self, total_km: f64) -> Self {
        self.length_a_km = total_km / 2.0;
        self.length_b_km = total_km / 2.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1)")))
            }
        };
        prob("misalignment", self.misalignment)?;
        prob("dark_count", self.dark_count)?;
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "detector_efficiency = {} outside (0, 1]",
                self.detector_efficiency
            )));
        }
        if !(self.attenuation_db_per_km >= 0.0) {
            return Err(Error::InvalidParameter(
                "attenuation must be non-negative".into(),
            ));
        }
        if !(self.length_a_km >= 0.0 && self.length_b_km >= 0.0) {
            return Err(Error::InvalidParameter("fibre lengths must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmittances {
    pub eta_a: f64,
    pub eta_b: f64,
}

/// Modified Bessel function of the first kind of order zero, from its power
/// series. The arguments that occur here are far below 1.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * m);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
    }
}

pub fn transmittance(params: &ChannelParams) -> Transmittances {
    let eta = |len: f64| {
        params.detector_efficiency * 10f64.powf(-params.attenuation_db_per_km * len / 10.0)
    };
    Transmittances {
        eta_a: eta(params.length_a_km),
        eta_b: eta(params.length_b_km),
    }
}

/// `alpha_{ij} = sqrt(eta_A mu_i eta_B mu_j) / 2`, Alice's intensity in the
/// first factor and Bob's in the second.
pub fn alpha(eta: Transmittances, mu_a: f64, mu_b: f64) -> f64 {
    (eta.eta_a * mu_a * eta.eta_b * mu_b).sqrt() / 2.0
}

fn collect(
    basis: Basis,
    k: usize,
    mut pair: impl FnMut(usize, usize) -> (f64, f64),
) -> Result<GainStatistics> {
    let mut gains = Vec::with_capacity(k * k);
    let mut errors = Vec::with_capacity(k * k);
    let mut zero = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let (q, qe) = pair(i, j);
            // rounding can push tiny values a hair outside [0, q]
            let q = q.clamp(0.0, 1.0);
            if q > 0.0 {
                gains.push(q);
                errors.push((qe / q).clamp(0.0, 1.0));
                zero.push(false);
            } else {
                gains.push(0.0);
                errors.push(E0);
                zero.push(true);
            }
        }
    }
    GainStatistics::with_zero_gain_flags(basis, k, gains, errors, zero)
}

fn check_basis(ladder: &IntensityLadder, basis: Basis) -> Result<()> {
    if ladder.basis() != basis {
        return Err(Error::InvalidParameter(format!(
            "expected a {basis}-basis ladder, got {}",
            ladder.basis()
        )));
    }
    Ok(())
}

/// X-basis gains: `Q = 2 b^2 [1 + 2 b^2 - 4 b I0(a) + I0(2a)]` and
/// `Q E = e0 Q - 2 (e0 - e_d) b^2 [I0(2a) - 1]`.
pub fn gains_x(params: &ChannelParams, ladder: &IntensityLadder) -> Result<GainStatistics> {
    check_basis(ladder, Basis::X)?;
    params.validate()?;
    let eta = transmittance(params);
    let mu = ladder.intensities();
    let pd = params.dark_count;
    collect(Basis::X, ladder.k(), |i, j| {
        let a = alpha(eta, mu[i], mu[j]);
        let b = (1.0 - pd) * (-(eta.eta_a * mu[i] + eta.eta_b * mu[j]) / 4.0).exp();
        let b2 = b * b;
        let i0_2a = bessel_i0(2.0 * a);
        let q = 2.0 * b2 * (1.0 + 2.0 * b2 - 4.0 * b * bessel_i0(a) + i0_2a);
        let qe = E0 * q - 2.0 * (E0 - params.misalignment) * b2 * (i0_2a - 1.0);
        (q, qe)
    })
}

/// Z-basis gains: `Q = Q^(C) + Q^(E)` and `Q E = e_d Q^(C) + (1 - e_d) Q^(E)`.
pub fn gains_z(params: &ChannelParams, ladder: &IntensityLadder) -> Result<GainStatistics> {
    check_basis(ladder, Basis::Z)?;
    params.validate()?;
    let eta = transmittance(params);
    let mu = ladder.intensities();
    let pd = params.dark_count;
    let ed = params.misalignment;
    collect(Basis::Z, ladder.k(), |i, j| {
        let xa = eta.eta_a * mu[i];
        let xb = eta.eta_b * mu[j];
        let common = (-(xa + xb) / 2.0).exp();
        let keep = (1.0 - pd) * (1.0 - pd);
        let q_c = 2.0
            * keep
            * common
            * (1.0 - (1.0 - pd) * (-xa / 2.0).exp())
            * (1.0 - (1.0 - pd) * (-xb / 2.0).exp());
        let q_e = 2.0
            * pd
            * keep
            * common
            * (bessel_i0(2.0 * alpha(eta, mu[i], mu[j])) - (1.0 - pd) * common);
        (q_c + q_e, ed * q_c + (1.0 - ed) * q_e)
    })
}

pub fn simulate_statistics(
    params: &ChannelParams,
    ladder_x: &IntensityLadder,
    ladder_z: &IntensityLadder,
) -> Result<(GainStatistics, GainStatistics)> {
    Ok((gains_x(params, ladder_x)?, gains_z(params, ladder_z)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mao(length: f64) -> ChannelParams {
        ChannelParams {
            misalignment: 0.015,
            dark_count: 6.02e-6,
            attenuation_db_per_km: 0.2,
            detector_efficiency: 0.145,
            length_a_km: 0.0,
            length_b_km: 0.0,
        }
        .with_distance(length)
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i0(2.0) - 2.279_585_302_336_067_3).abs() < 1e-15);
    }

    #[test]
    fn transmittance_values() {
        let mut p = mao(0.0);
        assert_eq!(transmittance(&p).eta_a, 0.145);
        p.length_a_km = 50.0;
        assert!((transmittance(&p).eta_a - 0.0145).abs() < 1e-16);
        p.length_a_km = 25.0;
        assert!((transmittance(&p).eta_a - 0.145 * 10f64.powf(-0.5)).abs() < 1e-16);
        assert!((transmittance(&p).eta_a - 0.045_853_026_072_441_5).abs() < 1e-12);
    }

    #[test]
    fn vacuum_without_dark_counts_never_clicks() {
        let mut p = mao(0.0);
        p.dark_count = 0.0;
        let l = IntensityLadder::new(Basis::X, vec![0.5, 0.0], vec![0.5, 0.5], 0.5).unwrap();
        let s = gains_x(&p, &l).unwrap();
        assert_eq!(s.q(1, 1), 0.0);
        assert!(s.has_zero_gain());
        assert_eq!(s.e(1, 1), E0);
    }

    #[test]
    fn random_misalignment_gives_half_error() {
        let mut p = mao(10.0);
        p.misalignment = E0;
        let l = IntensityLadder::new(Basis::X, vec![0.5, 0.1], vec![0.5, 0.5], 0.5).unwrap();
        let s = gains_x(&p, &l).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.e(i, j) - E0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn z_without_dark_counts() {
        let mut p = mao(20.0);
        p.dark_count = 0.0;
        let eta = transmittance(&p);
        let l = IntensityLadder::new(Basis::Z, vec![0.5, 0.1], vec![0.5, 0.5], 0.5).unwrap();
        let s = gains_z(&p, &l).unwrap();
        let mu = l.intensities();
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.e(i, j) - p.misalignment).abs() < 1e-15);
                let (xa, xb) = (eta.eta_a * mu[i], eta.eta_b * mu[j]);
                let expect = 2.0
                    * (-(xa + xb) / 2.0).exp()
                    * (1.0 - (-xa / 2.0).exp())
                    * (1.0 - (-xb / 2.0).exp());
                assert!((s.q(i, j) - expect).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn wrong_basis_rejected() {
        let l = IntensityLadder::new(Basis::Z, vec![0.5, 0.1], vec![0.5, 0.5], 0.5).unwrap();
        assert!(gains_x(&mao(0.0), &l).is_err());
    }
}
