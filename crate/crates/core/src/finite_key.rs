//! Finite-size corrections: Hoeffding-type deviations of the X-basis yield
//! estimates, four upper bounds on the two-single-photon error rate
//! `e_{X,1,1}` and the resulting phase-error bound.

use std::fmt;

use crate::decoy_algebra::{CoefficientSet, IntensityLadder};
use crate::error::{Error, Result};
use crate::numeric::{self, min_max};
use crate::yield_bounds::{GainStatistics, YieldBounds};

/// Probabilities below this are floored before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    A,
    B,
    C,
    D,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::A, Method::B, Method::C, Method::D];

    /// Number of `eps_sec / chi` failure slots consumed by the bound.
    pub fn failure_slots(self) -> u32 {
        match self {
            Method::A | Method::B | Method::C => 2,
            Method::D => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::A => "A",
            Method::B => "B",
            Method::C => "C",
            Method::D => "D",
        };
        f.write_str(s)
    }
}

/// Sample sizes and security budget of one key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteKeyContext {
    /// raw key length in bits; equals the Z-basis sample size `s_Z`
    pub l_raw: f64,
    /// X-basis sample size `s_X`
    pub s_x: f64,
    /// number of pulse pairs sent `N_t`
    pub n_total: f64,
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub chi: u32,
    /// secrecy budget per final-key bit, when the budget is set that way
    pub kappa: Option<f64>,
}

impl FiniteKeyContext {
    /// Context for a fixed number of pulse pairs:
    /// `s_Z = N_t p_Z^2 <Q_Z>` and `s_X = N_t p_X^2 <Q_X>`.
    pub fn from_pulse_pairs(
        n_total: f64,
        ladder_x: &IntensityLadder,
        stats_x: &GainStatistics,
        ladder_z: &IntensityLadder,
        stats_z: &GainStatistics,
    ) -> Self {
        let pz = ladder_z.basis_prob();
        let px = ladder_x.basis_prob();
        Self {
            l_raw: n_total * pz * pz * stats_z.mean_gain(ladder_z),
            s_x: n_total * px * px * stats_x.mean_gain(ladder_x),
            n_total,
            eps_sec: 1e-10,
            eps_cor: 1e-10,
            chi: 9,
            kappa: None,
        }
    }

    /// Context for a fixed raw key length:
    /// `s_X = p_X^2 s_Z <Q_X> / (p_Z^2 <Q_Z>)` and `N_t = l_raw / (p_Z^2 <Q_Z>)`.
    pub fn from_raw_key(
        l_raw: f64,
        ladder_x: &IntensityLadder,
        stats_x: &GainStatistics,
        ladder_z: &IntensityLadder,
        stats_z: &GainStatistics,
    ) -> Self {
        let pz = ladder_z.basis_prob();
        let px = ladder_x.basis_prob();
        let qz = stats_z.mean_gain(ladder_z);
        let qx = stats_x.mean_gain(ladder_x);
        Self {
            l_raw,
            s_x: px * px * l_raw * qx / (pz * pz * qz),
            n_total: l_raw / (pz * pz * qz),
            eps_sec: 1e-10,
            eps_cor: 1e-10,
            chi: 9,
            kappa: None,
        }
    }

    pub fn s_z(&self) -> f64 {
        self.l_raw
    }

    /// `ln(chi / eps_sec)`
    pub fn ln_chi_over_eps(&self) -> f64 {
        (self.chi as f64).ln() - self.eps_sec.ln()
    }

    pub fn with_budget(mut self, eps_sec: f64, eps_cor: f64, chi: u32) -> Self {
        self.eps_sec = eps_sec;
        self.eps_cor = eps_cor;
        self.chi = chi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.eps_sec) || !open_unit(self.eps_cor) {
            return Err(Error::InvalidParameter(format!(
                "eps_sec = {}, eps_cor = {} must lie in (0, 1)",
                self.eps_sec, self.eps_cor
            )));
        }
        if !(self.l_raw > 0.0 && self.s_x > 0.0 && self.n_total > 0.0) || self.chi == 0 {
            return Err(Error::InvalidParameter(
                "sample sizes and chi must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `max S - min S`.
pub fn width(values: &[f64]) -> Result<f64> {
    numeric::width(values).ok_or(Error::EmptySet)
}

/// `scale * sqrt(ln(1/eps_ratio) / (2 n)) * w`
pub fn hoeffding_term(scale: f64, n: f64, eps_ratio: f64, w: f64) -> f64 {
    scale * ((1.0 / eps_ratio).ln() / (2.0 * n)).sqrt() * w
}

/// Statistical deviations of the three X-basis sums entering the `e_{X,1,1}`
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaTerms {
    /// deviation of `(Y e)_{1,1}` estimates
    pub ye: f64,
    /// deviation of `Y_{1,1}` estimates
    pub y: f64,
    /// deviation of `(Y e-bar)_{1,1}` estimates
    pub ybar: f64,
}

fn ratio_set(a: &[f64], p: &[f64]) -> Vec<f64> {
    let k = a.len();
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            out.push(a[i] * a[j] / (p[i] * p[j]));
        }
    }
    out
}

/// `{A^even_{1,i} A^even_{1,j} / (p_i p_j)}` over all pairs, row-major.
pub fn even_ratios(coeffs: &CoefficientSet, ladder: &IntensityLadder) -> Vec<f64> {
    ratio_set(&coeffs.a_even[1], ladder.cond_probs())
}

/// `{A^odd_{1,i} A^odd_{1,j} / (p_i p_j)}` over all pairs, row-major.
pub fn odd_ratios(coeffs: &CoefficientSet, ladder: &IntensityLadder) -> Vec<f64> {
    ratio_set(&coeffs.a_odd, ladder.cond_probs())
}

pub fn delta_terms(
    stats_x: &GainStatistics,
    coeffs_x: &CoefficientSet,
    ladder_x: &IntensityLadder,
    ctx: &FiniteKeyContext,
) -> Result<DeltaTerms> {
    if stats_x.k() != ladder_x.k() || coeffs_x.k() != ladder_x.k() {
        return Err(Error::DimensionMismatch(
            "X statistics, coefficients and ladder disagree on k".into(),
        ));
    }
    let eps_ratio = ctx.eps_sec / ctx.chi as f64;
    let q = stats_x.mean_gain(ladder_x);
    let qe = stats_x.mean_error_gain(ladder_x);
    let qe_bar = stats_x.mean_correct_gain(ladder_x);
    let w_even = width(&even_ratios(coeffs_x, ladder_x))?;
    let w_odd = width(&odd_ratios(coeffs_x, ladder_x))?;
    Ok(DeltaTerms {
        ye: hoeffding_term((q * qe).sqrt(), ctx.s_x, eps_ratio, w_even),
        y: hoeffding_term(q, ctx.s_x, eps_ratio, w_odd),
        ybar: hoeffding_term((q * qe_bar).sqrt(), ctx.s_x, eps_ratio, w_odd),
    })
}

/// Outcome of one `e_{X,1,1}` upper-bound method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundResult {
    pub e11_upper: f64,
    pub method: Method,
    /// failure slots of size `eps_sec / chi` consumed
    pub chi_contribution: u32,
    pub deltas: DeltaTerms,
    /// method-specific fluctuation term added to the base ratio (C and D)
    pub shift: f64,
}

impl ErrorBoundResult {
    fn new(method: Method, e11: f64, deltas: DeltaTerms, shift: f64) -> Self {
        Self {
            e11_upper: e11.clamp(0.0, 1.0),
            method,
            chi_contribution: method.failure_slots(),
            deltas,
            shift,
        }
    }
}

/// Method A: `((Ye)^up + dYe) / (Y^down - dY)`.
pub fn e11_bound_a(bounds: &YieldBounds, deltas: &DeltaTerms) -> Result<ErrorBoundResult> {
    let den = bounds.y11_lower - deltas.y;
    if !(den > 0.0) {
        return Err(Error::VacuousDenominator(Method::A));
    }
    let e = (bounds.ye11_upper + deltas.ye) / den;
    Ok(ErrorBoundResult::new(Method::A, e, *deltas, 0.0))
}

/// Method B: `((Ye)^up + dYe) / ((Ye)^up + (Ye-bar)^down + dYe - dYe-bar)`.
pub fn e11_bound_b(bounds: &YieldBounds, deltas: &DeltaTerms) -> Result<ErrorBoundResult> {
    let num = bounds.ye11_upper + deltas.ye;
    let den = bounds.ye11_upper + bounds.ybar11_lower + deltas.ye - deltas.ybar;
    if !(den > 0.0) {
        return Err(Error::VacuousDenominator(Method::B));
    }
    Ok(ErrorBoundResult::new(Method::B, num / den, *deltas, 0.0))
}

/// `(Ye)^up / ((Ye)^up + y)` with `y = (Ye-bar)^down - dYe-bar`; shared by
/// methods C and D.
fn base_ratio(bounds: &YieldBounds, deltas: &DeltaTerms, method: Method) -> Result<(f64, f64)> {
    let y = bounds.ybar11_lower - deltas.ybar;
    if !(y > 0.0) {
        return Err(Error::VacuousDenominator(method));
    }
    Ok((bounds.ye11_upper / (bounds.ye11_upper + y), y))
}

/// Method C: the base ratio plus a McDiarmid-type shift built from the
/// extreme values of the even ratio set.
pub fn e11_bound_c(
    bounds: &YieldBounds,
    deltas: &DeltaTerms,
    stats_x: &GainStatistics,
    coeffs_x: &CoefficientSet,
    ladder_x: &IntensityLadder,
    ctx: &FiniteKeyContext,
) -> Result<ErrorBoundResult> {
    let (base, y) = base_ratio(bounds, deltas, Method::C)?;
    let q = stats_x.mean_gain(ladder_x);
    let qe = stats_x.mean_error_gain(ladder_x);
    let s = ctx.s_x;
    let ratios = even_ratios(coeffs_x, ladder_x);
    let (lo, hi) = min_max(&ratios).ok_or(Error::EmptySet)?;
    let prefactor = (q * qe * ctx.ln_chi_over_eps() / (2.0 * s)).sqrt();
    let shift = if prefactor == 0.0 || hi == lo {
        0.0
    } else {
        let common = y + bounds.ye11_lower * (1.0 - q / (s * qe));
        let scale = q * q / (s * s * qe);
        let bracket_hi = common + scale * hi;
        let bracket_lo = common + scale * lo;
        if !(bracket_hi > 0.0 && bracket_lo > 0.0) {
            return Err(Error::DeltaEUndefined);
        }
        prefactor * y * (hi - lo) / (bracket_hi * bracket_lo)
    };
    Ok(ErrorBoundResult::new(Method::C, base + shift, *deltas, shift))
}

/// One member of the weight set `W` with the number of error events it
/// accounts for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedCount {
    pub w: f64,
    pub n: f64,
    pub pair: (usize, usize),
}

/// Quantities entering the method-D variance proxy `r-hat^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodDTerms {
    pub y: f64,
    pub t: f64,
    pub x: f64,
    pub min_w: f64,
    pub max_w: f64,
    /// weights sorted in descending order, ties kept in `(i, j)` order
    pub entries: Vec<WeightedCount>,
}

impl MethodDTerms {
    pub fn width(&self) -> f64 {
        self.max_w - self.min_w
    }

    /// `(D_m, E_m)` for every `m`, where
    /// `D_m = y + (t - sum_{i<m} n_i + 1) x + min W + sum_{i<m} n_i w_i` and
    /// `E_m = D_m + n_m (w_m - x)`.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        let mut used = 0.0;
        let mut weighted = 0.0;
        self.entries
            .iter()
            .map(|e| {
                let d = self.y + (self.t - used + 1.0) * self.x + self.min_w + weighted;
                used += e.n;
                weighted += e.n * e.w;
                let end = self.y + (self.t - used + 1.0) * self.x + self.min_w + weighted;
                (d, end)
            })
            .collect()
    }

    /// Leading-order `r-hat^2`:
    /// `y^2 W^2 / 3 sum_m n_m / (D_m E_m) (1/D_m^2 + 1/(D_m E_m) + 1/E_m^2)`.
    pub fn r_hat_squared(&self) -> Result<f64> {
        let mut sum = 0.0;
        for (e, (d, end)) in self.entries.iter().zip(self.offsets()) {
            if !(d > 0.0 && end > 0.0) {
                return Err(Error::ExpansionInvalid);
            }
            let de = d * end;
            sum += e.n / de * (1.0 / (d * d) + 1.0 / de + 1.0 / (end * end));
        }
        let w = self.width();
        Ok(self.y * self.y * w * w / 3.0 * sum)
    }
}

/// Builds the method-D inputs. The per-pair error-event counts are the
/// expected counts `s_X p_i p_j Q_ij E_ij / <Q>` rounded to integers, with the
/// rounding residue moved onto the largest count so that they add up to `t`.
pub fn method_d_terms(
    bounds: &YieldBounds,
    deltas: &DeltaTerms,
    stats_x: &GainStatistics,
    coeffs_x: &CoefficientSet,
    ladder_x: &IntensityLadder,
    ctx: &FiniteKeyContext,
) -> Result<MethodDTerms> {
    let (_, y) = base_ratio(bounds, deltas, Method::D)?;
    let q = stats_x.mean_gain(ladder_x);
    let qe = stats_x.mean_error_gain(ladder_x);
    let s = ctx.s_x;
    let t = s * qe / q;
    if !(t >= 1.0) {
        return Err(Error::TooFewErrorEvents(t));
    }
    let x = (bounds.ye11_lower - deltas.ye) / t;
    if !(x > 0.0) {
        return Err(Error::NonPositiveOffset("x"));
    }
    let k = ladder_x.k();
    let p = ladder_x.cond_probs();
    let a = &coeffs_x.a_even[1];
    let mut entries = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            entries.push(WeightedCount {
                w: q * a[i] * a[j] / (s * p[i] * p[j]),
                n: s * p[i] * p[j] * stats_x.qe(i, j) / q,
                pair: (i, j),
            });
        }
    }
    round_counts(&mut entries, t);
    let weights: Vec<f64> = entries.iter().map(|e| e.w).collect();
    let (min_w, max_w) = min_max(&weights).ok_or(Error::EmptySet)?;
    // stable: equal weights keep their (i, j) order
    entries.sort_by(|l, r| r.w.total_cmp(&l.w));
    Ok(MethodDTerms {
        y,
        t,
        x,
        min_w,
        max_w,
        entries,
    })
}

fn round_counts(entries: &mut [WeightedCount], t: f64) {
    let Some(largest) = (0..entries.len()).max_by(|&l, &r| entries[l].n.total_cmp(&entries[r].n))
    else {
        return;
    };
    let rounded: Vec<f64> = entries.iter().map(|e| e.n.round()).collect();
    let residue = t - rounded.iter().sum::<f64>();
    // tiny counts: the residue could turn the largest count negative
    if rounded[largest] + residue < 0.0 {
        return;
    }
    for (e, r) in entries.iter_mut().zip(rounded) {
        e.n = r;
    }
    entries[largest].n += residue;
}

/// Method D: the base ratio plus `r-hat sqrt(ln(chi/eps_sec) / 2)`.
pub fn e11_bound_d(
    bounds: &YieldBounds,
    deltas: &DeltaTerms,
    stats_x: &GainStatistics,
    coeffs_x: &CoefficientSet,
    ladder_x: &IntensityLadder,
    ctx: &FiniteKeyContext,
) -> Result<ErrorBoundResult> {
    let (base, _) = base_ratio(bounds, deltas, Method::D)?;
    let terms = method_d_terms(bounds, deltas, stats_x, coeffs_x, ladder_x, ctx)?;
    let r_hat = terms.r_hat_squared()?.sqrt();
    let shift = r_hat * (ctx.ln_chi_over_eps() / 2.0).sqrt();
    Ok(ErrorBoundResult::new(Method::D, base + shift, *deltas, shift))
}

/// Evaluates one method by tag.
pub fn e11_bound(
    method: Method,
    bounds: &YieldBounds,
    deltas: &DeltaTerms,
    stats_x: &GainStatistics,
    coeffs_x: &CoefficientSet,
    ladder_x: &IntensityLadder,
    ctx: &FiniteKeyContext,
) -> Result<ErrorBoundResult> {
    match method {
        Method::A => e11_bound_a(bounds, deltas),
        Method::B => e11_bound_b(bounds, deltas),
        Method::C => e11_bound_c(bounds, deltas, stats_x, coeffs_x, ladder_x, ctx),
        Method::D => e11_bound_d(bounds, deltas, stats_x, coeffs_x, ladder_x, ctx),
    }
}

/// Smallest valid upper bound; ties go to the method consuming fewer failure
/// slots (A before B before C before D).
pub fn best_e11(results: &[Result<ErrorBoundResult>]) -> Result<ErrorBoundResult> {
    results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .min_by(|l, r| {
            l.e11_upper
                .total_cmp(&r.e11_upper)
                .then(l.chi_contribution.cmp(&r.chi_contribution))
                .then(l.method.cmp(&r.method))
        })
        .copied()
        .ok_or(Error::AllMethodsInvalid)
}

/// `gamma-bar(a, b, c, d) = sqrt((c + d)(1 - b) b / (c d) ln[(c + d) / (2 pi c d (1 - b) b a^2)])`.
///
/// `b` is floored at [`PROB_FLOOR`] away from 0 and 1. A negative radicand
/// means no phase-error bound exists with failure probability `a`.
pub fn gamma_bar(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    if !(c > 0.0 && d > 0.0 && a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma_bar needs a, c, d > 0 (a = {a}, c = {c}, d = {d})"
        )));
    }
    let b = b.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let var = (1.0 - b) * b;
    let log_arg = (c + d).ln()
        - (2.0 * std::f64::consts::PI).ln()
        - c.ln()
        - d.ln()
        - var.ln()
        - 2.0 * a.ln();
    let radicand = (c + d) / (c * d) * var * log_arg;
    if radicand < 0.0 {
        return Err(Error::ComplexGamma);
    }
    Ok(radicand.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseError {
    pub e_p: f64,
    pub gamma: f64,
}

/// `e_p <= e11 + gamma-bar(eps_sec/chi, e11, s_X Y11 <mu e^-mu>_X^2 / <Q_X>,
/// s_Z Y11 <mu e^-mu>_Z^2 / <Q_Z>)`. Points with `e_p > 1/2` are rejected.
#[allow(clippy::too_many_arguments)]
pub fn phase_error_upper(
    e11: &ErrorBoundResult,
    y11_x: f64,
    y11_z: f64,
    stats_x: &GainStatistics,
    stats_z: &GainStatistics,
    ladder_x: &IntensityLadder,
    ladder_z: &IntensityLadder,
    ctx: &FiniteKeyContext,
) -> Result<PhaseError> {
    if !(y11_x > 0.0 && y11_z > 0.0) {
        return Err(Error::NoSinglePhotonYield);
    }
    let single_x = ladder_x.mean_single();
    let single_z = ladder_z.mean_single();
    let c = ctx.s_x * y11_x * single_x * single_x / stats_x.mean_gain(ladder_x);
    let d = ctx.s_z() * y11_z * single_z * single_z / stats_z.mean_gain(ladder_z);
    let gamma = gamma_bar(ctx.eps_sec / ctx.chi as f64, e11.e11_upper, c, d)?;
    let e_p = e11.e11_upper + gamma;
    if e_p > 0.5 {
        return Err(Error::PhaseErrorTooLarge(e_p));
    }
    Ok(PhaseError { e_p, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(y11: f64, ye_up: f64, ye_lo: f64, ybar: f64) -> YieldBounds {
        YieldBounds {
            y11_lower: y11,
            ye11_upper: ye_up,
            ye11_lower: ye_lo,
            ybar11_lower: ybar,
            ..Default::default()
        }
    }

    #[test]
    fn width_cases() {
        assert_eq!(width(&[1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(width(&[7.0]).unwrap(), 0.0);
        assert_eq!(width(&[]), Err(Error::EmptySet));
        let shifted: Vec<f64> = [1.0, 3.0, 2.0].iter().map(|v| v + 10.0).collect();
        assert_eq!(width(&shifted).unwrap(), 2.0);
    }

    #[test]
    fn hoeffding_scaling() {
        assert_eq!(hoeffding_term(1.0, 100.0, 1e-10, 0.0), 0.0);
        let a = hoeffding_term(0.3, 1e6, 1e-10, 2.0);
        let b = hoeffding_term(0.3, 4e6, 1e-10, 2.0);
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn method_a_zero_fluctuation_is_plain_ratio() {
        let b = bounds(0.01, 2e-4, 1e-4, 9e-3);
        let r = e11_bound_a(&b, &DeltaTerms::default()).unwrap();
        assert!((r.e11_upper - 0.02).abs() < 1e-15);
        assert_eq!(r.method, Method::A);
        assert_eq!(r.chi_contribution, 2);
    }

    #[test]
    fn method_a_guard() {
        let b = bounds(0.01, 2e-4, 1e-4, 9e-3);
        let d = DeltaTerms {
            y: 0.02,
            ..Default::default()
        };
        assert_eq!(
            e11_bound_a(&b, &d),
            Err(Error::VacuousDenominator(Method::A))
        );
    }

    #[test]
    fn method_b_zero_fluctuation_and_guard() {
        let b = bounds(0.01, 2e-4, 1e-4, 9.8e-3);
        let r = e11_bound_b(&b, &DeltaTerms::default()).unwrap();
        assert!((r.e11_upper - 2e-4 / 1e-2).abs() < 1e-15);
        let d = DeltaTerms {
            ybar: 1.0,
            ..Default::default()
        };
        assert_eq!(
            e11_bound_b(&b, &d),
            Err(Error::VacuousDenominator(Method::B))
        );
    }

    #[test]
    fn best_prefers_smallest_then_fewer_slots() {
        let mk = |m: Method, e: f64| Ok(ErrorBoundResult::new(m, e, DeltaTerms::default(), 0.0));
        let single = [mk(Method::C, 0.03)];
        assert_eq!(best_e11(&single).unwrap().method, Method::C);
        let tie = [mk(Method::D, 0.02), mk(Method::B, 0.02), mk(Method::C, 0.02)];
        assert_eq!(best_e11(&tie).unwrap().method, Method::B);
        let mixed = [Err(Error::AllMethodsInvalid), mk(Method::D, 0.01), mk(Method::A, 0.05)];
        assert_eq!(best_e11(&mixed).unwrap().method, Method::D);
        let none: [Result<ErrorBoundResult>; 1] = [Err(Error::ComplexGamma)];
        assert_eq!(best_e11(&none), Err(Error::AllMethodsInvalid));
    }

    #[test]
    fn gamma_bar_small_b_vanishes() {
        let g = gamma_bar(1e-10, 1e-12, 1e6, 1e6).unwrap();
        assert!(g < 1e-5);
    }

    #[test]
    fn gamma_bar_negative_radicand() {
        // a close to 1 with huge c, d makes the log argument tiny
        assert_eq!(gamma_bar(0.9, 0.3, 1e12, 1e12), Err(Error::ComplexGamma));
    }

    #[test]
    fn gamma_bar_symmetric_form() {
        let (a, b, c) = (1e-10_f64, 0.02_f64, 1e6_f64);
        let direct = gamma_bar(a, b, c, c).unwrap();
        let sym = ((2.0 / c) * (1.0 - b) * b
            * (1.0 / (std::f64::consts::PI * c * (1.0 - b) * b * a * a)).ln())
        .sqrt();
        assert!((direct - sym).abs() < 1e-15);
    }
}
