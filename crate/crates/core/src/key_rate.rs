//! Finite-size secure key rate: the Z-basis form (single-photon yield bounded
//! from Z-basis data) and the X-basis form (single-photon yield taken from the
//! X basis), each combined with the four `e_{X,1,1}` methods.

use std::fmt;

use crate::channel::{simulate_statistics, ChannelParams};
use crate::decoy_algebra::{coefficient_sets, CoefficientSet, IntensityLadder};
use crate::error::{Error, Result};
use crate::finite_key::{
    delta_terms, e11_bound, hoeffding_term, phase_error_upper, width, DeltaTerms,
    ErrorBoundResult, FiniteKeyContext, Method,
};
use crate::numeric::compensated_sum;
use crate::yield_bounds::{compute_bounds, GainStatistics, YieldBounds};

/// `H_2(x) = -x log2 x - (1 - x) log2 (1 - x)` with `0 log 0 = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::EntropyDomain(x));
    }
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// `f_EC <Q_Z H_2(E_Z)>`.
pub fn lambda_ec(stats_z: &GainStatistics, ladder_z: &IntensityLadder, f_ec: f64) -> Result<f64> {
    if !(f_ec >= 1.0) {
        return Err(Error::InvalidParameter(format!("f_EC = {f_ec} must be >= 1")));
    }
    let k = ladder_z.k();
    let mut h = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            h.push(binary_entropy(stats_z.e(i, j))?);
        }
    }
    Ok(f_ec * stats_z.pair_mean(ladder_z, |i, j| stats_z.q(i, j) * h[i * k + j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RateForm {
    /// single-photon yield bounded from Z-basis statistics
    ZForm,
    /// single-photon yield bounded from X-basis statistics
    XForm,
}

impl RateForm {
    pub const ALL: [RateForm; 2] = [RateForm::ZForm, RateForm::XForm];

    /// Number of `eps_sec / chi` slots the whole estimate uses with `method`.
    pub fn chi(self, method: Method) -> u32 {
        match (self, method) {
            (RateForm::ZForm, Method::D) => 10,
            (RateForm::ZForm, _) => 9,
            (RateForm::XForm, Method::A) => 9,
            (RateForm::XForm, Method::D) => 11,
            (RateForm::XForm, _) => 10,
        }
    }
}

impl fmt::Display for RateForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateForm::ZForm => "Z",
            RateForm::XForm => "X",
        })
    }
}

/// Alice's and Bob's preparation settings. `p_Z` is the Z ladder's basis
/// probability and `p_X` the X ladder's.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub ladder_x: IntensityLadder,
    pub ladder_z: IntensityLadder,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let (px, pz) = (self.ladder_x.basis_prob(), self.ladder_z.basis_prob());
        if (px + pz - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "p_X + p_Z = {} must equal 1",
                px + pz
            )));
        }
        Ok(())
    }
}

/// How much data the run collects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSize {
    /// fixed number of pulse pairs `N_t`
    PulsePairs(f64),
    /// fixed raw key length `l_raw`
    RawKey(f64),
}

/// How the secrecy budget `eps_sec` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecurityBudget {
    /// `eps_sec / chi` fixed, so `eps_sec` follows each combination's `chi`
    RatioFixed(f64),
    /// `eps_sec` fixed
    Fixed(f64),
    /// `eps_sec = kappa R N_t`, resolved by fixed-point iteration
    Kappa(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteKeySettings {
    pub sample: SampleSize,
    pub budget: SecurityBudget,
    pub eps_cor: f64,
    pub f_ec: f64,
}

/// Result of one (form, method) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationOutcome {
    pub form: RateForm,
    pub method: Method,
    pub chi: u32,
    pub eps_sec: f64,
    /// unfloored rate, or the reason the combination gives no bound
    pub rate: Result<f64>,
    pub e11: Option<ErrorBoundResult>,
    pub e_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateReport {
    /// secret bits per pulse pair, floored at 0
    pub rate: f64,
    /// best unfloored rate; `-inf` when no combination is feasible
    pub raw_rate: f64,
    pub form: Option<RateForm>,
    pub method: Option<Method>,
    pub chi: Option<u32>,
    pub eps_sec: Option<f64>,
    pub e11: Option<f64>,
    pub e_p: Option<f64>,
    pub bounds_x: YieldBounds,
    pub bounds_z: YieldBounds,
    pub lambda_ec: f64,
    pub l_raw: f64,
    pub s_x: f64,
    pub n_total: f64,
    pub reason: Option<String>,
    pub combinations: Vec<CombinationOutcome>,
}

impl KeyRateReport {
    pub fn winner(&self) -> Option<&CombinationOutcome> {
        self.combinations
            .iter()
            .find(|c| Some(c.form) == self.form && Some(c.method) == self.method)
    }
}

/// Everything about an operating point that does not depend on `eps_sec`.
#[derive(Debug, Clone)]
pub struct PreparedPoint {
    pub protocol: ProtocolParams,
    pub stats_x: GainStatistics,
    pub stats_z: GainStatistics,
    pub coeffs_x: CoefficientSet,
    pub coeffs_z: CoefficientSet,
    pub bounds_x: YieldBounds,
    pub bounds_z: YieldBounds,
    pub lambda_ec: f64,
    pub eps_cor: f64,
    /// sample sizes; `eps_sec` and `chi` are filled in per combination
    pub ctx: FiniteKeyContext,
}

impl PreparedPoint {
    pub fn new(
        protocol: ProtocolParams,
        stats_x: GainStatistics,
        stats_z: GainStatistics,
        settings: &FiniteKeySettings,
    ) -> Result<Self> {
        protocol.validate()?;
        let ProtocolParams { ladder_x, ladder_z } = &protocol;
        let coeffs_x = coefficient_sets(ladder_x)?;
        let coeffs_z = coefficient_sets(ladder_z)?;
        let bounds_x = compute_bounds(&stats_x, &coeffs_x, ladder_x)?;
        let bounds_z = compute_bounds(&stats_z, &coeffs_z, ladder_z)?;
        let lambda_ec = lambda_ec(&stats_z, ladder_z, settings.f_ec)?;
        let ctx = match settings.sample {
            SampleSize::PulsePairs(n) => {
                FiniteKeyContext::from_pulse_pairs(n, ladder_x, &stats_x, ladder_z, &stats_z)
            }
            SampleSize::RawKey(l) => {
                FiniteKeyContext::from_raw_key(l, ladder_x, &stats_x, ladder_z, &stats_z)
            }
        };
        if let SecurityBudget::Kappa(kappa) = settings.budget {
            if !(kappa > 0.0 && kappa < 1.0) {
                return Err(Error::InvalidParameter(format!("kappa = {kappa} outside (0, 1)")));
            }
        }
        Ok(Self {
            protocol,
            stats_x,
            stats_z,
            coeffs_x,
            coeffs_z,
            bounds_x,
            bounds_z,
            lambda_ec,
            eps_cor: settings.eps_cor,
            ctx: FiniteKeyContext {
                eps_cor: settings.eps_cor,
                kappa: match settings.budget {
                    SecurityBudget::Kappa(k) => Some(k),
                    _ => None,
                },
                ..ctx
            },
        })
    }

    /// Simulates MR-channel statistics and prepares the point.
    pub fn from_channel(
        protocol: ProtocolParams,
        channel: &ChannelParams,
        settings: &FiniteKeySettings,
    ) -> Result<Self> {
        let (sx, sz) = simulate_statistics(channel, &protocol.ladder_x, &protocol.ladder_z)?;
        Self::new(protocol, sx, sz, settings)
    }

    fn ladder_x(&self) -> &IntensityLadder {
        &self.protocol.ladder_x
    }

    fn ladder_z(&self) -> &IntensityLadder {
        &self.protocol.ladder_z
    }

    /// Context for one combination.
    pub fn context(&self, eps_sec: f64, chi: u32) -> FiniteKeyContext {
        self.ctx.with_budget(eps_sec, self.eps_cor, chi)
    }

    /// X-basis deviations for the given budget.
    pub fn deltas(&self, ctx: &FiniteKeyContext) -> Result<DeltaTerms> {
        delta_terms(&self.stats_x, &self.coeffs_x, self.ladder_x(), ctx)
    }

    /// `e_{X,1,1}` upper bound of one method.
    pub fn e11(&self, method: Method, ctx: &FiniteKeyContext) -> Result<ErrorBoundResult> {
        let deltas = self.deltas(ctx)?;
        e11_bound(
            method,
            &self.bounds_x,
            &deltas,
            &self.stats_x,
            &self.coeffs_x,
            self.ladder_x(),
            ctx,
        )
    }

    /// Single-photon yield lower bound entering the phase-error estimate.
    /// The two-single-photon state does not depend on the preparation basis,
    /// so one value serves both arguments.
    fn y11_for_phase_error(&self, form: RateForm, deltas: &DeltaTerms) -> f64 {
        match form {
            RateForm::ZForm => self.bounds_z.y11_lower,
            RateForm::XForm => self.bounds_x.y11_lower - deltas.y,
        }
    }

    /// `p_Z^2 { <mu e^-mu>_Z^2 C^2 [1 - H] + Lambda_EC + <Q_Z>/l_raw [6 log2(chi/eps) + log2(2/eps_cor)] }`
    fn penalty(&self, c_tail: f64, one_minus_h: f64, ctx: &FiniteKeyContext) -> f64 {
        let pz = self.ladder_z().basis_prob();
        let single = self.ladder_z().mean_single();
        let qz = self.stats_z.mean_gain(self.ladder_z());
        let log2_chi_eps = ctx.ln_chi_over_eps() / std::f64::consts::LN_2;
        let composable = qz / ctx.l_raw * (6.0 * log2_chi_eps + (2.0 / ctx.eps_cor).log2());
        pz * pz * (single * single * c_tail * c_tail * one_minus_h + self.lambda_ec + composable)
    }

    /// `sum B Q - <Q> sqrt(ln(chi/eps) / (2 s)) Width(B / (p p))` for one basis.
    fn b_sum<F: Fn(usize, usize) -> f64>(
        stats: &GainStatistics,
        ladder: &IntensityLadder,
        s: f64,
        ctx: &FiniteKeyContext,
        b: F,
    ) -> Result<f64> {
        let k = ladder.k();
        let p = ladder.cond_probs();
        let mut terms = Vec::with_capacity(k * k);
        let mut scaled = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let bij = b(i, j);
                terms.push(bij * stats.q(i, j));
                scaled.push(bij / (p[i] * p[j]));
            }
        }
        let w = width(&scaled)?;
        let eps_ratio = ctx.eps_sec / ctx.chi as f64;
        let dev = hoeffding_term(stats.mean_gain(ladder), s, eps_ratio, w);
        Ok(compensated_sum(&mut terms) - dev)
    }

    /// Unfloored rate of one (form, method) combination at the given budget.
    pub fn combination(&self, form: RateForm, method: Method, eps_sec: f64) -> CombinationOutcome {
        let chi = form.chi(method);
        let ctx = self.context(eps_sec, chi);
        let mut out = CombinationOutcome {
            form,
            method,
            chi,
            eps_sec,
            rate: Err(Error::AllMethodsInvalid),
            e11: None,
            e_p: None,
        };
        let e11 = match ctx.validate().and_then(|_| self.e11(method, &ctx)) {
            Ok(e) => e,
            Err(err) => {
                out.rate = Err(err);
                return out;
            }
        };
        out.e11 = Some(e11);
        let y11 = self.y11_for_phase_error(form, &e11.deltas);
        let phase = phase_error_upper(
            &e11,
            y11,
            y11,
            &self.stats_x,
            &self.stats_z,
            self.ladder_x(),
            self.ladder_z(),
            &ctx,
        );
        let e_p = match phase {
            Ok(p) => p.e_p,
            Err(err) => {
                out.rate = Err(err);
                return out;
            }
        };
        out.e_p = Some(e_p);
        out.rate = binary_entropy(e_p).and_then(|h| self.rate_given_phase_error(form, 1.0 - h, &ctx));
        out
    }

    fn rate_given_phase_error(
        &self,
        form: RateForm,
        one_minus_h: f64,
        ctx: &FiniteKeyContext,
    ) -> Result<f64> {
        let lz = self.ladder_z();
        let lx = self.ladder_x();
        let pz = lz.basis_prob();
        let pz2 = pz * pz;
        let vac = lz.mean_vacuum();
        let single2 = lz.mean_single() * lz.mean_single();
        let pj = lz.cond_probs();
        let a0 = &self.coeffs_z.a_even[0];
        match form {
            RateForm::ZForm => {
                let odd = &self.coeffs_z.a_odd;
                let sum = Self::b_sum(&self.stats_z, lz, ctx.s_z(), ctx, |i, j| {
                    pz2 * (vac * a0[i] * pj[j] + single2 * odd[i] * odd[j] * one_minus_h)
                })?;
                Ok(sum - self.penalty(self.coeffs_z.c_tail, one_minus_h, ctx))
            }
            RateForm::XForm => {
                let odd = &self.coeffs_x.a_odd;
                let z = Self::b_sum(&self.stats_z, lz, ctx.s_z(), ctx, |i, j| {
                    pz2 * vac * a0[i] * pj[j]
                })?;
                let x = Self::b_sum(&self.stats_x, lx, ctx.s_x, ctx, |i, j| {
                    pz2 * single2 * odd[i] * odd[j] * one_minus_h
                })?;
                Ok(z + x - self.penalty(self.coeffs_x.c_tail, one_minus_h, ctx))
            }
        }
    }

    /// Best combination, with `eps_for(chi)` giving each combination's `eps_sec`.
    fn best(&self, eps_for: impl Fn(u32) -> f64) -> KeyRateReport {
        let mut combinations = Vec::with_capacity(8);
        for form in RateForm::ALL {
            for method in Method::ALL {
                combinations.push(self.combination(form, method, eps_for(form.chi(method))));
            }
        }
        // ties: the earlier combination (Z before X, A before D) wins
        let mut best: Option<usize> = None;
        for (idx, c) in combinations.iter().enumerate() {
            if let Ok(r) = c.rate {
                let better = match best {
                    None => true,
                    Some(b) => r > *combinations[b].rate.as_ref().unwrap_or(&f64::NEG_INFINITY),
                };
                if better {
                    best = Some(idx);
                }
            }
        }
        let mut report = KeyRateReport {
            rate: 0.0,
            raw_rate: f64::NEG_INFINITY,
            form: None,
            method: None,
            chi: None,
            eps_sec: None,
            e11: None,
            e_p: None,
            bounds_x: self.bounds_x,
            bounds_z: self.bounds_z,
            lambda_ec: self.lambda_ec,
            l_raw: self.ctx.l_raw,
            s_x: self.ctx.s_x,
            n_total: self.ctx.n_total,
            reason: None,
            combinations: Vec::new(),
        };
        match best {
            Some(b) => {
                let c = &combinations[b];
                let raw = *c.rate.as_ref().expect("best combination is feasible");
                report.raw_rate = raw;
                report.rate = raw.max(0.0);
                report.form = Some(c.form);
                report.method = Some(c.method);
                report.chi = Some(c.chi);
                report.eps_sec = Some(c.eps_sec);
                report.e11 = c.e11.map(|e| e.e11_upper);
                report.e_p = c.e_p;
                if raw <= 0.0 {
                    report.reason = Some("all combinations infeasible or nonpositive".into());
                }
            }
            None => {
                report.reason = Some("all combinations infeasible or nonpositive".into());
            }
        }
        report.combinations = combinations;
        report
    }

    /// Best rate for the chosen budget mode.
    pub fn evaluate(&self, budget: SecurityBudget) -> KeyRateReport {
        match budget {
            SecurityBudget::RatioFixed(r) => self.best(|chi| r * chi as f64),
            SecurityBudget::Fixed(eps) => self.best(|_| eps),
            SecurityBudget::Kappa(kappa) => {
                let res = kappa_resolve(kappa, self.ctx.l_raw, self.ctx.n_total, |eps| {
                    self.best(|_| eps).rate
                });
                let mut report = self.best(|_| res.eps_sec);
                if !res.converged {
                    let note = format!("kappa iteration stopped after {} steps", res.iterations);
                    report.reason = Some(match report.reason {
                        Some(r) => format!("{r}; {note}"),
                        None => note,
                    });
                }
                report
            }
        }
    }
}

/// Outcome of the `eps_sec = kappa R(eps_sec) N_t` iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaResolution {
    pub eps_sec: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const KAPPA_TOLERANCE: f64 = 1e-6;
pub const KAPPA_MAX_ITERATIONS: usize = 100;

/// Fixed-point iteration starting from `kappa l_raw`. A zero rate ends the
/// iteration at the current iterate.
pub fn kappa_resolve(
    kappa: f64,
    l_raw: f64,
    n_total: f64,
    rate_at: impl Fn(f64) -> f64,
) -> KappaResolution {
    let mut eps = (kappa * l_raw).min(0.5);
    for it in 1..=KAPPA_MAX_ITERATIONS {
        let r = rate_at(eps);
        if !(r > 0.0) {
            return KappaResolution {
                eps_sec: eps,
                iterations: it,
                converged: true,
            };
        }
        let next = (kappa * r * n_total).min(0.5);
        let change = ((next - eps) / eps).abs();
        eps = next;
        if change < KAPPA_TOLERANCE {
            return KappaResolution {
                eps_sec: eps,
                iterations: it,
                converged: true,
            };
        }
    }
    KappaResolution {
        eps_sec: eps,
        iterations: KAPPA_MAX_ITERATIONS,
        converged: false,
    }
}

/// Simulates the channel and returns the best rate over all combinations.
/// Infeasible points come back with rate 0 and a reason; only malformed
/// inputs produce an error.
pub fn evaluate(
    protocol: &ProtocolParams,
    channel: &ChannelParams,
    settings: &FiniteKeySettings,
) -> Result<KeyRateReport> {
    let point = PreparedPoint::from_channel(protocol.clone(), channel, settings)?;
    if !(point.ctx.l_raw > 0.0 && point.ctx.s_x > 0.0) {
        let mut report = point.best(|_| 0.5);
        report.rate = 0.0;
        report.raw_rate = f64::NEG_INFINITY;
        report.reason = Some("no detections".into());
        return Ok(report);
    }
    Ok(point.evaluate(settings.budget))
}
