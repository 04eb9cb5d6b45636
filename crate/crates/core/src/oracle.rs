//! Brute-force ground truth for the analytic bounds.
//!
//! A [`TruncatedSource`] fixes every photon-number yield `Y_{a,b}` and error
//! rate `e_{a,b}` up to a cutoff where the Poisson tail is negligible, so the
//! gains it produces and the yields the bounds are meant to bracket are both
//! known exactly. The suites here draw seeded random sources and ladders and
//! record every bound that sides the wrong way.

use std::fmt;

use dashu_float::FBig;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decoy_algebra::{
    c_coefficient, coefficient_sets, divided_power_sum, vandermonde_inverse_row, Basis,
    CoefficientSet, IntensityLadder,
};
use crate::error::{Error, Result};
use crate::finite_key::{
    delta_terms, e11_bound, FiniteKeyContext, Method, MethodDTerms,
};
use crate::numeric::{elementary_symmetric, factorial};
use crate::yield_bounds::{compute_bounds, GainStatistics};

/// Poisson mass allowed beyond the truncation.
pub const TAIL_MASS: f64 = 1e-12;

/// Photon-number cutoff used unless the intensities call for more.
pub const DEFAULT_TRUNCATION: usize = 12;

/// Slack allowed when comparing a bound with the truth.
pub const DOMINANCE_SLACK: f64 = 1e-9;

/// Smallest `N_c` whose Poisson tail `P(n > N_c)` at `mu_max` is below
/// [`TAIL_MASS`].
pub fn truncation_for(mu_max: f64) -> usize {
    let mut term = (-mu_max).exp();
    let mut cdf = term;
    let mut n = 0;
    while 1.0 - cdf >= TAIL_MASS && n < 200 {
        n += 1;
        term *= mu_max / n as f64;
        cdf += term;
        // 1 - cdf stops resolving below ~1e-16; the next term bounds the tail
        if term < TAIL_MASS * 1e-3 {
            break;
        }
    }
    n
}

/// Yields and error rates for every photon-number pair `a, b <= N_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSource {
    max_photon: usize,
    yields: Vec<f64>,
    errors: Vec<f64>,
}

impl TruncatedSource {
    pub fn new(max_photon: usize, yields: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        let n = (max_photon + 1) * (max_photon + 1);
        if yields.len() != n || errors.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} yields and error rates for N_c = {max_photon}"
            )));
        }
        let in_unit = |v: &f64| (0.0..=1.0).contains(v);
        if !yields.iter().all(in_unit) || !errors.iter().all(in_unit) {
            return Err(Error::InvalidParameter(
                "source yields and error rates must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            max_photon,
            yields,
            errors,
        })
    }

    /// Source with `Y_{a,b} = f(a, b).0` and `e_{a,b} = f(a, b).1`.
    pub fn from_fn(max_photon: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> Result<Self> {
        let mut yields = Vec::new();
        let mut errors = Vec::new();
        for a in 0..=max_photon {
            for b in 0..=max_photon {
                let (y, e) = f(a, b);
                yields.push(y);
                errors.push(e);
            }
        }
        Self::new(max_photon, yields, errors)
    }

    pub fn max_photon(&self) -> usize {
        self.max_photon
    }

    pub fn y(&self, a: usize, b: usize) -> f64 {
        self.yields[a * (self.max_photon + 1) + b]
    }

    pub fn e(&self, a: usize, b: usize) -> f64 {
        self.errors[a * (self.max_photon + 1) + b]
    }
}

fn poisson_weights(mu: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n + 1);
    let mut term = (-mu).exp();
    w.push(term);
    for a in 1..=n {
        term *= mu / a as f64;
        w.push(term);
    }
    w
}

/// `Q_{i,j} = sum_{a,b} P(a|mu_i) P(b|mu_j) Y_{a,b}` and likewise for
/// `Q E` with `Y e`.
pub fn forward_gains(src: &TruncatedSource, ladder: &IntensityLadder) -> Result<GainStatistics> {
    let k = ladder.k();
    let n = src.max_photon();
    let weights: Vec<Vec<f64>> = ladder
        .intensities()
        .iter()
        .map(|&m| poisson_weights(m, n))
        .collect();
    let mut gains = Vec::with_capacity(k * k);
    let mut errors = Vec::with_capacity(k * k);
    let mut zero = Vec::with_capacity(k * k);
    for wi in &weights {
        for wj in &weights {
            let mut q = 0.0;
            let mut qe = 0.0;
            for a in 0..=n {
                for b in 0..=n {
                    let w = wi[a] * wj[b] * src.y(a, b);
                    q += w;
                    qe += w * src.e(a, b);
                }
            }
            if q > 0.0 {
                gains.push(q.min(1.0));
                errors.push((qe / q).clamp(0.0, 1.0));
                zero.push(false);
            } else {
                gains.push(0.0);
                errors.push(crate::channel::E0);
                zero.push(true);
            }
        }
    }
    GainStatistics::with_zero_gain_flags(ladder.basis(), k, gains, errors, zero)
}

/// Exact values the bounds are meant to bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub y11: f64,
    pub ye11: f64,
    pub ybar11: f64,
    /// `sum_j p_j sum_b P(b|mu_j) Y_{0,b}`
    pub y0_star: f64,
}

impl GroundTruth {
    pub fn e11(&self) -> Option<f64> {
        (self.y11 > 0.0).then(|| self.ye11 / self.y11)
    }
}

pub fn ground_truth(src: &TruncatedSource, ladder: &IntensityLadder) -> GroundTruth {
    let n = src.max_photon();
    let (y11, e11) = if n >= 1 {
        (src.y(1, 1), src.e(1, 1))
    } else {
        (0.0, 0.0)
    };
    let y0_star = ladder
        .intensities()
        .iter()
        .zip(ladder.cond_probs())
        .map(|(&m, &p)| {
            let w = poisson_weights(m, n);
            p * (0..=n).map(|b| w[b] * src.y(0, b)).sum::<f64>()
        })
        .sum();
    GroundTruth {
        y11,
        ye11: y11 * e11,
        ybar11: y11 * (1.0 - e11),
        y0_star,
    }
}

/// Random descending intensities in `[lo, hi]` whose neighbours are at least
/// `min_sep` apart.
pub fn random_intensities<R: Rng>(rng: &mut R, k: usize, lo: f64, hi: f64, min_sep: f64) -> Vec<f64> {
    loop {
        let mut mu: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..=hi)).collect();
        mu.sort_by(|a, b| b.total_cmp(a));
        if mu.windows(2).all(|w| w[0] - w[1] >= min_sep) {
            return mu;
        }
    }
}

/// Normalised exponential draws: uniform on the probability simplex.
pub fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3)
        .collect();
    let total: f64 = draws.iter().sum();
    let mut p: Vec<f64> = draws.iter().map(|d| d / total).collect();
    // fold the rounding residue into the largest entry
    let resid = 1.0 - p.iter().sum::<f64>();
    let big = (0..k).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0);
    p[big] += resid;
    p
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Coefficient builder under test; the suites default to
/// [`coefficient_sets`] but accept a substitute so that a broken builder can
/// be shown to fail.
pub type CoefficientFn<'a> = &'a dyn Fn(&IntensityLadder) -> Result<CoefficientSet>;

/// One bound that sided the wrong way.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub instance: usize,
    pub seed: u64,
    pub bound: String,
    /// how far past the truth the bound went (positive means violated)
    pub slack: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "violation instance={} seed={} bound={} slack={:e}",
            self.instance, self.seed, self.bound, self.slack
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DominanceReport {
    pub instances: usize,
    pub checks: usize,
    /// method bounds that returned an error (no claim made, not a violation)
    pub not_applicable: usize,
    /// method bounds evaluated against the truth, in `Method::ALL` order
    pub method_checks: [usize; 4],
    pub violations: Vec<Violation>,
    /// largest `bound - truth` excess seen on the wrong side; negative when
    /// every bound held with room to spare
    pub worst_slack: f64,
    pub even_k: usize,
    pub odd_k: usize,
    pub adversarial: usize,
}

impl DominanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for DominanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        write!(
            f,
            "dominance instances={} checks={} not_applicable={} method_checks={:?} violations={} worst_slack={:e}",
            self.instances,
            self.checks,
            self.not_applicable,
            self.method_checks,
            self.violations.len(),
            self.worst_slack
        )
    }
}

/// One random dominance instance: source, ladder and X-basis sample size.
#[derive(Debug, Clone)]
pub struct DominanceInstance {
    pub source: TruncatedSource,
    pub ladder: IntensityLadder,
    pub s_x: f64,
    pub adversarial: bool,
}

/// Instance `index` of the suite seeded with `seed`. `k` cycles through
/// 2..=5 so both parities appear; every fifth instance puts `Y = 1` on all
/// `a, b >= k` to load the neglected tail as heavily as possible.
/// Two in five use a channel-like source with widely spaced intensities,
/// even decoy probabilities and large samples, so the method bounds are
/// exercised rather than vacuous; the rest draw every yield and error rate
/// uniformly.
pub fn dominance_instance(seed: u64, index: usize) -> DominanceInstance {
    let mut rng = instance_rng(seed, index);
    let k = 2 + index % 4;
    let adversarial = index % 5 == 4;
    let lossy = matches!(index % 5, 1 | 2);
    let sep = if lossy { 0.15 } else { 0.02 };
    let mu = random_intensities(&mut rng, k, 1e-6, 1.0, sep);
    let probs = if lossy {
        vec![1.0 / k as f64; k]
    } else {
        random_simplex(&mut rng, k)
    };
    let ladder = IntensityLadder::new(Basis::X, mu.clone(), probs, 0.5)
        .expect("generated ladder is valid");
    let n_c = truncation_for(mu[0]).max(DEFAULT_TRUNCATION);
    let tail_error = rng.gen_bool(0.5);
    let t: f64 = rng.gen_range(0.05..0.9);
    let floor = rng.gen_range(0.0..0.05);
    let mut cells = Vec::with_capacity((n_c + 1) * (n_c + 1));
    for a in 0..=n_c {
        for b in 0..=n_c {
            if adversarial && a >= k && b >= k {
                cells.push((1.0, if tail_error { 1.0 } else { 0.0 }));
            } else if lossy {
                let click = (1.0 - (1.0 - t).powi(a as i32)) * (1.0 - (1.0 - t).powi(b as i32));
                let y = floor + (1.0 - floor) * click;
                cells.push((y, rng.gen_range(0.0..0.3)));
            } else {
                cells.push((rng.gen::<f64>(), rng.gen::<f64>()));
            }
        }
    }
    let source = TruncatedSource::from_fn(n_c, |a, b| cells[a * (n_c + 1) + b])
        .expect("generated source is valid");
    let s_x = if lossy {
        10f64.powf(rng.gen_range(9.0..14.0))
    } else {
        10f64.powf(rng.gen_range(3.0..9.0))
    };
    DominanceInstance {
        source,
        ladder,
        s_x,
        adversarial,
    }
}

/// Checks the five yield bounds and the four `e_{X,1,1}` methods against the
/// truth on `n` seeded instances.
pub fn dominance_suite(n: usize, seed: u64) -> DominanceReport {
    dominance_suite_with(n, seed, &coefficient_sets)
}

pub fn dominance_suite_with(n: usize, seed: u64, coeffs: CoefficientFn<'_>) -> DominanceReport {
    let mut report = DominanceReport {
        worst_slack: f64::NEG_INFINITY,
        ..Default::default()
    };
    for index in 0..n {
        let inst = dominance_instance(seed, index);
        report.instances += 1;
        if inst.ladder.k() % 2 == 0 {
            report.even_k += 1;
        } else {
            report.odd_k += 1;
        }
        if inst.adversarial {
            report.adversarial += 1;
        }
        check_instance(&inst, seed, index, coeffs, &mut report);
    }
    if report.checks == 0 {
        report.worst_slack = 0.0;
    }
    report
}

fn check_instance(
    inst: &DominanceInstance,
    seed: u64,
    index: usize,
    coeffs: CoefficientFn<'_>,
    report: &mut DominanceReport,
) {
    let truth = ground_truth(&inst.source, &inst.ladder);
    let mut record = |name: &str, excess: f64| {
        report.checks += 1;
        report.worst_slack = report.worst_slack.max(excess);
        if !(excess <= DOMINANCE_SLACK) {
            report.violations.push(Violation {
                instance: index,
                seed,
                bound: name.to_string(),
                slack: excess,
            });
        }
    };
    let stats = match forward_gains(&inst.source, &inst.ladder) {
        Ok(s) => s,
        Err(_) => {
            record("forward_gains", f64::INFINITY);
            return;
        }
    };
    let (c, bounds) = match coeffs(&inst.ladder)
        .and_then(|c| compute_bounds(&stats, &c, &inst.ladder).map(|b| (c, b)))
    {
        Ok(v) => v,
        Err(_) => {
            record("coefficients", f64::INFINITY);
            return;
        }
    };
    let raw = bounds.raw;
    // a lower bound's excess is bound - truth; an upper bound's is truth - bound
    record("y0_star_lower", raw.y0_star_lower - truth.y0_star);
    record("y11_lower", raw.y11_lower - truth.y11);
    record("ye11_upper", truth.ye11 - raw.ye11_upper);
    record("ye11_lower", raw.ye11_lower - truth.ye11);
    record("ybar11_lower", raw.ybar11_lower - truth.ybar11);

    let Some(e11) = truth.e11() else {
        return;
    };
    let ctx = FiniteKeyContext {
        l_raw: inst.s_x,
        s_x: inst.s_x,
        n_total: inst.s_x,
        eps_sec: 1e-10,
        eps_cor: 1e-10,
        chi: 9,
        kappa: None,
    };
    let deltas = match delta_terms(&stats, &c, &inst.ladder, &ctx) {
        Ok(d) => d,
        Err(_) => {
            record("delta_terms", f64::INFINITY);
            return;
        }
    };
    for method in Method::ALL {
        match e11_bound(method, &bounds, &deltas, &stats, &c, &inst.ladder, &ctx) {
            Ok(r) => {
                record(&format!("e11_method_{method}"), e11 - r.e11_upper);
                report.method_checks[method as usize] += 1;
            }
            Err(_) => report.not_applicable += 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Exact rational arithmetic for the algebraic identities.

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite intensity")
}

fn rational_factorial(n: usize) -> BigRational {
    let mut f = BigInt::one();
    for m in 2..=n {
        f *= BigInt::from(m);
    }
    BigRational::from_integer(f)
}

fn rational_elementary(values: &[BigRational], r: usize) -> BigRational {
    if r > values.len() {
        return BigRational::zero();
    }
    let mut e = vec![BigRational::zero(); r + 1];
    e[0] = BigRational::one();
    for (n, v) in values.iter().enumerate() {
        for d in (1..=r.min(n + 1)).rev() {
            let add = v * &e[d - 1];
            e[d] += add;
        }
    }
    e[r].clone()
}

/// `C_{a+1,i}` evaluated exactly on the rational values of the intensities.
pub fn c_coefficient_exact(intensities: &[f64], a: usize, i: usize) -> BigRational {
    let mu: Vec<BigRational> = intensities.iter().map(|&m| rational(m)).collect();
    let k = mu.len();
    let mut sum = BigRational::zero();
    for t in 0..k {
        let rest: Vec<BigRational> = (0..k).filter(|&l| l != t).map(|l| mu[l].clone()).collect();
        let mut den = BigRational::one();
        for r in &rest {
            den *= &mu[t] - r;
        }
        let mut pow = BigRational::one();
        for _ in 0..i {
            pow *= &mu[t];
        }
        sum += pow * rational_elementary(&rest, k - a - 1) / den;
    }
    let scaled = sum * rational_factorial(a) / rational_factorial(i);
    if (k - a) % 2 == 0 {
        scaled
    } else {
        -scaled
    }
}

/// Row `a + 1` of the closed-form moment-matrix inverse, exactly.
fn inverse_row_exact(mu: &[BigRational], a: usize) -> Vec<BigRational> {
    let k = mu.len();
    (0..k)
        .map(|i| {
            let rest: Vec<BigRational> =
                (0..k).filter(|&l| l != i).map(|l| mu[l].clone()).collect();
            let mut den = BigRational::one();
            for r in &rest {
                den *= &mu[i] - r;
            }
            let v = rational_elementary(&rest, k - a - 1) * rational_factorial(a) / den;
            if (k - a - 1) % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Double inversion in exact arithmetic for a source with no photon number
/// above `k - 1`. The scaled gains `e^{mu_i + mu_j} Q_{i,j}` of such a source
/// are polynomials in the intensities, so they and the closed-form inverse
/// rows are both evaluated without rounding. `yields` is row-major `k x k`.
pub fn reconstruct_yields_exact(intensities: &[f64], yields: &[f64]) -> Vec<f64> {
    let mu: Vec<BigRational> = intensities.iter().map(|&m| rational(m)).collect();
    let k = mu.len();
    let y: Vec<BigRational> = yields.iter().map(|&v| rational(v)).collect();
    // moments[i][a] = mu_i^a / a!
    let moments: Vec<Vec<BigRational>> = mu
        .iter()
        .map(|m| {
            let mut row = vec![BigRational::one()];
            for a in 1..k {
                let next = &row[a - 1] * m / BigRational::from_integer(BigInt::from(a));
                row.push(next);
            }
            row
        })
        .collect();
    let mut scaled = vec![BigRational::zero(); k * k];
    for i in 0..k {
        for j in 0..k {
            let mut s = BigRational::zero();
            for a in 0..k {
                for b in 0..k {
                    s += &moments[i][a] * &moments[j][b] * &y[a * k + b];
                }
            }
            scaled[i * k + j] = s;
        }
    }
    let rows: Vec<Vec<BigRational>> = (0..k).map(|a| inverse_row_exact(&mu, a)).collect();
    let mut out = Vec::with_capacity(k * k);
    for ra in &rows {
        for rb in &rows {
            let mut s = BigRational::zero();
            for i in 0..k {
                for j in 0..k {
                    s += &ra[i] * &rb[j] * &scaled[i * k + j];
                }
            }
            out.push(s.to_f64().unwrap_or(f64::NAN));
        }
    }
    out
}

/// Complete homogeneous symmetric polynomials `h_0 ..= h_max` of `values`.
fn complete_homogeneous(values: &[f64], max: usize) -> Vec<f64> {
    let mut h = vec![0.0; max + 1];
    h[0] = 1.0;
    for &v in values {
        for d in 1..=max {
            h[d] += v * h[d - 1];
        }
    }
    h
}

/// Independent evaluation of the tail constant on a subset `S` of size `n`:
/// `e_{n-1}(S) sum_{I >= n} h_{I-n}(S) / I!`, a series of non-negative terms
/// with no cancellation. A singleton `{0}` gives 0 rather than the limit 1,
/// matching the convention that a `1/mu` term vanishes at `mu = 0`.
pub fn c_tail_series(subset: &[f64]) -> f64 {
    let n = subset.len();
    if n == 0 || (n == 1 && subset[0] == 0.0) {
        return 0.0;
    }
    let terms = 60;
    let h = complete_homogeneous(subset, terms);
    let mut sum = 0.0;
    for (d, hd) in h.iter().enumerate() {
        let t = hd / factorial(n + d);
        sum += t;
        if d > 4 && t < 1e-30 * sum {
            break;
        }
    }
    elementary_symmetric(subset, n - 1) * sum
}

/// One failed identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityFailure {
    pub k: usize,
    pub ladder: usize,
    pub check: String,
    pub value: f64,
}

impl fmt::Display for IdentityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "identity failure k={} ladder={} check={} value={:e}",
            self.k, self.ladder, self.check, self.value
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityReport {
    pub ladders: usize,
    pub checks: usize,
    pub failures: Vec<IdentityFailure>,
    pub max_divided_sum: f64,
    pub max_inverse_error: f64,
    pub max_c_identity_error: f64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fl in &self.failures {
            writeln!(f, "{fl}")?;
        }
        write!(
            f,
            "identities ladders={} checks={} failures={} max_divided_sum={:e} max_inverse_error={:e} max_c_identity_error={:e}",
            self.ladders,
            self.checks,
            self.failures.len(),
            self.max_divided_sum,
            self.max_inverse_error,
            self.max_c_identity_error
        )
    }
}

/// Minimum neighbour separation of the "well-separated" ladders drawn by the
/// identity suite.
pub const IDENTITY_MIN_SEPARATION: f64 = 0.05;

pub const LEMMA1_TOLERANCE: f64 = 1e-9;
pub const INVERSE_TOLERANCE: f64 = 1e-8;
pub const C_IDENTITY_TOLERANCE: f64 = 1e-8;

/// Algebraic identities of the moment-matrix inversion on `n_per_k` random
/// well-separated ladders for each `k` in 2..=6.
pub fn identity_suite(n_per_k: usize, seed: u64) -> IdentityReport {
    identity_suite_with(n_per_k, seed, &coefficient_sets)
}

pub fn identity_suite_with(n_per_k: usize, seed: u64, coeffs: CoefficientFn<'_>) -> IdentityReport {
    let mut report = IdentityReport::default();
    for k in 2..=6 {
        for idx in 0..n_per_k {
            let mut rng = instance_rng(seed, k * 1_000_000 + idx);
            let mut mu = random_intensities(&mut rng, k, 0.0, 1.0, IDENTITY_MIN_SEPARATION);
            // pin the smallest intensity to the vacuum-like floor now and then
            if idx % 3 == 0 {
                mu[k - 1] = 0.0;
            }
            report.ladders += 1;
            check_ladder(&mu, k, idx, &mut rng, coeffs, &mut report);
        }
    }
    report
}

fn check_ladder(
    mu: &[f64],
    k: usize,
    idx: usize,
    rng: &mut ChaCha8Rng,
    coeffs: CoefficientFn<'_>,
    report: &mut IdentityReport,
) {
    let mut fail = |report: &mut IdentityReport, check: String, value: f64| {
        report.failures.push(IdentityFailure {
            k,
            ladder: idx,
            check,
            value,
        });
    };

    // divided power sums vanish for l <= k - 2
    for l in 0..=k.saturating_sub(2) {
        report.checks += 1;
        match divided_power_sum(mu, l) {
            Ok(v) => {
                report.max_divided_sum = report.max_divided_sum.max(v.abs());
                if !(v.abs() < LEMMA1_TOLERANCE) {
                    fail(report, format!("divided_power_sum l={l}"), v);
                }
            }
            Err(_) => fail(report, format!("divided_power_sum l={l}"), f64::NAN),
        }
    }

    // M^{-1} M = I
    let rows: Result<Vec<Vec<f64>>> = (0..k).map(|a| vandermonde_inverse_row(mu, a)).collect();
    match rows {
        Ok(rows) => {
            for (a, row) in rows.iter().enumerate() {
                for b in 0..k {
                    let v: f64 = (0..k)
                        .map(|i| row[i] * mu[i].powi(b as i32) / factorial(b))
                        .sum();
                    let err = (v - if a == b { 1.0 } else { 0.0 }).abs();
                    report.checks += 1;
                    report.max_inverse_error = report.max_inverse_error.max(err);
                    if !(err < INVERSE_TOLERANCE) {
                        fail(report, format!("inverse ({a},{b})"), err);
                    }
                }
            }
        }
        Err(_) => fail(report, "inverse".into(), f64::NAN),
    }

    for a in 0..k {
        // C_{a+1,i} = -delta_{a,i} for i < k
        for i in 0..k {
            let target = if a == i { -1.0 } else { 0.0 };
            report.checks += 1;
            match c_coefficient(mu, a, i) {
                Ok(v) => {
                    let err = (v - target).abs();
                    report.max_c_identity_error = report.max_c_identity_error.max(err);
                    if !(err < C_IDENTITY_TOLERANCE) {
                        fail(report, format!("C[{},{i}] identity", a + 1), err);
                    }
                }
                Err(_) => fail(report, format!("C[{},{i}] identity", a + 1), f64::NAN),
            }
        }
        // sign pattern for i in k..=k+3: sign(C_{a+1,i}) = (-1)^{k+a}, zero allowed
        // except for the second row, where it is strict
        for i in k..=k + 3 {
            report.checks += 1;
            let exact = c_coefficient_exact(mu, a, i);
            let want_positive = (k + a) % 2 == 0;
            let strict = a == 1;
            let ok = if want_positive {
                if strict {
                    exact.is_positive()
                } else {
                    !exact.is_negative()
                }
            } else if strict {
                exact.is_negative()
            } else {
                !exact.is_positive()
            };
            if !ok {
                fail(
                    report,
                    format!("C[{},{i}] sign", a + 1),
                    exact.to_f64().unwrap_or(f64::NAN),
                );
            }
            // the f64 evaluation agrees with the exact value
            report.checks += 1;
            let exact_f = exact.to_f64().unwrap_or(f64::NAN);
            match c_coefficient(mu, a, i) {
                Ok(v) => {
                    let err = (v - exact_f).abs() / exact_f.abs().max(1e-3);
                    if !(err < C_IDENTITY_TOLERANCE) {
                        fail(report, format!("C[{},{i}] value", a + 1), err);
                    }
                }
                Err(_) => fail(report, format!("C[{},{i}] value", a + 1), f64::NAN),
            }
        }
    }

    // coefficient sets: agreement with the inverse rows and the tail series
    let probs = random_simplex(rng, k);
    let ladder = match IntensityLadder::new(Basis::X, mu.to_vec(), probs, 0.5) {
        Ok(l) => l,
        Err(_) => {
            fail(report, "ladder".into(), f64::NAN);
            return;
        }
    };
    let set = match coeffs(&ladder) {
        Ok(s) => s,
        Err(_) => {
            fail(report, "coefficient_sets".into(), f64::NAN);
            return;
        }
    };
    check_against_inverse(&ladder, &set, report, &mut fail);

    let odd = &mu[ladder.odd_subset()];
    let expect = c_tail_series(odd);
    report.checks += 2;
    if !(set.c_tail >= 0.0) {
        fail(report, "c_tail sign".into(), set.c_tail);
    }
    let err = (set.c_tail - expect).abs() / expect.abs().max(1e-300);
    if !(err < C_IDENTITY_TOLERANCE) {
        fail(report, "c_tail value".into(), err);
    }
}

fn check_against_inverse(
    ladder: &IntensityLadder,
    set: &CoefficientSet,
    report: &mut IdentityReport,
    fail: &mut impl FnMut(&mut IdentityReport, String, f64),
) {
    let mu = ladder.intensities();
    let k = mu.len();
    let mut expected_even = [vec![0.0; k], vec![0.0; k]];
    let mut expected_odd = vec![0.0; k];
    let even = ladder.even_subset();
    let n = even.len();
    if let (Ok(r0), Ok(r1)) = (
        vandermonde_inverse_row(&mu[even.clone()], 0),
        vandermonde_inverse_row(&mu[even.clone()], 1),
    ) {
        // on an even-sized set: A_0 = e^mu M^{-1}_{1,i}, A_1 = -e^mu M^{-1}_{2,i}
        for (pos, i) in even.clone().enumerate() {
            expected_even[0][i] = mu[i].exp() * r0[pos];
            expected_even[1][i] = -mu[i].exp() * r1[pos];
        }
    } else if n >= 2 {
        fail(report, "inverse rows (even set)".into(), f64::NAN);
    }
    let odd = ladder.odd_subset();
    if odd.len() >= 2 {
        match vandermonde_inverse_row(&mu[odd.clone()], 1) {
            // on an odd-sized set: A_1 = e^mu M^{-1}_{2,i}
            Ok(r1) => {
                for (pos, i) in odd.clone().enumerate() {
                    expected_odd[i] = mu[i].exp() * r1[pos];
                }
            }
            Err(_) => fail(report, "inverse rows (odd set)".into(), f64::NAN),
        }
    }
    let compare = |got: &[f64], want: &[f64]| {
        got.iter()
            .zip(want)
            .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
            .fold(0.0, f64::max)
    };
    for (j, (got, want)) in set.a_even.iter().zip(&expected_even).enumerate() {
        report.checks += 1;
        let err = compare(got, want);
        if !(err < C_IDENTITY_TOLERANCE) {
            fail(report, format!("a_even[{j}] vs inverse"), err);
        }
    }
    report.checks += 1;
    let err = compare(&set.a_odd, &expected_odd);
    if !(err < C_IDENTITY_TOLERANCE) {
        fail(report, "a_odd vs inverse".into(), err);
    }
}

/// Yields recovered by full inversion of the gain matrix,
/// `Y_{a,b} = sum_{i,j} M^{-1}_{a+1,i} M^{-1}_{b+1,j} e^{mu_i + mu_j} Q_{i,j}`,
/// exact when the source emits at most `k - 1` photons per side.
pub fn reconstruct_yields(ladder: &IntensityLadder, stats: &GainStatistics) -> Result<Vec<f64>> {
    let mu = ladder.intensities();
    let k = mu.len();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|a| vandermonde_inverse_row(mu, a))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(k * k);
    for ra in &rows {
        for rb in &rows {
            let mut s = 0.0;
            for i in 0..k {
                for j in 0..k {
                    s += ra[i] * rb[j] * (mu[i] + mu[j]).exp() * stats.q(i, j);
                }
            }
            out.push(s);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Method D without the expansion.

type Big = FBig;

fn big(x: f64, precision: usize) -> Big {
    Big::try_from(x)
        .expect("finite input")
        .with_precision(precision)
        .value()
}

/// `g(a) = -1/a - 1/(a + W) + (2/W) ln((a + W)/a)`, the antiderivative whose
/// increments make up `r-hat^2`.
fn g(a: &Big, w: &Big) -> Big {
    let one = Big::ONE;
    let ratio = w / a;
    let log = ratio.ln_1p();
    -(&one / a) - (&one / (a + w)) + (Big::from(2) / w) * log
}

/// Derivative of `g`: `1/a^2 + 1/(a + W)^2 - 2/(a (a + W))`.
fn g_prime(a: &Big, w: &Big) -> Big {
    let one = Big::ONE;
    let aw = a + w;
    &one / (a * a) + &one / (&aw * &aw) - Big::from(2) / (a * &aw)
}

/// `r-hat^2` from its closed form,
/// `y^2 sum_m [g(E_m) - g(D_m)] / (w_m - x)`, evaluated with `precision`
/// binary digits so that the near-cancellation of the three terms in `g` is
/// resolved. Terms with `w_m = x` use `n_m g'(D_m)`.
pub fn r_hat_squared_direct(terms: &MethodDTerms, precision: usize) -> Result<f64> {
    let width = terms.width();
    if width == 0.0 {
        return Ok(0.0);
    }
    let w = big(width, precision);
    let x = big(terms.x, precision);
    let mut sum = big(0.0, precision);
    for (e, (d, end)) in terms.entries.iter().zip(terms.offsets()) {
        if !(d > 0.0 && end > 0.0) {
            return Err(Error::ExpansionInvalid);
        }
        if e.n == 0.0 {
            continue;
        }
        // rebuild D and E in extended precision from the f64 inputs
        let db = big(d, precision);
        let n = big(e.n, precision);
        let wm = big(e.w, precision);
        let step = &wm - &x;
        if e.w == terms.x {
            sum += n * g_prime(&db, &w);
        } else {
            let eb = &db + &n * &step;
            sum += (g(&eb, &w) - g(&db, &w)) / step;
        }
    }
    let y = big(terms.y, precision);
    let r2 = &y * &y * sum;
    Ok(r2.to_f64().value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_covers_tail() {
        let n = truncation_for(1.0);
        let w = poisson_weights(1.0, n);
        assert!(1.0 - w.iter().sum::<f64>() < 1e-11);
        assert!(truncation_for(0.0) <= 1);
    }

    #[test]
    fn vacuum_only_source() {
        let src = TruncatedSource::from_fn(12, |a, b| {
            (if a == 0 && b == 0 { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let l = IntensityLadder::new(Basis::X, vec![0.5, 0.1], vec![0.5, 0.5], 0.5).unwrap();
        let s = forward_gains(&src, &l).unwrap();
        assert!((s.q(0, 1) - (-0.6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exact_c_matches_identity() {
        let mu = [0.6, 0.2, 0.01];
        for a in 0..3 {
            for i in 0..3 {
                let v = c_coefficient_exact(&mu, a, i).to_f64().unwrap();
                assert_eq!(v, if a == i { -1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn tail_series_singleton() {
        let v = c_tail_series(&[0.1]);
        assert!((v - ((0.1f64).exp() - 1.0) / 0.1).abs() < 1e-15);
    }
}
