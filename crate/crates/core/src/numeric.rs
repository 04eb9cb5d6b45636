//! Small numerical helpers shared by the bound and rate layers.

/// Neumaier-compensated sum of `terms`, accumulated in order of descending
/// magnitude. The decoy coefficients alternate in sign and can be large, so
/// plain left-to-right summation loses digits.
pub fn compensated_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for &t in terms.iter() {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            carry += (sum - s) + t;
        } else {
            carry += (t - s) + sum;
        }
        sum = s;
    }
    sum + carry
}

/// Elementary symmetric polynomial `e_r(values)`. `e_0 = 1`; `e_r = 0` for
/// `r > values.len()`.
pub fn elementary_symmetric(values: &[f64], r: usize) -> f64 {
    if r > values.len() {
        return 0.0;
    }
    let mut e = vec![0.0_f64; r + 1];
    e[0] = 1.0;
    for (n, &v) in values.iter().enumerate() {
        let top = r.min(n + 1);
        for d in (1..=top).rev() {
            e[d] += v * e[d - 1];
        }
    }
    e[r]
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, m| acc * m as f64)
}

/// `sum_{j >= order} mu^(j - 1) / j!`, i.e. `(e^mu - sum_{j < order} mu^j/j!) / mu`
/// without the cancellation of the direct difference. Returns 0 for `mu == 0`.
pub fn exp_tail_over_mu(mu: f64, order: usize) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let order = order.max(1);
    // first term mu^(order-1)/order!
    let mut term = mu.powi(order as i32 - 1) / factorial(order);
    let mut sum = 0.0;
    let mut j = order;
    while term != 0.0 {
        sum += term;
        if term.abs() < 1e-30 * sum.abs() {
            break;
        }
        j += 1;
        term *= mu / j as f64;
    }
    sum
}

/// Width of a finite set: `max - min`.
pub fn width(values: &[f64]) -> Option<f64> {
    let (lo, hi) = min_max(values)?;
    Some(hi - lo)
}

pub fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_symmetric_small_cases() {
        let v = [2.0, 3.0, 5.0];
        assert_eq!(elementary_symmetric(&v, 0), 1.0);
        assert_eq!(elementary_symmetric(&v, 1), 10.0);
        assert_eq!(elementary_symmetric(&v, 2), 6.0 + 10.0 + 15.0);
        assert_eq!(elementary_symmetric(&v, 3), 30.0);
        assert_eq!(elementary_symmetric(&v, 4), 0.0);
        assert_eq!(elementary_symmetric(&[], 0), 1.0);
    }

    #[test]
    fn exp_tail_matches_direct_difference_for_large_mu() {
        let mu: f64 = 0.9;
        let direct = (mu.exp() - 1.0 - mu) / mu;
        assert!((exp_tail_over_mu(mu, 2) - direct).abs() < 1e-15);
    }

    #[test]
    fn exp_tail_small_mu_keeps_precision() {
        // leading term mu^2/3! dominates
        let mu = 1e-6;
        let v = exp_tail_over_mu(mu, 3);
        let lead = mu * mu / 6.0;
        assert!(((v - lead) / lead).abs() < 1e-6);
    }

    #[test]
    fn compensated_sum_recovers_small_residual() {
        let mut t = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(&mut t), 2.0);
    }

    #[test]
    fn width_basics() {
        assert_eq!(width(&[1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(width(&[4.5]), Some(0.0));
        assert_eq!(width(&[]), None);
    }
}
