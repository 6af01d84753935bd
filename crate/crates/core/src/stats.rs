//! Small descriptive and goodness-of-fit statistics used by the harness and
//! the validation suites.

use crate::scalar::normal_cdf;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with divisor `n − 1`.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Sample covariance with divisor `n − 1`.
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

/// Quantile by linear interpolation of order statistics; `sorted` ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

pub fn median(v: &[f64]) -> f64 {
    quantile_sorted(&sorted(v), 0.5)
}

/// Kolmogorov survival function `Q(λ) = 2 Σ (−1)^{j−1} e^{−2j²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let sa = sorted(a);
    let sb = sorted(b);
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = sa[i].min(sb[j]);
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

/// Anderson–Darling `A²` against a fully specified normal law.
pub fn anderson_darling_normal(v: &[f64], mu: f64, sd: f64) -> f64 {
    let n = v.len();
    let u: Vec<f64> = sorted(v)
        .iter()
        .map(|x| normal_cdf((x - mu) / sd).clamp(1e-300, 1.0 - 1e-16))
        .collect();
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (u[i].ln() + (1.0 - u[n - 1 - i]).ln()))
        .sum();
    -(n as f64) - s / n as f64
}

/// 1% critical value of `A²` when the null law is fully specified.
pub const AD_CRITICAL_1PCT: f64 = 3.857;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0], 0.5), 1.5);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 0.5).abs() < 3e-3);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_reference_value() {
        // Q(1.36) ≈ 0.0494 (the familiar 5% point).
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
    }

    #[test]
    fn ad_on_normal_quantiles_is_small() {
        let n = 1000;
        let v: Vec<f64> = (1..=n)
            .map(|i| {
                let p = (i as f64 - 0.5) / n as f64;
                // invert by bisection
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..100 {
                    let m = 0.5 * (lo + hi);
                    if normal_cdf(m) < p { lo = m } else { hi = m }
                }
                0.5 * (lo + hi)
            })
            .collect();
        assert!(anderson_darling_normal(&v, 0.0, 1.0) < 0.1);
        assert!(anderson_darling_normal(&v, 0.5, 1.0) > AD_CRITICAL_1PCT);
    }
}
