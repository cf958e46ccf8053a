use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Largest sample size for which the signed-rank null distribution is
/// computed exactly.
pub const EXACT_MAX_N: usize = 25;
pub const WILCOXON_MIN_N: usize = 5;

/// Mean with a two-sided Student-t interval, `mean ± t · s / √n`.
pub fn mean_ci(values: &[f64], level: f64) -> Result<(f64, f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Data(format!("confidence interval needs at least 2 values, got {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level {level} outside (0, 1)")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("confidence interval of non-finite values".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok((mean, mean, mean));
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Numeric(e.to_string()))?
        .inverse_cdf((1.0 + level) / 2.0);
    let half = t * var.sqrt() / (n as f64).sqrt();
    Ok((mean, mean - half, mean + half))
}

/// Twice the average rank (1-based) of each `|d|`, ties sharing their mean
/// rank. Doubling keeps tied ranks integral.
pub(crate) fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1, average (i+j+2)/2
        let r = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank p-value for paired samples.
///
/// Zero differences are dropped. All-zero input yields 1. Up to
/// [`EXACT_MAX_N`] non-zero pairs the null distribution of the positive
/// rank sum is counted exactly; beyond that a tie-corrected normal
/// approximation with continuity correction is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of lengths {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Data("signed-rank test on non-finite values".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Ok(1.0);
    }
    if d.len() < WILCOXON_MIN_N {
        return Err(Error::Data(format!(
            "signed-rank test needs at least {WILCOXON_MIN_N} non-zero differences, got {}",
            d.len()
        )));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let w_plus: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total: u64 = ranks.iter().sum();

    let p = if d.len() <= EXACT_MAX_N {
        // counts[s] = number of sign patterns whose positive doubled-rank sum is s
        let mut counts = vec![0u64; total as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let all = (1u64 << d.len()) as f64;
        let lower: u64 = counts[..=w_plus as usize].iter().sum();
        let upper: u64 = counts[w_plus as usize..].iter().sum();
        2.0 * lower.min(upper) as f64 / all
    } else {
        let w = w_plus as f64 / 2.0;
        let mean = total as f64 / 4.0;
        let var = ranks.iter().map(|r| (*r as f64).powi(2)).sum::<f64>() / 16.0;
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
        2.0 * (1.0 - normal.cdf(z))
    };
    Ok(p.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates all 2^n sign assignments of the (average) ranks.
    fn brute_force(a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
        if d.is_empty() {
            return 1.0;
        }
        let n = d.len();
        let rank = |i: usize| {
            let less = d.iter().filter(|v| v.abs() < d[i].abs()).count() as f64;
            let eq = d.iter().filter(|v| v.abs() == d[i].abs()).count() as f64;
            less + (eq + 1.0) / 2.0
        };
        let r: Vec<f64> = (0..n).map(rank).collect();
        let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| r[i]).sum();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
            if s <= observed + 1e-9 {
                le += 1;
            }
            if s >= observed - 1e-9 {
                ge += 1;
            }
        }
        (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
    }

    /// Student-t quantile by Simpson integration of the density and
    /// bisection.
    fn t_quantile(p: f64, nu: f64) -> f64 {
        let ln_gamma = |x: f64| statrs::function::gamma::ln_gamma(x);
        let c = (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp() / (nu * std::f64::consts::PI).sqrt();
        let pdf = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
        let cdf = |x: f64| {
            let n = 2000;
            let h = x / n as f64;
            let mut s = pdf(0.0) + pdf(x);
            for i in 1..n {
                s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            0.5 + s * h / 3.0
        };
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..100 {
            let mid = (lo + hi) / 2.0;
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / 2.0
    }

    #[test]
    fn t_interval_uses_independent_quantile() {
        let v = [0.1, 0.4, 0.35, 0.8, 0.55, 0.2, 0.9, 0.6, 0.45];
        let (m, lo, hi) = mean_ci(&v, 0.95).unwrap();
        let mean = v.iter().sum::<f64>() / 9.0;
        let s = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 8.0).sqrt();
        let t = t_quantile(0.975, 8.0);
        assert!((t - 2.306).abs() < 1e-3);
        assert!((m - mean).abs() < 1e-12);
        assert!((hi - (mean + t * s / 3.0)).abs() < 1e-8);
        assert!((lo - (mean - t * s / 3.0)).abs() < 1e-8);
    }

    #[test]
    fn interval_edge_cases() {
        assert_eq!(mean_ci(&[0.7; 5], 0.95).unwrap(), (0.7, 0.7, 0.7));
        assert!(mean_ci(&[1.0], 0.95).is_err());
        let eps = 1e-3;
        let mut v = vec![0.0; 9];
        v[8] = 9.0 * eps;
        let (m, lo, hi) = mean_ci(&v, 0.95).unwrap();
        assert!(((m - lo) - (hi - m)).abs() < 1e-15);
    }

    #[test]
    fn reference_p_values() {
        let a: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let zero = vec![0.0; 9];
        assert_eq!(wilcoxon_signed_rank(&a, &zero).unwrap(), 2.0 / 512.0);
        assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap(), 1.0);
        // negative ranks {1, 2, 3} give a lower-tail rank sum of 6
        let d = [-1.0, -2.0, -3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let p = wilcoxon_signed_rank(&d, &zero).unwrap();
        assert_eq!(p, 28.0 / 512.0);
        assert!((p - 0.0547).abs() < 1e-4);
        assert!(wilcoxon_signed_rank(&a[..4], &zero[..4]).is_err());
        assert!(wilcoxon_signed_rank(&a, &zero[..3]).is_err());
    }

    #[test]
    fn ties_match_enumeration() {
        let a = [1.0, 1.0, 2.0, -2.0, 3.0, 3.0, 3.0, -1.0];
        let b = [0.0; 8];
        assert!((wilcoxon_signed_rank(&a, &b).unwrap() - brute_force(&a, &b)).abs() < 1e-12);
        assert_eq!(doubled_ranks(&[1.0, 1.0, 2.0]), vec![3, 3, 6]);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        // negative ranks 4, 8, ..., 40: W- = 220, mean 410, variance 5535
        let a: Vec<f64> = (1..=40).map(|i| i as f64 * if i % 4 == 0 { -1.0 } else { 1.0 }).collect();
        let p = wilcoxon_signed_rank(&a, &[0.0; 40]).unwrap();
        let z: f64 = (190.0 - 0.5) / 5535.0f64.sqrt();
        let oracle = statrs::function::erf::erfc(z / std::f64::consts::SQRT_2);
        assert!((p - oracle).abs() < 1e-12);
        assert!((p - 0.010_861_4).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_is_symmetric(
            pairs in proptest::collection::vec((-6i32..7, -6i32..7), 5..12)
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let nonzero = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            prop_assume!(nonzero == 0 || nonzero >= WILCOXON_MIN_N);
            let p = wilcoxon_signed_rank(&a, &b).unwrap();
            prop_assert!((p - brute_force(&a, &b)).abs() < 1e-12);
            prop_assert_eq!(p, wilcoxon_signed_rank(&b, &a).unwrap());
        }

        #[test]
        fn untied_n9_lies_on_lattice(perm in Just((1..=9).collect::<Vec<u32>>()).prop_shuffle(), signs in any::<u16>()) {
            let d: Vec<f64> = perm.iter().enumerate()
                .map(|(i, r)| *r as f64 * if signs >> i & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            let p = wilcoxon_signed_rank(&d, &[0.0; 9]).unwrap();
            let k = p * 256.0;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
    }
}
