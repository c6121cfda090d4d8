//! Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

use crate::error::{Error, Result};

/// `sup_x |F_a(x) - F_b(x)|` over the right-continuous empirical CDFs of two
/// ascending samples. Tied values advance both CDFs together.
pub fn ks_statistic<T: PartialOrd + Copy>(sample_a: &[T], sample_b: &[T]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::invalid("KS statistic needs two non-empty samples"));
    }
    debug_assert!(sample_a.windows(2).all(|w| w[0] <= w[1]), "sample_a not sorted");
    debug_assert!(sample_b.windows(2).all(|w| w[0] <= w[1]), "sample_b not sorted");

    let (n, m) = (sample_a.len(), sample_b.len());
    let (nf, mf) = (n as f64, m as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = if sample_a[i] <= sample_b[j] {
            sample_a[i]
        } else {
            sample_b[j]
        };
        while i < n && sample_a[i] <= x {
            i += 1;
        }
        while j < m && sample_b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / nf - j as f64 / mf).abs());
    }
    Ok(d)
}

/// Below this lambda the Kolmogorov tail equals 1 to within 1e-12.
const LAMBDA_FLOOR: f64 = 0.2;
const TERM_EPS: f64 = 1e-10;

/// Kolmogorov survival function `Q(lambda) = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`,
/// summed until a term drops below 1e-10 and clamped to `[0, 1]`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < LAMBDA_FLOOR {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 2.0;
    for k in 1..=1_000u32 {
        let kf = k as f64;
        let term = sign * (a * kf * kf).exp();
        sum += term;
        if term.abs() < TERM_EPS {
            break;
        }
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

/// Asymptotic two-sample p-value for statistic `d` with sample sizes `n` and `m`,
/// using the small-sample correction `lambda = (sqrt(e) + 0.12 + 0.11 / sqrt(e)) * d`
/// with `e = n m / (n + m)`.
pub fn ks_pvalue(d: f64, n: usize, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::invalid(format!("KS statistic must lie in [0, 1], got {d}")));
    }
    if n == 0 || m == 0 {
        return Err(Error::invalid("KS p-value needs n, m >= 1"));
    }
    let en = ((n as f64 * m as f64) / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(kolmogorov_q(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Jacobi-theta form of the same distribution:
    // 1 - Q(l) = sqrt(2 pi) / l * sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 l^2)).
    fn q_dual(lambda: f64) -> f64 {
        let mut s = 0.0;
        for k in 1..200 {
            let t = (2 * k - 1) as f64;
            s += (-(t * t) * std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1, 2, 3], &[10, 11, 12]).unwrap(), 1.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), 0.5);
        assert!(ks_statistic::<f64>(&[], &[1.0]).is_err());
    }

    #[test]
    fn ties_advance_together() {
        // F_a jumps to 1 at x = 0, F_b reaches 1/2 there.
        assert_eq!(ks_statistic(&[0, 0, 0, 0], &[0, 1]).unwrap(), 0.5);
        assert_eq!(ks_statistic(&[5, 5], &[5]).unwrap(), 0.0);
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(ks_pvalue(0.0, 10, 10).unwrap(), 1.0);
        assert!(ks_pvalue(1.0, 1000, 1000).unwrap() < 1e-10);
        // scipy.special.kolmogorov at the corrected lambda.
        let p = ks_pvalue(0.05, 1000, 1000).unwrap();
        assert!((p - 0.15955408974378785).abs() < 1e-4, "{p}");
        assert!(ks_pvalue(1.5, 10, 10).is_err());
        assert!(ks_pvalue(0.5, 0, 10).is_err());
    }

    #[test]
    fn series_agrees_with_theta_form() {
        for i in 1..=60 {
            let l = 0.25 + i as f64 * 0.05;
            assert!((kolmogorov_q(l) - q_dual(l)).abs() < 1e-9, "lambda {l}");
        }
    }

    proptest! {
        #[test]
        fn statistic_is_symmetric(mut a in prop::collection::vec(0u32..50, 1..60),
                                  mut b in prop::collection::vec(0u32..50, 1..60)) {
            a.sort_unstable();
            b.sort_unstable();
            let d1 = ks_statistic(&a, &b).unwrap();
            let d2 = ks_statistic(&b, &a).unwrap();
            prop_assert_eq!(d1, d2);
            prop_assert!((0.0..=1.0).contains(&d1));
        }

        #[test]
        fn statistic_invariant_under_monotone_map(mut a in prop::collection::vec(-100i32..100, 1..40),
                                                  mut b in prop::collection::vec(-100i32..100, 1..40)) {
            a.sort_unstable();
            b.sort_unstable();
            let f = |x: &i32| (*x as f64 * 0.37).exp() + 3.0;
            let fa: Vec<f64> = a.iter().map(f).collect();
            let fb: Vec<f64> = b.iter().map(f).collect();
            prop_assert_eq!(ks_statistic(&a, &b).unwrap(), ks_statistic(&fa, &fb).unwrap());
        }

        #[test]
        fn pvalue_nonincreasing_in_d(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, n in 1usize..5000, m in 1usize..5000) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(ks_pvalue(lo, n, m).unwrap() >= ks_pvalue(hi, n, m).unwrap() - 1e-9);
        }
    }
}
