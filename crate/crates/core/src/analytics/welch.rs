use serde::Serialize;

use super::dist::t_two_sided;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelchResult {
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_difference: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

/// Conventional markers at the 1%, 5% and 10% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample t-test without assuming equal variances.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Analytics(format!(
            "Welch test needs two observations per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 && vb == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (va / na, vb / nb);
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = t_two_sided(t, df);
    Ok(WelchResult {
        n_a: a.len(),
        n_b: b.len(),
        mean_a: ma,
        mean_b: mb,
        mean_difference: ma - mb,
        t,
        df,
        p_value: p,
        stars: stars(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples() {
        let s = [1.0, 2.0, 4.0, 7.0];
        let r = welch_t(&s, &s).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.stars, "");
    }

    #[test]
    fn equal_sizes_and_variances_match_pooled_t() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [3.0, 4.0, 5.0, 6.0, 7.0];
        let r = welch_t(&a, &b).unwrap();
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let sp2 = (4.0 * va + 4.0 * vb) / 8.0;
        let pooled = (ma - mb) / (sp2 * (2.0 / 5.0)).sqrt();
        assert!((r.t - pooled).abs() < 1e-12);
        assert!((r.df - 8.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate() {
        assert!(matches!(welch_t(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::DegenerateSample)));
        assert!(welch_t(&[1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.009), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.07), "*");
        assert_eq!(stars(0.2), "");
    }

    proptest! {
        #[test]
        fn swapping_negates_t(
            a in prop::collection::vec(-10.0f64..10.0, 2..20),
            b in prop::collection::vec(-10.0f64..10.0, 2..20),
        ) {
            let (Ok(x), Ok(y)) = (welch_t(&a, &b), welch_t(&b, &a)) else { return Ok(()); };
            prop_assert!((x.t + y.t).abs() < 1e-12 * (1.0 + x.t.abs()));
            prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x.p_value));
            prop_assert!(x.df <= (a.len() + b.len() - 2) as f64 + 1e-9);
        }
    }
}
