use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Percentile levels of the stored asset quantiles.
pub const PERCENTILES: [f64; 5] = [0.125, 0.375, 0.625, 0.875, 0.95];

/// Initial asset distribution: piecewise-linear quantile function through the
/// origin and four survey percentiles, with a Pareto tail above the 87.5th.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfDistribution {
    /// `(percentile, assets)` pairs, percentiles as fractions.
    pub percentile_points: Vec<(f64, f64)>,
    pub pareto_alpha: f64,
    pub pareto_threshold: f64,
}

/// Shipped calibration inputs: financial assets at the 12.5/37.5/62.5/87.5/95th
/// percentiles in quarterly-income units.
pub const DEFAULT_QUANTILES: [f64; 5] = [0.05, 0.45, 1.6, 4.0, 7.5];

impl Default for ScfDistribution {
    fn default() -> Self {
        ScfDistribution::from_quantiles(DEFAULT_QUANTILES).expect("shipped quantiles are valid")
    }
}

impl ScfDistribution {
    /// Build from asset values at [`PERCENTILES`].
    pub fn from_quantiles(q: [f64; 5]) -> Result<Self> {
        if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("asset quantiles must be finite and nonnegative: {q:?}")));
        }
        if q.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(format!("asset quantiles must be nondecreasing: {q:?}")));
        }
        if !(q[4] > q[3] && q[3] > 0.0) {
            return Err(Error::Config("the 95th percentile must exceed a positive 87.5th".into()));
        }
        Ok(ScfDistribution {
            percentile_points: PERCENTILES.iter().cloned().zip(q).collect(),
            pareto_alpha: -(1.0f64 - 0.95).ln() / (q[4] / q[3]).ln(),
            pareto_threshold: q[3],
        })
    }

    pub fn quantiles(&self) -> [f64; 5] {
        let mut q = [0.0; 5];
        for (o, (_, v)) in q.iter_mut().zip(&self.percentile_points) {
            *o = *v;
        }
        q
    }

    /// Asset level at cumulative probability `u`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let splice = self.percentile_points[3].0;
        if u <= splice {
            let mut prev = (0.0, 0.0);
            for &(pu, pa) in &self.percentile_points[..4] {
                if u <= pu {
                    return prev.1 + (pa - prev.1) * (u - prev.0) / (pu - prev.0);
                }
                prev = (pu, pa);
            }
            unreachable!()
        } else {
            let v = (u - splice) / (1.0 - splice);
            self.pareto_threshold * (1.0 - v).powf(-1.0 / self.pareto_alpha)
        }
    }

    pub fn median(&self) -> f64 {
        self.inverse_cdf(0.5)
    }
}

/// One inverse-CDF draw.
pub fn sample_initial_assets<R: Rng + ?Sized>(d: &ScfDistribution, rng: &mut R) -> f64 {
    // gen::<f64>() is in [0, 1); flip it so the tail never hits v = 1.
    d.inverse_cdf(1.0 - rng.gen::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn splice_and_origin() {
        let d = ScfDistribution::default();
        assert_eq!(d.inverse_cdf(0.0), 0.0);
        assert_eq!(d.inverse_cdf(0.875), d.quantiles()[3]);
        assert!((d.inverse_cdf(0.375) - 0.45).abs() < 1e-15);
        assert!(d.inverse_cdf(0.9) > d.quantiles()[3]);
        let alpha = -(0.05f64).ln() / (7.5f64 / 4.0).ln();
        assert!((d.pareto_alpha - alpha).abs() < 1e-14);
    }

    #[test]
    fn empirical_quantiles() {
        let d = ScfDistribution::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_initial_assets(&d, &mut rng)).collect();
        assert!(xs.iter().all(|&x| x >= 0.0 && x.is_finite()));
        xs.sort_by(f64::total_cmp);
        let q375 = xs[37_500];
        assert!((q375 / 0.45 - 1.0).abs() < 0.02, "{q375}");
        let med = xs[50_000];
        assert!((med / d.median() - 1.0).abs() < 0.05, "{med}");
    }

    #[test]
    fn rejects_bad_quantiles() {
        assert!(ScfDistribution::from_quantiles([0.1, 0.05, 1.0, 2.0, 3.0]).is_err());
        assert!(ScfDistribution::from_quantiles([0.1, 0.2, 1.0, 2.0, 2.0]).is_err());
        assert!(ScfDistribution::from_quantiles([-0.1, 0.2, 1.0, 2.0, 3.0]).is_err());
    }
}
