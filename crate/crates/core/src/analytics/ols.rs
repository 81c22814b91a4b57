use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dist::{f_sf, t_quantile, t_two_sided};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    /// 95% interval bounds.
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_stat: f64,
    pub f_df: (usize, usize),
    pub f_p_value: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_observations: usize,
    /// Degrees of freedom used for the t intervals.
    pub df_resid: usize,
    pub residuals: Vec<f64>,
    /// Number of clusters when cluster-robust errors were requested.
    pub clusters: Option<usize>,
}

impl OlsResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }
}

fn fit(y: &[f64], x: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Analytics(format!("{} responses for {n} rows", y.len())));
    }
    if n < k + 1 {
        return Err(Error::Analytics(format!("need more than {k} rows, got {n}")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if diag_max == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * diag_max) {
        return Err(Error::RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient)?;
    // (X'X)^-1 = R^-1 R^-T
    let xtx_inv = &r_inv * r_inv.transpose();
    let resid = yv - x * &beta;
    Ok((beta, xtx_inv, resid))
}

fn assemble(
    names: &[&str],
    y: &[f64],
    beta: DVector<f64>,
    cov: DMatrix<f64>,
    resid: DVector<f64>,
    df_t: usize,
    clusters: Option<usize>,
) -> OlsResult {
    let n = y.len();
    let k = beta.len();
    let ssr = resid.norm_squared();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ess = (sst - ssr).max(0.0);
    let (r2, f) = if sst > 0.0 && k > 1 {
        let r2 = (1.0 - ssr / sst).clamp(0.0, 1.0);
        let f = if ess == 0.0 {
            0.0
        } else {
            (ess / (k - 1) as f64) / (ssr / (n - k) as f64)
        };
        (r2, f)
    } else {
        (0.0, 0.0)
    };
    let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k) as f64;
    let nf = n as f64;
    let ll = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + (ssr / nf).ln() + 1.0);
    let crit = t_quantile(0.975, df_t as f64);
    let se: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let coefficients: Vec<f64> = beta.iter().cloned().collect();
    let t_stats: Vec<f64> = coefficients.iter().zip(&se).map(|(b, s)| b / s).collect();
    OlsResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        p_values: t_stats.iter().map(|&t| t_two_sided(t, df_t as f64)).collect(),
        ci_lower: coefficients.iter().zip(&se).map(|(b, s)| b - crit * s).collect(),
        ci_upper: coefficients.iter().zip(&se).map(|(b, s)| b + crit * s).collect(),
        coefficients,
        std_errors: se,
        t_stats,
        r_squared: r2,
        adj_r_squared: adj,
        f_stat: f,
        f_df: (k - 1, n - k),
        f_p_value: f_sf(f, (k - 1) as f64, (n - k) as f64),
        log_likelihood: ll,
        aic: 2.0 * k as f64 - 2.0 * ll,
        bic: k as f64 * nf.ln() - 2.0 * ll,
        n_observations: n,
        df_resid: df_t,
        residuals: resid.iter().cloned().collect(),
        clusters,
    }
}

/// Least squares with homoskedastic standard errors. `x` must carry its own
/// intercept column; `names` labels the columns.
pub fn ols(y: &[f64], x: &DMatrix<f64>, names: &[&str]) -> Result<OlsResult> {
    assert_eq!(names.len(), x.ncols());
    let (beta, xtx_inv, resid) = fit(y, x)?;
    let (n, k) = x.shape();
    let s2 = resid.norm_squared() / (n - k) as f64;
    Ok(assemble(names, y, beta, xtx_inv * s2, resid, n - k, None))
}

/// Least squares with cluster-robust (CR1) standard errors; intervals use
/// `G - 1` degrees of freedom.
pub fn ols_clustered(y: &[f64], x: &DMatrix<f64>, names: &[&str], cluster: &[usize]) -> Result<OlsResult> {
    assert_eq!(names.len(), x.ncols());
    assert_eq!(cluster.len(), y.len());
    let (beta, xtx_inv, resid) = fit(y, x)?;
    let (n, k) = x.shape();
    let mut groups = std::collections::BTreeMap::<usize, DVector<f64>>::new();
    for i in 0..n {
        let score = x.row(i).transpose() * resid[i];
        *groups.entry(cluster[i]).or_insert_with(|| DVector::zeros(k)) += score;
    }
    let g = groups.len();
    if g < 2 {
        return Err(Error::Analytics("clustered errors need at least two clusters".into()));
    }
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for s in groups.values() {
        meat += s * s.transpose();
    }
    let scale = (g as f64 / (g - 1) as f64) * ((n - 1) as f64 / (n - k) as f64);
    let cov = &xtx_inv * meat * &xtx_inv * scale;
    Ok(assemble(names, y, beta, cov, resid, g - 1, Some(g)))
}

/// Column-major design matrix from named columns, with a leading intercept.
pub fn design(columns: &[&[f64]]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, |c| c.len());
    DMatrix::from_fn(n, columns.len() + 1, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}
