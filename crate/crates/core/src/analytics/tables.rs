use std::collections::BTreeMap;
use std::io::Write;

use super::{design, experience_index, ols, ols_clustered, welch_t, OlsResult, WelchResult};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::sim::{ExperimentResult, GroupStat, PanelRecord};

/// Fill `experience_index` on every record with `t >= 4`. Records may come
/// from several seeds; histories are keyed by `(seed, agent_id)`.
pub fn annotate_experience(panel: &mut [PanelRecord]) -> Result<()> {
    let mut hist: BTreeMap<(u64, usize), Vec<(usize, bool)>> = BTreeMap::new();
    for r in panel.iter() {
        hist.entry((r.seed, r.agent_id))
            .or_default()
            .push((r.t, r.income_state.is_unemployed()));
    }
    let hist: BTreeMap<(u64, usize), Vec<bool>> = hist
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|x| x.0);
            // Indicator for period j + 1 at position j.
            let flags = v.iter().filter(|x| x.0 >= 1).map(|x| x.1).collect();
            (k, flags)
        })
        .collect();
    for r in panel.iter_mut() {
        r.experience_index = if r.t >= 4 {
            Some(experience_index(&hist[&(r.seed, r.agent_id)], r.t)?)
        } else {
            None
        };
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScarringOptions {
    /// Cluster standard errors by agent.
    pub clustered: bool,
}

/// Consumption on the experience index and income, then additionally on
/// assets, over lived periods with `t >= 4`.
pub fn scarring_regression(
    panel: &[PanelRecord],
    p: &ModelParams,
    opts: &ScarringOptions,
) -> Result<(OlsResult, OlsResult)> {
    let mut panel = panel.to_vec();
    annotate_experience(&mut panel)?;
    let rows: Vec<&PanelRecord> = panel
        .iter()
        .filter(|r| r.t >= 4 && r.td_error.is_some())
        .collect();
    if rows.is_empty() {
        return Err(Error::InsufficientHistory(panel.iter().map(|r| r.t).max().unwrap_or(0)));
    }
    let c: Vec<f64> = rows.iter().map(|r| r.consumption).collect();
    let uep: Vec<f64> = rows.iter().map(|r| r.experience_index.unwrap()).collect();
    let a: Vec<f64> = rows.iter().map(|r| r.assets).collect();
    let income: Vec<f64> = rows.iter().map(|r| p.income(r.income_state)).collect();
    let clusters: Vec<usize> = {
        let mut ids = BTreeMap::new();
        rows.iter()
            .map(|r| {
                let n = ids.len();
                *ids.entry((r.seed, r.agent_id)).or_insert(n)
            })
            .collect()
    };
    let fit = |cols: &[&[f64]], names: &[&str]| {
        let x = design(cols);
        if opts.clustered {
            ols_clustered(&c, &x, names, &clusters)
        } else {
            ols(&c, &x, names)
        }
    };
    let without = fit(&[&uep, &income], &["const", "uep", "income"])?;
    let with = fit(&[&uep, &a, &income], &["const", "uep", "assets", "income"])?;
    Ok((without, with))
}

/// One row of the MPC-by-liquidity table.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcRow {
    pub classify_at: usize,
    pub seeds: usize,
    pub low: GroupStat,
    pub high: GroupStat,
    /// Test on measurements pooled across seeds.
    pub welch: Option<WelchResult>,
    /// Averages of the per-seed group means.
    pub seed_mean_low: f64,
    pub seed_mean_high: f64,
    pub note: Option<String>,
}

/// Pool `mpc` experiment results by classification period.
pub fn mpc_table(results: &[ExperimentResult]) -> Vec<MpcRow> {
    let mut by_c: BTreeMap<usize, Vec<&ExperimentResult>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.name == "mpc") {
        let c = r.scalars.get("classify_at").copied().unwrap_or(0.0) as usize;
        by_c.entry(c).or_default().push(r);
    }
    by_c.into_iter()
        .map(|(c, rs)| {
            let low: Vec<f64> = rs.iter().flat_map(|r| r.values("low")).collect();
            let high: Vec<f64> = rs.iter().flat_map(|r| r.values("high")).collect();
            let avg = |g: &str| {
                let ms: Vec<f64> = rs
                    .iter()
                    .filter_map(|r| r.group(g))
                    .map(|s| s.mean)
                    .filter(|m| m.is_finite())
                    .collect();
                ms.iter().sum::<f64>() / ms.len() as f64
            };
            let (welch, note) = match welch_t(&low, &high) {
                Ok(w) => (Some(w), None),
                Err(_) if low.is_empty() => (None, Some(Error::EmptyGroup("low".into()).to_string())),
                Err(_) if high.is_empty() => (None, Some(Error::EmptyGroup("high".into()).to_string())),
                Err(e) => (None, Some(e.to_string())),
            };
            MpcRow {
                classify_at: c,
                seeds: rs.len(),
                low: GroupStat::from_values("low", &low),
                high: GroupStat::from_values("high", &high),
                welch,
                seed_mean_low: avg("low"),
                seed_mean_high: avg("high"),
                note,
            }
        })
        .collect()
}

pub fn write_mpc_table<W: Write>(mut w: W, rows: &[MpcRow]) -> Result<()> {
    writeln!(
        w,
        "classify_at,seeds,n_low,n_high,low_mean,high_mean,difference,t_stat,df,p_value,stars,seed_mean_low,seed_mean_high,note"
    )?;
    for r in rows {
        let (t, df, p, s) = match &r.welch {
            Some(wr) => (wr.t.to_string(), wr.df.to_string(), wr.p_value.to_string(), wr.stars),
            None => (String::new(), String::new(), String::new(), ""),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.classify_at,
            r.seeds,
            r.low.n,
            r.high.n,
            r.low.mean,
            r.high.mean,
            r.low.mean - r.high.mean,
            t,
            df,
            p,
            s,
            r.seed_mean_low,
            r.seed_mean_high,
            r.note.as_deref().unwrap_or("")
        )?;
    }
    Ok(())
}

/// Both regressions side by side, one row per coefficient.
pub fn write_scarring_table<W: Write>(mut w: W, fits: &(OlsResult, OlsResult)) -> Result<()> {
    writeln!(w, "column,variable,coefficient,std_error,t_stat,p_value,stars,ci_lower,ci_upper")?;
    for (col, fit) in [("1", &fits.0), ("2", &fits.1)] {
        for i in 0..fit.names.len() {
            writeln!(
                w,
                "{col},{},{},{},{},{},{},{},{}",
                fit.names[i],
                fit.coefficients[i],
                fit.std_errors[i],
                fit.t_stats[i],
                fit.p_values[i],
                super::stars(fit.p_values[i]),
                fit.ci_lower[i],
                fit.ci_upper[i]
            )?;
        }
        for (k, v) in [
            ("r_squared", fit.r_squared),
            ("adj_r_squared", fit.adj_r_squared),
            ("f_stat", fit.f_stat),
            ("log_likelihood", fit.log_likelihood),
            ("aic", fit.aic),
            ("bic", fit.bic),
            ("n_observations", fit.n_observations as f64),
        ] {
            writeln!(w, "{col},{k},{v},,,,,,")?;
        }
    }
    Ok(())
}
