use std::collections::BTreeMap;

use serde::Serialize;

use super::{agent_rng, initial_income, sample_initial_assets, Liquidity, PopulationRun, ScfDistribution, SimAgent};
use crate::agent::LearningAgent;
use crate::analytics::{mean_var, welch_t, WelchResult};
use crate::error::{Error, Result};
use crate::model::{IncomeState, ModelParams};
use crate::neural::EVModel;
use crate::rational::{solve_value_iteration, RationalSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStat {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
}

impl GroupStat {
    pub fn from_values(name: &str, xs: &[f64]) -> Self {
        let (mean, var) = if xs.is_empty() {
            (f64::NAN, f64::NAN)
        } else if xs.len() == 1 {
            (xs[0], f64::NAN)
        } else {
            mean_var(xs)
        };
        GroupStat {
            name: name.to_string(),
            n: xs.len(),
            mean,
            std_error: (var / xs.len() as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub group: String,
    pub agent_id: usize,
    pub t: usize,
    pub value: f64,
}

/// A labelled series on a common grid, e.g. one policy panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub label: String,
    /// `consumption`, `mpc`, or `distance`.
    pub kind: String,
    pub income: Option<IncomeState>,
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub seed: Option<u64>,
    pub groups: Vec<GroupStat>,
    pub tests: Vec<WelchResult>,
    pub measurements: Vec<Measurement>,
    pub curves: Vec<Curve>,
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub config: serde_json::Value,
}

impl ExperimentResult {
    fn new(name: &str, seed: Option<u64>, p: &ModelParams) -> Self {
        ExperimentResult {
            name: name.to_string(),
            seed,
            groups: Vec::new(),
            tests: Vec::new(),
            measurements: Vec::new(),
            curves: Vec::new(),
            scalars: BTreeMap::new(),
            notes: Vec::new(),
            config: serde_json::to_value(p).expect("params serialize"),
        }
    }

    pub fn curve(&self, label: &str, kind: &str, income: Option<IncomeState>, t: usize) -> Option<&Curve> {
        self.curves
            .iter()
            .find(|c| c.label == label && c.kind == kind && c.income == income && c.t == t)
    }

    pub fn group(&self, name: &str) -> Option<&GroupStat> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn values(&self, group: &str) -> Vec<f64> {
        self.measurements
            .iter()
            .filter(|m| m.group == group)
            .map(|m| m.value)
            .collect()
    }
}

/// Split agents at period `t` into lower and upper halves by assets. Ties are
/// broken by agent id, so the split is exact even when many agents sit at the
/// borrowing limit.
pub fn classify_liquidity(run: &PopulationRun, t: usize) -> BTreeMap<usize, Liquidity> {
    let mut rows: Vec<(f64, usize)> = run.at(t).map(|r| (r.assets, r.agent_id)).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = rows.len();
    let mut out = BTreeMap::new();
    for (rank, &(_, id)) in rows.iter().enumerate() {
        if rank < n / 2 {
            out.insert(id, Liquidity::Low);
        } else if rank >= n - n / 2 {
            out.insert(id, Liquidity::High);
        }
    }
    out
}

/// Low- versus high-liquidity MPCs measured eight and nine periods after the
/// classification, among agents unemployed at measurement.
pub fn mpc_experiment(run: &PopulationRun, classify_at: usize) -> Result<ExperimentResult> {
    let p = &run.params;
    if classify_at + 9 > p.n_periods {
        return Err(Error::Experiment(format!(
            "classify_at + 9 = {} exceeds n_periods = {}",
            classify_at + 9,
            p.n_periods
        )));
    }
    if !run.options.record_mpc {
        return Err(Error::Experiment("population run did not record MPCs".into()));
    }
    let classes = classify_liquidity(run, classify_at);
    let mut res = ExperimentResult::new("mpc", Some(run.seed), p);
    res.scalars.insert("classify_at".into(), classify_at as f64);
    for r in &run.panel {
        if r.t != classify_at + 8 && r.t != classify_at + 9 {
            continue;
        }
        let (Some(m), Some(class)) = (r.mpc, classes.get(&r.agent_id)) else {
            continue;
        };
        debug_assert!(r.income_state.is_unemployed());
        res.measurements.push(Measurement {
            group: liquidity_label(*class).into(),
            agent_id: r.agent_id,
            t: r.t,
            value: m,
        });
    }
    let low = res.values("low");
    let high = res.values("high");
    res.groups.push(GroupStat::from_values("low", &low));
    res.groups.push(GroupStat::from_values("high", &high));
    for (name, xs) in [("low", &low), ("high", &high)] {
        if xs.is_empty() {
            res.notes.push(Error::EmptyGroup(name.into()).to_string());
        }
    }
    match welch_t(&low, &high) {
        Ok(w) => res.tests.push(w),
        Err(e) => res.notes.push(e.to_string()),
    }
    Ok(res)
}

pub fn liquidity_label(l: Liquidity) -> &'static str {
    match l {
        Liquidity::Low => "low",
        Liquidity::High => "high",
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockOptions {
    /// Consumption curves from the polynomial fit.
    pub policy_smoothed: bool,
    /// MPC curves from the polynomial fit.
    pub mpc_smoothed: bool,
    pub literal_update_sign: bool,
    /// Length of the forced spell.
    pub spell: usize,
}

impl Default for ShockOptions {
    fn default() -> Self {
        ShockOptions {
            policy_smoothed: true,
            mpc_smoothed: false,
            literal_update_sign: false,
            spell: 4,
        }
    }
}

/// Consumption and MPC curves on the evaluation grid. Policies and MPCs may
/// use different EV sources.
fn agent_curves(
    res: &mut ExperimentResult,
    sa: &SimAgent,
    p: &ModelParams,
    label: &str,
    policy_smoothed: bool,
    mpc_smoothed: bool,
) -> Result<()> {
    let grid = p.eval_grid();
    let shifted: Vec<f64> = grid.iter().map(|a| a + p.transfer).collect();
    let both: Vec<f64> = grid.iter().chain(&shifted).cloned().collect();
    for y in IncomeState::ALL {
        let c = sa.agent.consumption_at(p, y, &both, mpc_smoothed)?;
        let (lo, up) = c.split_at(grid.len());
        let mpc = lo.iter().zip(up).map(|(b, u)| (u - b) / p.transfer).collect();
        let base = if policy_smoothed == mpc_smoothed {
            lo.to_vec()
        } else {
            sa.agent.consumption_at(p, y, &grid, policy_smoothed)?
        };
        res.curves.push(Curve {
            label: label.into(),
            kind: "consumption".into(),
            income: Some(y),
            t: sa.t,
            x: grid.clone(),
            y: base,
        });
        res.curves.push(Curve {
            label: label.into(),
            kind: "mpc".into(),
            income: Some(y),
            t: sa.t,
            x: grid.clone(),
            y: mpc,
        });
    }
    Ok(())
}

fn rational_curves(res: &mut ExperimentResult, sol: &RationalSolution, label: &str, t: usize) {
    let p = &sol.params;
    let grid = p.eval_grid();
    for y in IncomeState::ALL {
        res.curves.push(Curve {
            label: label.into(),
            kind: "consumption".into(),
            income: Some(y),
            t,
            x: grid.clone(),
            y: grid.iter().map(|&a| sol.consumption(a, y)).collect(),
        });
        res.curves.push(Curve {
            label: label.into(),
            kind: "mpc".into(),
            income: Some(y),
            t,
            x: grid.clone(),
            y: grid.iter().map(|&a| sol.mpc(a, y, p.transfer)).collect(),
        });
    }
}

pub const UNEMPLOYMENT_HISTORY: &str = "unemployment_history";
pub const EMPLOYMENT_HISTORY: &str = "employment_history";

/// Two agents with identical parameters start employed at the median initial
/// asset level. One is forced through an unemployment spell, the other stays
/// employed; both return to employment afterwards. Policies are recorded
/// before and after.
pub fn extreme_shock_experiment(
    p: &ModelParams,
    d: &ScfDistribution,
    pretrained: &EVModel,
    rational: &RationalSolution,
    opts: &ShockOptions,
) -> Result<ExperimentResult> {
    let mut res = ExperimentResult::new("extreme", None, p);
    let a0 = d.median();
    let end = opts.spell + 1;
    res.scalars.insert("initial_assets".into(), a0);
    for (label, shock) in [
        (UNEMPLOYMENT_HISTORY, IncomeState::Unemployed),
        (EMPLOYMENT_HISTORY, IncomeState::Employed),
    ] {
        let mut sa = SimAgent::new(0, pretrained.clone(), p, a0, IncomeState::Employed);
        sa.agent.literal_update_sign = opts.literal_update_sign;
        agent_curves(&mut res, &sa, p, label, opts.policy_smoothed, opts.mpc_smoothed)?;
        for t in 0..end {
            let y_next = if t + 1 < end { shock } else { IncomeState::Employed };
            let (c, eps) = sa.live_period(p, y_next)?;
            res.measurements.push(Measurement {
                group: label.into(),
                agent_id: 0,
                t,
                value: c.consumption,
            });
            res.scalars.insert(format!("{label}_td_error_{t}"), eps);
        }
        agent_curves(&mut res, &sa, p, label, opts.policy_smoothed, opts.mpc_smoothed)?;
    }
    rational_curves(&mut res, rational, "rational", 0);
    rational_curves(&mut res, rational, "rational", end);

    let grid = p.eval_grid();
    let quartile = p.a_min + 0.25 * (p.a_max - p.a_min);
    for y in IncomeState::ALL {
        let u = &res.curve(UNEMPLOYMENT_HISTORY, "consumption", Some(y), end).unwrap().y;
        let e = &res.curve(EMPLOYMENT_HISTORY, "consumption", Some(y), end).unwrap().y;
        let r = &res.curve("rational", "consumption", Some(y), end).unwrap().y;
        let low: Vec<usize> = (0..grid.len()).filter(|&i| grid[i] <= quartile).collect();
        let gap = low.iter().map(|&i| e[i] - u[i]).fold(f64::INFINITY, f64::min);
        let mean_gap = low.iter().map(|&i| e[i] - u[i]).sum::<f64>() / low.len() as f64;
        let above = (0..grid.len()).filter(|&i| e[i] > r[i]).count() as f64 / grid.len() as f64;
        res.scalars.insert(format!("mean_gap_low_quartile_{}", y.label()), mean_gap);
        res.scalars.insert(format!("min_gap_low_quartile_{}", y.label()), gap);
        res.scalars.insert(format!("share_above_rational_{}", y.label()), above);
    }
    Ok(res)
}

/// Rational policies under the baseline transition and under one with the
/// unemployment-entry and unemployment-persistence probabilities scaled by
/// `factor`.
pub fn pessimism_experiment(p: &ModelParams, factor: f64) -> Result<ExperimentResult> {
    let base = solve_value_iteration(p, &p.transition, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let tilted = p.transition.pessimism(factor)?;
    let pess = solve_value_iteration(p, &tilted, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    pessimism_from(p, factor, &base, &pess)
}

/// As [`pessimism_experiment`] with both solutions supplied.
pub fn pessimism_from(
    p: &ModelParams,
    factor: f64,
    base: &RationalSolution,
    pess: &RationalSolution,
) -> Result<ExperimentResult> {
    let mut res = ExperimentResult::new("pessimism", None, p);
    res.scalars.insert("factor".into(), factor);
    rational_curves(&mut res, base, "baseline", 0);
    rational_curves(&mut res, pess, "pessimistic", 0);
    for kind in ["consumption", "mpc"] {
        for y in IncomeState::ALL {
            let b = &res.curve("baseline", kind, Some(y), 0).unwrap().y;
            let q = &res.curve("pessimistic", kind, Some(y), 0).unwrap().y;
            let excess = b.iter().zip(q).map(|(b, q)| q - b).fold(f64::NEG_INFINITY, f64::max);
            res.scalars.insert(format!("max_excess_{kind}_{}", y.label()), excess);
        }
    }
    // Where either policy saves the maximum at a + tau, the savings cap
    // rather than preferences sets the MPC.
    let top = p.a_max - 0.5 * p.savings_grid().step();
    let grid = p.eval_grid();
    for y in IncomeState::ALL {
        let b = &res.curve("baseline", "mpc", Some(y), 0).unwrap().y;
        let q = &res.curve("pessimistic", "mpc", Some(y), 0).unwrap().y;
        let capped: Vec<bool> = grid
            .iter()
            .map(|&a| {
                let s = a + p.transfer;
                base.savings_policy(s, y) >= top || pess.savings_policy(s, y) >= top
            })
            .collect();
        let excess = (0..grid.len())
            .filter(|&i| !capped[i])
            .map(|i| q[i] - b[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let n_capped = capped.iter().filter(|&&c| c).count();
        res.scalars.insert(format!("max_excess_mpc_uncapped_{}", y.label()), excess);
        res.scalars.insert(format!("capped_points_{}", y.label()), n_capped as f64);
    }
    Ok(res)
}

/// Sup-norm distance between an agent's consumption policy and the rational
/// one over both income states on the evaluation grid.
pub fn policy_distance(
    agent: &LearningAgent,
    p: &ModelParams,
    rational: &RationalSolution,
    use_smoothed: bool,
) -> Result<f64> {
    let grid = p.eval_grid();
    let mut worst: f64 = 0.0;
    for y in IncomeState::ALL {
        let c = agent.consumption_at(p, y, &grid, use_smoothed)?;
        for (&a, c) in grid.iter().zip(c) {
            worst = worst.max((c - rational.consumption(a, y)).abs());
        }
    }
    Ok(worst)
}

/// One agent over `p.n_periods` periods, tracking the distance of its
/// smoothed and raw policies from the rational policy every period.
pub fn long_run_run(
    p: &ModelParams,
    d: &ScfDistribution,
    pretrained: &EVModel,
    rational: &RationalSolution,
    seed: u64,
    literal_update_sign: bool,
) -> Result<ExperimentResult> {
    let mut res = ExperimentResult::new("longrun", Some(seed), p);
    let mut rng = agent_rng(seed, 0);
    let a0 = sample_initial_assets(d, &mut rng);
    let y0 = initial_income(p, false, &mut rng);
    let mut sa = SimAgent::new(0, pretrained.clone(), p, a0, y0);
    sa.agent.literal_update_sign = literal_update_sign;
    let snapshots = [0, 10, p.n_periods];
    let mut smooth = Vec::with_capacity(p.n_periods + 1);
    let mut raw = Vec::with_capacity(p.n_periods + 1);
    loop {
        smooth.push(policy_distance(&sa.agent, p, rational, true)?);
        raw.push(policy_distance(&sa.agent, p, rational, false)?);
        if snapshots.contains(&sa.t) {
            agent_curves(&mut res, &sa, p, "agent", true, false)?;
            res.scalars.insert(format!("distance_{}", sa.t), smooth[sa.t]);
        }
        if sa.t == p.n_periods {
            break;
        }
        let y_next = p.transition.sample(sa.income, &mut rng);
        let (c, _) = sa.live_period(p, y_next)?;
        res.measurements.push(Measurement {
            group: "consumption".into(),
            agent_id: 0,
            t: sa.t - 1,
            value: c.consumption,
        });
    }
    let ts: Vec<f64> = (0..=p.n_periods).map(|t| t as f64).collect();
    for (label, ys) in [("smoothed", smooth), ("raw", raw)] {
        res.curves.push(Curve {
            label: label.into(),
            kind: "distance".into(),
            income: None,
            t: p.n_periods,
            x: ts.clone(),
            y: ys,
        });
    }
    rational_curves(&mut res, rational, "rational", 0);
    Ok(res)
}
