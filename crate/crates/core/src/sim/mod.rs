//! Population simulation: initial draws, the day/night loop, and the
//! experiment protocols built on it.

mod experiments;
pub mod output;
mod scf;
pub mod svg;

pub use experiments::{
    classify_liquidity, extreme_shock_experiment, liquidity_label, long_run_run, mpc_experiment,
    pessimism_experiment, pessimism_from, policy_distance, Curve, ExperimentResult, GroupStat, Measurement,
    ShockOptions, EMPLOYMENT_HISTORY, UNEMPLOYMENT_HISTORY,
};
pub use scf::{sample_initial_assets, ScfDistribution, DEFAULT_QUANTILES, PERCENTILES};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Choice, LearningAgent, Transition};
use crate::error::Result;
use crate::model::{IncomeState, ModelParams};
use crate::neural::EVModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Liquidity {
    Low,
    High,
}

/// One agent in one period. The last period of a run is recorded with the
/// agent frozen and no TD error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub seed: u64,
    pub agent_id: usize,
    pub t: usize,
    pub assets: f64,
    pub income_state: IncomeState,
    pub savings: f64,
    pub consumption: f64,
    pub td_error: Option<f64>,
    pub frozen: bool,
    /// Raw-network MPC out of the transfer, recorded for unemployed agents.
    pub mpc: Option<f64>,
    pub experience_index: Option<f64>,
    pub liquidity_class: Option<Liquidity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PopulationOptions {
    pub all_employed: bool,
    pub literal_update_sign: bool,
    /// Measure each unemployed agent's MPC at the start of every period.
    pub record_mpc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRun {
    pub seed: u64,
    pub params: ModelParams,
    pub options: PopulationOptions,
    /// Sorted by `(agent_id, t)`.
    pub panel: Vec<PanelRecord>,
    /// Learning updates applied per agent.
    pub learn_steps: Vec<u64>,
}

impl PopulationRun {
    pub fn at(&self, t: usize) -> impl Iterator<Item = &PanelRecord> {
        self.panel.iter().filter(move |r| r.t == t)
    }

    pub fn agent(&self, id: usize) -> &[PanelRecord] {
        let lo = self.panel.partition_point(|r| r.agent_id < id);
        let hi = self.panel.partition_point(|r| r.agent_id <= id);
        &self.panel[lo..hi]
    }
}

/// Independent stream per agent, keyed by the run seed and agent id.
pub fn agent_rng(seed: u64, agent_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent_id as u64 + 1);
    rng
}

/// A learning agent together with its current state.
#[derive(Debug, Clone)]
pub struct SimAgent {
    pub id: usize,
    pub agent: LearningAgent,
    pub assets: f64,
    pub income: IncomeState,
    pub t: usize,
}

impl SimAgent {
    pub fn new(id: usize, model: EVModel, p: &ModelParams, assets: f64, income: IncomeState) -> Self {
        SimAgent {
            id,
            agent: LearningAgent::new(model, p),
            assets,
            income,
            t: 0,
        }
    }

    /// Frozen MPC at the current state.
    pub fn frozen_mpc(&mut self, p: &ModelParams, use_smoothed: bool) -> Result<f64> {
        self.agent.freeze();
        let m = self.agent.mpc(p, self.assets, self.income, p.transfer, use_smoothed);
        self.agent.unfreeze();
        m
    }

    /// Choose, move to `y_next`, and learn. Returns the choice and TD error.
    pub fn live_period(&mut self, p: &ModelParams, y_next: IncomeState) -> Result<(Choice, f64)> {
        let choice = self.agent.choose(p, self.assets, self.income, false)?;
        let tr = Transition {
            a: self.assets,
            y: self.income,
            a_next: choice.savings,
            y_next,
        };
        let eps = self.agent.learn_step(p, &tr)?;
        self.assets = choice.savings;
        self.income = y_next;
        self.t += 1;
        Ok((choice, eps))
    }

    fn stamp(&self) -> StateStamp {
        StateStamp {
            id: self.id,
            t: self.t,
            assets: self.assets,
            income: self.income,
        }
    }
}

fn initial_income<R: Rng + ?Sized>(p: &ModelParams, all_employed: bool, rng: &mut R) -> IncomeState {
    if all_employed || rng.gen::<f64>() < p.transition.stationary_employed() {
        IncomeState::Employed
    } else {
        IncomeState::Unemployed
    }
}

/// Simulate one agent for `p.n_periods` periods.
pub fn simulate_agent(
    p: &ModelParams,
    d: &ScfDistribution,
    pretrained: &EVModel,
    seed: u64,
    id: usize,
    opts: &PopulationOptions,
) -> Result<(Vec<PanelRecord>, u64)> {
    let mut rng = agent_rng(seed, id);
    let a0 = sample_initial_assets(d, &mut rng);
    let y0 = initial_income(p, opts.all_employed, &mut rng);
    let mut sa = SimAgent::new(id, pretrained.clone(), p, a0, y0);
    sa.agent.literal_update_sign = opts.literal_update_sign;
    let mut rows = Vec::with_capacity(p.n_periods + 1);
    let mut steps = 0;
    loop {
        let mpc = if opts.record_mpc && sa.income.is_unemployed() {
            Some(sa.frozen_mpc(p, false)?)
        } else {
            None
        };
        if sa.t == p.n_periods {
            let c = sa.agent.choose(p, sa.assets, sa.income, false)?;
            rows.push(sa.stamp().record(seed, &c, None, mpc));
            break;
        }
        let y_next = p.transition.sample(sa.income, &mut rng);
        let before = sa.stamp();
        let (c, eps) = sa.live_period(p, y_next)?;
        steps += 1;
        rows.push(before.record(seed, &c, Some(eps), mpc));
    }
    Ok((rows, steps))
}

/// Where an agent stood at the start of a period.
struct StateStamp {
    id: usize,
    t: usize,
    assets: f64,
    income: IncomeState,
}

impl StateStamp {
    fn record(&self, seed: u64, c: &Choice, td: Option<f64>, mpc: Option<f64>) -> PanelRecord {
        PanelRecord {
            seed,
            agent_id: self.id,
            t: self.t,
            assets: self.assets,
            income_state: self.income,
            savings: c.savings,
            consumption: c.consumption,
            td_error: td,
            frozen: td.is_none(),
            mpc,
            experience_index: None,
            liquidity_class: None,
        }
    }
}

/// All `p.n_agents` agents start from the same pretrained parameters and run
/// in parallel on their own random streams.
pub fn run_population(
    p: &ModelParams,
    d: &ScfDistribution,
    pretrained: &EVModel,
    seed: u64,
    opts: &PopulationOptions,
) -> Result<PopulationRun> {
    let per_agent: Vec<(Vec<PanelRecord>, u64)> = (0..p.n_agents)
        .into_par_iter()
        .map(|id| simulate_agent(p, d, pretrained, seed, id, opts))
        .collect::<Result<_>>()?;
    let mut panel = Vec::with_capacity(p.n_agents * (p.n_periods + 1));
    let mut learn_steps = Vec::with_capacity(p.n_agents);
    for (rows, steps) in per_agent {
        panel.extend(rows);
        learn_steps.push(steps);
    }
    Ok(PopulationRun {
        seed,
        params: p.clone(),
        options: *opts,
        panel,
        learn_steps,
    })
}
