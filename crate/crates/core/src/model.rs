//! Economic primitives shared by every other module: parameters, the two-state
//! income process, the savings grid and the budget identity.

use log::info;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Consumption at or below this level is treated as infeasible.
pub const C_FLOOR: f64 = 1e-10;

/// Period utility, `log(c)`.
#[inline]
pub fn utility(c: f64) -> f64 {
    c.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IncomeState {
    Employed,
    Unemployed,
}

impl IncomeState {
    pub const ALL: [IncomeState; 2] = [IncomeState::Employed, IncomeState::Unemployed];

    /// Row/column index in transition matrices and per-state arrays.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            IncomeState::Employed => 0,
            IncomeState::Unemployed => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => IncomeState::Employed,
            _ => IncomeState::Unemployed,
        }
    }

    pub fn is_unemployed(self) -> bool {
        self == IncomeState::Unemployed
    }

    pub fn label(self) -> &'static str {
        match self {
            IncomeState::Employed => "employed",
            IncomeState::Unemployed => "unemployed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "employed" | "e" | "E" => Some(IncomeState::Employed),
            "unemployed" | "u" | "U" => Some(IncomeState::Unemployed),
            _ => None,
        }
    }
}

/// Quarterly employment transition probabilities, `p_ij = P(next = j | now = i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeTransition {
    pub p_ee: f64,
    pub p_eu: f64,
    pub p_ue: f64,
    pub p_uu: f64,
}

impl Default for IncomeTransition {
    fn default() -> Self {
        IncomeTransition {
            p_ee: 0.939,
            p_eu: 0.0607,
            p_ue: 0.392,
            p_uu: 0.608,
        }
    }
}

impl IncomeTransition {
    /// Probability of moving from `from` to `to`.
    #[inline]
    pub fn prob(&self, from: IncomeState, to: IncomeState) -> f64 {
        use IncomeState::*;
        match (from, to) {
            (Employed, Employed) => self.p_ee,
            (Employed, Unemployed) => self.p_eu,
            (Unemployed, Employed) => self.p_ue,
            (Unemployed, Unemployed) => self.p_uu,
        }
    }

    pub fn row(&self, from: IncomeState) -> [f64; 2] {
        [
            self.prob(from, IncomeState::Employed),
            self.prob(from, IncomeState::Unemployed),
        ]
    }

    fn check_entries(&self) -> Result<()> {
        for (name, p) in [
            ("p_ee", self.p_ee),
            ("p_eu", self.p_eu),
            ("p_ue", self.p_ue),
            ("p_uu", self.p_uu),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityError(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Rescale each row to sum to one.
    pub fn normalized(&self) -> Result<IncomeTransition> {
        let row_e = self.p_ee + self.p_eu;
        let row_u = self.p_ue + self.p_uu;
        if !(row_e > 0.0) || !(row_u > 0.0) {
            return Err(Error::ProbabilityError(format!(
                "degenerate row sums ({row_e}, {row_u})"
            )));
        }
        Ok(IncomeTransition {
            p_ee: self.p_ee / row_e,
            p_eu: self.p_eu / row_e,
            p_ue: self.p_ue / row_u,
            p_uu: self.p_uu / row_u,
        })
    }

    pub fn max_row_error(&self) -> f64 {
        ((self.p_ee + self.p_eu) - 1.0)
            .abs()
            .max(((self.p_ue + self.p_uu) - 1.0).abs())
    }

    /// Long-run share of time spent employed.
    pub fn stationary_employed(&self) -> f64 {
        let flow = self.p_eu + self.p_ue;
        if flow == 0.0 {
            1.0
        } else {
            self.p_ue / flow
        }
    }

    /// Draw tomorrow's income state given today's.
    pub fn sample<R: Rng + ?Sized>(&self, from: IncomeState, rng: &mut R) -> IncomeState {
        let u: f64 = rng.gen();
        if u < self.prob(from, IncomeState::Employed) {
            IncomeState::Employed
        } else {
            IncomeState::Unemployed
        }
    }

    /// Scale the probabilities of landing in unemployment (`p_uu`, `p_eu`) by
    /// `factor` and renormalize each row.
    pub fn pessimism(&self, factor: f64) -> Result<IncomeTransition> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::ProbabilityError(format!(
                "pessimism factor must be positive, got {factor}"
            )));
        }
        IncomeTransition {
            p_ee: self.p_ee,
            p_eu: self.p_eu * factor,
            p_ue: self.p_ue,
            p_uu: self.p_uu * factor,
        }
        .normalized()
    }
}

/// Free-function form of [`IncomeTransition::sample`].
pub fn transition_sample<R: Rng + ?Sized>(
    t: &IncomeTransition,
    y: IncomeState,
    rng: &mut R,
) -> IncomeState {
    t.sample(y, rng)
}

/// Free-function form of [`IncomeTransition::pessimism`].
pub fn pessimism_transform(t: &IncomeTransition, factor: f64) -> Result<IncomeTransition> {
    t.pessimism(factor)
}

/// Initialization scale for network weights before pretraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// i.i.d. N(0, 2): standard deviation sqrt(2) for every weight.
    Sqrt2,
    /// He scaling, standard deviation sqrt(2 / fan_in).
    #[default]
    He,
}

/// All economic and learning constants of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub gross_return: f64,
    pub income_employed: f64,
    pub income_unemployed: f64,
    pub transition: IncomeTransition,
    pub a_min: f64,
    pub a_max: f64,
    pub savings_grid_n: usize,
    pub train_grid_n: usize,
    pub transfer: f64,
    pub n_agents: usize,
    pub n_periods: usize,
    pub learning_rate: f64,
    pub lr_decay_exponent: f64,
    pub poly_degree: usize,
    pub poly_eval_n: usize,
    pub hidden_dim: usize,
    pub hidden_layers: usize,
    pub pretrain_tolerance: f64,
    pub weight_init: WeightInit,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta: 0.9703,
            gross_return: 1.00985,
            income_employed: 1.0,
            income_unemployed: 0.472,
            transition: IncomeTransition::default(),
            a_min: 0.0,
            a_max: 4.5,
            savings_grid_n: 8750,
            train_grid_n: 500,
            transfer: 0.784,
            n_agents: 50,
            n_periods: 50,
            learning_rate: 1.1e-3,
            lr_decay_exponent: 0.5,
            poly_degree: 5,
            poly_eval_n: 50,
            hidden_dim: 80,
            hidden_layers: 2,
            pretrain_tolerance: 2.5e-3,
            weight_init: WeightInit::He,
            seed: 20240101,
        }
    }
}

impl ModelParams {
    #[inline]
    pub fn income(&self, y: IncomeState) -> f64 {
        match y {
            IncomeState::Employed => self.income_employed,
            IncomeState::Unemployed => self.income_unemployed,
        }
    }

    #[inline]
    pub fn cash_on_hand(&self, assets: f64, y: IncomeState) -> f64 {
        self.income(y) + self.gross_return * assets
    }

    /// Step size at lived period `t` (1-based): `learning_rate / t^decay`.
    pub fn learning_rate_at(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        if self.lr_decay_exponent == 0.5 {
            self.learning_rate / t.sqrt()
        } else {
            self.learning_rate / t.powf(self.lr_decay_exponent)
        }
    }

    pub fn savings_grid(&self) -> SavingsGrid {
        SavingsGrid::new(self.a_min, self.a_max, self.savings_grid_n)
    }

    /// Upper end of grids on which policies and MPCs are evaluated. Transfers
    /// can lift assets above `a_max`, so these grids extend by one transfer.
    pub fn eval_upper(&self) -> f64 {
        self.a_max + self.transfer
    }

    /// The `poly_eval_n`-point grid on `[a_min, a_max]` used for policy
    /// comparisons and the polynomial fit.
    pub fn eval_grid(&self) -> Vec<f64> {
        linspace(self.a_min, self.a_max, self.poly_eval_n)
    }

    /// Check invariants and return a copy with transition rows normalized.
    pub fn validate(&self) -> Result<ModelParams> {
        let product = self.beta * self.gross_return;
        if product >= 1.0 {
            return Err(Error::BetaRViolation { product });
        }
        // beta = 0 is admitted as the no-future limit.
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParams(format!("beta = {} outside [0, 1)", self.beta)));
        }
        if !(self.gross_return > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gross_return = {} must be positive",
                self.gross_return
            )));
        }
        if !(self.a_min >= 0.0) || !(self.a_min < self.a_max) || !self.a_max.is_finite() {
            return Err(Error::GridError(format!(
                "need 0 <= a_min < a_max, got a_min = {}, a_max = {}",
                self.a_min, self.a_max
            )));
        }
        if self.savings_grid_n < 2 || self.train_grid_n < 2 || self.poly_eval_n < 2 {
            return Err(Error::GridError("grid sizes must be at least 2".into()));
        }
        if !(self.income_unemployed > 0.0) || !(self.income_unemployed < self.income_employed) {
            return Err(Error::InvalidParams(format!(
                "need 0 < income_unemployed < income_employed, got {} and {}",
                self.income_unemployed, self.income_employed
            )));
        }
        if !(self.transfer > 0.0) {
            return Err(Error::InvalidParams(format!("transfer = {} must be positive", self.transfer)));
        }
        if self.n_agents == 0 || self.hidden_dim == 0 || self.hidden_layers == 0 {
            return Err(Error::InvalidParams("counts must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.pretrain_tolerance > 0.0) {
            return Err(Error::InvalidParams("rates and tolerances must be positive".into()));
        }
        if self.poly_degree + 1 > self.poly_eval_n {
            return Err(Error::InvalidParams(format!(
                "poly_degree {} needs at least {} fit points",
                self.poly_degree,
                self.poly_degree + 1
            )));
        }
        self.transition.check_entries()?;
        let transition = self.transition.normalized()?;
        let adjustment = self.transition.max_row_error();
        if adjustment > 0.0 {
            info!("transition rows renormalized (max row-sum deviation {adjustment:.3e})");
        }
        Ok(ModelParams {
            transition,
            ..self.clone()
        })
    }
}

/// Free-function form of [`ModelParams::validate`].
pub fn validate_params(p: &ModelParams) -> Result<ModelParams> {
    p.validate()
}

/// `n` uniformly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
            v[n - 1] = hi;
            v
        }
    }
}

/// The finite set of savings choices.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingsGrid {
    points: Vec<f64>,
}

impl SavingsGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        SavingsGrid {
            points: linspace(lo, hi, n),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn step(&self) -> f64 {
        let n = self.points.len();
        (self.points[n - 1] - self.points[0]) / (n - 1) as f64
    }

    /// Number of leading grid points that leave strictly positive consumption
    /// (above [`C_FLOOR`]) at cash-on-hand `cash`.
    pub fn feasible_len(&self, cash: f64) -> usize {
        self.points.partition_point(|&s| cash - s > C_FLOOR)
    }
}

/// An agent's position at the start of a period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub assets: f64,
    pub income: IncomeState,
    pub cash_on_hand: f64,
}

impl AgentState {
    pub fn new(p: &ModelParams, assets: f64, income: IncomeState) -> Self {
        AgentState {
            assets,
            income,
            cash_on_hand: p.cash_on_hand(assets, income),
        }
    }
}
