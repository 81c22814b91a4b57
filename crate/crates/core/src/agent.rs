//! The learning agent: greedy savings choice against the network's expected
//! value, the temporal-difference error, and the per-period update.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{utility, IncomeState, ModelParams, SavingsGrid, C_FLOOR};
use crate::neural::{AdamState, EVModel};
use crate::polyfit::{fit_poly, PolySmoothedEV};

/// One lived period, as seen at night.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub a: f64,
    pub y: IncomeState,
    pub a_next: f64,
    pub y_next: IncomeState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub t: u64,
    pub assets: f64,
    pub income: IncomeState,
    pub savings: f64,
    pub consumption: f64,
    pub td_error: f64,
}

/// A savings decision and what it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub index: usize,
    pub savings: f64,
    pub consumption: f64,
    pub q: f64,
}

/// Consumption along an asset grid, with the indices where it fails to rise.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCurve {
    pub assets: Vec<f64>,
    pub consumption: Vec<f64>,
    pub violations: Vec<usize>,
}

/// `u(R a + y - a_next) + beta * EV(y, a_next)`.
pub fn q_value(model: &EVModel, p: &ModelParams, a: f64, y: IncomeState, a_next: f64) -> Result<f64> {
    let c = p.cash_on_hand(a, y) - a_next;
    if c <= C_FLOOR {
        return Err(Error::InfeasibleChoice { consumption: c });
    }
    Ok(utility(c) + p.beta * model.forward(y, a_next))
}

/// Lowest-index maximizer of `flow(cash - s_i) + beta * ev[i]` over the grid
/// points that leave consumption above the floor. `ev` must cover at least
/// that feasible prefix.
pub fn argmax_savings<U: Fn(f64) -> f64>(
    cash: f64,
    grid: &SavingsGrid,
    ev: &[f64],
    beta: f64,
    flow: U,
) -> Result<Choice> {
    let n = grid.feasible_len(cash);
    if n == 0 {
        return Err(Error::NoFeasibleChoice { cash });
    }
    let pts = grid.points();
    let mut best = Choice {
        index: 0,
        savings: pts[0],
        consumption: cash - pts[0],
        q: flow(cash - pts[0]) + beta * ev[0],
    };
    for i in 1..n {
        let q = flow(cash - pts[i]) + beta * ev[i];
        if q > best.q {
            best = Choice {
                index: i,
                savings: pts[i],
                consumption: cash - pts[i],
                q,
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct LearningAgent {
    pub model: EVModel,
    pub adam: AdamState,
    /// Lived periods so far plus one; drives the step-size decay.
    pub t: u64,
    pub frozen: bool,
    /// Feed `+eps * grad` to the optimizer instead of `-eps * grad`.
    pub literal_update_sign: bool,
    pub history: Vec<HistoryRecord>,
    grid: SavingsGrid,
}

impl LearningAgent {
    pub fn new(model: EVModel, p: &ModelParams) -> Self {
        let adam = AdamState::new(model.n_params());
        LearningAgent {
            model,
            adam,
            t: 1,
            frozen: false,
            literal_update_sign: false,
            history: Vec::new(),
            grid: p.savings_grid(),
        }
    }

    pub fn grid(&self) -> &SavingsGrid {
        &self.grid
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn smoothed(&self, p: &ModelParams) -> Result<PolySmoothedEV> {
        fit_poly(&self.model, p)
    }

    /// Expected value along the first `n` savings grid points.
    pub fn ev_line(&self, p: &ModelParams, y: IncomeState, n: usize, use_smoothed: bool) -> Result<Vec<f64>> {
        let pts = &self.grid.points()[..n];
        let mut out = vec![0.0; n];
        if use_smoothed {
            self.smoothed(p)?.eval_line(y, pts, &mut out);
        } else {
            self.model.eval_line(y, pts, &mut out);
        }
        Ok(out)
    }

    pub fn choose(&self, p: &ModelParams, a: f64, y: IncomeState, use_smoothed: bool) -> Result<Choice> {
        let cash = p.cash_on_hand(a, y);
        let n = self.grid.feasible_len(cash);
        if n == 0 {
            return Err(Error::NoFeasibleChoice { cash });
        }
        let ev = self.ev_line(p, y, n, use_smoothed)?;
        argmax_savings(cash, &self.grid, &ev, p.beta, utility)
    }

    pub fn choose_savings(&self, p: &ModelParams, a: f64, y: IncomeState, use_smoothed: bool) -> Result<f64> {
        Ok(self.choose(p, a, y, use_smoothed)?.savings)
    }

    /// `max_{a''} u(R a' + y' - a'') + beta * EV(y', a'')` with the raw network.
    pub fn continuation_value(&self, p: &ModelParams, a_next: f64, y_next: IncomeState) -> Result<f64> {
        Ok(self.choose(p, a_next, y_next, false)?.q)
    }

    /// `beta * (continuation - EV(y, a'))`.
    pub fn td_error(&self, p: &ModelParams, tr: &Transition) -> Result<f64> {
        if p.beta == 0.0 {
            return Ok(0.0);
        }
        let cont = self.continuation_value(p, tr.a_next, tr.y_next)?;
        Ok(p.beta * (cont - self.model.forward(tr.y, tr.a_next)))
    }

    /// The same error written as realized Q minus predicted Q.
    pub fn td_error_from_q(&self, p: &ModelParams, tr: &Transition) -> Result<f64> {
        let c = p.cash_on_hand(tr.a, tr.y) - tr.a_next;
        let q = q_value(&self.model, p, tr.a, tr.y, tr.a_next)?;
        let q_empirical = utility(c) + p.beta * self.continuation_value(p, tr.a_next, tr.y_next)?;
        Ok(q_empirical - q)
    }

    /// One night of learning. Returns the TD error.
    pub fn learn_step(&mut self, p: &ModelParams, tr: &Transition) -> Result<f64> {
        if self.frozen {
            return Err(Error::FrozenAgent);
        }
        let eps = self.td_error(p, tr)?;
        let sign = if self.literal_update_sign { 1.0 } else { -1.0 };
        let mut grad = vec![0.0; self.model.n_params()];
        self.model
            .accumulate_grad_raw(self.model.income_input(tr.y), tr.a_next, sign * eps, &mut grad);
        let lr = p.learning_rate_at(self.t);
        self.adam.step(self.model.params_mut(), &grad, lr);
        self.history.push(HistoryRecord {
            t: self.t,
            assets: tr.a,
            income: tr.y,
            savings: tr.a_next,
            consumption: p.cash_on_hand(tr.a, tr.y) - tr.a_next,
            td_error: eps,
        });
        self.t += 1;
        Ok(eps)
    }

    /// Consumption at each asset level, sharing one pass over the grid.
    pub fn consumption_at(
        &self,
        p: &ModelParams,
        y: IncomeState,
        assets: &[f64],
        use_smoothed: bool,
    ) -> Result<Vec<f64>> {
        let top = assets
            .iter()
            .map(|&a| self.grid.feasible_len(p.cash_on_hand(a, y)))
            .max()
            .unwrap_or(0);
        let ev = self.ev_line(p, y, top, use_smoothed)?;
        assets
            .iter()
            .map(|&a| {
                let cash = p.cash_on_hand(a, y);
                argmax_savings(cash, &self.grid, &ev, p.beta, utility).map(|c| c.consumption)
            })
            .collect()
    }

    /// `(c(a + tau) - c(a)) / tau`; the transfer arrives as extra assets.
    pub fn mpc(&self, p: &ModelParams, a: f64, y: IncomeState, tau: f64, use_smoothed: bool) -> Result<f64> {
        let c = self.consumption_at(p, y, &[a, a + tau], use_smoothed)?;
        Ok((c[1] - c[0]) / tau)
    }

    /// Consumption on `assets` with non-increasing steps reported.
    pub fn policy_curve(
        &self,
        p: &ModelParams,
        y: IncomeState,
        assets: &[f64],
        use_smoothed: bool,
    ) -> Result<PolicyCurve> {
        let consumption = self.consumption_at(p, y, assets, use_smoothed)?;
        let violations: Vec<usize> = consumption
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] <= w[0])
            .map(|(i, _)| i + 1)
            .collect();
        if use_smoothed && !violations.is_empty() {
            warn!(
                "smoothed {} policy not strictly increasing at {} grid points",
                y.label(),
                violations.len()
            );
        }
        Ok(PolicyCurve {
            assets: assets.to_vec(),
            consumption,
            violations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightInit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> ModelParams {
        ModelParams {
            hidden_dim: 10,
            savings_grid_n: 901,
            ..ModelParams::default()
        }
        .validate()
        .unwrap()
    }

    fn constant_model(p: &ModelParams, k: f64) -> EVModel {
        let mut m = EVModel::for_params(p);
        let last = m.shapes().len() - 1;
        m.bias_mut(last)[0] = k;
        m
    }

    fn random_agent(p: &ModelParams, seed: u64) -> LearningAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LearningAgent::new(EVModel::random(p, WeightInit::He, &mut rng), p)
    }

    #[test]
    fn q_of_constant_network() {
        let p = small();
        let m = constant_model(&p, -3.0);
        let q = q_value(&m, &p, 1.0, IncomeState::Employed, 0.5).unwrap();
        let c: f64 = p.cash_on_hand(1.0, IncomeState::Employed) - 0.5;
        assert!((q - (c.ln() - 3.0 * p.beta)).abs() < 1e-14);
        let p0 = ModelParams { beta: 0.0, ..p.clone() };
        assert_eq!(q_value(&m, &p0, 1.0, IncomeState::Employed, 0.5).unwrap(), c.ln());
        assert!(matches!(
            q_value(&m, &p, 0.0, IncomeState::Unemployed, 2.0),
            Err(Error::InfeasibleChoice { .. })
        ));
    }

    #[test]
    fn no_future_means_no_saving() {
        let p = ModelParams { beta: 0.0, ..small() };
        let ag = random_agent(&p, 3);
        for a in [0.0, 0.7, 3.0] {
            for y in IncomeState::ALL {
                assert_eq!(ag.choose_savings(&p, a, y, false).unwrap(), p.a_min);
                let m = ag.mpc(&p, a, y, p.transfer, false).unwrap();
                assert!((m - p.gross_return).abs() < 1e-12, "{m}");
            }
        }
    }

    #[test]
    fn flat_utility_and_rising_value_save_everything() {
        let p = small();
        let grid = p.savings_grid();
        let ev: Vec<f64> = grid.points().iter().map(|s| 0.1 * s).collect();
        let c = argmax_savings(100.0, &grid, &ev, p.beta, |_| 0.0).unwrap();
        assert_eq!(c.index, grid.len() - 1);
        assert_eq!(c.savings, p.a_max);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let p = small();
        let grid = p.savings_grid();
        let ev = vec![0.0; grid.len()];
        let c = argmax_savings(100.0, &grid, &ev, p.beta, |_| 0.0).unwrap();
        assert_eq!(c.index, 0);
    }

    #[test]
    fn no_feasible_choice() {
        let p = small();
        let grid = p.savings_grid();
        assert!(matches!(
            argmax_savings(0.0, &grid, &[], p.beta, utility),
            Err(Error::NoFeasibleChoice { .. })
        ));
    }

    #[test]
    fn td_error_forms_agree() {
        let p = small();
        let ag = random_agent(&p, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let y = IncomeState::from_index(rng.gen_range(0..2));
            let a = rng.gen_range(0.0..4.5);
            let cash = p.cash_on_hand(a, y);
            let a_next = rng.gen_range(0.0..p.a_max.min(cash - 1e-3));
            let tr = Transition {
                a,
                y,
                a_next,
                y_next: IncomeState::from_index(rng.gen_range(0..2)),
            };
            let e7 = ag.td_error(&p, &tr).unwrap();
            let e6 = ag.td_error_from_q(&p, &tr).unwrap();
            assert!((e6 - e7).abs() < 1e-12, "{e6} {e7}");
        }
        let p0 = ModelParams { beta: 0.0, ..p.clone() };
        let tr = Transition {
            a: 1.0,
            y: IncomeState::Employed,
            a_next: 0.3,
            y_next: IncomeState::Unemployed,
        };
        assert_eq!(ag.td_error(&p0, &tr).unwrap(), 0.0);
    }

    #[test]
    fn positive_surprise_raises_the_estimate() {
        let p = small();
        let mut ag = random_agent(&p, 21);
        // Shift the output down so the realized continuation beats the estimate.
        let last = ag.model.shapes().len() - 1;
        ag.model.bias_mut(last)[0] -= 50.0;
        let tr = Transition {
            a: 1.0,
            y: IncomeState::Employed,
            a_next: 0.8,
            y_next: IncomeState::Employed,
        };
        let before = ag.model.forward(tr.y, tr.a_next);
        let eps = ag.learn_step(&p, &tr).unwrap();
        assert!(eps > 0.0);
        assert!(ag.model.forward(tr.y, tr.a_next) > before);
        assert_eq!(ag.t, 2);
        assert_eq!(ag.history.len(), 1);

        let mut lit = random_agent(&p, 21);
        lit.model.bias_mut(last)[0] -= 50.0;
        lit.literal_update_sign = true;
        lit.learn_step(&p, &tr).unwrap();
        assert!(lit.model.forward(tr.y, tr.a_next) < before);
    }

    #[test]
    fn zero_error_leaves_parameters() {
        let p = ModelParams { beta: 0.0, ..small() };
        let mut ag = random_agent(&p, 5);
        let phi = ag.model.params().to_vec();
        let tr = Transition {
            a: 1.0,
            y: IncomeState::Unemployed,
            a_next: 0.2,
            y_next: IncomeState::Employed,
        };
        assert_eq!(ag.learn_step(&p, &tr).unwrap(), 0.0);
        assert_eq!(ag.model.params(), &phi[..]);
    }

    #[test]
    fn frozen_agent_is_untouched() {
        let p = small();
        let mut ag = random_agent(&p, 8);
        ag.freeze();
        let snapshot = (ag.model.clone(), ag.adam.clone(), ag.t);
        let tr = Transition {
            a: 1.0,
            y: IncomeState::Employed,
            a_next: 0.4,
            y_next: IncomeState::Employed,
        };
        for _ in 0..3 {
            assert!(matches!(ag.learn_step(&p, &tr), Err(Error::FrozenAgent)));
            ag.mpc(&p, 0.5, IncomeState::Unemployed, p.transfer, false).unwrap();
        }
        assert_eq!((ag.model.clone(), ag.adam.clone(), ag.t), snapshot);
        ag.unfreeze();
        assert!(ag.learn_step(&p, &tr).is_ok());
    }

    #[test]
    fn budget_identity_holds() {
        let p = small();
        let ag = random_agent(&p, 9);
        for a in [0.0, 0.31, 2.2, 4.4] {
            for y in IncomeState::ALL {
                let c = ag.choose(&p, a, y, false).unwrap();
                let resid = c.consumption + c.savings - p.cash_on_hand(a, y);
                assert!(resid.abs() < 1e-12);
                assert!(c.consumption > C_FLOOR);
            }
        }
    }

    #[test]
    fn shared_grid_pass_matches_single_choices() {
        let p = small();
        let ag = random_agent(&p, 13);
        let assets = [0.0, 0.5, 1.5, 3.0];
        for y in IncomeState::ALL {
            let many = ag.consumption_at(&p, y, &assets, false).unwrap();
            for (a, c) in assets.iter().zip(many) {
                assert_eq!(ag.choose(&p, *a, y, false).unwrap().consumption, c);
            }
        }
    }

    #[test]
    fn smoothed_choice_uses_the_polynomial() {
        let p = small();
        let ag = random_agent(&p, 14);
        let s = ag.smoothed(&p).unwrap();
        let a = 1.2;
        let y = IncomeState::Unemployed;
        let cash = p.cash_on_hand(a, y);
        let n = ag.grid().feasible_len(cash);
        let ev: Vec<f64> = ag.grid().points()[..n].iter().map(|&x| s.eval(y, x)).collect();
        let want = argmax_savings(cash, ag.grid(), &ev, p.beta, utility).unwrap();
        assert_eq!(ag.choose(&p, a, y, true).unwrap(), want);
    }
}
