//! Supervised fit of the network to the rational conditional expected value.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{AdamState, EVModel};
use crate::error::{Error, Result};
use crate::model::{linspace, IncomeState, ModelParams};
use crate::rational::RationalSolution;

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best held-out error before the step size halves.
    pub patience: usize,
    /// Give up once the step size falls below this.
    pub min_learning_rate: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 20_000,
            patience: 500,
            min_learning_rate: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub model: EVModel,
    pub epochs: usize,
    /// Max absolute error on the held-out midpoints.
    pub heldout_max_error: f64,
    /// Full-training-set mean squared error after each epoch.
    pub train_mse: Vec<f64>,
    /// Held-out max error after each epoch.
    pub heldout_history: Vec<f64>,
}

struct Sample {
    y: IncomeState,
    a: f64,
    target: f64,
}

/// Training and held-out savings points: `n` points on `[a_min, a_max]` and
/// the midpoints between consecutive ones.
pub fn pretrain_grids(p: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let train = linspace(p.a_min, p.a_max, p.train_grid_n);
    let held: Vec<f64> = train.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    (train, held)
}

fn max_error(model: &EVModel, target: &RationalSolution, pts: &[f64]) -> f64 {
    let mut out = vec![0.0; pts.len()];
    let mut worst: f64 = 0.0;
    for y in IncomeState::ALL {
        model.eval_line(y, pts, &mut out);
        for (&a, &v) in pts.iter().zip(&out) {
            worst = worst.max((v - target.ev_at(y, a)).abs());
        }
    }
    worst
}

fn mse(model: &EVModel, samples: &[Sample], pts: &[f64]) -> f64 {
    let mut out = [vec![0.0; pts.len()], vec![0.0; pts.len()]];
    for y in IncomeState::ALL {
        model.eval_line(y, pts, &mut out[y.index()]);
    }
    let n = pts.len();
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let e = out[s.y.index()][i % n] - s.target;
            e * e
        })
        .sum::<f64>()
        / samples.len() as f64
}

/// Fit a freshly initialized network to `target.ev_at` by minibatch ADAM on
/// mean squared error, stopping once the max error on held-out midpoints
/// falls below `p.pretrain_tolerance`.
pub fn pretrain<R: Rng + ?Sized>(
    target: &RationalSolution,
    p: &ModelParams,
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<PretrainReport> {
    let mut model = EVModel::random(p, p.weight_init, rng);
    let (train, held) = pretrain_grids(p);
    // Income-major order, so sample i lines up with eval_line output i % n.
    let samples: Vec<Sample> = IncomeState::ALL
        .iter()
        .flat_map(|&y| {
            train.iter().map(move |&a| Sample {
                y,
                a,
                target: target.ev_at(y, a),
            })
        })
        .collect();

    let mut adam = AdamState::new(model.n_params());
    let mut grad = vec![0.0; model.n_params()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut lr = cfg.learning_rate;
    let mut best_err = f64::INFINITY;
    let mut best_model = model.clone();
    let mut since_best = 0;
    let mut train_mse = Vec::new();
    let mut heldout_history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / batch.len() as f64;
            for &i in batch {
                let s = &samples[i];
                model.accumulate_grad_with(
                    model.income_input(s.y),
                    s.a,
                    |out| scale * (out - s.target),
                    &mut grad,
                );
            }
            adam.step(model.params_mut(), &grad, lr);
        }

        let err = max_error(&model, target, &held);
        train_mse.push(mse(&model, &samples, &train));
        heldout_history.push(err);
        if err < best_err {
            best_err = err;
            best_model = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if epoch % 500 == 0 {
            debug!("pretrain epoch {epoch}: held-out max error {err:.3e}, best {best_err:.3e}, lr {lr:.2e}");
        }
        if err < p.pretrain_tolerance {
            info!("pretraining reached held-out max error {err:.3e} after {epoch} epochs");
            return Ok(PretrainReport {
                model,
                epochs: epoch,
                heldout_max_error: err,
                train_mse,
                heldout_history,
            });
        }
        if since_best >= cfg.patience {
            lr *= 0.5;
            since_best = 0;
            // Continue from the best point found so far.
            model = best_model.clone();
            if lr < cfg.min_learning_rate {
                break;
            }
        }
    }
    Err(Error::PretrainFailure {
        epochs: heldout_history.len(),
        max_error: best_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{IncomeTransition, WeightInit};
    use crate::rational::solve_default;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn held_out_points_are_strict_midpoints() {
        let p = ModelParams::default();
        let (train, held) = pretrain_grids(&p);
        assert_eq!(train.len(), 500);
        assert_eq!(held.len(), 499);
        for (i, &h) in held.iter().enumerate() {
            assert!(train[i] < h && h < train[i + 1]);
        }
    }

    fn flat_target(p: &ModelParams) -> RationalSolution {
        let mut sol = solve_default(p).unwrap();
        for v in sol.v.iter_mut() {
            v.iter_mut().for_each(|x| *x = -1.5);
        }
        sol.transition = IncomeTransition::default().normalized().unwrap();
        sol
    }

    fn small() -> ModelParams {
        ModelParams {
            hidden_dim: 8,
            savings_grid_n: 400,
            train_grid_n: 60,
            beta: 0.0,
            weight_init: WeightInit::He,
            pretrain_tolerance: 5e-2,
            ..ModelParams::default()
        }
    }

    #[test]
    fn loose_tolerance_is_reached() {
        let p = small();
        let sol = flat_target(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = pretrain(&sol, &p, &PretrainConfig::default(), &mut rng).unwrap();
        assert!(rep.heldout_max_error < 5e-2);
        assert_eq!(rep.heldout_history.len(), rep.epochs);
        assert!(rep.train_mse.last().unwrap() < &rep.train_mse[0]);
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let p = ModelParams {
            pretrain_tolerance: 1e-12,
            ..small()
        };
        let sol = flat_target(&p);
        let cfg = PretrainConfig {
            max_epochs: 3,
            ..PretrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            pretrain(&sol, &p, &cfg, &mut rng),
            Err(Error::PretrainFailure { epochs: 3, .. })
        ));
    }
}
