//! Full-information benchmark: value iteration on a discretized asset grid.
//!
//! The value function lives on an asset grid of `train_grid_n` points spanning
//! `[a_min, a_max + transfer]` and is evaluated between grid points by linear
//! interpolation. Each Bellman step maximizes over the complete savings grid.
//! Because `log(x - a')` has increasing differences in `(x, a')`, the lowest
//! maximizer is nondecreasing in cash-on-hand, so the search over savings for
//! a block of asset points can be narrowed by divide and conquer without
//! changing the result.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{linspace, utility, IncomeState, IncomeTransition, ModelParams, SavingsGrid};

/// Default sup-norm tolerance for successive value iterates.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default iteration budget.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Piecewise-linear interpolation on a strictly increasing grid, with flat
/// extrapolation beyond both ends.
pub fn interp_linear(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[n - 1] {
        return values[n - 1];
    }
    let hi = grid.partition_point(|&g| g <= x).min(n - 1);
    let lo = hi - 1;
    let w = (x - grid[lo]) / (grid[hi] - grid[lo]);
    values[lo] + w * (values[hi] - values[lo])
}

/// Precomputed bracket for interpolating at a fixed abscissa.
#[derive(Debug, Clone, Copy)]
struct Bracket {
    lo: usize,
    w: f64,
}

fn brackets(grid: &[f64], xs: &[f64]) -> Vec<Bracket> {
    let n = grid.len();
    xs.iter()
        .map(|&x| {
            if x <= grid[0] {
                Bracket { lo: 0, w: 0.0 }
            } else if x >= grid[n - 1] {
                Bracket { lo: n - 2, w: 1.0 }
            } else {
                let hi = grid.partition_point(|&g| g <= x).min(n - 1);
                let lo = hi - 1;
                Bracket {
                    lo,
                    w: (x - grid[lo]) / (grid[hi] - grid[lo]),
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RationalSolution {
    pub params: ModelParams,
    pub transition: IncomeTransition,
    pub asset_grid: Vec<f64>,
    pub savings: SavingsGrid,
    /// Value per income state on `asset_grid`.
    pub v: [Vec<f64>; 2],
    /// Conditional expected value per current income state on the savings grid.
    pub ev: [Vec<f64>; 2],
    /// Optimal savings per income state on `asset_grid`.
    pub policy: [Vec<f64>; 2],
    pub iterations: usize,
    /// Sup-norm change in the final iteration.
    pub residual: f64,
    /// Sup-norm changes of every iteration, in order.
    pub history: Vec<f64>,
}

struct Problem<'a> {
    beta: f64,
    assets: &'a [f64],
    savings: &'a [f64],
    income: f64,
    gross_return: f64,
}

impl Problem<'_> {
    #[inline]
    fn cash(&self, i: usize) -> f64 {
        self.income + self.gross_return * self.assets[i]
    }

    /// Lowest-index maximizer of `u(x - s_j) + beta * ev_j` over `j in [lo, hi]`
    /// restricted to feasible consumption.
    fn argmax(&self, ev: &[f64], cash: f64, lo: usize, hi: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in lo..=hi {
            let c = cash - self.savings[j];
            if c <= crate::model::C_FLOOR {
                break;
            }
            let q = utility(c) + self.beta * ev[j];
            match best {
                Some((_, b)) if q <= b => {}
                _ => best = Some((j, q)),
            }
        }
        best
    }

    /// Bellman update for every asset point, writing values and policy indices.
    fn sweep(&self, ev: &[f64], v_out: &mut [f64], idx_out: &mut [usize]) -> Result<()> {
        let n = self.assets.len();
        let last = self.savings.len() - 1;
        self.recurse(ev, 0, n - 1, 0, last, v_out, idx_out)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        ev: &[f64],
        i_lo: usize,
        i_hi: usize,
        j_lo: usize,
        j_hi: usize,
        v_out: &mut [f64],
        idx_out: &mut [usize],
    ) -> Result<()> {
        if i_lo > i_hi {
            return Ok(());
        }
        let mid = i_lo + (i_hi - i_lo) / 2;
        let cash = self.cash(mid);
        let (j, q) = self
            .argmax(ev, cash, j_lo, j_hi)
            .ok_or(Error::NoFeasibleChoice { cash })?;
        v_out[mid] = q;
        idx_out[mid] = j;
        if mid > i_lo {
            self.recurse(ev, i_lo, mid - 1, j_lo, j, v_out, idx_out)?;
        }
        if mid < i_hi {
            self.recurse(ev, mid + 1, i_hi, j, j_hi, v_out, idx_out)?;
        }
        Ok(())
    }
}

/// Solve the Bellman equation by successive approximation.
pub fn solve_value_iteration(
    p: &ModelParams,
    t: &IncomeTransition,
    tol: f64,
    max_iter: usize,
) -> Result<RationalSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    let p = p.validate()?;
    let t = t.normalized()?;
    let asset_grid = linspace(p.a_min, p.eval_upper(), p.train_grid_n);
    let savings = p.savings_grid();
    let na = asset_grid.len();
    let ns = savings.len();
    let br = brackets(&asset_grid, savings.points());

    let problems: Vec<Problem> = IncomeState::ALL
        .iter()
        .map(|&y| Problem {
            beta: p.beta,
            assets: &asset_grid,
            savings: savings.points(),
            income: p.income(y),
            gross_return: p.gross_return,
        })
        .collect();

    // Start from consuming all cash-on-hand forever after.
    let mut v: [Vec<f64>; 2] = [0, 1].map(|k| {
        (0..na)
            .map(|i| utility(problems[k].cash(i) - p.a_min))
            .collect()
    });
    let mut v_new: [Vec<f64>; 2] = [vec![0.0; na], vec![0.0; na]];
    let mut idx: [Vec<usize>; 2] = [vec![0; na], vec![0; na]];
    let mut ev: [Vec<f64>; 2] = [vec![0.0; ns], vec![0.0; ns]];
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;

    for iter in 1..=max_iter {
        expected_values(&v, &br, &t, &mut ev);
        let (first, second) = v_new.split_at_mut(1);
        let (idx_first, idx_second) = idx.split_at_mut(1);
        let (r0, r1) = rayon::join(
            || problems[0].sweep(&ev[0], &mut first[0], &mut idx_first[0]),
            || problems[1].sweep(&ev[1], &mut second[0], &mut idx_second[0]),
        );
        r0?;
        r1?;
        residual = v
            .iter()
            .zip(v_new.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        history.push(residual);
        std::mem::swap(&mut v, &mut v_new);
        if residual < tol {
            expected_values(&v, &br, &t, &mut ev);
            let policy = [0, 1].map(|k| idx[k].iter().map(|&j| savings.points()[j]).collect());
            return Ok(RationalSolution {
                params: p,
                transition: t,
                asset_grid,
                savings,
                v,
                ev,
                policy,
                iterations: iter,
                residual,
                history,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

fn expected_values(v: &[Vec<f64>; 2], br: &[Bracket], t: &IncomeTransition, ev: &mut [Vec<f64>; 2]) {
    for (j, b) in br.iter().enumerate() {
        let w_e = v[0][b.lo] + b.w * (v[0][b.lo + 1] - v[0][b.lo]);
        let w_u = v[1][b.lo] + b.w * (v[1][b.lo + 1] - v[1][b.lo]);
        for y in IncomeState::ALL {
            let row = t.row(y);
            ev[y.index()][j] = row[0] * w_e + row[1] * w_u;
        }
    }
}

impl RationalSolution {
    /// Interpolated value function.
    pub fn value(&self, a: f64, y: IncomeState) -> f64 {
        interp_linear(&self.asset_grid, &self.v[y.index()], a)
    }

    /// Interpolated optimal savings.
    pub fn savings_policy(&self, a: f64, y: IncomeState) -> f64 {
        interp_linear(&self.asset_grid, &self.policy[y.index()], a)
    }

    /// `E[V(a_next, y') | y]` with `V` interpolated on the asset grid.
    pub fn ev_at(&self, y: IncomeState, a_next: f64) -> f64 {
        let row = self.transition.row(y);
        row[0] * self.value(a_next, IncomeState::Employed)
            + row[1] * self.value(a_next, IncomeState::Unemployed)
    }

    /// Consumption `R a + y - a'(a, y)` under the interpolated policy.
    pub fn consumption(&self, a: f64, y: IncomeState) -> f64 {
        let cash = self.params.cash_on_hand(a, y);
        let s = self.savings_policy(a, y).min(cash - crate::model::C_FLOOR);
        cash - s
    }

    /// `(c(a + tau) - c(a)) / tau` under the interpolated policy.
    pub fn mpc(&self, a: f64, y: IncomeState, tau: f64) -> f64 {
        (self.consumption(a + tau, y) - self.consumption(a, y)) / tau
    }

    /// Sup-norm of `T(V) - V` on the asset grid, recomputed from scratch with
    /// an exhaustive search over savings.
    pub fn bellman_residual(&self) -> f64 {
        let p = &self.params;
        let mut worst: f64 = 0.0;
        for y in IncomeState::ALL {
            let ev = &self.ev[y.index()];
            for (i, &a) in self.asset_grid.iter().enumerate() {
                let cash = p.cash_on_hand(a, y);
                let mut best = f64::NEG_INFINITY;
                for (j, &s) in self.savings.points().iter().enumerate() {
                    let c = cash - s;
                    if c <= crate::model::C_FLOOR {
                        break;
                    }
                    best = best.max(utility(c) + p.beta * ev[j]);
                }
                worst = worst.max((best - self.v[y.index()][i]).abs());
            }
        }
        worst
    }

    /// Write `asset, income, V, policy, EV` rows.
    pub fn write_columns<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "asset,income,value,policy,ev")?;
        for y in IncomeState::ALL {
            for (i, &a) in self.asset_grid.iter().enumerate() {
                writeln!(
                    w,
                    "{a},{},{},{},{}",
                    y.label(),
                    self.v[y.index()][i],
                    self.policy[y.index()][i],
                    self.ev_at(y, a)
                )?;
            }
        }
        Ok(())
    }
}

/// Free-function form of [`RationalSolution::consumption`].
pub fn rational_consumption(s: &RationalSolution, a: f64, y: IncomeState) -> f64 {
    s.consumption(a, y)
}

/// Free-function form of [`RationalSolution::ev_at`].
pub fn rational_ev(s: &RationalSolution, y: IncomeState, a_next: f64) -> f64 {
    s.ev_at(y, a_next)
}

/// Solve with the default tolerance and iteration budget.
pub fn solve_default(p: &ModelParams) -> Result<RationalSolution> {
    solve_value_iteration(p, &p.transition, DEFAULT_TOL, DEFAULT_MAX_ITER)
}
