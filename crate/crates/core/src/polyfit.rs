//! Low-order polynomial smoothing of the network's expected value along
//! savings, one polynomial per income state.
//!
//! Inputs are mapped affinely onto `[-1, 1]` before building the Vandermonde
//! matrix, and the least-squares problem is solved by QR.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{IncomeState, ModelParams};
use crate::neural::EVModel;

/// Least-squares polynomial on `[lo, hi]`, coefficients in the rescaled
/// variable `t = (2x - lo - hi) / (hi - lo)`, lowest order first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl Poly {
    #[inline]
    fn scale(&self, x: f64) -> f64 {
        (2.0 * x - self.lo - self.hi) / (self.hi - self.lo)
    }

    /// Horner evaluation; `x` outside the fit interval is clamped to it.
    pub fn eval(&self, x: f64) -> f64 {
        let t = self.scale(x.clamp(self.lo, self.hi));
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// Derivative with respect to `x` (not `t`).
    pub fn derivative(&self, x: f64) -> f64 {
        let t = self.scale(x.clamp(self.lo, self.hi));
        let n = self.coeffs.len();
        let mut acc = 0.0;
        for k in (1..n).rev() {
            acc = acc * t + k as f64 * self.coeffs[k];
        }
        acc * 2.0 / (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

/// Ordinary least-squares fit of a degree-`degree` polynomial to `(xs, ys)`.
pub fn fit_values(xs: &[f64], ys: &[f64], degree: usize) -> Result<Poly> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let k = degree + 1;
    if n < k {
        return Err(Error::SingularFit);
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::SingularFit);
    }
    let mut v = DMatrix::<f64>::zeros(n, k);
    for (i, &x) in xs.iter().enumerate() {
        let t = (2.0 * x - lo - hi) / (hi - lo);
        let mut pw = 1.0;
        for j in 0..k {
            v[(i, j)] = pw;
            pw *= t;
        }
    }
    let qr = v.qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-12 * diag_max.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularFit);
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(ys);
    let coeffs = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularFit)?;
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::SingularFit);
    }
    Ok(Poly {
        coeffs: coeffs.iter().cloned().collect(),
        lo,
        hi,
    })
}

/// Polynomial smoothing of the network's EV, per income state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySmoothedEV {
    pub polys: [Poly; 2],
}

impl PolySmoothedEV {
    pub fn eval(&self, y: IncomeState, a_next: f64) -> f64 {
        self.polys[y.index()].eval(a_next)
    }

    pub fn derivative(&self, y: IncomeState, a_next: f64) -> f64 {
        self.polys[y.index()].derivative(a_next)
    }

    /// Whether `a_next` lies inside the fit interval (outside it, evaluation
    /// is clamped).
    pub fn in_domain(&self, a_next: f64) -> bool {
        self.polys[0].contains(a_next)
    }

    pub fn coeffs(&self, y: IncomeState) -> &[f64] {
        &self.polys[y.index()].coeffs
    }

    /// Evaluate on an ascending slice.
    pub fn eval_line(&self, y: IncomeState, points: &[f64], out: &mut [f64]) {
        let poly = &self.polys[y.index()];
        for (o, &a) in out.iter_mut().zip(points) {
            *o = poly.eval(a);
        }
    }
}

/// Fit the smoothing polynomials to the network on the `poly_eval_n` grid.
pub fn fit_poly(model: &EVModel, p: &ModelParams) -> Result<PolySmoothedEV> {
    let xs = p.eval_grid();
    let mut ys = vec![0.0; xs.len()];
    let fit = |y: IncomeState, ys: &mut Vec<f64>| -> Result<Poly> {
        model.eval_line(y, &xs, ys);
        if ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularFit);
        }
        fit_values(&xs, ys, p.poly_degree)
    };
    let e = fit(IncomeState::Employed, &mut ys)?;
    let u = fit(IncomeState::Unemployed, &mut ys)?;
    Ok(PolySmoothedEV { polys: [e, u] })
}

/// Free-function form of [`PolySmoothedEV::eval`].
pub fn smoothed_ev(s: &PolySmoothedEV, y: IncomeState, a_next: f64) -> f64 {
    s.eval(y, a_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linspace, WeightInit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sse(poly: &Poly, xs: &[f64], ys: &[f64]) -> f64 {
        xs.iter().zip(ys).map(|(&x, &y)| (poly.eval(x) - y).powi(2)).sum()
    }

    #[test]
    fn quadratic_data_is_reproduced() {
        let xs = linspace(0.0, 4.5, 50);
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x * x - 1.2 * x - 2.0).collect();
        let poly = fit_values(&xs, &ys, 5).unwrap();
        let worst = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (poly.eval(x) - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn kink_leaves_a_smooth_residual() {
        let xs = linspace(0.0, 4.5, 50);
        let ys: Vec<f64> = xs.iter().map(|&x| (x - 2.25f64).max(0.0)).collect();
        let poly = fit_values(&xs, &ys, 5).unwrap();
        assert!(sse(&poly, &xs, &ys) > 1e-6);
        // Second derivative via central differences stays bounded through the kink.
        let h = 1e-3;
        let d2 = (poly.eval(2.25 + h) - 2.0 * poly.eval(2.25) + poly.eval(2.25 - h)) / (h * h);
        assert!(d2.is_finite() && d2.abs() < 10.0);
    }

    #[test]
    fn constant_coefficients() {
        let poly = Poly {
            coeffs: vec![-4.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            lo: 0.0,
            hi: 4.5,
        };
        for x in [0.0, 1.0, 4.5, 9.0, -2.0] {
            assert_eq!(poly.eval(x), -4.0);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let xs = linspace(0.0, 4.5, 50);
        let ys: Vec<f64> = xs.iter().map(|&x| (1.0 + x).ln() - 0.1 * x.powi(3)).collect();
        let poly = fit_values(&xs, &ys, 5).unwrap();
        let h = 1e-5;
        for x in [0.1, 0.9, 2.0, 3.3, 4.4] {
            let fd = (poly.eval(x + h) - poly.eval(x - h)) / (2.0 * h);
            assert!((fd - poly.derivative(x)).abs() < 1e-8, "{x}");
        }
    }

    #[test]
    fn least_squares_is_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = ModelParams::default();
        let m = EVModel::random(&p, WeightInit::He, &mut rng);
        let s = fit_poly(&m, &p).unwrap();
        let xs = p.eval_grid();
        for y in IncomeState::ALL {
            let mut ys = vec![0.0; xs.len()];
            m.eval_line(y, &xs, &mut ys);
            let base = &s.polys[y.index()];
            let best = sse(base, &xs, &ys);
            for k in 0..base.coeffs.len() {
                for d in [1e-6, -1e-6] {
                    let mut q = base.clone();
                    q.coeffs[k] += d;
                    assert!(sse(&q, &xs, &ys) >= best - 1e-15);
                }
            }
        }
    }

    #[test]
    fn agrees_with_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ModelParams::default();
        let m = EVModel::random(&p, WeightInit::He, &mut rng);
        let s = fit_poly(&m, &p).unwrap();
        let xs = p.eval_grid();
        for y in IncomeState::ALL {
            let mut ys = vec![0.0; xs.len()];
            m.eval_line(y, &xs, &mut ys);
            let v = DMatrix::from_fn(xs.len(), 6, |i, j| {
                let t = (2.0 * xs[i] - p.a_min - p.a_max) / (p.a_max - p.a_min);
                t.powi(j as i32)
            });
            let vt = v.transpose();
            let c = (&vt * &v).lu().solve(&(&vt * DVector::from_column_slice(&ys))).unwrap();
            let direct = &v * c;
            for (i, &x) in xs.iter().enumerate() {
                let got = s.eval(y, x);
                assert!((got - direct[i]).abs() < 1e-8 * (1.0 + got.abs()), "{got} {}", direct[i]);
            }
        }
    }

    #[test]
    fn singular_inputs_are_reported() {
        assert!(matches!(
            fit_values(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0], 1),
            Err(Error::SingularFit)
        ));
        assert!(matches!(fit_values(&[0.0, 1.0], &[0.0, 1.0], 5), Err(Error::SingularFit)));
    }
}
