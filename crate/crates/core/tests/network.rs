use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use td_consumption::model::WeightInit;
use td_consumption::neural::{read_checkpoint, write_checkpoint};
use td_consumption::{EVModel, IncomeState, ModelParams};

fn random_model(seed: u64) -> (ModelParams, EVModel) {
    let p = ModelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = EVModel::random(&p, WeightInit::He, &mut rng);
    (p, m)
}

/// Whether any hidden unit's pre-activation lies within `tol` of zero.
fn near_kink(m: &EVModel, y: IncomeState, a: f64, tol: f64) -> bool {
    let mut x = vec![m.income_input(y), a];
    let shapes = m.shapes();
    for l in 0..shapes.len() - 1 {
        let (w, b) = (m.weights(l), m.bias(l));
        let (rows, cols) = (shapes[l].n_out, shapes[l].n_in);
        let mut z = b.to_vec();
        for c in 0..cols {
            for r in 0..rows {
                z[r] += w[c * rows + r] * x[c];
            }
        }
        if z.iter().any(|v| v.abs() < tol) {
            return true;
        }
        x = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    false
}

#[test]
fn gradient_matches_central_differences() {
    let (_, mut m) = random_model(11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-6;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 120 {
        let y = if rng.gen::<bool>() { IncomeState::Employed } else { IncomeState::Unemployed };
        let a = rng.gen_range(0.0..4.5);
        if near_kink(&m, y, a, 1e-3) {
            continue;
        }
        let g = m.grad_params(y, a);
        for _ in 0..20 {
            let k = rng.gen_range(0..m.n_params());
            let orig = m.params()[k];
            m.params_mut()[k] = orig + h;
            let up = m.forward(y, a);
            m.params_mut()[k] = orig - h;
            let down = m.forward(y, a);
            m.params_mut()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-3);
            worst = worst.max(rel);
        }
        checked += 1;
    }
    assert!(worst < 1e-5, "max relative error {worst}");
}

#[test]
fn forward_is_piecewise_linear_in_savings() {
    let (_, m) = random_model(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tested = 0;
    while tested < 50 {
        let a = rng.gen_range(0.01..4.49);
        let d = 1e-6;
        if near_kink(&m, IncomeState::Employed, a, 1e-3) {
            continue;
        }
        let f = |x: f64| m.forward(IncomeState::Employed, x);
        let mid = f(a);
        let interp = 0.5 * (f(a - d) + f(a + d));
        assert!((mid - interp).abs() < 1e-10, "{a}: {mid} vs {interp}");
        tested += 1;
    }
}

#[test]
fn eval_line_matches_pointwise_forward() {
    let (p, m) = random_model(5);
    let pts = p.savings_grid().points().to_vec();
    for y in IncomeState::ALL {
        let mut out = vec![0.0; pts.len()];
        m.eval_line(y, &pts, &mut out);
        for (i, &a) in pts.iter().enumerate().step_by(37) {
            assert!((out[i] - m.forward(y, a)).abs() < 1e-12);
        }
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let (_, m) = random_model(8);
    let mut buf = Vec::new();
    write_checkpoint(&m, &["# test".to_string()], &mut buf).unwrap();
    let back = read_checkpoint(std::io::Cursor::new(buf)).unwrap();
    assert_eq!(back.params(), m.params());
    assert_eq!(back.income_values(), m.income_values());
}

#[test]
fn default_network_has_expected_size() {
    let (_, m) = random_model(1);
    assert_eq!(m.n_params(), 6801);
}
