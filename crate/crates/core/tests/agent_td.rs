use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use td_consumption::model::WeightInit;
use td_consumption::{EVModel, IncomeState, LearningAgent, ModelParams, Transition};

fn agent(seed: u64) -> (ModelParams, LearningAgent) {
    let p = ModelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = EVModel::random(&p, WeightInit::He, &mut rng);
    // Shift the output so EV has the negative level of a log-utility value.
    let last = m.hidden_layers();
    m.bias_mut(last)[0] -= 30.0;
    (p.clone(), LearningAgent::new(m, &p))
}

fn random_transition(ag: &LearningAgent, p: &ModelParams, rng: &mut ChaCha8Rng) -> Transition {
    let y = if rng.gen::<bool>() { IncomeState::Employed } else { IncomeState::Unemployed };
    let a = rng.gen_range(0.0..4.5);
    let cash = p.cash_on_hand(a, y);
    let top = ag.grid().feasible_len(cash);
    let a_next = ag.grid().points()[rng.gen_range(0..top)];
    let y_next = p.transition.sample(y, rng);
    Transition { a, y, a_next, y_next }
}

#[test]
fn td_error_forms_agree_on_random_transitions() {
    let (p, ag) = agent(21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..1000 {
        let tr = random_transition(&ag, &p, &mut rng);
        let direct = ag.td_error(&p, &tr).unwrap();
        let via_q = ag.td_error_from_q(&p, &tr).unwrap();
        assert!((direct - via_q).abs() < 1e-12 * (1.0 + direct.abs()), "{direct} vs {via_q}");
    }
}

#[test]
fn frozen_agent_is_bit_identical() {
    let (p, mut ag) = agent(5);
    let before = ag.model.params().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    ag.freeze();
    for _ in 0..50 {
        let tr = random_transition(&ag, &p, &mut rng);
        let _ = ag.mpc(&p, tr.a, tr.y, p.transfer, false).unwrap();
        let _ = ag.choose(&p, tr.a, tr.y, true).unwrap();
        assert!(ag.learn_step(&p, &tr).is_err());
    }
    assert!(ag
        .model
        .params()
        .iter()
        .zip(&before)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(ag.t, 1);
    assert!(ag.history.is_empty());
}

#[test]
fn learning_rate_decays_with_updates() {
    let (p, mut ag) = agent(9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for k in 1..=25u64 {
        assert_eq!(ag.t, k);
        let tr = random_transition(&ag, &p, &mut rng);
        ag.learn_step(&p, &tr).unwrap();
    }
    assert!((p.learning_rate_at(4) - p.learning_rate / 2.0).abs() < 1e-18);
    assert_eq!(ag.history.len(), 25);
}
