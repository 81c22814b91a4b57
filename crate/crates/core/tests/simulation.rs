use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use td_consumption::analytics::{annotate_experience, scarring_regression, ScarringOptions};
use td_consumption::model::{IncomeTransition, WeightInit};
use td_consumption::sim::{run_population, PopulationOptions, ScfDistribution, DEFAULT_QUANTILES};
use td_consumption::{EVModel, Error, ModelParams};

fn setup(n_agents: usize, n_periods: usize) -> (ModelParams, ScfDistribution, EVModel) {
    let p = ModelParams {
        n_agents,
        n_periods,
        hidden_dim: 12,
        savings_grid_n: 900,
        ..ModelParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut m = EVModel::random(&p, WeightInit::He, &mut rng);
    let last = m.hidden_layers();
    m.bias_mut(last)[0] -= 30.0;
    let d = ScfDistribution::from_quantiles(DEFAULT_QUANTILES).unwrap();
    (p, d, m)
}

#[test]
fn runs_are_deterministic_per_seed() {
    let (p, d, m) = setup(6, 12);
    let opts = PopulationOptions {
        record_mpc: true,
        ..Default::default()
    };
    let a = run_population(&p, &d, &m, 4, &opts).unwrap();
    let b = run_population(&p, &d, &m, 4, &opts).unwrap();
    assert_eq!(a.panel, b.panel);
    let c = run_population(&p, &d, &m, 5, &opts).unwrap();
    assert_ne!(a.panel, c.panel);
}

#[test]
fn every_lived_period_is_one_update() {
    let (p, d, m) = setup(4, 10);
    let run = run_population(&p, &d, &m, 1, &PopulationOptions::default()).unwrap();
    assert_eq!(run.learn_steps, vec![10; 4]);
    assert_eq!(run.panel.len(), 4 * 11);
    for id in 0..4 {
        let rows = run.agent(id);
        assert!(rows[..10].iter().all(|r| r.td_error.is_some() && !r.frozen));
        assert!(rows[10].frozen && rows[10].td_error.is_none());
        for w in rows.windows(2) {
            assert_eq!(w[1].assets, w[0].savings);
            assert_eq!(w[1].t, w[0].t + 1);
        }
    }
}

#[test]
fn zero_periods_leaves_the_pretrained_agent() {
    let (p, d, m) = setup(3, 0);
    let run = run_population(&p, &d, &m, 1, &PopulationOptions::default()).unwrap();
    assert_eq!(run.learn_steps, vec![0; 3]);
    assert_eq!(run.panel.len(), 3);
}

#[test]
fn permanent_employment_gives_zero_experience_and_rank_deficiency() {
    let (mut p, d, m) = setup(5, 12);
    p.transition = IncomeTransition {
        p_ee: 1.0,
        p_eu: 0.0,
        p_ue: 0.392,
        p_uu: 0.608,
    };
    let opts = PopulationOptions {
        all_employed: true,
        ..Default::default()
    };
    let run = run_population(&p, &d, &m, 2, &opts).unwrap();
    let mut panel = run.panel.clone();
    annotate_experience(&mut panel).unwrap();
    assert!(panel
        .iter()
        .filter_map(|r| r.experience_index)
        .all(|x| x == 0.0));
    let err = scarring_regression(&run.panel, &p, &ScarringOptions::default()).unwrap_err();
    assert!(matches!(err, Error::RankDeficient));
}
