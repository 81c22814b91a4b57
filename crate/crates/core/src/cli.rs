//! The three commands behind the `tdcons` binary.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::LearningAgent;
use crate::analytics::{mpc_table, scarring_regression, stars, write_mpc_table, write_scarring_table, ScarringOptions};
use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::model::IncomeState;
use crate::neural::{pretrain, read_checkpoint, write_checkpoint, EVModel};
use crate::rational::{solve_default, solve_value_iteration, RationalSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::sim::output::{header_lines, read_scalars, with_svg_header, write_experiment, write_header, write_panel};
use crate::sim::svg::{two_panel, Series};
use crate::sim::{
    classify_liquidity, extreme_shock_experiment, long_run_run, mpc_experiment, pessimism_from, policy_distance,
    run_population, PopulationOptions, ShockOptions,
};

pub const CHECKPOINT: &str = "checkpoint.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSummary {
    pub checkpoint: PathBuf,
    pub epochs: usize,
    pub heldout_max_error: f64,
    pub policy_sup_error: f64,
    pub rational_iterations: usize,
    pub bellman_residual: f64,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

/// Solve the benchmark, fit the network to it, and write the checkpoint plus
/// fit diagnostics into `out`.
pub fn cmd_pretrain(cfg: &RunConfig, out: &Path) -> Result<PretrainSummary> {
    ensure_dir(out)?;
    let p = &cfg.params;
    let snap = cfg.snapshot();
    let t0 = Instant::now();
    let sol = solve_default(p)?;
    let residual = sol.bellman_residual();
    info!("rational benchmark: {} iterations, {:.2?}", sol.iterations, t0.elapsed());

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let rep = pretrain(&sol, p, &cfg.pretrain_config(), &mut rng)?;
    let agent = LearningAgent::new(rep.model.clone(), p);
    let policy_err = policy_distance(&agent, p, &sol, false)?;

    let path = out.join(CHECKPOINT);
    let mut w = create(&path)?;
    write_checkpoint(&rep.model, &header_lines(&snap, Some(p.seed)), &mut w)?;
    w.flush()?;

    let mut w = create(&out.join("pretrain_history.csv"))?;
    write_header(&mut w, &snap, Some(p.seed))?;
    writeln!(w, "epoch,train_mse,heldout_max_error")?;
    for (i, (m, e)) in rep.train_mse.iter().zip(&rep.heldout_history).enumerate() {
        writeln!(w, "{},{m},{e}", i + 1)?;
    }

    let mut w = create(&out.join("pretrain_scalars.csv"))?;
    write_header(&mut w, &snap, Some(p.seed))?;
    writeln!(w, "key,value")?;
    writeln!(w, "epochs,{}", rep.epochs)?;
    writeln!(w, "heldout_max_error,{}", rep.heldout_max_error)?;
    writeln!(w, "policy_sup_error,{policy_err}")?;
    writeln!(w, "rational_iterations,{}", sol.iterations)?;
    writeln!(w, "bellman_residual,{residual}")?;
    w.flush()?;

    let mut w = create(&out.join("rational.csv"))?;
    write_header(&mut w, &snap, None)?;
    sol.write_columns(&mut w)?;

    fs::write(out.join("initial_fit.svg"), with_svg_header(&initial_fit_figure(&rep.model, &sol), &snap, Some(p.seed)))?;

    Ok(PretrainSummary {
        checkpoint: path,
        epochs: rep.epochs,
        heldout_max_error: rep.heldout_max_error,
        policy_sup_error: policy_err,
        rational_iterations: sol.iterations,
        bellman_residual: residual,
    })
}

fn initial_fit_figure(model: &EVModel, sol: &RationalSolution) -> String {
    let p = &sol.params;
    let grid = crate::model::linspace(p.a_min, p.a_max, 200);
    let mut data = Vec::new();
    for y in IncomeState::ALL {
        let mut net = vec![0.0; grid.len()];
        model.eval_line(y, &grid, &mut net);
        let rat: Vec<f64> = grid.iter().map(|&a| sol.ev_at(y, a)).collect();
        data.push((net, rat));
    }
    let panel = |k: usize| -> Vec<Series> {
        vec![
            Series {
                label: "network".into(),
                x: &grid,
                y: &data[k].0,
            },
            Series {
                label: "rational".into(),
                x: &grid,
                y: &data[k].1,
            },
        ]
    };
    two_panel("expected value after pretraining", [("employed", panel(0)), ("unemployed", panel(1))])
}

/// Load `checkpoint`, or `out/checkpoint.txt`, or pretrain into `out`.
pub fn load_or_pretrain(cfg: &RunConfig, out: &Path, checkpoint: Option<&Path>) -> Result<EVModel> {
    let path = match checkpoint {
        Some(p) if !p.exists() => return Err(Error::MissingArtifact(p.to_path_buf())),
        Some(p) => p.to_path_buf(),
        None => {
            let p = out.join(CHECKPOINT);
            if !p.exists() {
                info!("no checkpoint in {}, pretraining first", out.display());
                cmd_pretrain(cfg, out)?;
            }
            p
        }
    };
    let model = read_checkpoint(BufReader::new(fs::File::open(&path)?))?;
    let p = &cfg.params;
    if model.hidden_dim() != p.hidden_dim
        || model.hidden_layers() != p.hidden_layers
        || model.income_values() != [p.income_employed, p.income_unemployed]
    {
        return Err(Error::Checkpoint(format!(
            "{} does not match the configured network shape or incomes",
            path.display()
        )));
    }
    Ok(model)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
}

/// Run the configured experiments for every seed and write all artifacts.
pub fn cmd_run(cfg: &RunConfig, out: &Path, checkpoint: Option<&Path>) -> Result<RunSummary> {
    ensure_dir(out)?;
    let model = load_or_pretrain(cfg, out, checkpoint)?;
    let p = &cfg.params;
    let snap = cfg.snapshot();
    let d = cfg.scf();
    let rational = solve_default(p)?;
    let exp = cfg.experiment;

    if exp.includes(Experiment::Mpc) || exp.includes(Experiment::Scarring) {
        let opts = PopulationOptions {
            all_employed: cfg.all_employed,
            literal_update_sign: cfg.literal_update_sign,
            record_mpc: exp.includes(Experiment::Mpc),
        };
        let mut mpc_results = Vec::new();
        let mut scarring = Vec::new();
        let mut pooled_panel = Vec::new();
        for &seed in &cfg.seeds {
            let t0 = Instant::now();
            let run = run_population(p, &d, &model, seed, &opts)?;
            info!("seed {seed}: population run {:.2?}", t0.elapsed());
            let mut panel = run.panel.clone();
            crate::analytics::annotate_experience(&mut panel)?;
            if let [c] = cfg.classify_at[..] {
                let classes = classify_liquidity(&run, c);
                for r in panel.iter_mut() {
                    r.liquidity_class = classes.get(&r.agent_id).copied();
                }
            }
            write_panel(create(&out.join(format!("panel_seed{seed}.csv")))?, &snap, Some(seed), &panel)?;
            if exp.includes(Experiment::Mpc) {
                for &c in &cfg.classify_at {
                    if c + 9 > p.n_periods {
                        info!("skipping classify_at {c}: needs {} periods", c + 9);
                        continue;
                    }
                    let mut res = mpc_experiment(&run, c)?;
                    res.config = snap.clone();
                    write_experiment(out, &format!("mpc_c{c}_seed{seed}"), &res)?;
                    mpc_results.push(res);
                }
            }
            if exp.includes(Experiment::Scarring) {
                let fits = scarring_regression(
                    &run.panel,
                    p,
                    &ScarringOptions {
                        clustered: cfg.clustered_errors,
                    },
                )?;
                let mut w = create(&out.join(format!("table4_seed{seed}.csv")))?;
                write_header(&mut w, &snap, Some(seed))?;
                write_scarring_table(&mut w, &fits)?;
                scarring.push((seed, fits));
                pooled_panel.extend(run.panel);
            }
        }
        if exp.includes(Experiment::Mpc) {
            let rows = mpc_table(&mpc_results);
            let mut w = create(&out.join("table3.csv"))?;
            write_header(&mut w, &snap, None)?;
            write_mpc_table(&mut w, &rows)?;
            let mut w = create(&out.join("table2.csv"))?;
            write_header(&mut w, &snap, None)?;
            write_mpc_table(&mut w, &rows.into_iter().filter(|r| r.classify_at == 0).collect::<Vec<_>>())?;
        }
        if exp.includes(Experiment::Scarring) {
            let mut w = create(&out.join("table4_seeds.csv"))?;
            write_header(&mut w, &snap, None)?;
            writeln!(w, "seed,column,variable,coefficient,std_error,p_value,stars")?;
            for (seed, fits) in &scarring {
                for (col, fit) in [("1", &fits.0), ("2", &fits.1)] {
                    for i in 0..fit.names.len() {
                        writeln!(
                            w,
                            "{seed},{col},{},{},{},{},{}",
                            fit.names[i],
                            fit.coefficients[i],
                            fit.std_errors[i],
                            fit.p_values[i],
                            stars(fit.p_values[i])
                        )?;
                    }
                }
            }
            let fits = scarring_regression(
                &pooled_panel,
                p,
                &ScarringOptions {
                    clustered: cfg.clustered_errors,
                },
            )?;
            let mut w = create(&out.join("table4_pooled.csv"))?;
            write_header(&mut w, &snap, None)?;
            write_scarring_table(&mut w, &fits)?;
        }
    }

    if exp.includes(Experiment::Extreme) {
        let opts = ShockOptions {
            mpc_smoothed: cfg.use_smoothed,
            literal_update_sign: cfg.literal_update_sign,
            ..ShockOptions::default()
        };
        let mut res = extreme_shock_experiment(p, &d, &model, &rational, &opts)?;
        res.config = snap.clone();
        write_experiment(out, "extreme", &res)?;
    }

    if exp.includes(Experiment::Pessimism) {
        let tilted = p.transition.pessimism(cfg.pessimism_factor)?;
        let pess = solve_value_iteration(p, &tilted, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let mut res = pessimism_from(p, cfg.pessimism_factor, &rational, &pess)?;
        res.config = snap.clone();
        write_experiment(out, "pessimism", &res)?;
    }

    if exp.includes(Experiment::Longrun) {
        let lp = crate::model::ModelParams {
            n_periods: cfg.long_run_periods,
            ..p.clone()
        };
        let mut rows = Vec::new();
        for &seed in &cfg.seeds {
            let mut res = long_run_run(&lp, &d, &model, &rational, seed, cfg.literal_update_sign)?;
            res.config = snap.clone();
            write_experiment(out, &format!("longrun_seed{seed}"), &res)?;
            let dist = &res.curve("smoothed", "distance", None, lp.n_periods).expect("distance curve").y;
            rows.push((seed, dist[0], dist[10.min(lp.n_periods)], dist[lp.n_periods]));
        }
        let mut w = create(&out.join("longrun.csv"))?;
        write_header(&mut w, &snap, None)?;
        writeln!(w, "seed,d_0,d_10,d_end")?;
        for (s, a, b, c) in &rows {
            writeln!(w, "{s},{a},{b},{c}")?;
        }
    }

    let mut files: Vec<PathBuf> = fs::read_dir(out)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    files.sort();
    Ok(RunSummary { files })
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// `None` when the artifact needed is absent.
    pub pass: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = match c.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "SKIP",
            };
            s.push_str(&format!("[{tag}] {}: {}\n", c.name, c.detail));
        }
        s
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass != Some(false))
    }
}

fn csv_rows(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)?;
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn scalars(path: &Path) -> Result<BTreeMap<String, f64>> {
    Ok(read_scalars(fs::File::open(path)?)?.into_iter().collect())
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Summarize the artifacts in `dir` against the reference numbers and bands.
pub fn cmd_report(dir: &Path) -> Result<Report> {
    if !dir.is_dir() {
        return Err(Error::MissingArtifact(dir.to_path_buf()));
    }
    let mut checks = Vec::new();
    let mut found = false;
    let skip = |name: &str, file: &str| Check {
        name: name.into(),
        pass: None,
        detail: format!("{file} not found"),
    };

    let f = dir.join("pretrain_scalars.csv");
    if f.exists() {
        found = true;
        let s = scalars(&f)?;
        let r = s.get("bellman_residual").copied().unwrap_or(f64::NAN);
        checks.push(Check {
            name: "rational benchmark".into(),
            pass: Some(r < 1e-8),
            detail: format!("Bellman residual {r:.2e} (< 1e-8)"),
        });
        let e = s.get("heldout_max_error").copied().unwrap_or(f64::NAN);
        let pe = s.get("policy_sup_error").copied().unwrap_or(f64::NAN);
        checks.push(Check {
            name: "pretraining".into(),
            pass: Some(e < 2.5e-3 && pe < 0.02),
            detail: format!("held-out max error {e:.3e} (< 2.5e-3), time-0 policy gap {pe:.4} (< 0.02)"),
        });
    } else {
        checks.push(skip("pretraining", "pretrain_scalars.csv"));
    }

    let f = dir.join("table3.csv");
    if f.exists() {
        found = true;
        let rows = csv_rows(&f)?;
        let get = |c: usize| rows.iter().find(|r| num(r, "classify_at") as usize == c);
        if let Some(r0) = get(0) {
            let (lo, hi) = (num(r0, "seed_mean_low"), num(r0, "seed_mean_high"));
            let diff = num(r0, "difference");
            checks.push(Check {
                name: "MPC by liquidity".into(),
                pass: Some((0.40..=0.60).contains(&lo) && (0.25..=0.45).contains(&hi) && diff > 0.05),
                detail: format!(
                    "low {lo:.3} (ref 0.501), high {hi:.3} (ref 0.343), pooled difference {diff:.3}, {} seeds",
                    num(r0, "seeds")
                ),
            });
        }
        let mut parts = Vec::new();
        let mut ok = true;
        for r in &rows {
            let c = num(r, "classify_at") as usize;
            let (d, p) = (num(r, "difference"), num(r, "p_value"));
            if c <= 10 {
                ok &= d > 0.0 && p < 0.10;
            } else if c >= 30 {
                ok &= d.abs() <= 0.10 && !(p < 0.10);
            }
            parts.push(format!("c={c}: {d:+.3} (t {:.2})", num(r, "t_stat")));
        }
        checks.push(Check {
            name: "MPC gap over classification periods".into(),
            pass: Some(ok),
            detail: parts.join(", "),
        });
    } else {
        checks.push(skip("MPC by liquidity", "table3.csv"));
    }

    let f = dir.join("table4_seeds.csv");
    if f.exists() {
        found = true;
        let rows = csv_rows(&f)?;
        let coefs = |col: &str, var: &str| -> Vec<f64> {
            rows.iter()
                .filter(|r| r["column"] == col && r["variable"] == var)
                .map(|r| num(r, "coefficient"))
                .collect()
        };
        let (u2, u2se) = mean_se(&coefs("2", "uep"));
        let (u1, u1se) = mean_se(&coefs("1", "uep"));
        let (a2, _) = mean_se(&coefs("2", "assets"));
        let sig = rows
            .iter()
            .filter(|r| r["column"] == "2" && r["variable"] == "uep")
            .filter(|r| num(r, "p_value") < 0.01)
            .count();
        let z = u2 / u2se;
        checks.push(Check {
            name: "scarring regression".into(),
            pass: Some(
                (-0.08..=-0.01).contains(&u2) && (-0.15..=-0.04).contains(&u1) && u1 < u2 && a2 > 0.0 && z < -2.576,
            ),
            detail: format!(
                "UEP with assets {u2:.4} (se {u2se:.4}, ref -0.0378; {sig} seeds p<0.01), without {u1:.4} (se {u1se:.4}, ref -0.0884), assets {a2:.4} (ref 0.1265)"
            ),
        });
    } else {
        checks.push(skip("scarring regression", "table4_seeds.csv"));
    }

    let f = dir.join("extreme_scalars.csv");
    if f.exists() {
        found = true;
        let s = scalars(&f)?;
        let g = |k: &str| s.get(k).copied().unwrap_or(f64::NAN);
        let gap = g("min_gap_low_quartile_employed").min(g("min_gap_low_quartile_unemployed"));
        let mean = g("mean_gap_low_quartile_employed").min(g("mean_gap_low_quartile_unemployed"));
        let share = g("share_above_rational_employed").min(g("share_above_rational_unemployed"));
        checks.push(Check {
            name: "extreme shock".into(),
            pass: Some(gap >= 0.0 && mean > 0.0 && share >= 0.9),
            detail: format!(
                "low-asset gap min {gap:.4} (>= 0), mean {mean:.4} (> 0); employment-history share above rational {share:.2} (>= 0.9)"
            ),
        });
    } else {
        checks.push(skip("extreme shock", "extreme_scalars.csv"));
    }

    let f = dir.join("pessimism_scalars.csv");
    if f.exists() {
        found = true;
        let s = scalars(&f)?;
        let g = |k: &str| s.get(k).copied().unwrap_or(f64::NAN);
        let c = g("max_excess_consumption_employed").max(g("max_excess_consumption_unemployed"));
        let m = g("max_excess_mpc_employed").max(g("max_excess_mpc_unemployed"));
        let mu = g("max_excess_mpc_uncapped_employed").max(g("max_excess_mpc_uncapped_unemployed"));
        let capped = g("capped_points_employed") + g("capped_points_unemployed");
        checks.push(Check {
            name: "pessimism counterfactual".into(),
            pass: Some(c <= 0.0 && m <= 1e-6),
            detail: format!(
                "max consumption excess {c:.2e} (<= 0), max MPC excess {m:.2e} (<= 1e-6); {mu:.2e} away from the {capped} points where savings hit a_max"
            ),
        });
    } else {
        checks.push(skip("pessimism counterfactual", "pessimism_scalars.csv"));
    }

    let f = dir.join("longrun.csv");
    if f.exists() {
        found = true;
        let rows = csv_rows(&f)?;
        let col = |k: &str| rows.iter().map(|r| num(r, k)).collect::<Vec<_>>();
        let (d0, d10, de) = (median(col("d_0")), median(col("d_10")), median(col("d_end")));
        checks.push(Check {
            name: "long-run convergence".into(),
            pass: Some(rows.len() >= 5 && d0 < d10 && de < d10),
            detail: format!("median distances d(0) {d0:.4}, d(10) {d10:.4}, d(end) {de:.4} over {} seeds", rows.len()),
        });
    } else {
        checks.push(skip("long-run convergence", "longrun.csv"));
    }

    if !found {
        return Err(Error::MissingArtifact(dir.to_path_buf()));
    }
    Ok(Report { checks })
}
