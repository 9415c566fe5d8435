//! Sequential-learning study: rounds-to-success distributions per
//! acquisition method on a finite candidate pool.

use super::common::{fixture_exists, fmt, load_fixture, Table};
use super::RecipeOutput;
use crate::config::RunConfig;
use calibag::datasets::{gen_sl_synthetic, Dataset};
use calibag::sequential::{run_study, Objective, SelectionMethod, SlConfig};
use calibag::stats::RngStream;
use serde_json::json;

fn parse_methods(names: Option<&[String]>) -> anyhow::Result<Vec<SelectionMethod>> {
    match names {
        None => Ok(SelectionMethod::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| {
                SelectionMethod::ALL
                    .iter()
                    .find(|m| m.name() == n)
                    .copied()
                    .ok_or_else(|| {
                        anyhow::anyhow!(
                            "unknown selection method '{n}'; expected one of: trivial, \
                             training-data, jackknife, bootstrap, random"
                        )
                    })
            })
            .collect(),
    }
}

/// Draw the synthetic pool, advancing the derivation stream until the
/// generated table has exactly two satisfying candidates (the studied
/// problem's geometry); falls back to the first draw with any satisfying
/// candidate. Deterministic in the seed.
fn synthetic_pool(seed: u64, objectives: &[Objective<f64>]) -> anyhow::Result<(Dataset<f64>, u64)> {
    let base = RngStream::new(seed);
    let mut fallback: Option<(Dataset<f64>, u64)> = None;
    for attempt in 0..100 {
        let data = gen_sl_synthetic::<f64>(base.substream(1_000 + attempt))?;
        let winners = count_winners(&data, objectives);
        if winners == 2 {
            return Ok((data, attempt));
        }
        if winners >= 1 && fallback.is_none() {
            fallback = Some((data, attempt));
        }
    }
    fallback.ok_or_else(|| {
        anyhow::anyhow!("no synthetic pool with satisfying candidates after 100 draws")
    })
}

fn count_winners(data: &Dataset<f64>, objectives: &[Objective<f64>]) -> usize {
    (0..data.n_rows())
        .filter(|&i| {
            objectives.iter().all(|o| {
                let j = data.output_index(&o.output).expect("objective output");
                let v = data.outputs().get(i, j);
                match o.direction {
                    calibag::sequential::Direction::GreaterThan => v > o.threshold,
                    calibag::sequential::Direction::LessThan => v < o.threshold,
                }
            })
        })
        .count()
}

struct StudyProblem {
    name: String,
    data: Dataset<f64>,
    objectives: Vec<Objective<f64>>,
    n_initial: usize,
    trials: usize,
}

pub(super) fn run(config: &RunConfig) -> anyhow::Result<RecipeOutput> {
    let methods = parse_methods(config.methods.as_deref())?;
    let bags = config.bags.unwrap_or(64);
    let n_mc = config.n_mc_samples.unwrap_or(10_000);

    let mut problems = Vec::new();
    let mut pool_attempt = 0;
    if config.objectives.is_empty() {
        let synthetic_objectives = vec![
            Objective::greater_than("y0", 22.0),
            Objective::greater_than("y1", 22.0),
        ];
        let (synth_data, attempt) = synthetic_pool(config.seed, &synthetic_objectives)?;
        pool_attempt = attempt;
        problems.push(StudyProblem {
            name: "synthetic".into(),
            data: synth_data,
            objectives: synthetic_objectives,
            n_initial: config.n_initial.unwrap_or(16),
            trials: config.trials.unwrap_or(64),
        });
    } else {
        // custom study from the config file
        let dataset_name = config.sl_dataset.as_deref().unwrap_or("synthetic");
        let data = if dataset_name == "synthetic" {
            let (data, attempt) = synthetic_pool(config.seed, &config.objectives)?;
            pool_attempt = attempt;
            data
        } else {
            load_fixture(&config.fixture_dir, dataset_name)?
        };
        problems.push(StudyProblem {
            name: "custom".into(),
            data,
            objectives: config.objectives.clone(),
            n_initial: config.n_initial.unwrap_or(16),
            trials: config.trials.unwrap_or(64),
        });
    }

    if config.full {
        if !fixture_exists(&config.fixture_dir, "thermoelectrics") {
            anyhow::bail!(
                "--full requires the thermoelectrics fixture: expected {}",
                config
                    .fixture_dir
                    .join("thermoelectrics.csv")
                    .display()
            );
        }
        let data = load_fixture(&config.fixture_dir, "thermoelectrics")?;
        problems.push(StudyProblem {
            name: "thermoelectrics".into(),
            data,
            objectives: vec![
                Objective::greater_than("zt", 1.25),
                Objective::greater_than("seebeck", 175.0),
                Objective::greater_than("power_factor", 0.005),
                Objective::greater_than("thermal_conductivity", 1.5),
            ],
            n_initial: config.n_initial.unwrap_or(32),
            trials: config.trials.unwrap_or(16),
        });
    }

    let mut trials_table = Table::new(
        "sl_trials",
        &["problem", "method", "trial", "rounds", "censored"],
    );
    let mut summaries = Vec::new();

    for problem in &problems {
        let winners = count_winners(&problem.data, &problem.objectives);
        for &method in &methods {
            let mut sl = SlConfig::new(problem.objectives.clone(), method);
            sl.n_initial = problem.n_initial;
            sl.n_bags = bags;
            sl.n_mc_samples = n_mc;
            sl.p = config.p;
            sl.n_trials = problem.trials;
            sl.base_seed = config.seed;
            let study = run_study(&sl, &problem.data)?;
            for t in &study.trials {
                trials_table.push(vec![
                    problem.name.clone(),
                    method.name().to_string(),
                    fmt(t.trial as f64),
                    t.rounds_to_success.map_or(String::new(), |r| fmt(r as f64)),
                    fmt(u8::from(t.rounds_to_success.is_none()) as f64),
                ]);
            }
            summaries.push(json!({
                "problem": problem.name,
                "method": method.name(),
                "mean": study.summary.mean_rounds,
                "std_error": study.summary.std_error,
                "p5": study.summary.p5,
                "median": study.summary.median,
                "p95": study.summary.p95,
                "n_trials": study.summary.n_trials,
                "n_censored": study.summary.n_censored,
            }));
        }
        summaries.push(json!({
            "problem": problem.name,
            "pool_size": problem.data.n_rows(),
            "satisfying_candidates": winners,
        }));
    }

    Ok(RecipeOutput {
        tables: vec![trials_table],
        summary: json!({ "studies": summaries }),
        parameters: json!({
            "bags": bags,
            "n_mc_samples": n_mc,
            "p": config.p,
            "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "synthetic_pool_attempt": pool_attempt,
            "full": config.full,
        }),
    })
}
