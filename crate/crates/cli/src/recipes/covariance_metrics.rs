//! Median NLPD and standard confidence for the four correlation methods on
//! three-output benchmark problems, plus fixture datasets when available.

use super::common::{
    fixture_exists, fmt, friedman_grosse_3out, friedman_silverman_3out, load_fixture,
    mean_stderr, method_points, parse_correlation_methods, Table,
};
use super::RecipeOutput;
use crate::config::RunConfig;
use calibag::datasets::{split, Dataset, SplitStrategy};
use calibag::ensemble::fit_forest;
use calibag::intervals::{calibrate_forest, training_data_correlation, CorrelationMethod};
use calibag::metrics::evaluate;
use calibag::stats::RngStream;
use serde_json::json;
use std::collections::BTreeMap;

struct Problem {
    name: &'static str,
    n_test: usize,
    trials: usize,
}

pub(super) fn run(config: &RunConfig) -> anyhow::Result<RecipeOutput> {
    let bags = config.bags.unwrap_or(64);
    let noise = config.noise.unwrap_or(2.0);
    let n_train_synth = config.n_train.unwrap_or(128);
    let methods = parse_correlation_methods(config.methods.as_deref())?;
    let base = RngStream::new(config.seed);

    let synthetic = [
        Problem {
            name: "friedman-grosse",
            n_test: config.n_test.unwrap_or(128),
            trials: config.trials.unwrap_or(16),
        },
        Problem {
            name: "friedman-silverman",
            n_test: config.n_test.unwrap_or(128),
            trials: config.trials.unwrap_or(16),
        },
    ];
    let fixtures = [
        Problem {
            name: "thermoelectrics",
            n_test: config.n_test.unwrap_or(64),
            trials: config.trials.unwrap_or(32),
        },
        Problem {
            name: "mechanical-properties",
            n_test: config.n_test.unwrap_or(48),
            trials: config.trials.unwrap_or(32),
        },
    ];

    let mut table = Table::new(
        "covariance_metrics",
        &["problem", "trial", "method", "median_nlpd", "standard_confidence"],
    );
    let mut agg: BTreeMap<(String, &'static str), (Vec<f64>, Vec<f64>)> = BTreeMap::new();

    let run_problem = |problem: &Problem,
                           pi: u64,
                           table: &mut Table,
                           agg: &mut BTreeMap<(String, &'static str), (Vec<f64>, Vec<f64>)>,
                           fixture: Option<Dataset<f64>>|
     -> anyhow::Result<()> {
        for trial in 0..problem.trials {
            let s = base.substream(pi).substream(trial as u64);
            let (train, test) = match &fixture {
                None => {
                    let n = n_train_synth + problem.n_test;
                    let data = match problem.name {
                        "friedman-grosse" => friedman_grosse_3out(n, noise, s.substream(0))?,
                        _ => friedman_silverman_3out(n, noise, s.substream(0))?,
                    };
                    split(
                        &data,
                        n_train_synth,
                        problem.n_test,
                        &SplitStrategy::UniformRandom,
                        s.substream(1),
                    )?
                }
                Some(data) => {
                    let n_train = data.n_rows() - problem.n_test;
                    split(
                        data,
                        n_train,
                        problem.n_test,
                        &SplitStrategy::UniformRandom,
                        s.substream(1),
                    )?
                }
            };
            let mut forest = fit_forest(&train, bags, s.substream(2))?;
            calibrate_forest(&mut forest, config.p)?;
            let train_corr = training_data_correlation(&forest)?;
            for &method in &methods {
                let tc = if method == CorrelationMethod::TrainingData {
                    Some(&train_corr)
                } else {
                    None
                };
                let points = method_points(&forest, &test, method, tc)?;
                let report = evaluate(&points, config.p)?;
                table.push(vec![
                    problem.name.to_string(),
                    fmt(trial as f64),
                    method.name().to_string(),
                    fmt(report.median_nlpd),
                    fmt(report.standard_confidence),
                ]);
                let entry = agg
                    .entry((problem.name.to_string(), method.name()))
                    .or_default();
                entry.0.push(report.median_nlpd);
                entry.1.push(report.standard_confidence);
            }
        }
        Ok(())
    };

    for (pi, problem) in synthetic.iter().enumerate() {
        run_problem(problem, pi as u64, &mut table, &mut agg, None)?;
    }
    let mut skipped = Vec::new();
    for (pi, problem) in fixtures.iter().enumerate() {
        if fixture_exists(&config.fixture_dir, problem.name) {
            let data = load_fixture(&config.fixture_dir, problem.name)?;
            run_problem(problem, 16 + pi as u64, &mut table, &mut agg, Some(data))?;
        } else {
            skipped.push(problem.name);
        }
    }

    let mut by_method = Vec::new();
    for ((problem, method), (nlpds, scs)) in &agg {
        let (nlpd_mean, nlpd_se) = mean_stderr(nlpds);
        let (sc_mean, sc_se) = mean_stderr(scs);
        by_method.push(json!({
            "problem": problem,
            "method": method,
            "median_nlpd": {"mean": nlpd_mean, "stderr": nlpd_se},
            "standard_confidence": {"mean": sc_mean, "stderr": sc_se},
        }));
    }

    Ok(RecipeOutput {
        tables: vec![table],
        summary: json!({ "by_problem_method": by_method, "skipped_fixtures": skipped }),
        parameters: json!({
            "bags": bags,
            "noise": noise,
            "n_train_synthetic": n_train_synth,
            "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "p": config.p,
        }),
    })
}
