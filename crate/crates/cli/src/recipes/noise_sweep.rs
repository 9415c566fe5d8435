//! Behavior as output noise grows: the mean 1-σ interval relative to the
//! noise level (univariate) and per-method NLPD convergence (three-output).

use super::common::{fmt, friedman_grosse_3out, mean_stderr, method_points, Table};
use super::RecipeOutput;
use crate::config::RunConfig;
use calibag::datasets::{gen_friedman_grosse, split, NoiseSpec, SplitStrategy};
use calibag::ensemble::fit_forest;
use calibag::intervals::{calibrate_forest, recalibrated_sigma, CorrelationMethod};
use calibag::metrics::evaluate;
use calibag::stats::RngStream;
use serde_json::json;
use std::collections::BTreeMap;

const DEFAULT_NOISE_GRID: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];

pub(super) fn run(config: &RunConfig) -> anyhow::Result<RecipeOutput> {
    let trials = config.trials.unwrap_or(100);
    let bags = config.bags.unwrap_or(64);
    let n_train = config.n_train.unwrap_or(128);
    let n_test = config.n_test.unwrap_or(128);
    let grid: Vec<f64> = match config.noise {
        Some(noise) => vec![noise],
        None => DEFAULT_NOISE_GRID.to_vec(),
    };
    let base = RngStream::new(config.seed);

    let mut uni = Table::new(
        "noise_univariate",
        &[
            "noise",
            "trial",
            "mean_sigma",
            "sigma_over_noise",
            "standard_error",
            "standard_confidence",
        ],
    );
    let mut multi = Table::new(
        "noise_multivariate",
        &["noise", "trial", "method", "median_nlpd"],
    );
    let mut ratio_agg: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut nlpd_agg: BTreeMap<(String, &'static str), Vec<f64>> = BTreeMap::new();

    for (gi, &noise) in grid.iter().enumerate() {
        for trial in 0..trials {
            let s = base.substream(gi as u64).substream(trial as u64);

            // univariate ratio
            let data = gen_friedman_grosse::<f64>(
                n_train + n_test,
                NoiseSpec::new(noise)?,
                s.substream(0),
            )?;
            let (train, test) =
                split(&data, n_train, n_test, &SplitStrategy::UniformRandom, s.substream(1))?;
            let mut forest = fit_forest(&train, bags, s.substream(2))?;
            calibrate_forest(&mut forest, config.p)?;
            let mut sigma_acc = 0.0;
            for i in 0..test.n_rows() {
                sigma_acc += recalibrated_sigma(&forest, test.input_row(i))?[0];
            }
            let mean_sigma = sigma_acc / test.n_rows() as f64;
            let points =
                method_points(&forest, &test, CorrelationMethod::Bootstrap, None)?;
            let report = evaluate(&points, config.p)?;
            let ratio = if noise > 0.0 { mean_sigma / noise } else { f64::NAN };
            uni.push(vec![
                fmt(noise),
                fmt(trial as f64),
                fmt(mean_sigma),
                fmt(ratio),
                fmt(report.standard_error.expect("univariate")),
                fmt(report.standard_confidence),
            ]);
            if noise > 0.0 {
                ratio_agg.entry(fmt(noise)).or_default().push(ratio);
            }

            // multivariate NLPD for the bootstrap and trivial methods
            let data3 =
                friedman_grosse_3out(n_train + n_test, noise, s.substream(3))?;
            let (train3, test3) =
                split(&data3, n_train, n_test, &SplitStrategy::UniformRandom, s.substream(4))?;
            let mut forest3 = fit_forest(&train3, bags, s.substream(5))?;
            calibrate_forest(&mut forest3, config.p)?;
            for method in [CorrelationMethod::Bootstrap, CorrelationMethod::Trivial] {
                let points = method_points(&forest3, &test3, method, None)?;
                let report = evaluate(&points, config.p)?;
                multi.push(vec![
                    fmt(noise),
                    fmt(trial as f64),
                    method.name().to_string(),
                    fmt(report.median_nlpd),
                ]);
                nlpd_agg
                    .entry((fmt(noise), method.name()))
                    .or_default()
                    .push(report.median_nlpd);
            }
        }
    }

    let ratios: Vec<_> = ratio_agg
        .iter()
        .map(|(noise, v)| {
            let (mean, se) = mean_stderr(v);
            json!({"noise": noise, "sigma_over_noise": {"mean": mean, "stderr": se}})
        })
        .collect();
    let nlpds: Vec<_> = nlpd_agg
        .iter()
        .map(|((noise, method), v)| {
            let (mean, se) = mean_stderr(v);
            json!({"noise": noise, "method": method, "median_nlpd": {"mean": mean, "stderr": se}})
        })
        .collect();

    Ok(RecipeOutput {
        tables: vec![uni, multi],
        summary: json!({ "sigma_ratio": ratios, "nlpd": nlpds }),
        parameters: json!({
            "trials": trials,
            "bags": bags,
            "n_train": n_train,
            "n_test": n_test,
            "noise_grid": grid,
            "p": config.p,
        }),
    })
}
