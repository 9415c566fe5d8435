//! Mean jackknife standard deviation against the empirical RMSE on a fixed
//! evaluation grid, for the tophat and cubic targets.

use super::common::{fmt, Table};
use super::RecipeOutput;
use crate::config::RunConfig;
use calibag::datasets::{cubic_value, gen_cubic, gen_tophat, tophat_value, NoiseSpec};
use calibag::ensemble::fit_forest;
use calibag::intervals::jackknife_covariance;
use calibag::stats::RngStream;
use calibag::tree::FeatureValue;
use serde_json::json;

const GRID_POINTS: usize = 100;

pub(super) fn run(config: &RunConfig) -> anyhow::Result<RecipeOutput> {
    let trials = config.trials.unwrap_or(250);
    let bags = config.bags.unwrap_or(64);
    let noise = config.noise.unwrap_or(0.1);
    let n_train = config.n_train.unwrap_or(64);
    let base = RngStream::new(config.seed);

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| -1.0 + 2.0 * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();

    let mut table = Table::new(
        "jackknife_vs_rmse",
        &["problem", "x", "mean_prediction", "mean_jackknife_sigma", "rmse"],
    );
    let mut fractions = Vec::new();

    for (pi, problem) in ["tophat", "cubic"].iter().enumerate() {
        let truth: fn(f64) -> f64 = match pi {
            0 => tophat_value,
            _ => cubic_value,
        };
        let mut sq_err = vec![0.0f64; GRID_POINTS];
        let mut sigma_sum = vec![0.0f64; GRID_POINTS];
        let mut pred_sum = vec![0.0f64; GRID_POINTS];
        for trial in 0..trials {
            let s = base.substream(pi as u64).substream(trial as u64);
            let data = match pi {
                0 => gen_tophat::<f64>(n_train, NoiseSpec::new(noise)?, s.substream(0))?,
                _ => gen_cubic::<f64>(n_train, NoiseSpec::new(noise)?, s.substream(0))?,
            };
            let forest = fit_forest(&data, bags, s.substream(1))?;
            for (gi, &x) in grid.iter().enumerate() {
                let input = [FeatureValue::Real(x)];
                let pred = forest.predict_mean(&input)?[0];
                let jk = jackknife_covariance(&forest, &input)?;
                let sigma = jk.averaged.get(0, 0).max(0.0).sqrt();
                pred_sum[gi] += pred;
                sigma_sum[gi] += sigma;
                sq_err[gi] += (pred - truth(x)).powi(2);
            }
        }
        let mut below = 0usize;
        for (gi, &x) in grid.iter().enumerate() {
            let rmse = (sq_err[gi] / trials as f64).sqrt();
            let mean_sigma = sigma_sum[gi] / trials as f64;
            if mean_sigma < rmse {
                below += 1;
            }
            table.push(vec![
                problem.to_string(),
                fmt(x),
                fmt(pred_sum[gi] / trials as f64),
                fmt(mean_sigma),
                fmt(rmse),
            ]);
        }
        fractions.push(json!({
            "problem": problem,
            "fraction_sigma_below_rmse": below as f64 / GRID_POINTS as f64,
        }));
    }

    Ok(RecipeOutput {
        tables: vec![table],
        summary: json!({ "overconfidence": fractions }),
        parameters: json!({
            "trials": trials,
            "bags": bags,
            "noise": noise,
            "n_train": n_train,
            "grid_points": GRID_POINTS,
        }),
    })
}
