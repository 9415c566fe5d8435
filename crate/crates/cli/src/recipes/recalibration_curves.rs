//! Recalibration factor as a function of the confidence level, the MLE
//! factor for contrast, and the pooled standard-residual sample.

use super::common::{fmt, mean_stderr, Table};
use super::RecipeOutput;
use crate::config::RunConfig;
use calibag::datasets::{gen_friedman_grosse, NoiseSpec};
use calibag::ensemble::{fit_forest, oob_records};
use calibag::intervals::{mle_recalibration_factor, recalibration_factor};
use calibag::stats::RngStream;
use serde_json::json;

pub(super) fn run(config: &RunConfig) -> anyhow::Result<RecipeOutput> {
    let trials = config.trials.unwrap_or(100);
    let bags = config.bags.unwrap_or(64);
    let noise = config.noise.unwrap_or(2.0);
    let n_train = config.n_train.unwrap_or(128);
    let base = RngStream::new(config.seed);

    let p_grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let mut alpha_by_p: Vec<Vec<f64>> = vec![Vec::with_capacity(trials); p_grid.len()];
    let mut mle_alphas = Vec::with_capacity(trials);
    let mut residuals = Table::new("standard_residuals", &["trial", "row", "std_residual"]);

    for trial in 0..trials {
        let s = base.substream(trial as u64);
        let data =
            gen_friedman_grosse::<f64>(n_train, NoiseSpec::new(noise)?, s.substream(0))?;
        let forest = fit_forest(&data, bags, s.substream(1))?;
        let set = oob_records(&forest)?;
        for rec in &set.records {
            if rec.oob_std[0] > 0.0 {
                residuals.push(vec![
                    fmt(trial as f64),
                    fmt(rec.row as f64),
                    fmt(rec.std_residual[0]),
                ]);
            }
        }
        for (pi, &p) in p_grid.iter().enumerate() {
            let factor = recalibration_factor(&set.records, p)?;
            alpha_by_p[pi].push(factor.alpha[0]);
        }
        mle_alphas.push(mle_recalibration_factor(&set.records)?[0]);
    }

    let mut curve = Table::new(
        "recalibration_curve",
        &["p", "alpha_mean", "alpha_stderr"],
    );
    for (pi, &p) in p_grid.iter().enumerate() {
        let (mean, se) = mean_stderr(&alpha_by_p[pi]);
        curve.push(vec![fmt(p), fmt(mean), fmt(se)]);
    }
    let (mle_mean, mle_se) = mean_stderr(&mle_alphas);

    Ok(RecipeOutput {
        tables: vec![curve, residuals],
        summary: json!({
            "mle_alpha": {"mean": mle_mean, "stderr": mle_se},
            "n_trials": trials,
        }),
        parameters: json!({
            "trials": trials,
            "bags": bags,
            "noise": noise,
            "n_train": n_train,
        }),
    })
}
