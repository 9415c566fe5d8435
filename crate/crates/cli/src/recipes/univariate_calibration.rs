//! Standard confidence / standard error of the univariate recalibrated
//! interval across training-set sizes.

use super::common::{fmt, mean_stderr, Table};
use super::RecipeOutput;
use crate::config::RunConfig;
use calibag::datasets::{gen_friedman_grosse, split, NoiseSpec, SplitStrategy};
use calibag::ensemble::fit_forest;
use calibag::intervals::{calibrate_forest, CorrelationMethod};
use calibag::metrics::evaluate;
use calibag::stats::RngStream;
use serde_json::json;

const DEFAULT_GRID: [usize; 5] = [16, 32, 64, 128, 256];

pub(super) fn run(config: &RunConfig) -> anyhow::Result<RecipeOutput> {
    let trials = config.trials.unwrap_or(64);
    let bags = config.bags.unwrap_or(64);
    let noise = config.noise.unwrap_or(2.0);
    let n_test = config.n_test.unwrap_or(128);
    let grid: Vec<usize> = match config.n_train {
        Some(n) => vec![n],
        None => DEFAULT_GRID.to_vec(),
    };
    let base = RngStream::new(config.seed);

    let mut table = Table::new(
        "univariate_metrics",
        &[
            "n_train",
            "trial",
            "standard_confidence",
            "standard_error",
            "median_nlpd",
        ],
    );
    let mut summary_rows = Vec::new();
    for (gi, &n_train) in grid.iter().enumerate() {
        let mut scs = Vec::with_capacity(trials);
        let mut ses = Vec::with_capacity(trials);
        for trial in 0..trials {
            let s = base.substream(gi as u64).substream(trial as u64);
            let data = gen_friedman_grosse::<f64>(
                n_train + n_test,
                NoiseSpec::new(noise)?,
                s.substream(0),
            )?;
            let (train, test) =
                split(&data, n_train, n_test, &SplitStrategy::UniformRandom, s.substream(1))?;
            let mut forest = fit_forest(&train, bags, s.substream(2))?;
            calibrate_forest(&mut forest, config.p)?;
            let points =
                super::common::method_points(&forest, &test, CorrelationMethod::Bootstrap, None)?;
            let report = evaluate(&points, config.p)?;
            let se = report.standard_error.expect("univariate");
            table.push(vec![
                fmt(n_train as f64),
                fmt(trial as f64),
                fmt(report.standard_confidence),
                fmt(se),
                fmt(report.median_nlpd),
            ]);
            scs.push(report.standard_confidence);
            ses.push(se);
        }
        let (sc_mean, sc_se) = mean_stderr(&scs);
        let (se_mean, se_se) = mean_stderr(&ses);
        summary_rows.push(json!({
            "n_train": n_train,
            "standard_confidence": {"mean": sc_mean, "stderr": sc_se},
            "standard_error": {"mean": se_mean, "stderr": se_se},
        }));
    }

    Ok(RecipeOutput {
        tables: vec![table],
        summary: json!({ "by_n_train": summary_rows }),
        parameters: json!({
            "trials": trials,
            "bags": bags,
            "noise": noise,
            "n_test": n_test,
            "n_train_grid": grid,
            "p": config.p,
        }),
    })
}
