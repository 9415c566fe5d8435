//! Recalibrated bootstrap vs the constant out-of-bag interval when the
//! training and test sets come from different strata: train on 60 tension
//! + 4 compression rows, test on 32 compression rows.

use super::common::{fmt, load_fixture, mean_stderr, method_points, Table};
use super::RecipeOutput;
use crate::config::RunConfig;
use calibag::datasets::{split, SplitStrategy};
use calibag::ensemble::fit_forest;
use calibag::intervals::{calibrate_forest, oob_constant_interval, CorrelationMethod};
use calibag::metrics::{evaluate, EvaluationPoint};
use calibag::stats::RngStream;
use serde_json::json;
use std::collections::BTreeMap;

const OUTPUT: &str = "young_modulus";

pub(super) fn run(config: &RunConfig) -> anyhow::Result<RecipeOutput> {
    let trials = config.trials.unwrap_or(50);
    let bags = config.bags.unwrap_or(64);
    let base = RngStream::new(config.seed);

    let full = load_fixture(&config.fixture_dir, "mechanical-properties")?;
    let data = full.select_outputs(&[OUTPUT])?;
    let strategy = SplitStrategy::StratifiedByCategory {
        column: "test_type".into(),
        counts: vec![
            ("tension".into(), 60, 0),
            ("compression".into(), 4, 32),
        ],
    };

    let mut table = Table::new(
        "imbalanced_metrics",
        &[
            "trial",
            "method",
            "median_nlpd",
            "standard_error",
            "standard_confidence",
        ],
    );
    let mut agg: BTreeMap<&'static str, (Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();

    for trial in 0..trials {
        let s = base.substream(trial as u64);
        let (train, test) = split(&data, 64, 32, &strategy, s.substream(0))?;
        let mut forest = fit_forest(&train, bags, s.substream(1))?;
        calibrate_forest(&mut forest, config.p)?;

        let rb_points = method_points(&forest, &test, CorrelationMethod::Bootstrap, None)?;
        let oob = oob_constant_interval(&forest, config.p)?;
        let oob_points: Vec<EvaluationPoint<f64>> = (0..test.n_rows())
            .map(|i| {
                let dist = oob.distribution(&forest, test.input_row(i))?;
                Ok(EvaluationPoint::new(dist, test.output_row(i).to_vec())?)
            })
            .collect::<anyhow::Result<_>>()?;

        for (name, points) in [
            ("recalibrated-bootstrap", rb_points),
            ("oob-constant", oob_points),
        ] {
            let report = evaluate(&points, config.p)?;
            let se = report.standard_error.expect("univariate");
            table.push(vec![
                fmt(trial as f64),
                name.to_string(),
                fmt(report.median_nlpd),
                fmt(se),
                fmt(report.standard_confidence),
            ]);
            let entry = agg.entry(name).or_default();
            entry.0.push(report.median_nlpd);
            entry.1.push(se);
            entry.2.push(report.standard_confidence);
        }
    }

    let mut by_method = Vec::new();
    for (method, (nlpds, ses, scs)) in &agg {
        let (nlpd_mean, nlpd_se) = mean_stderr(nlpds);
        let (se_mean, se_se) = mean_stderr(ses);
        let (sc_mean, sc_se) = mean_stderr(scs);
        by_method.push(json!({
            "method": method,
            "median_nlpd": {"mean": nlpd_mean, "stderr": nlpd_se},
            "standard_error": {"mean": se_mean, "stderr": se_se},
            "standard_confidence": {"mean": sc_mean, "stderr": sc_se},
        }));
    }

    Ok(RecipeOutput {
        tables: vec![table],
        summary: json!({ "by_method": by_method }),
        parameters: json!({
            "trials": trials,
            "bags": bags,
            "p": config.p,
            "output": OUTPUT,
            "train": {"tension": 60, "compression": 4},
            "test": {"compression": 32},
        }),
    })
}
