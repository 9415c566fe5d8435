//! The experiment recipes and their shared output bundle.

pub mod common;

mod bag_sweep;
mod covariance_metrics;
mod imbalanced;
mod jackknife_vs_rmse;
mod noise_sweep;
mod recalibration_curves;
mod sl_study;
mod univariate_calibration;

use crate::config::{Recipe, RunConfig};
use anyhow::Context;
use common::Table;
use serde_json::json;
use std::path::PathBuf;

/// Version of the CSV/JSON output layouts documented in
/// docs/output-formats.md.
pub const FORMAT_VERSION: u32 = 1;

/// What a recipe run produced: table paths plus the JSON summary that was
/// written next to them.
pub struct ResultBundle {
    pub recipe: Recipe,
    pub tables: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: serde_json::Value,
}

pub(crate) struct RecipeOutput {
    pub tables: Vec<Table>,
    /// Recipe-specific aggregates; merged into the summary JSON.
    pub summary: serde_json::Value,
    /// Echo of the parameters the run actually used.
    pub parameters: serde_json::Value,
}

/// Run a recipe and write its CSV payloads and `summary.json` into the
/// configured output directory. Payload files are byte-identical across
/// runs with the same seed; the timestamp lives only in the summary
/// metadata.
pub fn run_recipe(config: &RunConfig) -> anyhow::Result<ResultBundle> {
    let out = match config.recipe {
        Recipe::RecalibrationCurves => recalibration_curves::run(config)?,
        Recipe::UnivariateCalibration => univariate_calibration::run(config)?,
        Recipe::CovarianceMetrics => covariance_metrics::run(config)?,
        Recipe::JackknifeVsRmse => jackknife_vs_rmse::run(config)?,
        Recipe::Imbalanced => imbalanced::run(config)?,
        Recipe::NoiseSweep => noise_sweep::run(config)?,
        Recipe::BagSweep => bag_sweep::run(config)?,
        Recipe::SlStudy => sl_study::run(config)?,
    };

    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create {}", config.output_dir.display()))?;
    let mut table_paths = Vec::new();
    for table in &out.tables {
        table_paths.push(table.write_to(&config.output_dir)?);
    }

    let summary = json!({
        "metadata": {
            "recipe": config.recipe.name(),
            "seed": config.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "format_version": FORMAT_VERSION,
            "parameters": out.parameters,
            "timestamp": unix_timestamp(),
        },
        "results": out.summary,
    });
    let summary_path = config.output_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;

    Ok(ResultBundle {
        recipe: config.recipe,
        tables: table_paths,
        summary_path,
        summary,
    })
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// One line per recipe for `calibag list`.
pub fn list_recipes() -> String {
    let mut out = String::new();
    for r in Recipe::ALL {
        out.push_str(&format!("{:24} {}\n", r.name(), r.describe()));
    }
    out
}
