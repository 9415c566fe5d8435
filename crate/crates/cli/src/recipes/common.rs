//! Shared machinery for recipes: dataset builders, forest evaluation,
//! fixture loading, and deterministic CSV emission.

use anyhow::Context;
use calibag::datasets::{
    add_linear_correlated_output, add_output_noise, add_quadratic_output, gen_friedman_grosse,
    gen_friedman_silverman, load_csv, CsvSchema, Dataset, NoiseSpec,
};
use calibag::ensemble::TrainedForest;
use calibag::intervals::{prediction_distribution, CorrelationMethod, PredictionDistribution};
use calibag::metrics::EvaluationPoint;
use calibag::stats::{CovMatrix, RngStream};
use std::path::{Path, PathBuf};

/// Friedman-Grosse with the two extra correlated outputs (linear ρ = 0.9,
/// quadratic f = 0.5) used by the multivariate studies. The correlated
/// outputs are built from the clean y0 and the observation noise is then
/// added to every output independently, so correlations wash out as the
/// noise grows.
pub fn friedman_grosse_3out(
    n: usize,
    noise: f64,
    stream: RngStream,
) -> anyhow::Result<Dataset<f64>> {
    let base = gen_friedman_grosse(n, NoiseSpec::none(), stream.substream(0))?;
    let with1 = add_linear_correlated_output(&base, 0.9, stream.substream(1))?;
    let with2 = add_quadratic_output(&with1, 0.5, stream.substream(2))?;
    Ok(add_output_noise(&with2, NoiseSpec::new(noise)?, stream.substream(3)))
}

/// Friedman-Silverman with the same two extra outputs.
pub fn friedman_silverman_3out(
    n: usize,
    noise: f64,
    stream: RngStream,
) -> anyhow::Result<Dataset<f64>> {
    let base = gen_friedman_silverman(n, NoiseSpec::none(), stream.substream(0))?;
    let with1 = add_linear_correlated_output(&base, 0.9, stream.substream(1))?;
    let with2 = add_quadratic_output(&with1, 0.5, stream.substream(2))?;
    Ok(add_output_noise(&with2, NoiseSpec::new(noise)?, stream.substream(3)))
}

/// Prediction distributions for the whole test set under one correlation
/// method, paired with the observed outputs.
pub fn method_points(
    forest: &TrainedForest<f64>,
    test: &Dataset<f64>,
    method: CorrelationMethod,
    train_corr: Option<&CovMatrix<f64>>,
) -> anyhow::Result<Vec<EvaluationPoint<f64>>> {
    (0..test.n_rows())
        .map(|i| {
            let dist: PredictionDistribution<f64> =
                prediction_distribution(forest, test.input_row(i), method, train_corr)?;
            Ok(EvaluationPoint::new(dist, test.output_row(i).to_vec())?)
        })
        .collect()
}

/// Sample mean and its standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Load `<dir>/<name>.csv` prepared by `<dir>/<name>.schema.toml`.
pub fn load_fixture(fixture_dir: &Path, name: &str) -> anyhow::Result<Dataset<f64>> {
    let csv_path = fixture_dir.join(format!("{name}.csv"));
    let schema_path = fixture_dir.join(format!("{name}.schema.toml"));
    if !csv_path.exists() {
        anyhow::bail!(
            "fixture '{name}' not found: expected {} (and schema {})",
            csv_path.display(),
            schema_path.display()
        );
    }
    if !schema_path.exists() {
        anyhow::bail!("fixture schema missing: expected {}", schema_path.display());
    }
    let schema = CsvSchema::from_toml_path(&schema_path)?;
    let data = load_csv(&csv_path, &schema)
        .with_context(|| format!("loading fixture {}", csv_path.display()))?;
    Ok(data)
}

pub fn fixture_exists(fixture_dir: &Path, name: &str) -> bool {
    fixture_dir.join(format!("{name}.csv")).exists()
        && fixture_dir.join(format!("{name}.schema.toml")).exists()
}

/// One emitted CSV table.
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Shortest-round-trip decimal formatting; stable across runs.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn parse_correlation_methods(
    names: Option<&[String]>,
) -> anyhow::Result<Vec<CorrelationMethod>> {
    match names {
        None => Ok(CorrelationMethod::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| {
                CorrelationMethod::ALL
                    .iter()
                    .find(|m| m.name() == n)
                    .copied()
                    .ok_or_else(|| {
                        anyhow::anyhow!(
                            "unknown correlation method '{n}'; expected one of: trivial, \
                             training-data, jackknife, bootstrap"
                        )
                    })
            })
            .collect(),
    }
}
