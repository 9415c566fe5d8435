//! Synthetic data generators, output standardization, train/test splitting,
//! and CSV ingestion of pre-featurized tables.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{mean, Matrix, RngStream};
use crate::tree::FeatureValue;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Real,
    Categorical,
}

/// Typed, named model input column. Categorical columns carry their label
/// vocabulary; `FeatureValue::Cat` ids index into it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InputColumn {
    pub name: String,
    pub kind: ColumnKindTag,
    pub vocab: Vec<String>,
}

/// Serializable mirror of [`ColumnKind`] used inside datasets and forests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColumnKindTag {
    Real,
    Categorical,
}

impl InputColumn {
    pub fn real(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKindTag::Real,
            vocab: Vec::new(),
        }
    }

    pub fn categorical(name: impl Into<String>, vocab: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKindTag::Categorical,
            vocab,
        }
    }
}

/// Column-typed table of inputs and real outputs, always in original
/// output units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    input_columns: Vec<InputColumn>,
    output_names: Vec<String>,
    rows: Vec<Vec<FeatureValue<S>>>,
    outputs: Matrix<S>,
    provenance: String,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(
        input_columns: Vec<InputColumn>,
        output_names: Vec<String>,
        rows: Vec<Vec<FeatureValue<S>>>,
        outputs: Matrix<S>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if outputs.n_rows() != rows.len() {
            return Err(Error::Schema(format!(
                "{} input rows vs {} output rows",
                rows.len(),
                outputs.n_rows()
            )));
        }
        if outputs.n_cols() != output_names.len() {
            return Err(Error::Schema("output name count mismatch".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != input_columns.len() {
                return Err(Error::Schema(format!("row {i} width mismatch")));
            }
        }
        Ok(Self {
            input_columns,
            output_names,
            rows,
            outputs,
            provenance: provenance.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_columns.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_names.len()
    }

    pub fn input_columns(&self) -> &[InputColumn] {
        &self.input_columns
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn input_row(&self, i: usize) -> &[FeatureValue<S>] {
        &self.rows[i]
    }

    pub fn outputs(&self) -> &Matrix<S> {
        &self.outputs
    }

    pub fn output_row(&self, i: usize) -> &[S] {
        self.outputs.row(i)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.output_names.iter().position(|n| n == name)
    }

    /// New dataset containing the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset<S> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let outputs = if indices.is_empty() {
            Matrix::zeros(0, self.n_outputs())
        } else {
            Matrix::from_rows(indices.iter().map(|&i| self.outputs.row(i).to_vec()).collect())
        };
        Dataset {
            input_columns: self.input_columns.clone(),
            output_names: self.output_names.clone(),
            rows,
            outputs,
            provenance: self.provenance.clone(),
        }
    }

    /// Append an output column (original units) to every row.
    fn with_output_column(&self, name: &str, values: Vec<S>) -> Dataset<S> {
        assert_eq!(values.len(), self.n_rows());
        let mut names = self.output_names.clone();
        names.push(name.to_string());
        let out_rows: Vec<Vec<S>> = (0..self.n_rows())
            .map(|i| {
                let mut r = self.outputs.row(i).to_vec();
                r.push(values[i]);
                r
            })
            .collect();
        Dataset {
            input_columns: self.input_columns.clone(),
            output_names: names,
            rows: self.rows.clone(),
            outputs: Matrix::from_rows(out_rows),
            provenance: self.provenance.clone(),
        }
    }

    /// Restrict to a subset of output columns by name.
    pub fn select_outputs(&self, names: &[&str]) -> Result<Dataset<S>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.output_index(n)
                    .ok_or_else(|| Error::Schema(format!("no output column named {n}")))
            })
            .collect::<Result<_>>()?;
        let out_rows: Vec<Vec<S>> = (0..self.n_rows())
            .map(|i| idx.iter().map(|&j| self.outputs.get(i, j)).collect())
            .collect();
        Dataset::new(
            self.input_columns.clone(),
            names.iter().map(|s| s.to_string()).collect(),
            self.rows.clone(),
            Matrix::from_rows(out_rows),
            self.provenance.clone(),
        )
    }
}

/// Per-output (mean, scale) affine map used to standardize outputs to mean
/// 0 / variance 1 before training and restore original units afterwards.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer<S> {
    means: Vec<S>,
    scales: Vec<S>,
}

impl<S: Scalar> Standardizer<S> {
    /// Fit on training outputs (population standard deviation). A constant
    /// column gets scale 1 so standardization stays finite.
    pub fn fit(outputs: &Matrix<S>) -> Result<Self> {
        if outputs.n_rows() == 0 {
            return Err(Error::Domain("standardizer on empty outputs".into()));
        }
        let d = outputs.n_cols();
        let n = S::from_usize(outputs.n_rows());
        let means = outputs.column_means();
        let mut scales = vec![S::zero(); d];
        for j in 0..d {
            let mut ss = S::zero();
            for i in 0..outputs.n_rows() {
                let dv = outputs.get(i, j) - means[j];
                ss = ss + dv * dv;
            }
            let std = (ss / n).sqrt();
            scales[j] = if std > S::zero() { std } else { S::one() };
        }
        Ok(Self { means, scales })
    }

    pub fn means(&self) -> &[S] {
        &self.means
    }

    pub fn scales(&self) -> &[S] {
        &self.scales
    }

    pub fn standardize(&self, outputs: &Matrix<S>) -> Matrix<S> {
        let mut out = outputs.clone();
        for i in 0..out.n_rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.scales[j];
            }
        }
        out
    }

    /// In-place de-standardization of one standardized vector.
    pub fn restore(&self, values: &mut [S]) {
        for (j, v) in values.iter_mut().enumerate() {
            *v = self.means[j] + self.scales[j] * *v;
        }
    }
}

/// Additive observation noise: ε·N(0,1) per row per output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<S> {
    pub epsilon: S,
}

impl<S: Scalar> NoiseSpec<S> {
    pub fn new(epsilon: S) -> Result<Self> {
        if epsilon < S::zero() || !epsilon.is_finite() {
            return Err(Error::Domain(format!("noise level {epsilon} must be >= 0")));
        }
        Ok(Self { epsilon })
    }

    pub fn none() -> Self {
        Self { epsilon: S::zero() }
    }

    fn apply<R: Rng>(&self, y: S, rng: &mut R) -> S {
        if self.epsilon == S::zero() {
            y
        } else {
            y + self.epsilon * S::standard_normal(rng)
        }
    }
}

/// Piecewise-constant tophat target on [−1, 1].
pub fn tophat_value<S: Scalar>(x: S) -> S {
    let a = x.abs();
    if a < S::from_f64(0.33) {
        S::one()
    } else if a < S::from_f64(0.67) {
        S::half()
    } else {
        S::zero()
    }
}

/// y = x³.
pub fn cubic_value<S: Scalar>(x: S) -> S {
    x * x * x
}

/// 10·sin(π·x₀x₁) + 20·(x₂ − ½)² + 10·x₃ + 5·x₄ on the unit hypercube.
pub fn friedman_grosse_value<S: Scalar>(x: &[S]) -> S {
    let ten = S::from_f64(10.0);
    let twenty = S::from_f64(20.0);
    let five = S::from_f64(5.0);
    ten * (S::pi() * x[0] * x[1]).sin()
        + twenty * (x[2] - S::half()) * (x[2] - S::half())
        + ten * x[3]
        + five * x[4]
}

/// 0.1·e^{4x₀} + 4/(1 + e^{−20(x₁ − ½)}) + 3x₂ + 2x₃ + x₄.
pub fn friedman_silverman_value<S: Scalar>(x: &[S]) -> S {
    let logistic = S::from_f64(4.0)
        / (S::one() + (-S::from_f64(20.0) * (x[1] - S::half())).exp());
    S::from_f64(0.1) * (S::from_f64(4.0) * x[0]).exp()
        + logistic
        + S::from_f64(3.0) * x[2]
        + S::two() * x[3]
        + x[4]
}

fn gen_1d<S: Scalar>(
    n: usize,
    noise: NoiseSpec<S>,
    stream: RngStream,
    f: impl Fn(S) -> S,
    provenance: &str,
) -> Result<Dataset<S>> {
    if n == 0 {
        return Err(Error::Domain("generator needs n >= 1".into()));
    }
    let mut rng = stream.rng();
    let mut rows = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for _ in 0..n {
        let x = S::two() * S::unit_uniform(&mut rng) - S::one();
        rows.push(vec![FeatureValue::Real(x)]);
        clean.push(f(x));
    }
    let ys: Vec<Vec<S>> = clean.iter().map(|&y| vec![noise.apply(y, &mut rng)]).collect();
    Dataset::new(
        vec![InputColumn::real("x")],
        vec!["y".into()],
        rows,
        Matrix::from_rows(ys),
        provenance,
    )
}

/// Uniform draws on [−1, 1] with the tophat target.
pub fn gen_tophat<S: Scalar>(n: usize, noise: NoiseSpec<S>, stream: RngStream) -> Result<Dataset<S>> {
    gen_1d(n, noise, stream, tophat_value, "tophat")
}

/// Uniform draws on [−1, 1] with the cubic target.
pub fn gen_cubic<S: Scalar>(n: usize, noise: NoiseSpec<S>, stream: RngStream) -> Result<Dataset<S>> {
    gen_1d(n, noise, stream, cubic_value, "cubic")
}

fn gen_hypercube<S: Scalar>(
    n: usize,
    dims: usize,
    noise: NoiseSpec<S>,
    stream: RngStream,
    f: impl Fn(&[S]) -> S,
    provenance: &str,
) -> Result<Dataset<S>> {
    if n == 0 {
        return Err(Error::Domain("generator needs n >= 1".into()));
    }
    let mut rng = stream.rng();
    let mut rows = Vec::with_capacity(n);
    let mut clean = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<S> = (0..dims).map(|_| S::unit_uniform(&mut rng)).collect();
        clean.push(f(&x));
        rows.push(x.into_iter().map(FeatureValue::Real).collect());
    }
    let ys: Vec<Vec<S>> = clean.iter().map(|&y| vec![noise.apply(y, &mut rng)]).collect();
    let cols = (0..dims).map(|i| InputColumn::real(format!("x{i}"))).collect();
    Dataset::new(cols, vec!["y0".into()], rows, Matrix::from_rows(ys), provenance)
}

/// Friedman-Grosse in 8 input dimensions (dimensions 5–7 are pure noise
/// inputs that do not contribute to the output).
pub fn gen_friedman_grosse<S: Scalar>(
    n: usize,
    noise: NoiseSpec<S>,
    stream: RngStream,
) -> Result<Dataset<S>> {
    gen_hypercube(n, 8, noise, stream, friedman_grosse_value, "friedman-grosse")
}

/// Friedman-Silverman in 12 input dimensions.
pub fn gen_friedman_silverman<S: Scalar>(
    n: usize,
    noise: NoiseSpec<S>,
    stream: RngStream,
) -> Result<Dataset<S>> {
    gen_hypercube(
        n,
        12,
        noise,
        stream,
        friedman_silverman_value,
        "friedman-silverman",
    )
}

/// Mix a fresh standard-normal signal with `y0` so that the sample Pearson
/// correlation of the result with `y0` is exactly `rho`.
///
/// The normal draws are regressed on y0 (ordinary least squares with
/// intercept), leaving residuals z′ that are exactly orthogonal to y0 and
/// mean-zero in the sample; then y1 = ρ·σ_{z′}·y0 + √(1−ρ²)·σ_{y0}·z′.
fn linear_correlated<S: Scalar>(y0: &[S], rho: S, rng: &mut impl Rng) -> Result<Vec<S>> {
    let n = y0.len();
    if n < 3 {
        return Err(Error::Domain("correlated output needs n >= 3".into()));
    }
    if rho.abs() > S::one() {
        return Err(Error::Domain(format!("|rho| = {} exceeds 1", rho.abs())));
    }
    let my = mean(y0)?;
    let syy: S = y0.iter().map(|&y| (y - my) * (y - my)).sum();
    if syy == S::zero() {
        return Err(Error::Domain("Y0 is constant; correlation undefined".into()));
    }
    let z: Vec<S> = (0..n).map(|_| S::standard_normal(rng)).collect();
    let mz = mean(&z)?;
    let szy: S = z
        .iter()
        .zip(y0.iter())
        .map(|(&zi, &yi)| (zi - mz) * (yi - my))
        .sum();
    let slope = szy / syy;
    let intercept = mz - slope * my;
    let zp: Vec<S> = z
        .iter()
        .zip(y0.iter())
        .map(|(&zi, &yi)| zi - intercept - slope * yi)
        .collect();

    let nn = S::from_usize(n);
    let sigma_zp = (zp.iter().map(|&v| v * v).sum::<S>() / nn).sqrt();
    let sigma_y0 = (syy / nn).sqrt();
    let lift = (S::one() - rho * rho).sqrt();
    Ok(y0
        .iter()
        .zip(zp.iter())
        .map(|(&yi, &zi)| rho * sigma_zp * yi + lift * sigma_y0 * zi)
        .collect())
}

/// Append output `y1` with exact sample correlation `rho` to the first
/// output column.
pub fn add_linear_correlated_output<S: Scalar>(
    data: &Dataset<S>,
    rho: S,
    stream: RngStream,
) -> Result<Dataset<S>> {
    let y0 = data.outputs.column(0);
    let mut rng = stream.rng();
    let y1 = linear_correlated(&y0, rho, &mut rng)?;
    Ok(data.with_output_column("y1", y1))
}

/// Add independent ε·N(0,1) observation noise to every output cell.
pub fn add_output_noise<S: Scalar>(
    data: &Dataset<S>,
    noise: NoiseSpec<S>,
    stream: RngStream,
) -> Dataset<S> {
    if noise.epsilon == S::zero() {
        return data.clone();
    }
    let mut rng = stream.rng();
    let outs: Vec<Vec<S>> = (0..data.n_rows())
        .map(|i| {
            data.output_row(i)
                .iter()
                .map(|&y| noise.apply(y, &mut rng))
                .collect()
        })
        .collect();
    Dataset {
        input_columns: data.input_columns.clone(),
        output_names: data.output_names.clone(),
        rows: data.rows.clone(),
        outputs: Matrix::from_rows(outs),
        provenance: data.provenance.clone(),
    }
}

/// Append output `y2 = (y0 − μ_{y0})² + f·N(0,1)`.
pub fn add_quadratic_output<S: Scalar>(
    data: &Dataset<S>,
    f: S,
    stream: RngStream,
) -> Result<Dataset<S>> {
    if data.n_rows() < 2 {
        return Err(Error::Domain("quadratic output needs n >= 2".into()));
    }
    let y0 = data.outputs.column(0);
    let mu = mean(&y0)?;
    let mut rng = stream.rng();
    let y2: Vec<S> = y0
        .iter()
        .map(|&y| {
            let c = y - mu;
            let noise = if f == S::zero() {
                S::zero()
            } else {
                f * S::standard_normal(&mut rng)
            };
            c * c + noise
        })
        .collect();
    Ok(data.with_output_column("y2", y2))
}

/// 128-row two-output sequential-learning problem: Friedman-Grosse y0, a
/// random "phase" input, and a second output whose correlation with y0
/// flips by phase — exactly ρ = 0.98 within phase A, and √(30² − y0²) in
/// phase B.
pub fn gen_sl_synthetic<S: Scalar>(stream: RngStream) -> Result<Dataset<S>> {
    let n = 128;
    let base = gen_friedman_grosse(n, NoiseSpec::none(), stream.substream(0))?;
    let mut rng = stream.substream(1).rng();
    let phases: Vec<u32> = (0..n).map(|_| u32::from(rng.gen::<bool>())).collect();

    let y0 = base.outputs.column(0);
    let a_idx: Vec<usize> = (0..n).filter(|&i| phases[i] == 0).collect();
    let y0_a: Vec<S> = a_idx.iter().map(|&i| y0[i]).collect();
    let mut corr_rng = stream.substream(2).rng();
    let y1_a = linear_correlated(&y0_a, S::from_f64(0.98), &mut corr_rng)?;

    let cap = S::from_f64(30.0);
    let mut y1 = vec![S::zero(); n];
    let mut a_pos = 0;
    for i in 0..n {
        if phases[i] == 0 {
            y1[i] = y1_a[a_pos];
            a_pos += 1;
        } else {
            y1[i] = (cap * cap - y0[i] * y0[i]).max(S::zero()).sqrt();
        }
    }

    let mut input_columns = base.input_columns.clone();
    input_columns.push(InputColumn::categorical(
        "phase",
        vec!["A".into(), "B".into()],
    ));
    let rows: Vec<Vec<FeatureValue<S>>> = (0..n)
        .map(|i| {
            let mut r = base.rows[i].clone();
            r.push(FeatureValue::Cat(phases[i]));
            r
        })
        .collect();
    let outputs: Vec<Vec<S>> = (0..n).map(|i| vec![y0[i], y1[i]]).collect();
    Dataset::new(
        input_columns,
        vec!["y0".into(), "y1".into()],
        rows,
        Matrix::from_rows(outputs),
        "sl-synthetic",
    )
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Input,
    Output,
    /// Used only to filter rows; not part of the model schema.
    Filter,
}

/// One schema entry: CSV column name, its type, its role, and an optional
/// inclusive numeric range filter.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub role: ColumnRole,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

/// Declarative CSV preparation: column typing/roles, range filters, and
/// duplicate-input averaging. Rows missing any declared value are dropped.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default)]
    pub average_duplicates: bool,
    #[serde(rename = "column")]
    pub columns: Vec<SchemaColumn>,
}

impl CsvSchema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: CsvSchema =
            toml::from_str(text).map_err(|e| Error::Ingestion(format!("schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Ingestion("schema declares no columns".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.columns {
            if !seen.insert(&c.name) {
                return Err(Error::Ingestion(format!("duplicate schema column {}", c.name)));
            }
            if c.role == ColumnRole::Output && c.kind != ColumnKind::Real {
                return Err(Error::Ingestion(format!(
                    "output column {} must be real",
                    c.name
                )));
            }
            if (c.min.is_some() || c.max.is_some()) && c.kind != ColumnKind::Real {
                return Err(Error::Ingestion(format!(
                    "range filter on non-real column {}",
                    c.name
                )));
            }
        }
        if !self
            .columns
            .iter()
            .any(|c| c.role == ColumnRole::Output)
        {
            return Err(Error::Ingestion("schema declares no output column".into()));
        }
        if !self.columns.iter().any(|c| c.role == ColumnRole::Input) {
            return Err(Error::Ingestion("schema declares no input column".into()));
        }
        Ok(())
    }
}

/// Load and prepare a CSV per the schema: complete-rows filter, range
/// filters, optional duplicate-input averaging. CSV columns not in the
/// schema are ignored.
pub fn load_csv<S: Scalar>(path: &Path, schema: &CsvSchema) -> Result<Dataset<S>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Ingestion(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let col_pos = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingestion(format!("unknown column '{name}' (not in CSV header)")))
    };

    struct Bound {
        schema_idx: usize,
        csv_idx: usize,
    }
    let bound: Vec<Bound> = schema
        .columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(Bound {
                schema_idx: i,
                csv_idx: col_pos(&c.name)?,
            })
        })
        .collect::<Result<_>>()?;

    // First pass: parse and filter rows, collecting category labels.
    enum Cell<S> {
        Real(S),
        Label(String),
    }
    let mut kept: Vec<Vec<Cell<S>>> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let mut cells: Vec<Cell<S>> = Vec::with_capacity(bound.len());
        let mut drop_row = false;
        for b in &bound {
            let col = &schema.columns[b.schema_idx];
            let raw = record.get(b.csv_idx).unwrap_or("").trim();
            if raw.is_empty() {
                drop_row = true; // complete-rows filter
                break;
            }
            match col.kind {
                ColumnKind::Real => {
                    let v: f64 = raw.parse().map_err(|_| {
                        Error::Ingestion(format!(
                            "row {} column '{}': cannot parse '{raw}' as a number",
                            row_no + 2,
                            col.name
                        ))
                    })?;
                    if let Some(lo) = col.min {
                        if v < lo {
                            drop_row = true;
                            break;
                        }
                    }
                    if let Some(hi) = col.max {
                        if v > hi {
                            drop_row = true;
                            break;
                        }
                    }
                    cells.push(Cell::Real(S::from_f64(v)));
                }
                ColumnKind::Categorical => cells.push(Cell::Label(raw.to_string())),
            }
        }
        if !drop_row {
            kept.push(cells);
        }
    }
    if kept.is_empty() {
        return Err(Error::Ingestion(format!(
            "{}: no rows survive preparation",
            path.display()
        )));
    }

    // Build sorted vocabularies for categorical input columns.
    let input_cols: Vec<usize> = (0..schema.columns.len())
        .filter(|&i| schema.columns[i].role == ColumnRole::Input)
        .collect();
    let output_cols: Vec<usize> = (0..schema.columns.len())
        .filter(|&i| schema.columns[i].role == ColumnRole::Output)
        .collect();
    let mut vocabs: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for &ci in &input_cols {
        if schema.columns[ci].kind == ColumnKind::Categorical {
            let mut labels: Vec<String> = kept
                .iter()
                .map(|row| match &row[ci] {
                    Cell::Label(l) => l.clone(),
                    Cell::Real(_) => unreachable!(),
                })
                .collect();
            labels.sort();
            labels.dedup();
            vocabs.insert(ci, labels);
        }
    }

    let to_input_row = |row: &Vec<Cell<S>>| -> Vec<FeatureValue<S>> {
        input_cols
            .iter()
            .map(|&ci| match &row[ci] {
                Cell::Real(v) => FeatureValue::Real(*v),
                Cell::Label(l) => {
                    let vocab = &vocabs[&ci];
                    let id = vocab.binary_search(l).expect("label collected above");
                    FeatureValue::Cat(id as u32)
                }
            })
            .collect()
    };
    let to_output_row = |row: &Vec<Cell<S>>| -> Vec<S> {
        output_cols
            .iter()
            .map(|&ci| match &row[ci] {
                Cell::Real(v) => *v,
                Cell::Label(_) => unreachable!("outputs validated real"),
            })
            .collect()
    };

    let mut in_rows: Vec<Vec<FeatureValue<S>>> = kept.iter().map(to_input_row).collect();
    let mut out_rows: Vec<Vec<S>> = kept.iter().map(to_output_row).collect();

    if schema.average_duplicates {
        // Group rows with identical inputs, averaging outputs; first
        // occurrence keeps its position.
        let key_of = |r: &[FeatureValue<S>]| -> Vec<u64> {
            r.iter()
                .map(|v| match v {
                    FeatureValue::Real(x) => x.as_f64().to_bits(),
                    FeatureValue::Cat(c) => u64::from(*c) | (1 << 63),
                })
                .collect()
        };
        let mut order: Vec<Vec<u64>> = Vec::new();
        let mut grouped: BTreeMap<Vec<u64>, (Vec<FeatureValue<S>>, Vec<S>, usize)> =
            BTreeMap::new();
        for (ir, or) in in_rows.drain(..).zip(out_rows.drain(..)) {
            let key = key_of(&ir);
            match grouped.get_mut(&key) {
                Some((_, acc, count)) => {
                    for (a, v) in acc.iter_mut().zip(or.iter()) {
                        *a = *a + *v;
                    }
                    *count += 1;
                }
                None => {
                    order.push(key.clone());
                    grouped.insert(key, (ir, or, 1));
                }
            }
        }
        for key in order {
            let (ir, mut acc, count) = grouped.remove(&key).expect("keyed above");
            let n = S::from_usize(count);
            for a in &mut acc {
                *a = *a / n;
            }
            in_rows.push(ir);
            out_rows.push(acc);
        }
    }

    let input_columns: Vec<InputColumn> = input_cols
        .iter()
        .map(|&ci| {
            let c = &schema.columns[ci];
            match c.kind {
                ColumnKind::Real => InputColumn::real(c.name.clone()),
                ColumnKind::Categorical => {
                    InputColumn::categorical(c.name.clone(), vocabs[&ci].clone())
                }
            }
        })
        .collect();
    let output_names: Vec<String> = output_cols
        .iter()
        .map(|&ci| schema.columns[ci].name.clone())
        .collect();
    Dataset::new(
        input_columns,
        output_names,
        in_rows,
        Matrix::from_rows(out_rows),
        path.display().to_string(),
    )
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

/// How to partition rows into train/test.
#[derive(Debug, Clone)]
pub enum SplitStrategy {
    UniformRandom,
    /// Explicit per-stratum (label, train, test) counts on a categorical
    /// input column.
    StratifiedByCategory {
        column: String,
        counts: Vec<(String, usize, usize)>,
    },
}

/// Draw disjoint train/test subsets.
pub fn split<S: Scalar>(
    data: &Dataset<S>,
    n_train: usize,
    n_test: usize,
    strategy: &SplitStrategy,
    stream: RngStream,
) -> Result<(Dataset<S>, Dataset<S>)> {
    let mut rng = stream.rng();
    match strategy {
        SplitStrategy::UniformRandom => {
            if n_train + n_test > data.n_rows() {
                return Err(Error::Infeasible(format!(
                    "split {n_train}+{n_test} exceeds {} rows",
                    data.n_rows()
                )));
            }
            if n_train == 0 {
                return Err(Error::Infeasible("empty training split".into()));
            }
            let mut idx: Vec<usize> = (0..data.n_rows()).collect();
            idx.shuffle(&mut rng);
            let train = data.subset(&idx[..n_train]);
            let test = data.subset(&idx[n_train..n_train + n_test]);
            Ok((train, test))
        }
        SplitStrategy::StratifiedByCategory { column, counts } => {
            let col_idx = data
                .input_columns
                .iter()
                .position(|c| &c.name == column)
                .ok_or_else(|| Error::Schema(format!("no input column named {column}")))?;
            let col = &data.input_columns[col_idx];
            if col.kind != ColumnKindTag::Categorical {
                return Err(Error::Schema(format!("{column} is not categorical")));
            }
            let want_train: usize = counts.iter().map(|c| c.1).sum();
            let want_test: usize = counts.iter().map(|c| c.2).sum();
            if want_train != n_train || want_test != n_test {
                return Err(Error::Infeasible(format!(
                    "stratum counts sum to {want_train}/{want_test}, expected {n_train}/{n_test}"
                )));
            }
            let mut train_idx = Vec::new();
            let mut test_idx = Vec::new();
            for (label, tr, te) in counts {
                let cat_id = col
                    .vocab
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| Error::Infeasible(format!("no category '{label}' in {column}")))?
                    as u32;
                let mut stratum: Vec<usize> = (0..data.n_rows())
                    .filter(|&i| data.rows[i][col_idx] == FeatureValue::Cat(cat_id))
                    .collect();
                if stratum.len() < tr + te {
                    return Err(Error::Infeasible(format!(
                        "stratum '{label}' has {} rows, needs {}",
                        stratum.len(),
                        tr + te
                    )));
                }
                stratum.shuffle(&mut rng);
                train_idx.extend_from_slice(&stratum[..*tr]);
                test_idx.extend_from_slice(&stratum[*tr..tr + te]);
            }
            Ok((data.subset(&train_idx), data.subset(&test_idx)))
        }
    }
}
