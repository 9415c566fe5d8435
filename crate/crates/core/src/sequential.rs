//! Simulated sequential learning over a finite labeled candidate pool:
//! train on the measured rows, score every unmeasured candidate by the
//! Monte-Carlo probability of jointly satisfying all threshold objectives,
//! measure the best, and repeat until a measured candidate's true outputs
//! satisfy everything.

use crate::datasets::Dataset;
use crate::ensemble::fit_forest;
use crate::error::{Error, Result};
use crate::intervals::{
    calibrate_forest, prediction_distribution, training_data_correlation, CorrelationMethod,
    PredictionDistribution,
};
use crate::scalar::Scalar;
use crate::stats::{mean, percentile, sample_std, MvnSampler, RngStream};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Threshold objective on one named output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective<S> {
    pub output: String,
    pub direction: Direction,
    pub threshold: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    GreaterThan,
    LessThan,
}

impl<S: Scalar> Objective<S> {
    pub fn greater_than(output: impl Into<String>, threshold: S) -> Self {
        Self {
            output: output.into(),
            direction: Direction::GreaterThan,
            threshold,
        }
    }

    pub fn less_than(output: impl Into<String>, threshold: S) -> Self {
        Self {
            output: output.into(),
            direction: Direction::LessThan,
            threshold,
        }
    }
}

/// Objective bound to an output column index.
#[derive(Debug, Clone)]
pub struct ResolvedObjective<S> {
    pub output_index: usize,
    pub direction: Direction,
    pub threshold: S,
}

impl<S: Scalar> ResolvedObjective<S> {
    fn satisfied_by(&self, y: &[S]) -> bool {
        let v = y[self.output_index];
        match self.direction {
            Direction::GreaterThan => v > self.threshold,
            Direction::LessThan => v < self.threshold,
        }
    }
}

fn resolve_objectives<S: Scalar>(
    objectives: &[Objective<S>],
    data: &Dataset<S>,
) -> Result<Vec<ResolvedObjective<S>>> {
    if objectives.is_empty() {
        return Err(Error::Domain("no objectives given".into()));
    }
    objectives
        .iter()
        .map(|o| {
            let output_index = data
                .output_index(&o.output)
                .ok_or_else(|| Error::Schema(format!("no output column named {}", o.output)))?;
            Ok(ResolvedObjective {
                output_index,
                direction: o.direction,
                threshold: o.threshold,
            })
        })
        .collect()
}

/// Candidate selection policy for one study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMethod {
    Trivial,
    TrainingData,
    Jackknife,
    Bootstrap,
    /// Ignore the model, pick uniformly among unmeasured candidates.
    Random,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 5] = [
        SelectionMethod::Trivial,
        SelectionMethod::TrainingData,
        SelectionMethod::Jackknife,
        SelectionMethod::Bootstrap,
        SelectionMethod::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SelectionMethod::Trivial => "trivial",
            SelectionMethod::TrainingData => "training-data",
            SelectionMethod::Jackknife => "jackknife",
            SelectionMethod::Bootstrap => "bootstrap",
            SelectionMethod::Random => "random",
        }
    }

    fn correlation(&self) -> Option<CorrelationMethod> {
        match self {
            SelectionMethod::Trivial => Some(CorrelationMethod::Trivial),
            SelectionMethod::TrainingData => Some(CorrelationMethod::TrainingData),
            SelectionMethod::Jackknife => Some(CorrelationMethod::Jackknife),
            SelectionMethod::Bootstrap => Some(CorrelationMethod::Bootstrap),
            SelectionMethod::Random => None,
        }
    }
}

/// Study configuration. Defaults follow the synthetic two-objective
/// problem: 16 initial rows, 64 bags, p = 0.683, 10,000 acquisition
/// samples.
#[derive(Debug, Clone)]
pub struct SlConfig<S> {
    pub objectives: Vec<Objective<S>>,
    pub n_initial: usize,
    pub method: SelectionMethod,
    /// Cap on rounds; `None` means the candidate pool size.
    pub max_rounds: Option<usize>,
    pub n_mc_samples: usize,
    pub n_bags: usize,
    pub p: S,
    pub n_trials: usize,
    pub base_seed: u64,
}

impl<S: Scalar> SlConfig<S> {
    pub fn new(objectives: Vec<Objective<S>>, method: SelectionMethod) -> Self {
        Self {
            objectives,
            n_initial: 16,
            method,
            max_rounds: None,
            n_mc_samples: 10_000,
            n_bags: 64,
            p: S::from_f64(0.683),
            n_trials: 64,
            base_seed: 0,
        }
    }
}

/// One acquisition decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord<S> {
    /// Dataset row index of the measured candidate.
    pub candidate: usize,
    pub score: S,
}

/// Rounds-to-success (None = censored at the cap) and the per-round trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlTrialResult<S> {
    pub trial: usize,
    pub rounds_to_success: Option<usize>,
    pub trace: Vec<RoundRecord<S>>,
}

/// Monte-Carlo probability that a draw from the prediction distribution
/// satisfies every objective simultaneously.
pub fn acquisition_score<S: Scalar>(
    dist: &PredictionDistribution<S>,
    objectives: &[ResolvedObjective<S>],
    n_mc: usize,
    stream: RngStream,
) -> Result<S> {
    for o in objectives {
        if o.output_index >= dist.dim() {
            return Err(Error::Domain(format!(
                "objective on output {} but distribution has {} outputs",
                o.output_index,
                dist.dim()
            )));
        }
    }
    let sampler = MvnSampler::new(dist.mean.clone(), &dist.cov)?;
    let mut rng = stream.rng();
    let d = dist.dim();
    let mut draw = vec![S::zero(); d];
    let mut z = vec![S::zero(); d];
    let mut hits = 0usize;
    for _ in 0..n_mc {
        sampler.sample_into(&mut draw, &mut z, &mut rng);
        if objectives.iter().all(|o| o.satisfied_by(&draw)) {
            hits += 1;
        }
    }
    Ok(S::from_usize(hits) / S::from_usize(n_mc))
}

/// Highest score wins; exact ties go to the candidate that appears
/// earliest in the per-trial shuffled order.
fn select_candidate<S: Scalar>(scores: &[(usize, S)], tie_rank: &[usize]) -> usize {
    let mut best = scores[0];
    for &(cand, score) in &scores[1..] {
        if score > best.1 || (score == best.1 && tie_rank[cand] < tie_rank[best.0]) {
            best = (cand, score);
        }
    }
    best.0
}

/// Run one trial: round r = 1 is the first measurement; success when the
/// measured candidate's true outputs satisfy all objectives.
pub fn run_trial<S: Scalar>(
    config: &SlConfig<S>,
    data: &Dataset<S>,
    trial_index: usize,
) -> Result<SlTrialResult<S>> {
    let objectives = resolve_objectives(&config.objectives, data)?;
    let n = data.n_rows();
    let winners: Vec<usize> = (0..n)
        .filter(|&i| objectives.iter().all(|o| o.satisfied_by(data.output_row(i))))
        .collect();
    if winners.is_empty() {
        return Err(Error::Infeasible(
            "no dataset row satisfies all objectives".into(),
        ));
    }
    let non_winners: Vec<usize> = (0..n).filter(|i| !winners.contains(i)).collect();
    if non_winners.len() < config.n_initial {
        return Err(Error::Infeasible(format!(
            "{} non-satisfying rows cannot seed {} initial measurements",
            non_winners.len(),
            config.n_initial
        )));
    }
    if config.n_initial < 2 {
        return Err(Error::Domain("n_initial must be >= 2".into()));
    }

    let trial_stream = RngStream::new(config.base_seed).substream(trial_index as u64);

    // Initial training rows, drawn among non-satisfying rows so every
    // satisfying candidate stays in the pool.
    let mut seed_pool = non_winners.clone();
    seed_pool.shuffle(&mut trial_stream.substream(0).rng());
    let mut measured: Vec<bool> = vec![false; n];
    let mut measured_order: Vec<usize> = Vec::new();
    for &i in seed_pool.iter().take(config.n_initial) {
        measured[i] = true;
        measured_order.push(i);
    }
    measured_order.sort_unstable();

    // Per-trial shuffled tie-break order over all rows.
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(&mut trial_stream.substream(1).rng());
    let mut tie_rank = vec![0usize; n];
    for (pos, &row) in shuffled.iter().enumerate() {
        tie_rank[row] = pos;
    }

    let pool_size = n - config.n_initial;
    let cap = config.max_rounds.unwrap_or(pool_size).min(pool_size);
    let mut trace: Vec<RoundRecord<S>> = Vec::new();

    for round in 1..=cap {
        let round_stream = trial_stream.substream(2).substream(round as u64);
        let candidates: Vec<usize> = (0..n).filter(|&i| !measured[i]).collect();
        debug_assert!(!candidates.is_empty());

        let (chosen, score) = match config.method.correlation() {
            None => {
                let pick = *candidates
                    .choose(&mut round_stream.substream(0).rng())
                    .expect("non-empty candidate pool");
                (pick, S::zero())
            }
            Some(corr_method) => {
                let train = data.subset(&measured_order);
                let mut forest = fit_forest(&train, config.n_bags, round_stream.substream(1))?;
                calibrate_forest(&mut forest, config.p)?;
                let train_corr = if corr_method == CorrelationMethod::TrainingData {
                    Some(training_data_correlation(&forest)?)
                } else {
                    None
                };
                let score_stream = round_stream.substream(2);
                let scores: Vec<(usize, S)> = candidates
                    .par_iter()
                    .map(|&c| {
                        let dist = prediction_distribution(
                            &forest,
                            data.input_row(c),
                            corr_method,
                            train_corr.as_ref(),
                        )?;
                        let s = acquisition_score(
                            &dist,
                            &objectives,
                            config.n_mc_samples,
                            score_stream.substream(c as u64),
                        )?;
                        Ok((c, s))
                    })
                    .collect::<Result<_>>()?;
                if scores.iter().all(|&(_, s)| s == S::zero()) {
                    // nothing scores: fall back to uniform random
                    let pick = *candidates
                        .choose(&mut round_stream.substream(3).rng())
                        .expect("non-empty candidate pool");
                    (pick, S::zero())
                } else {
                    let pick = select_candidate(&scores, &tie_rank);
                    let s = scores.iter().find(|&&(c, _)| c == pick).expect("picked").1;
                    (pick, s)
                }
            }
        };

        trace.push(RoundRecord {
            candidate: chosen,
            score,
        });
        if objectives.iter().all(|o| o.satisfied_by(data.output_row(chosen))) {
            return Ok(SlTrialResult {
                trial: trial_index,
                rounds_to_success: Some(round),
                trace,
            });
        }
        measured[chosen] = true;
        let pos = measured_order.binary_search(&chosen).unwrap_err();
        measured_order.insert(pos, chosen);
    }

    Ok(SlTrialResult {
        trial: trial_index,
        rounds_to_success: None,
        trace,
    })
}

/// Distribution summary over successful trials.
#[derive(Debug, Clone, Serialize)]
pub struct SlStudySummary<S> {
    pub method: String,
    pub n_trials: usize,
    pub n_censored: usize,
    pub mean_rounds: S,
    pub std_error: S,
    pub p5: S,
    pub median: S,
    pub p95: S,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlStudy<S> {
    pub trials: Vec<SlTrialResult<S>>,
    pub summary: SlStudySummary<S>,
}

/// Run `n_trials` independent trials (seeds derived from the base seed and
/// trial index, so results are reproducible regardless of parallelism) and
/// summarize as mean ± standard error plus the 5th/50th/95th percentiles.
pub fn run_study<S: Scalar>(config: &SlConfig<S>, data: &Dataset<S>) -> Result<SlStudy<S>> {
    if config.n_trials == 0 {
        return Err(Error::Domain("n_trials must be >= 1".into()));
    }
    if config.n_initial >= data.n_rows() {
        return Err(Error::Infeasible(format!(
            "n_initial {} must be below the dataset size {}",
            config.n_initial,
            data.n_rows()
        )));
    }
    resolve_objectives(&config.objectives, data)?;

    let trials: Vec<SlTrialResult<S>> = (0..config.n_trials)
        .into_par_iter()
        .map(|t| run_trial(config, data, t))
        .collect::<Result<_>>()?;

    let rounds: Vec<S> = trials
        .iter()
        .filter_map(|t| t.rounds_to_success)
        .map(S::from_usize)
        .collect();
    let n_censored = trials.len() - rounds.len();
    let summary = if rounds.is_empty() {
        SlStudySummary {
            method: config.method.name().to_string(),
            n_trials: trials.len(),
            n_censored,
            mean_rounds: S::nan(),
            std_error: S::nan(),
            p5: S::nan(),
            median: S::nan(),
            p95: S::nan(),
        }
    } else {
        let m = mean(&rounds)?;
        let se = if rounds.len() > 1 {
            sample_std(&rounds)? / S::from_usize(rounds.len()).sqrt()
        } else {
            S::zero()
        };
        SlStudySummary {
            method: config.method.name().to_string(),
            n_trials: trials.len(),
            n_censored,
            mean_rounds: m,
            std_error: se,
            p5: percentile(&rounds, S::from_f64(0.05))?,
            median: percentile(&rounds, S::half())?,
            p95: percentile(&rounds, S::from_f64(0.95))?,
        }
    };
    Ok(SlStudy { trials, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_sl_synthetic, Dataset, InputColumn};
    use crate::stats::{CovMatrix, Matrix};
    use crate::tree::FeatureValue;

    fn orthant_dist(rho: f64) -> PredictionDistribution<f64> {
        PredictionDistribution {
            mean: vec![0.0, 0.0],
            cov: CovMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]),
            correlation: CovMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]),
        }
    }

    fn both_positive() -> Vec<ResolvedObjective<f64>> {
        vec![
            ResolvedObjective {
                output_index: 0,
                direction: Direction::GreaterThan,
                threshold: 0.0,
            },
            ResolvedObjective {
                output_index: 1,
                direction: Direction::GreaterThan,
                threshold: 0.0,
            },
        ]
    }

    #[test]
    fn point_mass_inside_region_scores_one() {
        let dist = PredictionDistribution {
            mean: vec![1.0, 1.0],
            cov: CovMatrix::zeros(2),
            correlation: CovMatrix::identity(2),
        };
        let s = acquisition_score(&dist, &both_positive(), 100, RngStream::new(1)).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn independent_orthant_probability() {
        let s =
            acquisition_score(&orthant_dist(0.0), &both_positive(), 10_000, RngStream::new(2))
                .unwrap();
        assert!((s - 0.25).abs() < 0.01, "{s}");
    }

    #[test]
    fn perfectly_correlated_orthant_probability() {
        let s =
            acquisition_score(&orthant_dist(1.0), &both_positive(), 10_000, RngStream::new(3))
                .unwrap();
        assert!((s - 0.5).abs() < 0.02, "{s}");
    }

    #[test]
    fn monte_carlo_error_is_bounded() {
        let n_mc = 10_000;
        let a = acquisition_score(&orthant_dist(0.0), &both_positive(), n_mc, RngStream::new(4))
            .unwrap();
        let b = acquisition_score(&orthant_dist(0.0), &both_positive(), n_mc, RngStream::new(5))
            .unwrap();
        let bound = 3.0 * (0.25 / n_mc as f64).sqrt();
        assert!((a - b).abs() < bound, "{a} vs {b}");
    }

    #[test]
    fn tie_break_uses_shuffled_rank() {
        let scores = vec![(0, 0.5), (1, 0.7), (2, 0.7), (3, 0.1)];
        // candidate 2 shuffles earlier than candidate 1
        let tie_rank = vec![0, 3, 1, 2];
        assert_eq!(select_candidate(&scores, &tie_rank), 2);
        let tie_rank = vec![0, 1, 3, 2];
        assert_eq!(select_candidate(&scores, &tie_rank), 1);
    }

    fn tiny_pool_dataset() -> Dataset<f64> {
        // 6 rows, one winner (row 5: y > 10)
        let rows: Vec<Vec<FeatureValue<f64>>> = (0..6)
            .map(|i| vec![FeatureValue::Real(i as f64)])
            .collect();
        let outs = Matrix::from_rows(vec![
            vec![0.0],
            vec![1.0],
            vec![2.0],
            vec![1.5],
            vec![0.5],
            vec![11.0],
        ]);
        Dataset::new(
            vec![InputColumn::real("x")],
            vec!["y".into()],
            rows,
            outs,
            "tiny",
        )
        .unwrap()
    }

    #[test]
    fn sole_remaining_candidate_is_measured() {
        let data = tiny_pool_dataset();
        let mut config = SlConfig::new(
            vec![Objective::greater_than("y", 10.0)],
            SelectionMethod::Random,
        );
        config.n_initial = 5;
        config.n_trials = 1;
        config.n_bags = 4;
        let trial = run_trial(&config, &data, 0).unwrap();
        assert_eq!(trial.rounds_to_success, Some(1));
        assert_eq!(trial.trace[0].candidate, 5);
    }

    #[test]
    fn measured_candidates_never_reproposed() {
        let data = gen_sl_synthetic::<f64>(RngStream::new(3)).unwrap();
        let mut config = SlConfig::new(
            vec![
                Objective::greater_than("y0", 22.0),
                Objective::greater_than("y1", 22.0),
            ],
            SelectionMethod::Random,
        );
        config.n_trials = 1;
        config.base_seed = 33;
        let trial = run_trial(&config, &data, 0).unwrap();
        let mut seen = std::collections::HashSet::new();
        for r in &trial.trace {
            assert!(seen.insert(r.candidate), "candidate {} repeated", r.candidate);
        }
    }

    #[test]
    fn trials_are_bit_reproducible() {
        let data = gen_sl_synthetic::<f64>(RngStream::new(3)).unwrap();
        let mut config = SlConfig::new(
            vec![
                Objective::greater_than("y0", 22.0),
                Objective::greater_than("y1", 22.0),
            ],
            SelectionMethod::Bootstrap,
        );
        config.n_trials = 1;
        config.n_mc_samples = 500;
        config.n_bags = 16;
        config.base_seed = 7;
        let a = run_trial(&config, &data, 3).unwrap();
        let b = run_trial(&config, &data, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn summary_of_single_trial_is_that_trial() {
        let data = tiny_pool_dataset();
        let mut config = SlConfig::new(
            vec![Objective::greater_than("y", 10.0)],
            SelectionMethod::Random,
        );
        config.n_initial = 5;
        config.n_trials = 1;
        let study = run_study(&config, &data).unwrap();
        assert_eq!(study.summary.mean_rounds, 1.0);
        assert_eq!(study.summary.median, 1.0);
        assert_eq!(study.summary.p5, 1.0);
        assert_eq!(study.summary.p95, 1.0);
        assert_eq!(study.summary.n_censored, 0);
    }

    #[test]
    fn max_rounds_censors_instead_of_erroring() {
        let data = gen_sl_synthetic::<f64>(RngStream::new(3)).unwrap();
        let mut config = SlConfig::new(
            vec![
                Objective::greater_than("y0", 22.0),
                Objective::greater_than("y1", 22.0),
            ],
            SelectionMethod::Random,
        );
        config.n_trials = 4;
        config.max_rounds = Some(2);
        config.base_seed = 5;
        let study = run_study(&config, &data).unwrap();
        assert!(study.summary.n_censored > 0);
        for t in &study.trials {
            if t.rounds_to_success.is_none() {
                assert_eq!(t.trace.len(), 2);
            }
        }
    }

    #[test]
    fn infeasible_objectives_error() {
        let data = tiny_pool_dataset();
        let config = SlConfig::new(
            vec![Objective::greater_than("y", 100.0)],
            SelectionMethod::Random,
        );
        assert!(matches!(
            run_trial(&config, &data, 0),
            Err(Error::Infeasible(_))
        ));
    }
}
