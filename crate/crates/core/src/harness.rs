//! Canonical-holdout experiments: train on data with one coordinate frozen to
//! `+1`, evaluate on the full cube, and compare with the Boolean influence.

use std::io::{BufRead, Write};
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::boolfn::{check_coord, coord, fwht, BooleanFunction, FourierSpectrum};
use crate::error::{Error, Result};
use crate::nets::{Model, ModelConfig, Optimizer, OptimizerConfig};
use crate::pvr::{make_pvr, PvrSpec};
use crate::seed;

/// Largest `n` for exact generalization-error evaluation.
pub const MAX_EXACT_EVAL_DIM: usize = 20;
/// Largest `n` for exact coefficient tracking.
pub const MAX_EXACT_TRACK_DIM: usize = 16;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_TRACKED_PAIRS: usize = 16;

const EVAL_CHUNK: usize = 4096;

/// Which coordinate is frozen to `+1` during training; 0 means none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HoldoutConfig {
    pub frozen_index: usize,
}

impl HoldoutConfig {
    pub fn matched() -> Self {
        Self { frozen_index: 0 }
    }

    pub fn frozen(k: usize) -> Self {
        Self { frozen_index: k }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.frozen_index == 0 {
            Ok(())
        } else {
            check_coord(self.frozen_index, n)
        }
    }

    fn bit(&self) -> u32 {
        if self.frozen_index == 0 {
            0
        } else {
            1 << (self.frozen_index - 1)
        }
    }
}

/// Target function with cached spectrum; `pointer_bits` marks coordinates
/// that a sweep may not freeze.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub function: BooleanFunction,
    pub spectrum: FourierSpectrum,
    pub pointer_bits: usize,
}

impl Task {
    pub fn new(function: BooleanFunction) -> Self {
        let spectrum = function.fourier_transform();
        Self {
            function,
            spectrum,
            pointer_bits: 0,
        }
    }

    pub fn from_spectrum(spectrum: FourierSpectrum) -> Self {
        Self {
            function: spectrum.inverse_transform(),
            spectrum,
            pointer_bits: 0,
        }
    }

    pub fn pvr(spec: &PvrSpec) -> Result<Self> {
        let mut t = Self::new(make_pvr(spec)?);
        t.pointer_bits = spec.p;
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.function.n()
    }

    /// `Inf_k(f)`, and 0 in matched mode.
    pub fn influence(&self, holdout: HoldoutConfig) -> Result<f64> {
        if holdout.frozen_index == 0 {
            Ok(0.0)
        } else {
            self.spectrum.influence(holdout.frozen_index)
        }
    }

    /// Pairs `(S, S ∪ {k})` for the `limit` largest `|f̂_{-k}(S)|`, ties by mask.
    pub fn default_tracked_pairs(&self, k: usize, limit: usize) -> Result<Vec<(u32, u32)>> {
        let frozen = self.spectrum.frozen(k)?;
        let bit = 1u32 << (k - 1);
        let mut support: Vec<(u32, f64)> = frozen
            .support(1e-12)
            .into_iter()
            .map(|m| (m, frozen.coeff(m).abs()))
            .collect();
        support.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(support
            .into_iter()
            .take(limit)
            .map(|(m, _)| (m, m | bit))
            .collect())
    }
}

/// Linear target `1 + 2x₁ - 3x₂ + 4x₃ - …`, i.e. `f̂(∅) = 1` and
/// `f̂({j}) = (-1)^{j+1} (j + 1)`.
pub fn ramp_target(n: usize) -> FourierSpectrum {
    let terms: Vec<(u32, f64)> = std::iter::once((0u32, 1.0))
        .chain((1..=n).map(|j| {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            (1u32 << (j - 1), sign * (j + 1) as f64)
        }))
        .collect();
    FourierSpectrum::from_terms(n, &terms).expect("valid dimension")
}

/// Row matrix of the points with the given masks.
pub fn points_matrix(n: usize, masks: &[u32]) -> Array2<f64> {
    Array2::from_shape_fn((masks.len(), n), |(r, i)| coord(masks[r], i))
}

/// Uniform point masks with the frozen coordinate (if any) set to `+1`.
pub fn sample_holdout_masks<R: Rng + ?Sized>(
    n: usize,
    cfg: HoldoutConfig,
    b: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    crate::boolfn::check_dim(n)?;
    cfg.validate(n)?;
    let full = (1u32 << n) - 1;
    let keep = full & !cfg.bit();
    Ok((0..b).map(|_| rng.gen::<u32>() & keep).collect())
}

/// Batch of `b` points `(b × n)` from the holdout distribution.
pub fn sample_holdout_batch<R: Rng + ?Sized>(
    n: usize,
    cfg: HoldoutConfig,
    b: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let masks = sample_holdout_masks(n, cfg, b, rng)?;
    Ok(points_matrix(n, &masks))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl EvalMode {
    /// Exact up to `cap`, otherwise Monte-Carlo with the default sample count.
    pub fn auto(n: usize, cap: usize, seed: u64) -> Self {
        if n <= cap {
            EvalMode::Exact
        } else {
            EvalMode::MonteCarlo {
                samples: DEFAULT_MC_SAMPLES,
                seed,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalDistribution {
    Uniform,
    /// Slice `x_k = +1`.
    Frozen(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    /// Zero for exact evaluation.
    pub std_error: f64,
}

fn outputs_for(model: &Model, n: usize, masks: &[u32]) -> Vec<f64> {
    masks
        .chunks(EVAL_CHUNK)
        .flat_map(|c| model.forward_batch(points_matrix(n, c).view()).to_vec())
        .collect()
}

fn mean_and_se(values: impl Iterator<Item = f64>) -> Measured {
    let (mut count, mut s, mut s2) = (0usize, 0.0, 0.0);
    for v in values {
        count += 1;
        s += v;
        s2 += v * v;
    }
    let m = count as f64;
    let mean = s / m;
    let se = if count > 1 {
        (((s2 - m * mean * mean) / (m - 1.0)).max(0.0) / m).sqrt()
    } else {
        0.0
    };
    Measured {
        value: mean,
        std_error: se,
    }
}

/// `½ E (f(X) - f_NN(X))²` over the chosen distribution.
pub fn evaluate_gen_error(
    model: &Model,
    target: &BooleanFunction,
    mode: EvalMode,
    dist: EvalDistribution,
) -> Result<Measured> {
    let n = target.n();
    if model.input_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: model.input_dim(),
        });
    }
    let holdout = match dist {
        EvalDistribution::Uniform => HoldoutConfig::matched(),
        EvalDistribution::Frozen(k) => HoldoutConfig::frozen(k),
    };
    holdout.validate(n)?;
    let masks: Vec<u32> = match mode {
        EvalMode::Exact => {
            if n > MAX_EXACT_EVAL_DIM {
                return Err(Error::Unsupported(format!(
                    "exact evaluation needs n <= {MAX_EXACT_EVAL_DIM}, got {n}"
                )));
            }
            let bit = holdout.bit();
            (0..1u32 << n).filter(|m| m & bit == 0).collect()
        }
        EvalMode::MonteCarlo { samples, seed: s } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("zero Monte-Carlo samples".into()));
            }
            sample_holdout_masks(n, holdout, samples, &mut seed::rng(s))?
        }
    };
    let out = outputs_for(model, n, &masks);
    let errs = masks
        .iter()
        .zip(&out)
        .map(|(&m, &y)| 0.5 * (target.value(m) - y).powi(2));
    let mut r = mean_and_se(errs);
    if mode == EvalMode::Exact {
        r.std_error = 0.0;
    }
    Ok(r)
}

/// `ĉ(S) = E_X[f_NN(X) χ_S(X)]` under the uniform distribution, per subset.
pub fn track_coefficients(model: &Model, subsets: &[u32], mode: EvalMode) -> Result<Vec<Measured>> {
    let n = model.input_dim();
    if let Some(&bad) = subsets.iter().find(|&&s| (s as u64) >> n != 0) {
        return Err(Error::InvalidArgument(format!(
            "subset mask {bad} outside {n} coordinates"
        )));
    }
    match mode {
        EvalMode::Exact => {
            if n > MAX_EXACT_TRACK_DIM {
                return Err(Error::Unsupported(format!(
                    "exact coefficient tracking needs n <= {MAX_EXACT_TRACK_DIM}, got {n}"
                )));
            }
            let masks: Vec<u32> = (0..1u32 << n).collect();
            let mut table = outputs_for(model, n, &masks);
            fwht(&mut table);
            let scale = 1.0 / table.len() as f64;
            Ok(subsets
                .iter()
                .map(|&s| Measured {
                    value: table[s as usize] * scale,
                    std_error: 0.0,
                })
                .collect())
        }
        EvalMode::MonteCarlo { samples, seed: s } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("zero Monte-Carlo samples".into()));
            }
            let masks = sample_holdout_masks(n, HoldoutConfig::matched(), samples, &mut seed::rng(s))?;
            let out = outputs_for(model, n, &masks);
            Ok(subsets
                .iter()
                .map(|&s| {
                    mean_and_se(
                        masks
                            .iter()
                            .zip(&out)
                            .map(|(&m, &y)| y * crate::boolfn::character(s, m)),
                    )
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    /// Fixed i.i.d. sample from the holdout distribution.
    Sampled(usize),
    /// Every point of the holdout support exactly once.
    FullSupport,
}

impl Dataset {
    /// `40·2^n` samples, capped at 10⁶.
    pub fn default_for(n: usize) -> Self {
        Dataset::Sampled((40usize << n.min(24)).min(1_000_000))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub epochs: usize,
    pub dataset: Dataset,
    /// Subset masks whose coefficients are recorded; `None` picks the default
    /// pairs for the frozen coordinate.
    pub tracked: Option<Vec<u32>>,
    /// Record tracked coefficients every this many epochs (0: only at the end).
    pub eval_every: usize,
    pub eval: EvalMode,
    /// Record wall-clock time (otherwise 0, keeping outputs byte-stable).
    pub wall_time: bool,
}

impl Schedule {
    pub fn new(epochs: usize, n: usize) -> Self {
        Self {
            epochs,
            dataset: Dataset::default_for(n),
            tracked: None,
            eval_every: 1,
            eval: EvalMode::auto(n, MAX_EXACT_TRACK_DIM, 0),
            wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSample {
    pub step: u64,
    pub subset_mask: u32,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub frozen_index: usize,
    pub seed: u64,
    pub steps: u64,
    pub gen_error_ood: f64,
    pub gen_error_id: f64,
    pub influence: f64,
    pub coefficient_trajectory: Vec<CoefficientSample>,
    pub wall_time_s: f64,
}

impl RunRecord {
    /// Tracked coefficients at the last recorded step.
    pub fn final_coefficients(&self) -> Vec<(u32, f64)> {
        let Some(last) = self.coefficient_trajectory.last().map(|c| c.step) else {
            return vec![];
        };
        self.coefficient_trajectory
            .iter()
            .filter(|c| c.step == last)
            .map(|c| (c.subset_mask, c.coefficient))
            .collect()
    }
}

/// Draws the training set for a run.
pub fn training_set<R: Rng + ?Sized>(
    task: &Task,
    holdout: HoldoutConfig,
    dataset: Dataset,
    rng: &mut R,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = task.n();
    holdout.validate(n)?;
    let masks: Vec<u32> = match dataset {
        Dataset::Sampled(0) => return Err(Error::InvalidArgument("empty dataset".into())),
        Dataset::Sampled(size) => sample_holdout_masks(n, holdout, size, rng)?,
        Dataset::FullSupport => {
            let bit = holdout.bit();
            (0..1u32 << n).filter(|m| m & bit == 0).collect()
        }
    };
    let ys = masks.iter().map(|&m| task.function.value(m)).collect();
    Ok((points_matrix(n, &masks), ys))
}

/// One training run, fully determined by `seed`.
pub fn train_run(
    task: &Task,
    holdout: HoldoutConfig,
    model_cfg: &ModelConfig,
    opt_cfg: &OptimizerConfig,
    schedule: &Schedule,
    seed_value: u64,
) -> Result<RunRecord> {
    let start = Instant::now();
    let n = task.n();
    holdout.validate(n)?;
    if model_cfg.input_dim != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: model_cfg.input_dim,
        });
    }
    let mut rng = seed::rng(seed_value);
    let mut model = Model::init(model_cfg, &mut rng)?;
    let mut opt = Optimizer::new(*opt_cfg, &model)?;
    let (xs, ys) = training_set(task, holdout, schedule.dataset, &mut rng)?;

    let tracked: Vec<u32> = match (&schedule.tracked, holdout.frozen_index) {
        (Some(t), _) => t.clone(),
        (None, 0) => vec![],
        (None, k) => task
            .default_tracked_pairs(k, DEFAULT_TRACKED_PAIRS)?
            .into_iter()
            .flat_map(|(a, b)| [a, b])
            .collect(),
    };
    let mut trajectory = Vec::new();
    let mut record = |model: &Model, step: u64| -> Result<()> {
        if tracked.is_empty() {
            return Ok(());
        }
        for (s, c) in tracked.iter().zip(track_coefficients(model, &tracked, schedule.eval)?) {
            trajectory.push(CoefficientSample {
                step,
                subset_mask: *s,
                coefficient: c.value,
            });
        }
        Ok(())
    };

    record(&model, 0)?;
    let mut order: Vec<usize> = (0..xs.nrows()).collect();
    let batch = opt_cfg.batch;
    for epoch in 1..=schedule.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(batch) {
            let bx = xs.select(Axis(0), idx);
            let by = ys.select(Axis(0), idx);
            let (_, grads) = model.gradient(bx.view(), by.view())?;
            opt.step(&mut model, &grads, &mut rng)?;
        }
        let due = schedule.eval_every > 0 && epoch % schedule.eval_every == 0;
        if due && epoch != schedule.epochs {
            record(&model, opt.steps_taken())?;
        }
    }
    if schedule.epochs > 0 {
        record(&model, opt.steps_taken())?;
    }

    let eval_seed = seed::derive(seed_value, &[u64::MAX]);
    let eval = match schedule.eval {
        EvalMode::MonteCarlo { samples, .. } => EvalMode::MonteCarlo {
            samples,
            seed: eval_seed,
        },
        EvalMode::Exact if n > MAX_EXACT_EVAL_DIM => EvalMode::MonteCarlo {
            samples: DEFAULT_MC_SAMPLES,
            seed: eval_seed,
        },
        EvalMode::Exact => EvalMode::Exact,
    };
    let ood = evaluate_gen_error(&model, &task.function, eval, EvalDistribution::Uniform)?;
    let id = match holdout.frozen_index {
        0 => ood,
        k => evaluate_gen_error(&model, &task.function, eval, EvalDistribution::Frozen(k))?,
    };
    Ok(RunRecord {
        frozen_index: holdout.frozen_index,
        seed: seed_value,
        steps: opt.steps_taken(),
        gen_error_ood: ood.value,
        gen_error_id: id.value,
        influence: task.influence(holdout)?,
        coefficient_trajectory: trajectory,
        wall_time_s: if schedule.wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

/// Seed of repeat `repeat` at frozen index `k`.
pub fn run_seed(base_seed: u64, k: usize, repeat: usize) -> u64 {
    seed::derive(base_seed, &[k as u64, repeat as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub k_range: Vec<usize>,
    pub repeats: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub frozen_index: usize,
    pub runs: usize,
    pub mean_gen_error_ood: f64,
    /// Half-width of the Student-t 95% interval (0 for a single run).
    pub ci95_gen_error_ood: f64,
    pub mean_gen_error_id: f64,
    pub influence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Ordered by `(k, repeat)`.
    pub runs: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
}

pub fn sweep(
    task: &Task,
    sweep_cfg: &SweepConfig,
    model_cfg: &ModelConfig,
    opt_cfg: &OptimizerConfig,
    schedule: &Schedule,
) -> Result<SweepResult> {
    let n = task.n();
    if sweep_cfg.k_range.is_empty() || sweep_cfg.repeats == 0 {
        return Err(Error::InvalidArgument("sweep needs at least one k and one repeat".into()));
    }
    for &k in &sweep_cfg.k_range {
        HoldoutConfig::frozen(k).validate(n)?;
        if k != 0 && k <= task.pointer_bits {
            return Err(Error::InvalidArgument(format!(
                "coordinate {k} is a pointer bit (p = {})",
                task.pointer_bits
            )));
        }
    }
    let jobs: Vec<(usize, usize)> = sweep_cfg
        .k_range
        .iter()
        .flat_map(|&k| (0..sweep_cfg.repeats).map(move |r| (k, r)))
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(k, r)| {
            train_run(
                task,
                HoldoutConfig::frozen(k),
                model_cfg,
                opt_cfg,
                schedule,
                run_seed(sweep_cfg.base_seed, k, r),
            )
        })
        .collect::<Result<_>>()?;
    let aggregate = aggregate(&runs);
    Ok(SweepResult { runs, aggregate })
}

/// Per frozen index (in first-appearance order): mean and 95% CI of the ood error.
pub fn aggregate(runs: &[RunRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<usize> = Vec::new();
    for r in runs {
        if !keys.contains(&r.frozen_index) {
            keys.push(r.frozen_index);
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&RunRecord> = runs.iter().filter(|r| r.frozen_index == k).collect();
            let ood: Vec<f64> = group.iter().map(|r| r.gen_error_ood).collect();
            let (mean, ci) = mean_ci95(&ood);
            AggregateRow {
                frozen_index: k,
                runs: group.len(),
                mean_gen_error_ood: mean,
                ci95_gen_error_ood: ci,
                mean_gen_error_id: group.iter().map(|r| r.gen_error_id).sum::<f64>()
                    / group.len() as f64,
                influence: group[0].influence,
            }
        })
        .collect()
}

/// Sample mean and Student-t 95% half-width.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let t = StudentsT::new(0.0, 1.0, m - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / m).sqrt())
}

pub const RUNS_HEADER: &str = "frozen_index,seed,steps,gen_error_ood,gen_error_id,influence,wall_time_s";
pub const TRAJECTORY_HEADER: &str = "step,subset_mask,coefficient";
pub const AGGREGATE_HEADER: &str =
    "frozen_index,runs,mean_gen_error_ood,ci95_gen_error_ood,mean_gen_error_id,influence";
pub const PLOT_HEADER: &str = "series,x,mean_gen_error_ood,ci95,influence";

/// One row of a plot-data file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub mean_gen_error_ood: f64,
    pub ci95: f64,
    pub influence: f64,
}

pub fn write_runs_csv<W: Write>(mut out: W, runs: &[RunRecord]) -> Result<()> {
    writeln!(out, "{RUNS_HEADER}")?;
    for r in runs {
        writeln!(
            out,
            "{},{},{},{:?},{:?},{:?},{:?}",
            r.frozen_index, r.seed, r.steps, r.gen_error_ood, r.gen_error_id, r.influence, r.wall_time_s
        )?;
    }
    Ok(())
}

/// Reads a runs CSV; trajectories are stored separately and come back empty.
pub fn read_runs_csv<R: BufRead>(input: R) -> Result<Vec<RunRecord>> {
    read_rows(input, RUNS_HEADER, |f| {
        Ok(RunRecord {
            frozen_index: parse(f[0])?,
            seed: parse(f[1])?,
            steps: parse(f[2])?,
            gen_error_ood: parse(f[3])?,
            gen_error_id: parse(f[4])?,
            influence: parse(f[5])?,
            coefficient_trajectory: vec![],
            wall_time_s: parse(f[6])?,
        })
    })
}

pub fn write_trajectory_csv<W: Write>(mut out: W, samples: &[CoefficientSample]) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for s in samples {
        writeln!(out, "{},{},{:?}", s.step, s.subset_mask, s.coefficient)?;
    }
    Ok(())
}

pub fn read_trajectory_csv<R: BufRead>(input: R) -> Result<Vec<CoefficientSample>> {
    read_rows(input, TRAJECTORY_HEADER, |f| {
        Ok(CoefficientSample {
            step: parse(f[0])?,
            subset_mask: parse(f[1])?,
            coefficient: parse(f[2])?,
        })
    })
}

pub fn write_aggregate_csv<W: Write>(mut out: W, rows: &[AggregateRow]) -> Result<()> {
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?}",
            r.frozen_index,
            r.runs,
            r.mean_gen_error_ood,
            r.ci95_gen_error_ood,
            r.mean_gen_error_id,
            r.influence
        )?;
    }
    Ok(())
}

pub fn read_aggregate_csv<R: BufRead>(input: R) -> Result<Vec<AggregateRow>> {
    read_rows(input, AGGREGATE_HEADER, |f| {
        Ok(AggregateRow {
            frozen_index: parse(f[0])?,
            runs: parse(f[1])?,
            mean_gen_error_ood: parse(f[2])?,
            ci95_gen_error_ood: parse(f[3])?,
            mean_gen_error_id: parse(f[4])?,
            influence: parse(f[5])?,
        })
    })
}

pub fn write_plot_csv<W: Write>(mut out: W, points: &[PlotPoint]) -> Result<()> {
    writeln!(out, "{PLOT_HEADER}")?;
    for p in points {
        if p.series.contains(',') || p.series.contains('\n') {
            return Err(Error::InvalidArgument(format!(
                "series name `{}` contains a separator",
                p.series
            )));
        }
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?}",
            p.series, p.x, p.mean_gen_error_ood, p.ci95, p.influence
        )?;
    }
    Ok(())
}

pub fn read_plot_csv<R: BufRead>(input: R) -> Result<Vec<PlotPoint>> {
    read_rows(input, PLOT_HEADER, |f| {
        Ok(PlotPoint {
            series: f[0].to_string(),
            x: parse(f[1])?,
            mean_gen_error_ood: parse(f[2])?,
            ci95: parse(f[3])?,
            influence: parse(f[4])?,
        })
    })
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad field `{s}`")))
}

fn read_rows<R: BufRead, T>(
    input: R,
    header: &str,
    mut row: impl FnMut(&[&str]) -> Result<T>,
) -> Result<Vec<T>> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))??;
    if first.trim_end() != header {
        return Err(Error::Parse(format!("unexpected header `{first}`")));
    }
    let width = header.split(',').count();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {width}",
                i + 2,
                fields.len()
            )));
        }
        out.push(row(&fields)?);
    }
    Ok(out)
}
