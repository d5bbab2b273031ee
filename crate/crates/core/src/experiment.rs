//! Experiment harness: evaluation reports, cross-validation for the radius,
//! unfairness/accuracy frontier sweeps, and runtime benchmarking.

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{apply_scaler, gen_synthetic, standardize, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{eo_unfairness, Hyperplane};
use crate::reformulate::{build, ModelSpec, Variant};
use crate::solve::{extract_hyperplane, solve, SolveOptions, SolveResult, Status};

/// Test-set report for a trained classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub eo_unfairness: f64,
}

/// Scores a classifier on held-out data. Requires positives in both groups
/// so the true-positive rates are defined.
///
/// Accuracy here follows the prediction rule (score >= 0 reads +1), so a
/// boundary sample with label +1 counts as correct — consistent with the
/// true-positive rates in the unfairness measure. The strict-boundary
/// counterpart used by the worst-case evaluators lives in the metrics
/// module.
pub fn evaluate(h: &Hyperplane, test: &Dataset) -> Result<EvalReport> {
    crate::data::group_index(test).require_positive_groups()?;
    let mut correct = 0usize;
    for i in 0..test.n() {
        if crate::metrics::predict(h, test.row(i))? == test.label(i) {
            correct += 1;
        }
    }
    Ok(EvalReport {
        accuracy: correct as f64 / test.n() as f64,
        eo_unfairness: eo_unfairness(h, test)?,
    })
}

/// Builds and solves the program for `spec` on `data`, returning the
/// trained hyperplane alongside the full solve result.
pub fn train(data: &Dataset, spec: &ModelSpec, options: &SolveOptions) -> Result<(Hyperplane, SolveResult)> {
    let program = build(data, spec)?;
    let res = solve(&program, options.clone())?;
    match res.status {
        Status::Optimal | Status::GapLimit => {}
        Status::Infeasible => {
            return Err(Error::InfeasibleSpec(format!("{:?} is infeasible on this data", spec.variant)))
        }
        other => return Err(Error::NumericalFailure(format!("solver returned {other:?}"))),
    }
    let h = extract_hyperplane(&res, &program)?;
    Ok((h, res))
}

/// The parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Eta,
    Zeta,
    Rho,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Eta => "eta",
            SweepParam::Zeta => "zeta",
            SweepParam::Rho => "rho",
        }
    }

    /// Overwrites the swept field in a spec template.
    pub fn apply(self, spec: &mut ModelSpec, value: f64) {
        match self {
            SweepParam::Eta => spec.eta = Some(value),
            SweepParam::Zeta => spec.zeta = Some(value),
            SweepParam::Rho => spec.rho = value,
        }
    }
}

/// A frontier sweep: one axis of parameter values, one seed per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::DomainError("sweep grid has no values".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::DomainError("sweep grid has no seeds".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::DomainError("sweep grid values must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// One averaged point of the unfairness/accuracy frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub param: String,
    pub value: f64,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub mean_unf: f64,
    pub std_unf: f64,
    pub trials: usize,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Offset separating the train and test streams of one trial seed.
const TEST_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// One sweep trial: draw fresh train/test sets from the trial seed, train
/// with the swept value substituted into the template, score on the test
/// set. The test set uses a seed offset so it never overlaps the train
/// stream.
pub fn sweep_trial(
    template: &ModelSpec,
    param: SweepParam,
    value: f64,
    seed: u64,
    n_train: usize,
    n_test: usize,
    options: &SolveOptions,
) -> Result<EvalReport> {
    let train_raw = gen_synthetic(n_train, seed);
    let test_raw = gen_synthetic(n_test, seed.wrapping_add(TEST_SEED_OFFSET));
    let (train_std, scaler) = standardize(&train_raw);
    let test_std = apply_scaler(&test_raw, &scaler);
    let mut spec = template.clone();
    param.apply(&mut spec, value);
    let (h, _) = train(&train_std, &spec, options)?;
    evaluate(&h, &test_std)
}

/// Sweeps the grid over fresh synthetic draws, one trial per seed, and
/// averages the test metrics per grid value. Failed trials are dropped
/// from their point's average and the point reports the reduced count.
pub fn pareto_sweep(
    template: &ModelSpec,
    grid: &SweepGrid,
    n_train: usize,
    n_test: usize,
    options: &SolveOptions,
) -> Result<Vec<FrontierPoint>> {
    grid.validate()?;
    let mut points = Vec::with_capacity(grid.values.len());
    for &value in &grid.values {
        let mut accs = Vec::new();
        let mut unfs = Vec::new();
        for (trial, &seed) in grid.seeds.iter().enumerate() {
            match sweep_trial(template, grid.parameter, value, seed, n_train, n_test, options) {
                Ok(report) => {
                    accs.push(report.accuracy);
                    unfs.push(report.eo_unfairness);
                }
                Err(e) => {
                    eprintln!(
                        "warning: sweep trial {trial} (seed {seed}) at {}={value} failed: {e}",
                        grid.parameter.name()
                    );
                }
            }
        }
        if accs.is_empty() {
            return Err(Error::NumericalFailure(format!(
                "all {} trials failed at {}={value}",
                grid.seeds.len(),
                grid.parameter.name()
            )));
        }
        let (mean_acc, std_acc) = mean_std(&accs);
        let (mean_unf, std_unf) = mean_std(&unfs);
        points.push(FrontierPoint {
            param: grid.parameter.name().to_string(),
            value,
            mean_acc,
            std_acc,
            mean_unf,
            std_unf,
            trials: accs.len(),
        });
    }
    Ok(points)
}

/// Writes frontier points in the plot-ready CSV layout.
pub fn write_frontier_csv(path: &Path, points: &[FrontierPoint]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "param,value,mean_acc,std_acc,mean_unf,std_unf,trials").expect("vec write");
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.param, p.value, p.mean_acc, p.std_acc, p.mean_unf, p.std_unf, p.trials
        )
        .expect("vec write");
    }
    atomic_write(path, &out)
}

/// Writes bytes via a temp file in the destination directory plus rename,
/// so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Picks the radius with the highest average (accuracy - weight x
/// unfairness) validation score over `k1` random sub-splits of `data`.
/// Ties go to the smaller radius (the earlier grid entry). A radius is
/// disqualified when more than half of its folds fail.
pub fn cross_validate(
    data: &Dataset,
    template: &ModelSpec,
    rho_grid: &[f64],
    k1: usize,
    subtrain_n: usize,
    score_weight: f64,
    seed: u64,
    options: &SolveOptions,
) -> Result<f64> {
    if rho_grid.is_empty() {
        return Err(Error::DomainError("cross-validation grid is empty".into()));
    }
    if k1 == 0 {
        return Err(Error::DomainError("cross-validation needs at least one repeat".into()));
    }
    if subtrain_n < 2 || subtrain_n + 2 > data.n() {
        return Err(Error::DomainError(format!(
            "sub-training size {subtrain_n} leaves no validation data (N = {})",
            data.n()
        )));
    }
    // Draw the K1 sub-splits once so every radius sees identical folds.
    let mut folds = Vec::with_capacity(k1);
    for k in 0..k1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut order: Vec<usize> = (0..data.n()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut sub: Vec<usize> = order[..subtrain_n].to_vec();
        let mut val: Vec<usize> = order[subtrain_n..].to_vec();
        sub.sort_unstable();
        val.sort_unstable();
        let sub_raw = data.subset(&sub);
        let val_raw = data.subset(&val);
        let (sub_std, scaler) = standardize(&sub_raw);
        let val_std = apply_scaler(&val_raw, &scaler);
        folds.push((sub_std, val_std));
    }

    let mut best: Option<(usize, f64)> = None;
    for (gi, &rho) in rho_grid.iter().enumerate() {
        let mut scores = Vec::new();
        for (k, (sub, val)) in folds.iter().enumerate() {
            let mut spec = template.clone();
            spec.rho = rho;
            let report = train(sub, &spec, options).and_then(|(h, _)| evaluate(&h, val));
            match report {
                Ok(r) => scores.push(r.accuracy - score_weight * r.eo_unfairness),
                Err(e) => eprintln!("warning: cv fold {k} at rho={rho} failed: {e}"),
            }
        }
        if 2 * scores.len() < k1 {
            eprintln!(
                "warning: rho={rho} disqualified ({} of {k1} folds succeeded)",
                scores.len()
            );
            continue;
        }
        let score = scores.iter().sum::<f64>() / scores.len() as f64;
        // Strict improvement only: ties keep the earlier (smaller) radius.
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((gi, score));
        }
    }
    match best {
        Some((gi, _)) => Ok(rho_grid[gi]),
        None => Err(Error::NumericalFailure("every radius was disqualified".into())),
    }
}

/// One runtime measurement row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub n: usize,
    pub variant: String,
    pub seconds: f64,
    pub status: String,
}

fn variant_name(v: Variant) -> String {
    // The serde rename already defines the kebab-case surface names.
    serde_json::to_value(v)
        .expect("variant serializes")
        .as_str()
        .expect("variant is a string")
        .to_string()
}

/// Times build + solve on synthetic draws of each size, reporting the
/// median of three runs per (size, variant). Duplicate sizes produce
/// duplicate rows.
pub fn benchmark_runtime(
    sizes: &[usize],
    variants: &[ModelSpec],
    seed: u64,
    options: &SolveOptions,
) -> Result<Vec<BenchRow>> {
    if sizes.iter().any(|&n| n < 50) {
        return Err(Error::DomainError("benchmark sizes must be at least 50".into()));
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let raw = gen_synthetic(n, seed);
        let (data, _) = standardize(&raw);
        for spec in variants {
            let mut times = Vec::with_capacity(3);
            let mut status = String::new();
            for _ in 0..3 {
                let start = std::time::Instant::now();
                let program = build(&data, spec)?;
                let res = solve(&program, options.clone())?;
                times.push(start.elapsed().as_secs_f64());
                status = format!("{:?}", res.status);
            }
            times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
            rows.push(BenchRow {
                dataset: "synthetic".into(),
                n,
                variant: variant_name(spec.variant),
                seconds: times[1],
                status,
            });
        }
    }
    Ok(rows)
}

/// Writes benchmark rows in the documented CSV layout.
pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "dataset,N,variant,seconds,status").expect("vec write");
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.dataset, r.n, r.variant, r.seconds, r.status)
            .expect("vec write");
    }
    atomic_write(path, &out)
}
