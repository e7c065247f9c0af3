//! Error metrics, histograms, training-curve exports and the comparison
//! report.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{Dataset, NormalizationMap};
use crate::error::{Error, Result};
use crate::mlp::{MlpModel, TrainRecord};
use crate::rbf::{RbfModel, RbfTrainRecord};

/// Either trained network, evaluated through one interface.
#[derive(Debug, Clone, Copy)]
pub enum Surrogate<'a> {
    Mlp(&'a MlpModel),
    Rbf(&'a RbfModel),
}

impl Surrogate<'_> {
    pub fn predict(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        match self {
            Surrogate::Mlp(m) => {
                let y = m.forward(x)?;
                <[f64; 3]>::try_from(y.as_slice())
                    .map_err(|_| Error::Shape(format!("model has {} outputs, expected 3", y.len())))
            }
            Surrogate::Rbf(m) => m.forward(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mse: f64,
    pub per_output_mse: [f64; 3],
    pub max_abs_error: f64,
    pub n: usize,
    /// `target - output`, row-major over samples then outputs.
    pub errors: Vec<f64>,
}

impl EvalResult {
    pub fn to_text(&self) -> String {
        format!(
            "n = {}\nmse = {:.6e}\nmse_q1 = {:.6e}\nmse_q2 = {:.6e}\nmse_q3 = {:.6e}\nmax_abs_error = {:.6e}\n",
            self.n,
            self.mse,
            self.per_output_mse[0],
            self.per_output_mse[1],
            self.per_output_mse[2],
            self.max_abs_error
        )
    }
}

/// Runs the model over every row of `ds`.
///
/// With a map, `ds` is taken to be in normalized space: the outputs and
/// targets are both denormalized before the errors are formed, so the
/// result is in real units.
pub fn evaluate(model: Surrogate<'_>, ds: &Dataset, map: Option<&NormalizationMap>) -> Result<EvalResult> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    let mut errors = Vec::with_capacity(ds.len() * 3);
    let mut sums = [0.0; 3];
    for (x, t) in ds.inputs().iter().zip(ds.targets()) {
        let mut y = model.predict(x)?;
        let mut t = *t;
        if let Some(map) = map {
            y = map.denormalize_target(&y);
            t = map.denormalize_target(&t);
        }
        for k in 0..3 {
            let e = t[k] - y[k];
            sums[k] += e * e;
            errors.push(e);
        }
    }
    let n = ds.len();
    let per_output_mse = sums.map(|s| s / n as f64);
    let max_abs_error = errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if !max_abs_error.is_finite() {
        return Err(Error::Numerical("non-finite prediction error".into()));
    }
    Ok(EvalResult {
        mse: per_output_mse.iter().sum::<f64>() / 3.0,
        per_output_mse,
        max_abs_error,
        n,
        errors,
    })
}

/// Share of `errors` with magnitude strictly below `threshold`.
pub fn fraction_below(errors: &[f64], threshold: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors.iter().filter(|e| e.abs() < threshold).count() as f64 / errors.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorHistogram {
    /// `counts.len() + 1` ascending edges.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

pub const DEFAULT_BINS: usize = 20;

/// Uniform bins over `[min, max]` of the values; the maximum lands in the
/// last bin. When every value is equal the range is widened to `v +- 0.5`.
pub fn histogram(values: &[f64], num_bins: usize) -> Result<ErrorHistogram> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("histogram of no values".into()));
    }
    if num_bins == 0 {
        return Err(Error::InvalidArgument("num_bins must be >= 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in histogram input".into()));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / num_bins as f64;
    let bin_edges: Vec<f64> = (0..=num_bins)
        .map(|i| if i == num_bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0; num_bins];
    for &v in values {
        let idx = (((v - lo) / width).floor() as usize).min(num_bins - 1);
        counts[idx] += 1;
    }
    Ok(ErrorHistogram {
        bin_edges,
        counts,
        total: values.len(),
    })
}

impl ErrorHistogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{:.16e},{}", self.bin_edges[i], self.bin_edges[i + 1], c);
        }
        s
    }
}

/// One row of a training curve, shared by both trainers.
pub trait CurvePoint {
    fn step(&self) -> usize;
    fn mse_train(&self) -> f64;
    fn mse_validation(&self) -> Option<f64>;
}

impl CurvePoint for TrainRecord {
    fn step(&self) -> usize {
        self.epoch
    }
    fn mse_train(&self) -> f64 {
        self.mse_train
    }
    fn mse_validation(&self) -> Option<f64> {
        self.mse_validation
    }
}

impl CurvePoint for RbfTrainRecord {
    fn step(&self) -> usize {
        self.neurons
    }
    fn mse_train(&self) -> f64 {
        self.mse_train
    }
    fn mse_validation(&self) -> Option<f64> {
        None
    }
}

/// CSV text `epoch,mse_train[,mse_validation]`; the validation column is
/// present only when every record carries one.
pub fn training_curve_csv<P: CurvePoint>(history: &[P]) -> Result<String> {
    if history.is_empty() {
        return Err(Error::InvalidArgument("empty training history".into()));
    }
    let with_val = history.iter().all(|r| r.mse_validation().is_some());
    let mut s = String::from(if with_val {
        "epoch,mse_train,mse_validation\n"
    } else {
        "epoch,mse_train\n"
    });
    for r in history {
        let _ = write!(s, "{},{:.16e}", r.step(), r.mse_train());
        if let (true, Some(v)) = (with_val, r.mse_validation()) {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn export_training_curve<P: CurvePoint>(history: &[P], path: impl AsRef<Path>) -> Result<()> {
    let text = training_curve_csv(history)?;
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledResult {
    pub model: String,
    pub space: String,
    pub result: EvalResult,
}

impl LabeledResult {
    pub fn passes(&self, goal_mse: f64) -> bool {
        self.result.mse <= goal_mse
    }
}

/// Plain-text table, one row per result, with a verdict against `goal_mse`.
pub fn compare_report_text(results: &[LabeledResult], goal_mse: f64) -> Result<String> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to report".into()));
    }
    let mut s = format!("goal mse: {goal_mse:.3e}\n");
    let _ = writeln!(
        s,
        "{:<6} {:<11} {:>8} {:>14} {:>14} {:>12} {:>7}",
        "model", "space", "n", "mse", "max_abs_err", "|e|<1e-4", "verdict"
    );
    for r in results {
        let _ = writeln!(
            s,
            "{:<6} {:<11} {:>8} {:>14.6e} {:>14.6e} {:>11.2}% {:>7}",
            r.model,
            r.space,
            r.result.n,
            r.result.mse,
            r.result.max_abs_error,
            100.0 * fraction_below(&r.result.errors, 1e-4),
            if r.passes(goal_mse) { "PASS" } else { "FAIL" }
        );
    }
    Ok(s)
}

/// Writes [`compare_report_text`] to `path` and returns whether every row
/// passed.
pub fn compare_report(results: &[LabeledResult], goal_mse: f64, path: impl AsRef<Path>) -> Result<bool> {
    let text = compare_report_text(results, goal_mse)?;
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(results.iter().all(|r| r.passes(goal_mse)))
}
