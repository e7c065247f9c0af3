//! Fully connected perceptron with sigmoid hidden layers and a
//! Levenberg-Marquardt trainer.
//!
//! Parameters are flattened in a fixed order: layer by layer, each layer's
//! weight matrix row-major (`out x in`) followed by its bias vector. The
//! columns of [`jacobian`] and the serialized parameter list both use it.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::parse_f64;
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

pub fn tansig(v: f64) -> f64 {
    v.tanh()
}

pub fn logsig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tansig,
    Logsig,
    Linear,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tansig => tansig(v),
            Activation::Logsig => logsig(v),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tansig => 1.0 - y * y,
            Activation::Logsig => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tansig" => Ok(Activation::Tansig),
            "logsig" => Ok(Activation::Logsig),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tansig => "tansig",
            Activation::Logsig => "logsig",
            Activation::Linear => "linear",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
    /// Per layer, row-major `out x in`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "need at least two layers of size >= 1, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl MlpModel {
    /// Weights uniform in `[-0.5, 0.5]` from a seeded stream, biases zero.
    /// The output layer is linear.
    pub fn init(layer_sizes: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-0.5, 0.5);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            weights.push((0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            hidden,
            output: Activation::Linear,
            weights,
            biases,
        })
    }

    pub fn with_output_activation(mut self, output: Activation) -> Self {
        self.output = output;
        self
    }

    /// Builds a model from a flat parameter vector in canonical order.
    pub fn from_params(
        layer_sizes: &[usize],
        hidden: Activation,
        output: Activation,
        params: &[f64],
    ) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut model = MlpModel {
            layer_sizes: layer_sizes.to_vec(),
            hidden,
            output,
            weights: layer_sizes.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        };
        model.set_params(params)?;
        Ok(model)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        let mut rest = params;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (head, tail) = rest.split_at(w.len());
            w.copy_from_slice(head);
            let (head, tail) = tail.split_at(b.len());
            b.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Outputs of every layer, input included.
    fn layer_outputs(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has length {}, model expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut outs = Vec::with_capacity(self.layer_sizes.len());
        outs.push(input.to_vec());
        for layer in 0..self.weights.len() {
            let act = self.activation(layer);
            let prev = &outs[layer];
            let fan_in = prev.len();
            let w = &self.weights[layer];
            let next: Vec<f64> = self.biases[layer]
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let row = &w[i * fan_in..(i + 1) * fan_in];
                    let v = row.iter().zip(prev).map(|(a, x)| a * x).sum::<f64>() + b;
                    act.apply(v)
                })
                .collect();
            outs.push(next);
        }
        Ok(outs)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.layer_outputs(input)?.pop().unwrap())
    }

    /// Writes `d output_k / d params` for one sample into `rows`
    /// (`output_dim` rows of `num_params` each, row-major).
    fn output_gradients(&self, outs: &[Vec<f64>], rows: &mut [f64]) {
        let p = self.num_params();
        let n_layers = self.weights.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            offsets.push(acc);
            acc += w.len() + b.len();
        }
        for k in 0..self.output_dim() {
            let row = &mut rows[k * p..(k + 1) * p];
            let out_act = self.activation(n_layers - 1);
            let mut delta = vec![0.0; self.output_dim()];
            delta[k] = out_act.slope(outs[n_layers][k]);
            for layer in (0..n_layers).rev() {
                let prev = &outs[layer];
                let fan_in = prev.len();
                let base = offsets[layer];
                let w_len = self.weights[layer].len();
                for (i, d) in delta.iter().enumerate() {
                    for (j, x) in prev.iter().enumerate() {
                        row[base + i * fan_in + j] = d * x;
                    }
                    row[base + w_len + i] = *d;
                }
                if layer == 0 {
                    break;
                }
                let act = self.activation(layer - 1);
                let w = &self.weights[layer];
                delta = (0..fan_in)
                    .map(|j| {
                        let s: f64 = delta.iter().enumerate().map(|(i, d)| w[i * fan_in + j] * d).sum();
                        s * act.slope(prev[j])
                    })
                    .collect();
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MODEL_HEADER}\n");
        let sizes: Vec<String> = self.layer_sizes.iter().map(|n| n.to_string()).collect();
        s.push_str(&format!("layers {}\n", sizes.join(" ")));
        s.push_str(&format!("hidden {}\n", self.hidden));
        s.push_str(&format!("output {}\n", self.output));
        let params = self.params();
        s.push_str(&format!("params {}\n", params.len()));
        for v in params {
            s.push_str(&format!("{v:.16e}\n"));
        }
        s
    }

    /// Parses a model from `(line number, text)` pairs, consuming exactly
    /// the model block.
    pub fn from_lines<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<Self> {
        let mut next = || {
            lines.next().ok_or(Error::Parse {
                line: 0,
                message: "unexpected end of model".into(),
            })
        };
        let (line, header) = next()?;
        if header.trim() != MODEL_HEADER {
            return Err(Error::Parse {
                line,
                message: format!("expected `{MODEL_HEADER}`"),
            });
        }
        let (line, text) = next()?;
        let sizes = keyed(text, "layers", line)?
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad layer size `{t}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (line, text) = next()?;
        let hidden = keyed(text, "hidden", line)?.parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let (line, text) = next()?;
        let output = keyed(text, "output", line)?.parse().map_err(|e: Error| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let (line, text) = next()?;
        let count: usize = keyed(text, "params", line)?.parse().map_err(|_| Error::Parse {
            line,
            message: "bad parameter count".into(),
        })?;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, text) = next()?;
            params.push(parse_f64(text, line)?);
        }
        MlpModel::from_params(&sizes, hidden, output, &params)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        MlpModel::from_lines(&mut lines)
    }
}

const MODEL_HEADER: &str = "tricept-mlp 1";

pub(crate) fn keyed<'a>(text: &'a str, key: &str, line: usize) -> Result<&'a str> {
    text.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `{key} ...`"),
        })
}

/// Inputs and targets of one batch, row per sample.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a, R> {
    pub inputs: &'a [R],
    pub targets: &'a [R],
}

impl<'a, R: AsRef<[f64]>> Batch<'a, R> {
    pub fn new(inputs: &'a [R], targets: &'a [R]) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Batch { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Jacobian of the error vector `target - output` with respect to the
/// parameters, plus the error vector itself.
///
/// Row `s * out + k` belongs to output `k` of sample `s`; columns follow the
/// canonical parameter order.
pub fn jacobian<R: AsRef<[f64]>>(model: &MlpModel, batch: &Batch<'_, R>) -> Result<(Matrix, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let out_dim = model.output_dim();
    let p = model.num_params();
    let rows = batch.len() * out_dim;
    let mut data = vec![0.0; rows * p];
    let mut errors = Vec::with_capacity(rows);
    for (s, (x, t)) in batch.inputs.iter().zip(batch.targets).enumerate() {
        let t = t.as_ref();
        if t.len() != out_dim {
            return Err(Error::Shape(format!(
                "target has length {}, model outputs {out_dim}",
                t.len()
            )));
        }
        let outs = model.layer_outputs(x.as_ref())?;
        let y = outs.last().unwrap();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite output for sample {s}")));
        }
        let block = &mut data[s * out_dim * p..(s + 1) * out_dim * p];
        model.output_gradients(&outs, block);
        // de/dw = -dy/dw
        block.iter_mut().for_each(|v| *v = -*v);
        errors.extend(t.iter().zip(y).map(|(t, y)| t - y));
    }
    let j = DMatrix::from_row_slice(rows, p, &data);
    Ok((Matrix::from_nalgebra(j), errors))
}

/// Mean of all squared entries of `outputs - targets`.
pub fn mse<R: AsRef<[f64]>>(outputs: &[R], targets: &[R]) -> Result<f64> {
    if outputs.len() != targets.len() || outputs.is_empty() {
        return Err(Error::Shape(format!(
            "{} outputs vs {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (o, t) in outputs.iter().zip(targets) {
        let (o, t) = (o.as_ref(), t.as_ref());
        if o.len() != t.len() {
            return Err(Error::Shape(format!("row widths {} vs {}", o.len(), t.len())));
        }
        sum += o.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += o.len();
    }
    Ok(sum / count as f64)
}

pub fn batch_mse<R: AsRef<[f64]>>(model: &MlpModel, batch: &Batch<'_, R>) -> Result<f64> {
    let outputs = batch
        .inputs
        .iter()
        .map(|x| model.forward(x.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<&[f64]> = batch.targets.iter().map(|t| t.as_ref()).collect();
    let outputs: Vec<&[f64]> = outputs.iter().map(|o| o.as_slice()).collect();
    mse(&outputs, &targets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_epochs: usize,
    /// Training stops once the training MSE is at or below this.
    pub goal_mse: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_max: f64,
    /// Consecutive epochs without a new best validation MSE before stopping.
    pub max_validation_failures: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_epochs: 222,
            goal_mse: 1e-3,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            lambda_max: 1e10,
            max_validation_failures: 6,
        }
    }
}

impl LmOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_epochs", self.max_epochs as f64),
            ("lambda_init", self.lambda_init),
            ("lambda_max", self.lambda_max),
            ("max_validation_failures", self.max_validation_failures as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.goal_mse >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "goal_mse must be >= 0, got {}",
                self.goal_mse
            )));
        }
        if !(self.lambda_up > 1.0 && self.lambda_up.is_finite()) {
            return Err(Error::InvalidArgument("lambda_up must be > 1".into()));
        }
        if !(self.lambda_down > 0.0 && self.lambda_down < 1.0) {
            return Err(Error::InvalidArgument("lambda_down must be in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub mse_train: f64,
    pub mse_validation: Option<f64>,
    /// Damping after the epoch's update.
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    Goal,
    LambdaOverflow,
    ValidationFailures,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Snapshot with the best validation MSE, or the last accepted one when
    /// no validation set was supplied.
    pub model: MlpModel,
    pub history: Vec<TrainRecord>,
    pub stop: StopReason,
}

/// Full-batch Levenberg-Marquardt.
///
/// Each epoch solves `(J^T J + lambda I) delta = J^T e` and retries with a
/// larger `lambda` until the training MSE drops; an accepted step shrinks
/// `lambda`. Only epochs with an accepted step are recorded, so the recorded
/// training MSE is strictly decreasing.
pub fn train_lm<R: AsRef<[f64]>>(
    model: &MlpModel,
    train: &Batch<'_, R>,
    validation: Option<&Batch<'_, R>>,
    opts: &LmOptions,
) -> Result<TrainOutcome> {
    opts.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let validation = validation.filter(|v| !v.is_empty());

    let mut current = model.clone();
    let mut params = current.params();
    let mut lambda = opts.lambda_init;
    let mut history = Vec::new();
    let mut current_mse = batch_mse(&current, train)?;

    let mut best: Option<(f64, MlpModel)> = match validation {
        Some(v) => Some((batch_mse(&current, v)?, current.clone())),
        None => None,
    };
    let mut failures = 0;
    let mut stop = StopReason::MaxEpochs;

    for epoch in 1..=opts.max_epochs {
        let (j, e) = jacobian(&current, train)?;
        let jn = j.as_nalgebra();
        let jtj = Matrix::from_nalgebra(jn.tr_mul(jn));
        let jte: Vec<f64> = jn.tr_mul(&nalgebra::DVector::from_column_slice(&e)).as_slice().to_vec();

        let mut accepted = None;
        while lambda <= opts.lambda_max {
            let delta = numerics::solve_spd(&jtj, &jte, lambda)?;
            let trial_params: Vec<f64> = params.iter().zip(&delta).map(|(w, d)| w - d).collect();
            if trial_params.iter().all(|v| v.is_finite()) {
                let mut trial = current.clone();
                trial.set_params(&trial_params)?;
                let trial_mse = batch_mse(&trial, train)?;
                if trial_mse < current_mse {
                    accepted = Some((trial, trial_params, trial_mse));
                    break;
                }
            }
            lambda *= opts.lambda_up;
        }

        let Some((next, next_params, next_mse)) = accepted else {
            if history.is_empty() {
                return Err(Error::TrainingStalled(format!(
                    "lambda exceeded {:e} before any step was accepted",
                    opts.lambda_max
                )));
            }
            stop = StopReason::LambdaOverflow;
            break;
        };
        current = next;
        params = next_params;
        current_mse = next_mse;
        lambda *= opts.lambda_down;

        let val_mse = match validation {
            Some(v) => Some(batch_mse(&current, v)?),
            None => None,
        };
        history.push(TrainRecord {
            epoch,
            mse_train: current_mse,
            mse_validation: val_mse,
            lambda,
        });

        if let (Some(vm), Some((best_mse, best_model))) = (val_mse, best.as_mut()) {
            if vm < *best_mse {
                *best_mse = vm;
                *best_model = current.clone();
                failures = 0;
            } else {
                failures += 1;
            }
        }
        if current_mse <= opts.goal_mse {
            stop = StopReason::Goal;
            break;
        }
        if failures >= opts.max_validation_failures {
            stop = StopReason::ValidationFailures;
            break;
        }
    }

    let model = match best {
        Some((_, m)) => m,
        None => current,
    };
    Ok(TrainOutcome {
        model,
        history,
        stop,
    })
}
