//! Gaussian radial basis function network grown one center at a time.
//!
//! All neurons share one width. The user-facing `spread` maps to the Gaussian
//! exponent through `beta = ln 2 / spread^2`, so a basis function is exactly
//! one half at a distance of one spread from its center. The common
//! alternative `beta = (0.8326 / spread)^2` is the same rule with `sqrt(ln 2)`
//! rounded to four decimals.

use rayon::prelude::*;

use crate::dataset::parse_f64;
use crate::error::{Error, Result};
use crate::mlp::keyed;
use crate::numerics::{self, Matrix};

pub fn spread_to_beta(spread: f64) -> Result<f64> {
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!("spread must be > 0, got {spread}")));
    }
    Ok(std::f64::consts::LN_2 / (spread * spread))
}

fn dist2(x: &[f64; 3], c: &[f64; 3]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-beta * |x - center|^2)`.
pub fn gaussian(x: &[f64; 3], center: &[f64; 3], beta: f64) -> f64 {
    (-beta * dist2(x, center)).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfModel {
    spread: f64,
    beta: f64,
    use_bias: bool,
    centers: Vec<[f64; 3]>,
    /// One row per center, one column per output.
    weights: Vec<[f64; 3]>,
    bias: [f64; 3],
    trained: bool,
}

impl RbfModel {
    /// Untrained model with the given width; [`RbfModel::forward`] fails
    /// until centers and weights are set.
    pub fn new(spread: f64, use_bias: bool) -> Result<Self> {
        Ok(RbfModel {
            spread,
            beta: spread_to_beta(spread)?,
            use_bias,
            centers: Vec::new(),
            weights: Vec::new(),
            bias: [0.0; 3],
            trained: false,
        })
    }

    pub fn from_parts(
        spread: f64,
        use_bias: bool,
        centers: Vec<[f64; 3]>,
        weights: Vec<[f64; 3]>,
        bias: [f64; 3],
    ) -> Result<Self> {
        let mut model = RbfModel::new(spread, use_bias)?;
        model.set_fit(centers, weights, bias)?;
        Ok(model)
    }

    fn set_fit(&mut self, centers: Vec<[f64; 3]>, weights: Vec<[f64; 3]>, bias: [f64; 3]) -> Result<()> {
        if centers.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} centers but {} weight rows",
                centers.len(),
                weights.len()
            )));
        }
        let finite = |r: &[f64; 3]| r.iter().all(|v| v.is_finite());
        if !(centers.iter().all(finite) && weights.iter().all(finite) && finite(&bias)) {
            return Err(Error::Numerical("non-finite RBF parameter".into()));
        }
        if !self.use_bias && bias != [0.0; 3] {
            return Err(Error::InvalidArgument("bias must be zero in no-bias mode".into()));
        }
        self.centers = centers;
        self.weights = weights;
        self.bias = bias;
        self.trained = true;
        Ok(())
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    pub fn bias(&self) -> [f64; 3] {
        self.bias
    }

    pub fn num_neurons(&self) -> usize {
        self.centers.len()
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn forward(&self, x: &[f64; 3]) -> Result<[f64; 3]> {
        if !self.trained {
            return Err(Error::NotTrained);
        }
        let mut y = self.bias;
        for (c, w) in self.centers.iter().zip(&self.weights) {
            let g = gaussian(x, c, self.beta);
            for k in 0..3 {
                y[k] += w[k] * g;
            }
        }
        Ok(y)
    }

    pub fn to_text(&self) -> String {
        let triple = |v: &[f64; 3]| format!("{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
        let mut s = format!("{MODEL_HEADER}\n");
        s.push_str(&format!("spread {:.16e}\n", self.spread));
        s.push_str(&format!("beta {:.16e}\n", self.beta));
        s.push_str(&format!("use_bias {}\n", self.use_bias));
        s.push_str(&format!("centers {}\n", self.centers.len()));
        for c in &self.centers {
            s.push_str(&triple(c));
            s.push('\n');
        }
        s.push_str("weights\n");
        for w in &self.weights {
            s.push_str(&triple(w));
            s.push('\n');
        }
        s.push_str(&format!("bias {}\n", triple(&self.bias)));
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
        let spread = parse_f64(keyed(text, "spread", line)?, line)?;
        let (line, text) = next()?;
        let beta = parse_f64(keyed(text, "beta", line)?, line)?;
        let (line, text) = next()?;
        let use_bias = match keyed(text, "use_bias", line)? {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("bad use_bias `{other}`"),
                })
            }
        };
        let (line, text) = next()?;
        let n: usize = keyed(text, "centers", line)?.parse().map_err(|_| Error::Parse {
            line,
            message: "bad center count".into(),
        })?;
        let mut centers = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, text) = next()?;
            centers.push(parse_triple(text, line)?);
        }
        let (line, text) = next()?;
        if text.trim() != "weights" {
            return Err(Error::Parse {
                line,
                message: "expected `weights`".into(),
            });
        }
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, text) = next()?;
            weights.push(parse_triple(text, line)?);
        }
        let (line, text) = next()?;
        let bias = parse_triple(keyed(text, "bias", line)?, line)?;

        let model = RbfModel::from_parts(spread, use_bias, centers, weights, bias).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if model.beta != beta {
            return Err(Error::Parse {
                line: 0,
                message: format!("beta {beta:e} does not match spread {spread:e}"),
            });
        }
        Ok(model)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        RbfModel::from_lines(&mut lines)
    }
}

const MODEL_HEADER: &str = "tricept-rbf 1";

fn parse_triple(text: &str, line: usize) -> Result<[f64; 3]> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line,
            message: format!("expected 3 values, found {}", parts.len()),
        });
    }
    Ok([
        parse_f64(parts[0], line)?,
        parse_f64(parts[1], line)?,
        parse_f64(parts[2], line)?,
    ])
}

/// How the next center is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selection {
    /// Orthogonal least squares: each candidate column is orthogonalized
    /// against the current basis and scored by the error reduction it buys.
    #[default]
    Orthogonal,
    /// Refit the full least-squares problem for every candidate. Quadratic
    /// in the sample count per step; meant for small data.
    ExhaustiveRefit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfOptions {
    pub max_neurons: usize,
    pub spread: f64,
    /// Growth stops once the training MSE is at or below this.
    pub goal_mse: f64,
    pub use_bias: bool,
    pub selection: Selection,
}

impl Default for RbfOptions {
    fn default() -> Self {
        RbfOptions {
            max_neurons: 20,
            spread: 2.0,
            goal_mse: 1e-3,
            use_bias: true,
            selection: Selection::Orthogonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfTrainRecord {
    pub neurons: usize,
    pub mse_train: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfOutcome {
    pub model: RbfModel,
    /// One record per added neuron. When the bias alone already meets the
    /// goal, a single record with zero neurons.
    pub history: Vec<RbfTrainRecord>,
}

/// Relative squared norm below which an orthogonalized candidate is treated
/// as already spanned by the basis.
const SPAN_TOL: f64 = 1e-12;

struct Fit {
    weights: Vec<[f64; 3]>,
    bias: [f64; 3],
    mse: f64,
}

fn design(inputs: &[[f64; 3]], centers: &[[f64; 3]], beta: f64, use_bias: bool) -> Matrix {
    let offset = usize::from(use_bias);
    Matrix::from_fn(inputs.len(), centers.len() + offset, |r, c| {
        if use_bias && c == 0 {
            1.0
        } else {
            gaussian(&inputs[r], &centers[c - offset], beta)
        }
    })
}

fn refit(inputs: &[[f64; 3]], targets: &Matrix, centers: &[[f64; 3]], beta: f64, use_bias: bool) -> Result<Fit> {
    let a = design(inputs, centers, beta, use_bias);
    let n = inputs.len();
    if a.cols() == 0 {
        let mse = targets.as_nalgebra().iter().map(|v| v * v).sum::<f64>() / (3 * n) as f64;
        return Ok(Fit {
            weights: Vec::new(),
            bias: [0.0; 3],
            mse,
        });
    }
    let x = numerics::least_squares(&a, targets)?;
    let resid = targets.as_nalgebra() - a.as_nalgebra() * x.as_nalgebra();
    let mse = resid.iter().map(|v| v * v).sum::<f64>() / (3 * n) as f64;
    let offset = usize::from(use_bias);
    let bias = if use_bias {
        [x.get(0, 0), x.get(0, 1), x.get(0, 2)]
    } else {
        [0.0; 3]
    };
    let weights = (0..centers.len())
        .map(|i| [x.get(i + offset, 0), x.get(i + offset, 1), x.get(i + offset, 2)])
        .collect();
    Ok(Fit { weights, bias, mse })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Subtracts the projection onto each (orthonormal) basis vector, twice.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let p = dot(q, v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
    }
}

/// Deterministic arg-max: highest score, lowest index on ties.
fn best(scores: impl ParallelIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    scores.reduce_with(|a, b| {
        if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
            b
        } else {
            a
        }
    })
}

/// Greedy growth: starting from the bias-only fit, repeatedly adds the
/// training input that most lowers the training error as a new center and
/// refits all output weights by least squares.
///
/// Stops at `max_neurons`, at the goal, or when no unused training input is
/// left.
pub fn train_incremental(inputs: &[[f64; 3]], targets: &[[f64; 3]], opts: &RbfOptions) -> Result<RbfOutcome> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    if opts.max_neurons == 0 {
        return Err(Error::InvalidArgument("max_neurons must be >= 1".into()));
    }
    if !(opts.goal_mse >= 0.0) {
        return Err(Error::InvalidArgument(format!("goal_mse must be >= 0, got {}", opts.goal_mse)));
    }
    let beta = spread_to_beta(opts.spread)?;
    let n = inputs.len();
    let flat: Vec<f64> = targets.iter().flatten().copied().collect();
    let target_matrix = Matrix::from_row_slice(n, 3, &flat)?;

    let mut model = RbfModel::new(opts.spread, opts.use_bias)?;
    let mut fit = refit(inputs, &target_matrix, &[], beta, opts.use_bias)?;
    if fit.mse <= opts.goal_mse {
        model.set_fit(Vec::new(), Vec::new(), fit.bias)?;
        return Ok(RbfOutcome {
            model,
            history: vec![RbfTrainRecord {
                neurons: 0,
                mse_train: fit.mse,
            }],
        });
    }

    // Orthonormal basis of the current design columns and the residual of
    // each output against it.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    if opts.use_bias {
        basis.push(vec![1.0 / (n as f64).sqrt(); n]);
    }
    let mut resid: [Vec<f64>; 3] = [0, 1, 2].map(|k| {
        let mut r: Vec<f64> = targets.iter().map(|t| t[k]).collect();
        orthogonalize(&mut r, &basis);
        r
    });

    let mut used = vec![false; n];
    let mut centers: Vec<[f64; 3]> = Vec::new();
    let mut history = Vec::new();

    while centers.len() < opts.max_neurons {
        let pick = match opts.selection {
            Selection::Orthogonal => {
                let scored: Vec<(usize, f64, f64)> = (0..n)
                    .into_par_iter()
                    .filter(|&j| !used[j])
                    .map(|j| {
                        let mut u: Vec<f64> = inputs.iter().map(|x| gaussian(x, &inputs[j], beta)).collect();
                        let g2 = dot(&u, &u);
                        orthogonalize(&mut u, &basis);
                        let u2 = dot(&u, &u);
                        let gain = resid.iter().map(|r| dot(&u, r).powi(2)).sum::<f64>() / u2;
                        (j, u2 / g2, gain)
                    })
                    .collect();
                let independent = scored.iter().filter(|s| s.1 > SPAN_TOL).map(|s| (s.0, s.2));
                // Once every candidate is numerically spanned, growth goes on
                // with the least dependent one so the plateau is recorded.
                best(independent.collect::<Vec<_>>().into_par_iter())
                    .or_else(|| best(scored.into_par_iter().map(|s| (s.0, s.1))))
            }
            Selection::ExhaustiveRefit => best((0..n).into_par_iter().filter(|&j| !used[j]).filter_map(|j| {
                let mut trial = centers.clone();
                trial.push(inputs[j]);
                let f = refit(inputs, &target_matrix, &trial, beta, opts.use_bias).ok()?;
                Some((j, -f.mse))
            })),
        };
        let Some((j, _)) = pick else { break };
        used[j] = true;
        centers.push(inputs[j]);

        let mut u: Vec<f64> = inputs.iter().map(|x| gaussian(x, &inputs[j], beta)).collect();
        let g2 = dot(&u, &u);
        orthogonalize(&mut u, &basis);
        let norm = dot(&u, &u).sqrt();
        if norm * norm > SPAN_TOL * g2 {
            u.iter_mut().for_each(|v| *v /= norm);
            for r in resid.iter_mut() {
                let p = dot(&u, r);
                r.iter_mut().zip(&u).for_each(|(x, y)| *x -= p * y);
            }
            basis.push(u);
        }

        let next = refit(inputs, &target_matrix, &centers, beta, opts.use_bias)?;
        if next.mse <= fit.mse {
            fit = next;
        } else {
            // A rank-deficient refit can land above the previous optimum;
            // the previous weights with a silent new neuron are at least as good.
            fit.weights.push([0.0; 3]);
        }
        history.push(RbfTrainRecord {
            neurons: centers.len(),
            mse_train: fit.mse,
        });
        if fit.mse <= opts.goal_mse {
            break;
        }
    }

    model.set_fit(centers, fit.weights, fit.bias)?;
    Ok(RbfOutcome { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [0; 3].map(|_| rng.gen_range(0.0..1.0))).collect()
    }

    #[test]
    fn spread_to_beta_values() {
        assert!((spread_to_beta(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((spread_to_beta(2.0).unwrap() - 0.173286795).abs() < 1e-9);
        assert!((spread_to_beta(200.0).unwrap() - 1.7329e-5).abs() < 1e-9);
        assert!(spread_to_beta(0.0).is_err());
        assert!(spread_to_beta(-1.0).is_err());
        assert!(spread_to_beta(f64::NAN).is_err());
        // the 0.8326/spread convention is sqrt(ln 2) rounded to four decimals
        assert!((0.8326 - spread_to_beta(1.0).unwrap().sqrt()).abs() < 5e-5);
    }

    #[test]
    fn gaussian_shape() {
        let c = [0.1, 0.2, 0.3];
        assert_eq!(gaussian(&c, &c, 0.7), 1.0);
        for spread in [0.5, 2.0, 200.0] {
            let beta = spread_to_beta(spread).unwrap();
            let x = [c[0] + spread, c[1], c[2]];
            assert!((gaussian(&x, &c, beta) - 0.5).abs() < 1e-15);
            let far = [c[0], c[1] + 10.0 * spread, c[2]];
            assert!(gaussian(&far, &c, beta) < 2f64.powi(-100));
            let mut prev = 1.0;
            for k in 1..50 {
                let x = [c[0] + 0.1 * k as f64 * spread, c[1], c[2]];
                let g = gaussian(&x, &c, beta);
                assert!(g < prev && g > 0.0 || g == 0.0);
                prev = g;
            }
        }
    }

    #[test]
    fn forward_contract() {
        assert!(matches!(
            RbfModel::new(1.0, true).unwrap().forward(&[0.0; 3]),
            Err(Error::NotTrained)
        ));
        let x = [0.3, 0.4, 0.5];
        let m = RbfModel::from_parts(1.0, false, vec![x], vec![[1.0, -2.0, 3.0]], [0.0; 3]).unwrap();
        assert_eq!(m.forward(&x).unwrap(), [1.0, -2.0, 3.0]);
        let m = RbfModel::from_parts(1.0, true, vec![x], vec![[0.0; 3]], [4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.forward(&[9.0, 9.0, 9.0]).unwrap(), [4.0, 5.0, 6.0]);
        assert!(RbfModel::from_parts(1.0, false, vec![x], vec![[0.0; 3]], [1.0, 0.0, 0.0]).is_err());
        assert!(RbfModel::from_parts(1.0, true, vec![x], vec![], [0.0; 3]).is_err());
    }

    #[test]
    fn forward_matches_naive_sum() {
        let centers = random_points(7, 1);
        let weights = random_points(7, 2);
        let bias = [0.1, -0.2, 0.3];
        let m = RbfModel::from_parts(0.8, true, centers.clone(), weights.clone(), bias).unwrap();
        let beta = std::f64::consts::LN_2 / 0.64;
        for x in random_points(20, 3) {
            let y = m.forward(&x).unwrap();
            for k in 0..3 {
                let mut s = bias[k];
                for i in 0..7 {
                    let d2 = (x[0] - centers[i][0]).powi(2)
                        + (x[1] - centers[i][1]).powi(2)
                        + (x[2] - centers[i][2]).powi(2);
                    s += weights[i][k] * (-beta * d2).exp();
                }
                assert!((y[k] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = RbfModel::from_parts(2.0, true, random_points(5, 4), random_points(5, 5), [0.1, 0.2, 1.0 / 3.0])
            .unwrap();
        assert_eq!(RbfModel::from_text(&m.to_text()).unwrap(), m);
        let bad = m.to_text().replace("beta 1", "beta 2");
        assert!(RbfModel::from_text(&bad).is_err());
        assert!(RbfModel::from_text("tricept-rbf 1\nspread 2\n").is_err());
    }

    fn smooth(x: &[f64; 3]) -> [f64; 3] {
        [x[0] * x[1] + 0.5, (2.0 * x[2]).sin(), x[0] - x[1] * x[2]]
    }

    #[test]
    fn interpolates_distinct_points() {
        let xs = random_points(12, 6);
        let ts: Vec<[f64; 3]> = xs.iter().map(smooth).collect();
        let opts = RbfOptions { spread: 0.5, goal_mse: 0.0, ..RbfOptions::default() };
        let out = train_incremental(&xs, &ts, &opts).unwrap();
        assert!(out.model.num_neurons() <= 12);
        assert!(out.history.last().unwrap().mse_train <= 1e-16, "{:?}", out.history);
        for (x, t) in xs.iter().zip(&ts) {
            let y = out.model.forward(x).unwrap();
            for k in 0..3 {
                assert!((y[k] - t[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn constant_target_needs_no_neurons() {
        let xs = random_points(30, 7);
        let ts = vec![[0.25, -1.0, 3.0]; 30];
        let out = train_incremental(&xs, &ts, &RbfOptions::default()).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.history[0].neurons, 0);
        assert!(out.history[0].mse_train < 1e-30);
        let y = out.model.forward(&[5.0, 5.0, 5.0]).unwrap();
        for (a, b) in y.iter().zip([0.25, -1.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn history_is_monotone_and_keyed_by_neurons() {
        let xs = random_points(200, 8);
        let ts: Vec<[f64; 3]> = xs.iter().map(smooth).collect();
        let opts = RbfOptions { spread: 0.4, goal_mse: 0.0, ..RbfOptions::default() };
        let out = train_incremental(&xs, &ts, &opts).unwrap();
        assert_eq!(out.history.len(), 20);
        for (i, r) in out.history.iter().enumerate() {
            assert_eq!(r.neurons, i + 1);
        }
        for pair in out.history.windows(2) {
            assert!(pair[1].mse_train <= pair[0].mse_train * (1.0 + 1e-12));
        }
        // recorded MSE equals the model's own error
        let mut sum = 0.0;
        for (x, t) in xs.iter().zip(&ts) {
            let y = out.model.forward(x).unwrap();
            sum += (0..3).map(|k| (y[k] - t[k]).powi(2)).sum::<f64>();
        }
        let direct = sum / 600.0;
        assert!((direct - out.history[19].mse_train).abs() <= 1e-12 + 1e-9 * direct);
    }

    #[test]
    fn orthogonal_selection_agrees_with_exhaustive_refit() {
        for (seed, use_bias) in [(9, true), (10, false), (11, true)] {
            let xs = random_points(40, seed);
            let ts: Vec<[f64; 3]> = xs.iter().map(smooth).collect();
            let base = RbfOptions {
                spread: 0.5,
                goal_mse: 0.0,
                max_neurons: 8,
                use_bias,
                ..RbfOptions::default()
            };
            let ols = train_incremental(&xs, &ts, &base).unwrap();
            let exh = train_incremental(&xs, &ts, &RbfOptions { selection: Selection::ExhaustiveRefit, ..base })
                .unwrap();
            assert_eq!(ols.model.centers(), exh.model.centers());
            for (a, b) in ols.history.iter().zip(&exh.history) {
                assert!((a.mse_train - b.mse_train).abs() <= 1e-12 * a.mse_train.max(1e-12));
            }
        }
    }

    #[test]
    fn deterministic_and_duplicates_tolerated() {
        let mut xs = random_points(25, 12);
        xs.extend(xs.clone());
        let ts: Vec<[f64; 3]> = xs.iter().map(smooth).collect();
        let opts = RbfOptions { spread: 0.5, goal_mse: 0.0, ..RbfOptions::default() };
        let a = train_incremental(&xs, &ts, &opts).unwrap();
        let b = train_incremental(&xs, &ts, &opts).unwrap();
        assert_eq!(a, b);
        // no center is picked twice
        for (i, c) in a.model.centers().iter().enumerate() {
            assert!(!a.model.centers()[..i].contains(c));
        }
    }

    #[test]
    fn keeps_growing_through_a_spanned_plateau() {
        let distinct = random_points(5, 14);
        let xs: Vec<[f64; 3]> = distinct.iter().cycle().take(30).copied().collect();
        let ts: Vec<[f64; 3]> = xs.iter().map(smooth).collect();
        let opts = RbfOptions { spread: 0.5, goal_mse: 0.0, ..RbfOptions::default() };
        let out = train_incremental(&xs, &ts, &opts).unwrap();
        assert_eq!(out.history.len(), 20);
        assert_eq!(out.model.num_neurons(), 20);
        for pair in out.history.windows(2) {
            assert!(pair[1].mse_train <= pair[0].mse_train);
        }
        assert!(out.history[19].mse_train < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let xs = random_points(3, 13);
        let ts = xs.clone();
        assert!(train_incremental(&[], &[], &RbfOptions::default()).is_err());
        assert!(train_incremental(&xs, &ts[..2], &RbfOptions::default()).is_err());
        let zero = RbfOptions { max_neurons: 0, ..RbfOptions::default() };
        assert!(train_incremental(&xs, &ts, &zero).is_err());
        let bad = RbfOptions { spread: 0.0, ..RbfOptions::default() };
        assert!(train_incremental(&xs, &ts, &bad).is_err());
    }
}
