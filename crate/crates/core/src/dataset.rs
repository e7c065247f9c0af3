//! Pose to leg-length corpus: generation, column statistics, min-max
//! scaling to `[0, 1]`, seeded splits and CSV persistence.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinematics::{inverse_kinematics, Pose, PoseDomain, TriceptGeometry};

pub const COLUMNS: [&str; 6] = ["theta", "psi", "c", "q1", "q2", "q3"];

/// Paired inputs `(theta, psi, c)` and targets `(q1, q2, q3)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    inputs: Vec<[f64; 3]>,
    targets: Vec<[f64; 3]>,
}

impl Dataset {
    pub fn new(inputs: Vec<[f64; 3]>, targets: Vec<[f64; 3]>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Shape(format!(
                "{} input rows but {} target rows",
                inputs.len(),
                targets.len()
            )));
        }
        let finite = |rows: &[[f64; 3]]| rows.iter().flatten().all(|v| v.is_finite());
        if !finite(&inputs) || !finite(&targets) {
            return Err(Error::InvalidArgument("dataset contains non-finite values".into()));
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[[f64; 3]] {
        &self.inputs
    }

    pub fn targets(&self) -> &[[f64; 3]] {
        &self.targets
    }

    /// Value of column `col` (0..6, inputs first) in row `row`.
    pub fn value(&self, row: usize, col: usize) -> f64 {
        if col < 3 {
            self.inputs[row][col]
        } else {
            self.targets[row][col - 3]
        }
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.len()).map(|r| self.value(r, col)).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i]).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingScheme {
    /// Lattice with `ceil(n^(1/3))` points per axis, theta outermost and c
    /// innermost, truncated to the first `n` points. A single point per axis
    /// sits at the range midpoint.
    #[default]
    Grid,
    /// Seeded uniform draws over the box.
    Random,
}

impl FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(SamplingScheme::Grid),
            "random" => Ok(SamplingScheme::Random),
            other => Err(Error::InvalidArgument(format!(
                "unknown sampling scheme `{other}` (expected grid or random)"
            ))),
        }
    }
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingScheme::Grid => "grid",
            SamplingScheme::Random => "random",
        })
    }
}

/// Smallest `m` with `m^3 >= n`.
fn lattice_side(n: usize) -> usize {
    let mut m = (n as f64).cbrt().floor() as usize;
    while m.pow(3) < n {
        m += 1;
    }
    m.max(1)
}

fn lattice_axis(min: f64, max: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5 * (min + max)];
    }
    let step = (max - min) / (m - 1) as f64;
    (0..m)
        .map(|i| if i == m - 1 { max } else { min + step * i as f64 })
        .collect()
}

fn sample_poses(domain: &PoseDomain, scheme: SamplingScheme, n: usize, seed: u64) -> Vec<Pose> {
    match scheme {
        SamplingScheme::Grid => {
            let m = lattice_side(n);
            let [t, p, c] = domain.ranges().map(|r| lattice_axis(r.min, r.max, m));
            let mut poses = Vec::with_capacity(n);
            'outer: for &theta in &t {
                for &psi in &p {
                    for &c in &c {
                        if poses.len() == n {
                            break 'outer;
                        }
                        poses.push(Pose { theta, psi, c });
                    }
                }
            }
            poses
        }
        SamplingScheme::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let [t, p, c] = domain.ranges().map(|r| Uniform::new_inclusive(r.min, r.max));
            (0..n)
                .map(|_| Pose {
                    theta: t.sample(&mut rng),
                    psi: p.sample(&mut rng),
                    c: c.sample(&mut rng),
                })
                .collect()
        }
    }
}

/// Samples `n` poses from `domain` and labels each with its exact leg
/// lengths. Rows come out in sampling order.
pub fn generate(
    geom: &TriceptGeometry,
    domain: &PoseDomain,
    scheme: SamplingScheme,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    domain.validate()?;
    let poses = sample_poses(domain, scheme, n, seed);
    let targets = poses
        .par_iter()
        .map(|pose| {
            inverse_kinematics(geom, pose)
                .map(|q| q.0)
                .map_err(|e| Error::Generation {
                    theta: pose.theta,
                    psi: pose.psi,
                    c: pose.c,
                    reason: e.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(poses.iter().map(|p| p.to_array()).collect(), targets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Population variance (divides by n).
    pub variance: f64,
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("statistics of an empty column".into()));
        }
        let n = values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(ColumnStats {
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            mean,
            median,
            variance,
        })
    }
}

/// Statistics for the six columns, inputs first.
pub fn stats(ds: &Dataset) -> Result<[ColumnStats; 6]> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("statistics of an empty dataset".into()));
    }
    let mut out = [ColumnStats {
        min: 0.0,
        max: 0.0,
        mean: 0.0,
        median: 0.0,
        variance: 0.0,
    }; 6];
    for (col, slot) in out.iter_mut().enumerate() {
        *slot = ColumnStats::of(&ds.column(col))?;
    }
    Ok(out)
}

/// Table with one row per column and Min/Max/Mean/Median/Variance columns.
pub fn format_stats(stats: &[ColumnStats; 6]) -> String {
    let mut s = format!(
        "{:<6} {:>24} {:>24} {:>24} {:>24} {:>24}\n",
        "column", "min", "max", "mean", "median", "variance"
    );
    for (name, st) in COLUMNS.iter().zip(stats) {
        s.push_str(&format!(
            "{:<6} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e} {:>24.16e}\n",
            name, st.min, st.max, st.mean, st.median, st.variance
        ));
    }
    s
}

/// Per-column `(min, max)` for the six dataset columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationMap {
    columns: [(f64, f64); 6],
}

const MAP_HEADER: &str = "tricept-normalization 1";

impl NormalizationMap {
    pub fn new(columns: [(f64, f64); 6]) -> Result<Self> {
        for (name, (lo, hi)) in COLUMNS.iter().zip(columns) {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::Normalization(format!(
                    "column {name} has min {lo} and max {hi}"
                )));
            }
        }
        Ok(NormalizationMap { columns })
    }

    pub fn columns(&self) -> &[(f64, f64); 6] {
        &self.columns
    }

    fn scale(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = self.columns[col];
        (v - lo) / (hi - lo)
    }

    fn unscale(&self, col: usize, v: f64) -> f64 {
        let (lo, hi) = self.columns[col];
        v * (hi - lo) + lo
    }

    pub fn normalize_input(&self, x: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.scale(i, x[i]))
    }

    pub fn normalize_target(&self, y: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.scale(i + 3, y[i]))
    }

    pub fn denormalize_input(&self, x: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.unscale(i, x[i]))
    }

    pub fn denormalize_target(&self, y: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| self.unscale(i + 3, y[i]))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MAP_HEADER}\n");
        for (name, (lo, hi)) in COLUMNS.iter().zip(self.columns) {
            s.push_str(&format!("{name} {lo:.16e} {hi:.16e}\n"));
        }
        s
    }

    /// Parses the block written by [`NormalizationMap::to_text`] from
    /// `(line number, text)` pairs.
    pub fn from_lines<'a>(
        lines: &mut impl Iterator<Item = (usize, &'a str)>,
    ) -> Result<Self> {
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {what}"),
            })
        };
        let (line, header) = next("normalization header")?;
        if header.trim() != MAP_HEADER {
            return Err(Error::Parse {
                line,
                message: format!("expected `{MAP_HEADER}`"),
            });
        }
        let mut columns = [(0.0, 0.0); 6];
        for (slot, name) in columns.iter_mut().zip(COLUMNS) {
            let (line, text) = next(name)?;
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Shape(format!(
                    "line {line}: expected `{name} <min> <max>`, found {} fields",
                    fields.len()
                )));
            }
            if fields[0] != name {
                return Err(Error::Shape(format!(
                    "line {line}: expected column {name}, found {}",
                    fields[0]
                )));
            }
            *slot = (parse_f64(fields[1], line)?, parse_f64(fields[2], line)?);
        }
        NormalizationMap::new(columns)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        NormalizationMap::from_lines(&mut lines)
    }
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite value `{s}`"),
        });
    }
    Ok(v)
}

/// Scales every column to `[0, 1]` by its own min and max.
pub fn normalize(ds: &Dataset) -> Result<(Dataset, NormalizationMap)> {
    let st = stats(ds).map_err(|_| Error::Normalization("empty dataset".into()))?;
    let map = NormalizationMap::new(st.map(|s| (s.min, s.max)))?;
    let out = Dataset {
        inputs: ds.inputs.iter().map(|x| map.normalize_input(x)).collect(),
        targets: ds.targets.iter().map(|y| map.normalize_target(y)).collect(),
    };
    Ok((out, map))
}

pub fn denormalize(ds: &Dataset, map: &NormalizationMap) -> Result<Dataset> {
    Dataset::new(
        ds.inputs.iter().map(|x| map.denormalize_input(x)).collect(),
        ds.targets.iter().map(|y| map.denormalize_target(y)).collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

/// Seeded shuffle of `0..n` cut into train, validation and test.
///
/// Train gets `floor(n * train)`, validation `floor(n * validation)`, and
/// test the remainder.
pub fn split(n: usize, ratios: SplitRatios, seed: u64) -> Result<SplitIndices> {
    let r = [ratios.train, ratios.validation, ratios.test];
    if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Split(format!("ratios must be non-negative, got {r:?}")));
    }
    if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("ratios must sum to 1, got {r:?}")));
    }
    // tolerate ratios like 0.7 whose product with n lands a hair below an integer
    let take = |ratio: f64| ((n as f64) * ratio + 1e-9).floor() as usize;
    let n_train = take(ratios.train).min(n);
    let n_val = take(ratios.validation).min(n - n_train);
    let n_test = n - n_train - n_val;
    for (name, ratio, size) in [
        ("train", ratios.train, n_train),
        ("validation", ratios.validation, n_val),
        ("test", ratios.test, n_test),
    ] {
        if ratio > 0.0 && size == 0 {
            return Err(Error::Split(format!(
                "{name} partition is empty with {n} rows at ratio {ratio}"
            )));
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train + n_val);
    let validation = idx.split_off(n_train);
    Ok(SplitIndices {
        train: idx,
        validation,
        test,
    })
}

const CSV_HEADER: &str = "theta,psi,c,q1,q2,q3";

pub fn write_csv(ds: &Dataset, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for (x, y) in ds.inputs.iter().zip(&ds.targets) {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            x[0], x[1], x[2], y[0], y[1], y[2]
        )?;
    }
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_csv(ds, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_csv(r: impl BufRead) -> Result<Dataset> {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 6 columns, found {}", fields.len()),
            });
        }
        if line_no == 1 {
            if line.trim() != CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{CSV_HEADER}`"),
                });
            }
            continue;
        }
        let mut v = [0.0; 6];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = parse_f64(f, line_no)?;
        }
        inputs.push([v[0], v[1], v[2]]);
        targets.push([v[3], v[4], v[5]]);
    }
    Dataset::new(inputs, targets)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file))
}
