//! Multivariate time series with missing values: the dataset type, its CSV
//! format, standardization, imputation, flattening and the ordered split.
//!
//! Cells are addressed as `(series, time, variable)` and stored time-major
//! within each series, so cell `(i, t, v)` lives at `(i * T + t) * V + v`.
//! Whether a cell is observed is decided by the mask alone; the value stored
//! under an unobserved cell is never read by any computation.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io;
use crate::matrix::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    n: usize,
    t: usize,
    v: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    filled: bool,
    labels: Option<Vec<u8>>,
    variable_names: Option<Vec<String>>,
}

impl TimeSeriesDataset {
    /// Validating constructor. Values under unobserved cells may be anything
    /// (conventionally NaN); observed cells must be finite.
    pub fn new(
        n: usize,
        t: usize,
        v: usize,
        values: Vec<f64>,
        mask: Vec<bool>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        let cells = n * t * v;
        if t == 0 || v == 0 {
            return Err(invalid!("T and V must be positive (got T={t}, V={v})"));
        }
        if values.len() != cells || mask.len() != cells {
            return Err(invalid!(
                "values ({}) and mask ({}) must both have N*T*V = {cells} cells",
                values.len(),
                mask.len()
            ));
        }
        for (idx, (&x, &m)) in values.iter().zip(&mask).enumerate() {
            if m && !x.is_finite() {
                let (i, rest) = (idx / (t * v), idx % (t * v));
                return Err(invalid!(
                    "observed cell (series {i}, time {}, variable {}) is not finite",
                    rest / v,
                    rest % v
                ));
            }
        }
        for i in 0..n {
            let obs = mask[i * t * v..(i + 1) * t * v].iter().filter(|&&m| m).count();
            if obs < 2 {
                return Err(invalid!(
                    "series {i} has {obs} observed cells; at least 2 are required"
                ));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(invalid!("{} labels for {n} series", l.len()));
            }
            if let Some(bad) = l.iter().find(|&&y| y > 1) {
                return Err(invalid!("label {bad} is not in {{0, 1}}"));
            }
        }
        Ok(TimeSeriesDataset {
            n,
            t,
            v,
            values,
            mask,
            filled: false,
            labels,
            variable_names: None,
        })
    }

    pub fn with_variable_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.v {
            return Err(invalid!("{} variable names for V = {}", names.len(), self.v));
        }
        self.variable_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn time_steps(&self) -> usize {
        self.t
    }

    pub fn variables(&self) -> usize {
        self.v
    }

    /// Cells per series, `T * V`.
    pub fn series_len(&self) -> usize {
        self.t * self.v
    }

    #[inline]
    pub fn index(&self, i: usize, t: usize, v: usize) -> usize {
        (i * self.t + t) * self.v + v
    }

    #[inline]
    pub fn is_observed(&self, i: usize, t: usize, v: usize) -> bool {
        self.mask[self.index(i, t, v)]
    }

    /// Value stored at a cell. For unobserved cells of a dataset that has not
    /// been imputed this is meaningless.
    #[inline]
    pub fn value(&self, i: usize, t: usize, v: usize) -> f64 {
        self.values[self.index(i, t, v)]
    }

    pub fn series_values(&self, i: usize) -> &[f64] {
        let len = self.series_len();
        &self.values[i * len..(i + 1) * len]
    }

    pub fn series_mask(&self, i: usize) -> &[bool] {
        let len = self.series_len();
        &self.mask[i * len..(i + 1) * len]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    /// True once [`impute`] has filled every unobserved cell.
    pub fn is_filled(&self) -> bool {
        self.filled
    }

    pub fn observed_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// Replace the values stored under unobserved cells, leaving the mask and
    /// every observed value alone. Useful to check that nothing downstream
    /// reads them.
    pub fn overwrite_unobserved(&self, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for t in 0..self.t {
                for v in 0..self.v {
                    let idx = self.index(i, t, v);
                    if !self.mask[idx] {
                        out.values[idx] = f(i, t, v);
                    }
                }
            }
        }
        out
    }

    /// Series `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let len = self.series_len();
        let mut values = Vec::with_capacity(indices.len() * len);
        let mut mask = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            values.extend_from_slice(self.series_values(i));
            mask.extend_from_slice(self.series_mask(i));
        }
        TimeSeriesDataset {
            n: indices.len(),
            t: self.t,
            v: self.v,
            values,
            mask,
            filled: self.filled,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            variable_names: self.variable_names.clone(),
        }
    }

    /// Stack `other` below `self`. Labels survive only if both carry them.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if (self.t, self.v) != (other.t, other.v) {
            return Err(invalid!(
                "cannot concatenate T×V {}×{} with {}×{}",
                self.t,
                self.v,
                other.t,
                other.v
            ));
        }
        let mut out = self.clone();
        out.n += other.n;
        out.values.extend_from_slice(&other.values);
        out.mask.extend_from_slice(&other.mask);
        out.filled = self.filled && other.filled;
        out.labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(out)
    }

    /// Parse the dataset CSV format:
    ///
    /// ```text
    /// N,T,V,has_labels
    /// <N blocks of T lines, V comma-separated numbers each, `NaN` = missing>
    /// <if has_labels = 1: one line of N labels in {0,1}>
    /// ```
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))?;
        let h: Vec<&str> = header.split(',').collect();
        if h.len() != 4 {
            return Err(Error::Format(format!(
                "line 1: header must be `N,T,V,has_labels`, got {header:?}"
            )));
        }
        let n = io::parse_count(h[0], "N", 1)?;
        let t = io::parse_count(h[1], "T", 1)?;
        let v = io::parse_count(h[2], "V", 1)?;
        let has_labels = match h[3].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Format(format!(
                    "line 1: has_labels must be 0 or 1, got {other:?}"
                )))
            }
        };
        if t == 0 || v == 0 {
            return Err(Error::Format("line 1: T and V must be positive".into()));
        }

        let mut values = Vec::with_capacity(n * t * v);
        for _ in 0..n * t {
            let (lineno, line) = lines.next().ok_or_else(|| {
                Error::Format(format!(
                    "declared N={n}, T={t} but file ends after {} data lines",
                    values.len() / v
                ))
            })?;
            let before = values.len();
            for f in line.split(',') {
                values.push(io::parse_real(f, true, lineno)?);
            }
            if values.len() - before != v {
                return Err(Error::Format(format!(
                    "line {lineno}: expected {v} values, found {}",
                    values.len() - before
                )));
            }
        }

        let labels = if has_labels {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::Format("missing label line".into()))?;
            let labels = line
                .split(',')
                .map(|f| match f.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::Format(format!(
                        "line {lineno}: label {other:?} is not 0 or 1"
                    ))),
                })
                .collect::<Result<Vec<u8>>>()?;
            if labels.len() != n {
                return Err(Error::Format(format!(
                    "line {lineno}: {} labels for N={n}",
                    labels.len()
                )));
            }
            Some(labels)
        } else {
            None
        };
        if let Some((lineno, _)) = lines.next() {
            return Err(Error::Format(format!(
                "line {lineno}: unexpected content after declared N={n} series"
            )));
        }

        let mask = values.iter().map(|x| !x.is_nan()).collect();
        Self::new(n, t, v, values, mask, labels).map_err(|e| match e {
            Error::Invalid(msg) => Error::Format(msg),
            other => other,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 12 + 64);
        let _ = writeln!(s, "{},{},{},{}", self.n, self.t, self.v, u8::from(self.labels.is_some()));
        for i in 0..self.n {
            for t in 0..self.t {
                for v in 0..self.v {
                    if v > 0 {
                        s.push(',');
                    }
                    let idx = self.index(i, t, v);
                    if self.mask[idx] {
                        let _ = write!(s, "{}", self.values[idx]);
                    } else {
                        s.push_str("NaN");
                    }
                }
                s.push('\n');
            }
        }
        if let Some(l) = &self.labels {
            let parts: Vec<String> = l.iter().map(u8::to_string).collect();
            s.push_str(&parts.join(","));
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_csv_string().as_bytes())
    }

    /// Build a fully observed dataset from an `N × (T·V)` matrix laid out by
    /// [`flatten`].
    pub fn unflatten(m: &DenseMatrix, t: usize, v: usize) -> Result<Self> {
        if m.cols() != t * v {
            return Err(invalid!("{} columns cannot be reshaped to T×V = {t}×{v}", m.cols()));
        }
        let mut ds = Self::new(
            m.rows(),
            t,
            v,
            m.as_slice().to_vec(),
            vec![true; m.rows() * t * v],
            None,
        )?;
        ds.filled = true;
        Ok(ds)
    }
}

pub fn load_dataset(path: &Path) -> Result<TimeSeriesDataset> {
    let text = io::read_to_string(path)?;
    TimeSeriesDataset::parse_csv(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_dataset(ds: &TimeSeriesDataset, path: &Path) -> Result<()> {
    ds.save(path)
}

/// Per-variable z-score statistics over observed training cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Population mean and standard deviation per variable over observed
    /// cells. A zero standard deviation is clamped to 1.
    pub fn fit(train: &TimeSeriesDataset) -> Result<Self> {
        let v = train.v;
        let mut count = vec![0usize; v];
        let mut sum = vec![0.0; v];
        for (idx, (&x, &m)) in train.values.iter().zip(&train.mask).enumerate() {
            if m {
                count[idx % v] += 1;
                sum[idx % v] += x;
            }
        }
        if let Some(var) = count.iter().position(|&c| c == 0) {
            return Err(invalid!("variable {var} has no observed training cells"));
        }
        let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
        let mut ss = vec![0.0; v];
        for (idx, (&x, &m)) in train.values.iter().zip(&train.mask).enumerate() {
            if m {
                let d = x - mean[idx % v];
                ss[idx % v] += d * d;
            }
        }
        let std = ss
            .iter()
            .zip(&count)
            .map(|(s, &c)| {
                let sd = (s / c as f64).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardization { mean, std })
    }

    /// Transform observed cells. The result is unfilled: unobserved cells
    /// are reset to NaN.
    pub fn apply(&self, ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        if self.mean.len() != ds.v || self.std.len() != ds.v {
            return Err(invalid!(
                "statistics cover {} variables, dataset has {}",
                self.mean.len(),
                ds.v
            ));
        }
        let v = ds.v;
        let mut out = ds.clone();
        for (idx, (x, &m)) in out.values.iter_mut().zip(&ds.mask).enumerate() {
            *x = if m {
                (*x - self.mean[idx % v]) / self.std[idx % v]
            } else {
                f64::NAN
            };
        }
        out.filled = false;
        Ok(out)
    }
}

/// Fit statistics on `train` and apply them to `apply_to`.
pub fn standardize(
    train: &TimeSeriesDataset,
    apply_to: &TimeSeriesDataset,
) -> Result<(TimeSeriesDataset, Standardization)> {
    let stats = Standardization::fit(train)?;
    let out = stats.apply(apply_to)?;
    Ok((out, stats))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "means", rename_all = "lowercase")]
pub enum ImputationMethod {
    Zero,
    /// Per-variable training means.
    Mean(Vec<f64>),
    /// Last observation carried forward; leading gaps take 0.
    Locf,
}

impl ImputationMethod {
    /// Mean imputation with means of the observed cells of `train`.
    pub fn mean_from(train: &TimeSeriesDataset) -> Result<Self> {
        let v = train.v;
        let mut count = vec![0usize; v];
        let mut sum = vec![0.0; v];
        for (idx, (&x, &m)) in train.values.iter().zip(&train.mask).enumerate() {
            if m {
                count[idx % v] += 1;
                sum[idx % v] += x;
            }
        }
        if let Some(var) = count.iter().position(|&c| c == 0) {
            return Err(invalid!("variable {var} has no observed training cells"));
        }
        Ok(ImputationMethod::Mean(
            sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect(),
        ))
    }

    /// Short tag used in method names (`z`, `m`, `l`).
    pub fn short_tag(&self) -> &'static str {
        match self {
            ImputationMethod::Zero => "z",
            ImputationMethod::Mean(_) => "m",
            ImputationMethod::Locf => "l",
        }
    }
}

/// Fill every unobserved cell. Observed cells and the mask are untouched.
pub fn impute(ds: &TimeSeriesDataset, method: &ImputationMethod) -> Result<TimeSeriesDataset> {
    let mut out = ds.clone();
    match method {
        ImputationMethod::Zero => {
            for (x, &m) in out.values.iter_mut().zip(&ds.mask) {
                if !m {
                    *x = 0.0;
                }
            }
        }
        ImputationMethod::Mean(means) => {
            if means.len() != ds.v {
                return Err(invalid!(
                    "mean imputation needs {} per-variable means, got {}",
                    ds.v,
                    means.len()
                ));
            }
            if means.iter().any(|m| !m.is_finite()) {
                return Err(invalid!("mean imputation statistics must be finite"));
            }
            for (idx, (x, &m)) in out.values.iter_mut().zip(&ds.mask).enumerate() {
                if !m {
                    *x = means[idx % ds.v];
                }
            }
        }
        ImputationMethod::Locf => {
            for i in 0..ds.n {
                for v in 0..ds.v {
                    let mut last = 0.0;
                    for t in 0..ds.t {
                        let idx = ds.index(i, t, v);
                        if ds.mask[idx] {
                            last = ds.values[idx];
                        } else {
                            out.values[idx] = last;
                        }
                    }
                }
            }
        }
    }
    out.filled = true;
    Ok(out)
}

/// `N × (T·V)` matrix, row `i` = series `i` with column `t·V + v`.
pub fn flatten(ds: &TimeSeriesDataset) -> Result<DenseMatrix> {
    if !ds.filled {
        if let Some(idx) = ds.mask.iter().position(|&m| !m) {
            let (i, rest) = (idx / ds.series_len(), idx % ds.series_len());
            return Err(invalid!(
                "unimputed missing cell at (series {i}, time {}, variable {}); impute first",
                rest / ds.v,
                rest % ds.v
            ));
        }
    }
    DenseMatrix::from_vec(ds.n, ds.series_len(), ds.values.clone())
}

/// First `floor(N · train_fraction)` series for training, the rest for test.
pub fn split_train_test(
    ds: &TimeSeriesDataset,
    train_fraction: f64,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    let n_train = split_point(ds.n, train_fraction)?;
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..ds.n).collect();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Number of training series for a given fraction, checking both sides are
/// non-empty.
pub fn split_point(n: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid!("train fraction must lie in (0, 1), got {train_fraction}"));
    }
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(invalid!(
            "splitting {n} series at fraction {train_fraction} leaves an empty side"
        ));
    }
    Ok(n_train)
}
