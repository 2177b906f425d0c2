//! Diagonal Gaussian mixtures over a (time segment × attribute subset) view
//! of multivariate time series, fitted by MAP-EM with informative priors.
//!
//! Missing cells are marginalized out exactly: a diagonal Gaussian restricted
//! to the observed coordinates is the product of the per-cell univariate
//! densities, so unobserved cells simply contribute nothing.
//!
//! Priors, for component `g`, time `t` in the segment and attribute `a`:
//!
//! * mean trajectory `μ[g,·,a] ~ N(m[·,a], (a0 · D⁻¹ R⁻¹ D⁻¹)⁻¹)` where `m` and
//!   `s² = D²` are the empirical mean and variance of the observed cells and
//!   `R` is the unit-diagonal Gaussian correlation over the segment's time
//!   axis with bandwidth `n0 · len`. The correlation couples neighbouring
//!   time steps, so the MAP mean update is a temporally smoothed weighted mean;
//! * variance `σ²[g,t,a]` carries the conjugate penalty
//!   `−(κ/2)(ln σ² + s²/σ²)` with `κ = b0 · n / G` pseudo-observations,
//!   shrinking towards `s²`;
//! * mixing weights are flat.
//!
//! The M-step is a conditional maximization (weights, then means given the
//! current variances, then variances given the new means), each step an
//! exact maximizer, so the MAP objective never decreases.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::DenseMatrix;
use crate::seed::Rng;
use crate::TimeSeriesDataset;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A mixing weight below this marks a collapsed component.
pub const COLLAPSE_WEIGHT: f64 = 1e-8;
/// Collapsed components are re-seeded at most this many times per fit.
pub const MAX_RESEEDS: usize = 3;
/// Jitter added to the temporal correlation before inversion.
const CORRELATION_JITTER: f64 = 1e-3;
const MIN_VARIANCE: f64 = 1e-12;

/// `Σ over observed cells of log N(x | mean, var)`. Unobserved cells add 0.
pub fn log_likelihood_observed(x: &[f64], observed: &[bool], mean: &[f64], var: &[f64]) -> f64 {
    let mut ll = 0.0;
    for c in 0..x.len() {
        if observed[c] {
            let d = x[c] - mean[c];
            ll -= 0.5 * (LN_2PI + var[c].ln() + d * d / var[c]);
        }
    }
    ll
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub a0: f64,
    pub b0: f64,
    pub n0: f64,
}

/// Series restricted to a member's time segment and attribute subset, laid
/// out `series × time × attribute`.
#[derive(Clone, Debug)]
pub struct MemberView {
    n: usize,
    len: usize,
    attrs: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl MemberView {
    /// `series = None` takes every series of `ds`.
    pub fn extract(
        ds: &TimeSeriesDataset,
        series: Option<&[usize]>,
        segment: (usize, usize),
        attributes: &[usize],
    ) -> Self {
        let (start, end) = segment;
        let len = end - start;
        let attrs = attributes.len();
        let all: Vec<usize>;
        let series = match series {
            Some(s) => s,
            None => {
                all = (0..ds.len()).collect();
                &all
            }
        };
        let mut values = Vec::with_capacity(series.len() * len * attrs);
        let mut observed = Vec::with_capacity(series.len() * len * attrs);
        for &i in series {
            for t in start..end {
                for &a in attributes {
                    let obs = ds.is_observed(i, t, a);
                    observed.push(obs);
                    values.push(if obs { ds.value(i, t, a) } else { 0.0 });
                }
            }
        }
        MemberView {
            n: series.len(),
            len,
            attrs,
            values,
            observed,
        }
    }

    /// Build directly from cell arrays (`n × len × attrs`).
    pub fn from_parts(
        n: usize,
        len: usize,
        attrs: usize,
        values: Vec<f64>,
        observed: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != n * len * attrs || observed.len() != values.len() {
            return Err(invalid!("view arrays do not match {n}×{len}×{attrs}"));
        }
        let values = values
            .into_iter()
            .zip(&observed)
            .map(|(x, &o)| if o { x } else { 0.0 })
            .collect();
        Ok(MemberView {
            n,
            len,
            attrs,
            values,
            observed,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cells(&self) -> usize {
        self.len * self.attrs
    }

    #[inline]
    pub fn series(&self, i: usize) -> (&[f64], &[bool]) {
        let c = self.cells();
        (&self.values[i * c..(i + 1) * c], &self.observed[i * c..(i + 1) * c])
    }
}

/// Mixture parameters; `means` and `variances` are `G × len × attrs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GmmParams {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    fn cells(&self) -> usize {
        self.means.len() / self.weights.len()
    }

    pub fn mean(&self, g: usize) -> &[f64] {
        let c = self.cells();
        &self.means[g * c..(g + 1) * c]
    }

    pub fn variance(&self, g: usize) -> &[f64] {
        let c = self.cells();
        &self.variances[g * c..(g + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.means)
            .chain(&self.variances)
            .all(|v| v.is_finite())
    }
}

/// Per-component cached terms for fast likelihood evaluation.
struct Precomputed {
    log_weight: Vec<f64>,
    inv_var: Vec<f64>,
    log_norm: Vec<f64>,
}

impl Precomputed {
    fn new(p: &GmmParams) -> Self {
        Precomputed {
            log_weight: p.weights.iter().map(|w| w.ln()).collect(),
            inv_var: p.variances.iter().map(|v| 1.0 / v).collect(),
            log_norm: p.variances.iter().map(|v| LN_2PI + v.ln()).collect(),
        }
    }
}

/// Responsibilities `n × G` (row-major) and the data log-likelihood, computed
/// in log space with per-row max subtraction.
pub(crate) fn posterior_rows(
    view: &MemberView,
    params: &GmmParams,
) -> (Vec<f64>, f64) {
    let g_count = params.components();
    let cells = view.cells();
    let pre = Precomputed::new(params);
    let mut resp = vec![0.0; view.n * g_count];
    let mut total = 0.0;
    let mut logp = vec![0.0; g_count];
    for i in 0..view.n {
        let (x, obs) = view.series(i);
        for (g, lp) in logp.iter_mut().enumerate() {
            let mu = &params.means[g * cells..(g + 1) * cells];
            let iv = &pre.inv_var[g * cells..(g + 1) * cells];
            let ln = &pre.log_norm[g * cells..(g + 1) * cells];
            let mut ll = 0.0;
            for c in 0..cells {
                if obs[c] {
                    let d = x[c] - mu[c];
                    ll += ln[c] + d * d * iv[c];
                }
            }
            *lp = pre.log_weight[g] - 0.5 * ll;
        }
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let row = &mut resp[i * g_count..(i + 1) * g_count];
        let mut sum = 0.0;
        for (r, lp) in row.iter_mut().zip(&logp) {
            *r = (lp - max).exp();
            sum += *r;
        }
        for r in row.iter_mut() {
            *r /= sum;
        }
        total += max + sum.ln();
    }
    (resp, total)
}

/// Posterior component probabilities for every series of `view`.
pub fn posteriors_for_view(view: &MemberView, params: &GmmParams) -> DenseMatrix {
    let (resp, _) = posterior_rows(view, params);
    DenseMatrix::from_vec_unchecked(view.n, params.components(), resp)
}

/// Empirical statistics and prior precision derived from a training view.
#[derive(Clone, Debug)]
struct Prior {
    mean: Vec<f64>,
    var: Vec<f64>,
    /// One `len × len` precision matrix per attribute.
    precision: Vec<DMatrix<f64>>,
    kappa: f64,
}

/// Unit-diagonal Gaussian correlation over `len` time steps with bandwidth
/// `width`, plus jitter, renormalized to unit diagonal.
pub fn temporal_correlation(len: usize, width: f64) -> DMatrix<f64> {
    let w2 = 2.0 * width * width;
    DMatrix::from_fn(len, len, |s, t| {
        let d = s as f64 - t as f64;
        let k = if w2 > 0.0 { (-d * d / w2).exp() } else if s == t { 1.0 } else { 0.0 };
        let k = if s == t { k + CORRELATION_JITTER } else { k };
        k / (1.0 + CORRELATION_JITTER)
    })
}

impl Prior {
    fn from_view(view: &MemberView, g_count: usize, hyper: &PriorParams) -> Result<Self> {
        let (len, attrs) = (view.len, view.attrs);
        let cells = len * attrs;
        let mut count = vec![0usize; cells];
        let mut sum = vec![0.0; cells];
        for i in 0..view.n {
            let (x, obs) = view.series(i);
            for c in 0..cells {
                if obs[c] {
                    count[c] += 1;
                    sum[c] += x[c];
                }
            }
        }
        let mut ss = vec![0.0; cells];
        let cell_mean: Vec<f64> = (0..cells)
            .map(|c| if count[c] > 0 { sum[c] / count[c] as f64 } else { 0.0 })
            .collect();
        for i in 0..view.n {
            let (x, obs) = view.series(i);
            for c in 0..cells {
                if obs[c] {
                    let d = x[c] - cell_mean[c];
                    ss[c] += d * d;
                }
            }
        }
        // pooled per-attribute fallbacks for sparsely observed cells
        let mut mean = vec![0.0; cells];
        let mut var = vec![1.0; cells];
        for a in 0..attrs {
            let (mut n_a, mut s_a) = (0usize, 0.0);
            for t in 0..len {
                n_a += count[t * attrs + a];
                s_a += sum[t * attrs + a];
            }
            let m_a = if n_a > 0 { s_a / n_a as f64 } else { 0.0 };
            let mut ss_a = 0.0;
            for i in 0..view.n {
                let (x, obs) = view.series(i);
                for t in 0..len {
                    let c = t * attrs + a;
                    if obs[c] {
                        ss_a += (x[c] - m_a).powi(2);
                    }
                }
            }
            let v_a = if n_a >= 2 && ss_a / n_a as f64 > MIN_VARIANCE {
                ss_a / n_a as f64
            } else {
                1.0
            };
            for t in 0..len {
                let c = t * attrs + a;
                mean[c] = if count[c] > 0 { cell_mean[c] } else { m_a };
                let v_c = if count[c] > 0 { ss[c] / count[c] as f64 } else { 0.0 };
                var[c] = if count[c] >= 2 && v_c > MIN_VARIANCE { v_c } else { v_a };
            }
        }

        let corr = temporal_correlation(len, hyper.n0 * len as f64);
        let corr_inv = corr
            .cholesky()
            .ok_or_else(|| Error::Numerical("temporal correlation is not positive definite".into()))?
            .inverse();
        let precision = (0..attrs)
            .map(|a| {
                DMatrix::from_fn(len, len, |s, t| {
                    let ds = var[s * attrs + a].sqrt();
                    let dt = var[t * attrs + a].sqrt();
                    hyper.a0 * corr_inv[(s, t)] / (ds * dt)
                })
            })
            .collect();
        Ok(Prior {
            mean,
            var,
            precision,
            kappa: hyper.b0 * view.n as f64 / g_count as f64,
        })
    }
}

/// Outcome of a MAP-EM run.
#[derive(Clone, Debug)]
pub struct EmOutcome {
    pub params: GmmParams,
    /// MAP objective at initialization and after every iteration.
    pub objective_trace: Vec<f64>,
    /// Trace positions right after a collapsed component was re-seeded;
    /// the objective may drop there.
    pub reseeds: Vec<usize>,
}

/// One MAP-EM problem: a training view, a component count and prior
/// hyperparameters.
#[derive(Clone, Debug)]
pub struct MapEm {
    view: MemberView,
    components: usize,
    hyper: PriorParams,
    prior: Prior,
}

impl MapEm {
    pub fn new(view: MemberView, components: usize, hyper: PriorParams) -> Result<Self> {
        if components == 0 {
            return Err(invalid!("a mixture needs at least one component"));
        }
        if view.n < components {
            return Err(invalid!(
                "{} training series cannot seed {components} components",
                view.n
            ));
        }
        if view.cells() == 0 {
            return Err(invalid!("empty member view"));
        }
        for (name, v) in [("a0", hyper.a0), ("b0", hyper.b0), ("n0", hyper.n0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid!("prior hyperparameter {name} must be positive, got {v}"));
            }
        }
        let prior = Prior::from_view(&view, components, &hyper)?;
        Ok(MapEm {
            view,
            components,
            hyper,
            prior,
        })
    }

    pub fn view(&self) -> &MemberView {
        &self.view
    }

    pub fn hyper(&self) -> PriorParams {
        self.hyper
    }

    pub fn prior_mean(&self) -> &[f64] {
        &self.prior.mean
    }

    pub fn prior_variance(&self) -> &[f64] {
        &self.prior.var
    }

    /// Pseudo-observation count of the variance prior.
    pub fn kappa(&self) -> f64 {
        self.prior.kappa
    }

    /// Prior precision matrix of the mean trajectory of attribute `a`.
    pub fn mean_precision(&self, a: usize) -> &DMatrix<f64> {
        &self.prior.precision[a]
    }

    fn seed_mean(&self, i: usize, out: &mut [f64]) {
        let (x, obs) = self.view.series(i);
        for c in 0..out.len() {
            out[c] = if obs[c] { x[c] } else { self.prior.mean[c] };
        }
    }

    /// Means from `G` distinct random training series (observed cells, the
    /// prior mean elsewhere), prior variances, uniform weights.
    pub fn initial_params(&self, rng: &mut Rng) -> GmmParams {
        let cells = self.view.cells();
        let picks = sample(rng, self.view.n, self.components);
        let mut means = vec![0.0; self.components * cells];
        for (g, i) in picks.iter().enumerate() {
            self.seed_mean(i, &mut means[g * cells..(g + 1) * cells]);
        }
        GmmParams {
            weights: vec![1.0 / self.components as f64; self.components],
            means,
            variances: self.prior.var.repeat(self.components),
        }
    }

    /// Responsibilities (`n × G`, row-major) and data log-likelihood.
    pub fn e_step(&self, params: &GmmParams) -> (Vec<f64>, f64) {
        posterior_rows(&self.view, params)
    }

    pub fn log_prior(&self, params: &GmmParams) -> f64 {
        let (len, attrs) = (self.view.len, self.view.attrs);
        let cells = len * attrs;
        let mut lp = 0.0;
        let mut delta = DVector::zeros(len);
        for g in 0..params.components() {
            let mu = params.mean(g);
            for a in 0..attrs {
                for t in 0..len {
                    delta[t] = mu[t * attrs + a] - self.prior.mean[t * attrs + a];
                }
                lp -= 0.5 * (delta.transpose() * &self.prior.precision[a] * &delta)[(0, 0)];
            }
            let var = params.variance(g);
            for c in 0..cells {
                lp -= 0.5 * self.prior.kappa * (var[c].ln() + self.prior.var[c] / var[c]);
            }
        }
        lp
    }

    /// MAP objective: data log-likelihood over observed cells plus log prior
    /// (up to an additive constant).
    pub fn objective(&self, params: &GmmParams) -> f64 {
        self.e_step(params).1 + self.log_prior(params)
    }

    /// Conditional-maximization M-step for the given responsibilities.
    pub fn m_step(&self, params: &GmmParams, resp: &[f64]) -> Result<GmmParams> {
        let g_count = self.components;
        let (n, len, attrs) = (self.view.n, self.view.len, self.view.attrs);
        let cells = len * attrs;

        let mut weights = vec![0.0; g_count];
        for i in 0..n {
            for g in 0..g_count {
                weights[g] += resp[i * g_count + g];
            }
        }
        for w in &mut weights {
            *w /= n as f64;
        }

        let mut means = params.means.clone();
        let mut variances = params.variances.clone();
        // sufficient statistics per cell: Σγr, Σγrx, Σγrx²
        let mut w_sum = vec![0.0; cells];
        let mut x_sum = vec![0.0; cells];
        let mut xx_sum = vec![0.0; cells];
        for g in 0..g_count {
            w_sum.iter_mut().for_each(|v| *v = 0.0);
            x_sum.iter_mut().for_each(|v| *v = 0.0);
            xx_sum.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                let r = resp[i * g_count + g];
                if r == 0.0 {
                    continue;
                }
                let (x, obs) = self.view.series(i);
                for c in 0..cells {
                    if obs[c] {
                        w_sum[c] += r;
                        x_sum[c] += r * x[c];
                        xx_sum[c] += r * x[c] * x[c];
                    }
                }
            }
            let old_var = params.variance(g);
            let mu = &mut means[g * cells..(g + 1) * cells];
            for a in 0..attrs {
                let lambda = &self.prior.precision[a];
                let mut lhs = lambda.clone();
                let mut m = DVector::zeros(len);
                for t in 0..len {
                    m[t] = self.prior.mean[t * attrs + a];
                }
                let mut rhs = lambda * &m;
                for t in 0..len {
                    let c = t * attrs + a;
                    lhs[(t, t)] += w_sum[c] / old_var[c];
                    rhs[t] += x_sum[c] / old_var[c];
                }
                let sol = lhs.cholesky().ok_or_else(|| {
                    Error::Numerical("mean update system is not positive definite".into())
                })?;
                let new = sol.solve(&rhs);
                for t in 0..len {
                    mu[t * attrs + a] = new[t];
                }
            }
            let var = &mut variances[g * cells..(g + 1) * cells];
            let kappa = self.prior.kappa;
            for c in 0..cells {
                let denom = w_sum[c] + kappa;
                if denom > 0.0 {
                    // Σγr(x−μ)² expanded from the sufficient statistics
                    let sq = (xx_sum[c] - 2.0 * mu[c] * x_sum[c] + mu[c] * mu[c] * w_sum[c]).max(0.0);
                    var[c] = ((sq + kappa * self.prior.var[c]) / denom).max(MIN_VARIANCE);
                }
            }
        }
        Ok(GmmParams {
            weights,
            means,
            variances,
        })
    }

    /// Alternate E- and M-steps from `init` until the objective improves by
    /// less than `tol` or `max_iters` M-steps have run.
    pub fn run(&self, init: GmmParams, max_iters: usize, tol: f64, rng: &mut Rng) -> Result<EmOutcome> {
        let mut params = init;
        let (mut resp, data) = self.e_step(&params);
        let mut trace = vec![data + self.log_prior(&params)];
        let mut reseeds = Vec::new();
        let cells = self.view.cells();
        for _ in 0..max_iters {
            params = self.m_step(&params, &resp)?;
            let mut reseeded = false;
            for g in 0..self.components {
                if params.weights[g] < COLLAPSE_WEIGHT {
                    if reseeds.len() >= MAX_RESEEDS {
                        return Err(Error::Numerical(format!(
                            "component {g} collapsed again after {MAX_RESEEDS} re-seeds"
                        )));
                    }
                    let i = rng.random_range(0..self.view.n);
                    let mut mu = vec![0.0; cells];
                    self.seed_mean(i, &mut mu);
                    params.means[g * cells..(g + 1) * cells].copy_from_slice(&mu);
                    params.variances[g * cells..(g + 1) * cells].copy_from_slice(&self.prior.var);
                    params.weights[g] = 1.0 / self.components as f64;
                    reseeded = true;
                }
            }
            if reseeded {
                let total: f64 = params.weights.iter().sum();
                params.weights.iter_mut().for_each(|w| *w /= total);
                reseeds.push(trace.len());
            }
            let (r, data) = self.e_step(&params);
            resp = r;
            let obj = data + self.log_prior(&params);
            if !obj.is_finite() || !params.is_finite() {
                return Err(Error::Numerical("MAP-EM produced non-finite parameters".into()));
            }
            let prev = *trace.last().unwrap();
            trace.push(obj);
            if !reseeded && obj - prev < tol {
                break;
            }
        }
        Ok(EmOutcome {
            params,
            objective_trace: trace,
            reseeds,
        })
    }
}
