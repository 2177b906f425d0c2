//! Time series cluster kernel.
//!
//! An ensemble of mixture models is fitted on random views of the training
//! series (a contiguous time segment, a subset of attributes, a subsample of
//! series, random prior hyperparameters and a random initialization) for
//! every component count in `2..=C`. The kernel between two series is the
//! sum over members of the inner products of their posterior vectors.

pub mod gmm;

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Standardization;
use crate::error::{invalid, Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::{io, par, seed, TimeSeriesDataset};

pub use gmm::{log_likelihood_observed, EmOutcome, GmmParams, MapEm, MemberView, PriorParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TckConfig {
    /// Largest component count `C`; members use `G = 2..=C`.
    pub max_components: usize,
    /// Members per component count.
    pub realizations: usize,
    pub min_segment: usize,
    /// Defaults to `T` when unset.
    pub max_segment: Option<usize>,
    pub min_attributes: usize,
    pub subsample: f64,
    pub a0_range: (f64, f64),
    pub b0_range: (f64, f64),
    pub n0_range: (f64, f64),
    pub em_max_iters: usize,
    pub em_tol: f64,
    pub master_seed: u64,
}

impl Default for TckConfig {
    fn default() -> Self {
        TckConfig {
            max_components: 10,
            realizations: 10,
            min_segment: 6,
            max_segment: None,
            min_attributes: 2,
            subsample: 0.8,
            a0_range: (0.1, 1.0),
            b0_range: (0.1, 1.0),
            n0_range: (0.05, 0.2),
            em_max_iters: 20,
            em_tol: 1e-5,
            master_seed: 0,
        }
    }
}

impl TckConfig {
    /// Defaults with the segment and attribute minima clipped to `T` and `V`.
    pub fn for_shape(t: usize, v: usize) -> Self {
        let d = TckConfig::default();
        TckConfig {
            min_segment: d.min_segment.min(t),
            min_attributes: d.min_attributes.min(v),
            ..d
        }
    }

    pub fn member_count(&self) -> usize {
        self.max_components.saturating_sub(1) * self.realizations
    }

    fn validate(&self, n: usize, t: usize, v: usize) -> Result<usize> {
        if self.max_components < 2 {
            return Err(invalid!("max_components must be at least 2"));
        }
        if self.realizations == 0 {
            return Err(invalid!("realizations must be at least 1"));
        }
        if self.min_segment < 2 {
            return Err(invalid!("min_segment must be at least 2"));
        }
        let max_seg = self.max_segment.unwrap_or(t);
        if self.min_segment > t || max_seg > t || self.min_segment > max_seg {
            return Err(invalid!(
                "segment lengths [{}, {max_seg}] infeasible for T = {t}",
                self.min_segment
            ));
        }
        if self.min_attributes == 0 || self.min_attributes > v {
            return Err(invalid!(
                "min_attributes = {} infeasible for V = {v}",
                self.min_attributes
            ));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(invalid!("subsample fraction must lie in (0, 1]"));
        }
        for (name, (lo, hi)) in [("a0", self.a0_range), ("b0", self.b0_range), ("n0", self.n0_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(invalid!("{name} range [{lo}, {hi}] must be nonempty with positive endpoints"));
            }
        }
        if self.em_max_iters == 0 {
            return Err(invalid!("em_max_iters must be at least 1"));
        }
        let n_sub = ((self.subsample * n as f64).ceil() as usize).max(self.max_components).min(n);
        if n_sub < self.max_components {
            return Err(invalid!(
                "{n} training series cannot seed {} components",
                self.max_components
            ));
        }
        Ok(max_seg)
    }
}

/// Everything needed to fit one ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub index: usize,
    pub components: usize,
    /// Half-open `[start, end)` time range.
    pub segment: (usize, usize),
    pub attributes: Vec<usize>,
    pub prior: PriorParams,
    /// Training series the member is fitted on, ascending.
    pub subsample: Vec<usize>,
    pub seed: u64,
    pub em_max_iters: usize,
    pub em_tol: f64,
}

fn uniform(rng: &mut seed::Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draw `(C − 1) · R` member specs for a training set of `n` series of shape
/// `t × v`, in order of increasing component count.
pub fn sample_member_configs(cfg: &TckConfig, n: usize, t: usize, v: usize) -> Result<Vec<MemberSpec>> {
    let max_seg = cfg.validate(n, t, v)?;
    let n_sub = ((cfg.subsample * n as f64).ceil() as usize).max(cfg.max_components).min(n);
    let mut rng = seed::rng(seed::derive_seed(cfg.master_seed, "tck-specs", 0));
    let mut specs = Vec::with_capacity(cfg.member_count());
    for g in 2..=cfg.max_components {
        for _ in 0..cfg.realizations {
            let index = specs.len();
            let len = rng.random_range(cfg.min_segment..=max_seg);
            let start = rng.random_range(0..=t - len);
            let n_attr = rng.random_range(cfg.min_attributes..=v);
            let mut attributes = sample(&mut rng, v, n_attr).into_vec();
            attributes.sort_unstable();
            let prior = PriorParams {
                a0: uniform(&mut rng, cfg.a0_range),
                b0: uniform(&mut rng, cfg.b0_range),
                n0: uniform(&mut rng, cfg.n0_range),
            };
            let mut subsample = sample(&mut rng, n, n_sub).into_vec();
            subsample.sort_unstable();
            specs.push(MemberSpec {
                index,
                components: g,
                segment: (start, start + len),
                attributes,
                prior,
                subsample,
                seed: seed::derive_seed(cfg.master_seed, "tck-member", index as u64),
                em_max_iters: cfg.em_max_iters,
                em_tol: cfg.em_tol,
            });
        }
    }
    Ok(specs)
}

/// One fitted partition of the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmMember {
    pub attribute_subset: Vec<usize>,
    pub time_segment: (usize, usize),
    pub component_count: usize,
    pub mixing_weights: Vec<f64>,
    /// `G × segment_length × |attributes|`.
    pub means: Vec<f64>,
    /// Same layout as `means`, strictly positive.
    pub variances: Vec<f64>,
    pub prior_params: PriorParams,
    pub seed: u64,
    /// MAP objective at initialization and after each EM iteration.
    pub objective_trace: Vec<f64>,
    /// Trace positions following a component re-seed.
    pub reseeds: Vec<usize>,
}

impl GmmMember {
    pub fn params(&self) -> GmmParams {
        GmmParams {
            weights: self.mixing_weights.clone(),
            means: self.means.clone(),
            variances: self.variances.clone(),
        }
    }

    pub fn view(&self, ds: &TimeSeriesDataset) -> MemberView {
        MemberView::extract(ds, None, self.time_segment, &self.attribute_subset)
    }

    /// True when the MAP objective never decreased by more than `tol`,
    /// ignoring steps right after a re-seed.
    pub fn objective_non_decreasing(&self, tol: f64) -> bool {
        self.objective_trace
            .windows(2)
            .enumerate()
            .all(|(k, w)| self.reseeds.contains(&(k + 1)) || w[1] >= w[0] - tol)
    }

    fn check_against(&self, t: usize, v: usize) -> Result<()> {
        let (s, e) = self.time_segment;
        if s >= e || e > t || self.attribute_subset.iter().any(|&a| a >= v) {
            return Err(invalid!(
                "member view (segment {s}..{e}, attributes {:?}) does not fit T×V = {t}×{v}",
                self.attribute_subset
            ));
        }
        Ok(())
    }
}

/// Fit one member on the training series listed in its spec.
pub fn map_em_fit(spec: &MemberSpec, train: &TimeSeriesDataset) -> Result<GmmMember> {
    if spec.subsample.is_empty() {
        return Err(invalid!("member {} has an empty training subsample", spec.index));
    }
    if let Some(&bad) = spec.subsample.iter().find(|&&i| i >= train.len()) {
        return Err(invalid!("member {} references series {bad} of {}", spec.index, train.len()));
    }
    let view = MemberView::extract(train, Some(&spec.subsample), spec.segment, &spec.attributes);
    let problem = MapEm::new(view, spec.components, spec.prior)?;
    let mut rng = seed::rng(spec.seed);
    let init = problem.initial_params(&mut rng);
    let out = problem.run(init, spec.em_max_iters, spec.em_tol, &mut rng)?;
    Ok(GmmMember {
        attribute_subset: spec.attributes.clone(),
        time_segment: spec.segment,
        component_count: spec.components,
        mixing_weights: out.params.weights,
        means: out.params.means,
        variances: out.params.variances,
        prior_params: spec.prior,
        seed: spec.seed,
        objective_trace: out.objective_trace,
        reseeds: out.reseeds,
    })
}

/// Posterior probabilities `N × G` of every series of `ds` under `member`.
pub fn posteriors(member: &GmmMember, ds: &TimeSeriesDataset) -> Result<DenseMatrix> {
    member.check_against(ds.time_steps(), ds.variables())?;
    Ok(gmm::posteriors_for_view(&member.view(ds), &member.params()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TckModel {
    pub members: Vec<GmmMember>,
    /// Statistics the training data were standardized with, if any.
    pub standardization: Option<Standardization>,
    pub config: TckConfig,
    pub time_steps: usize,
    pub variables: usize,
}

impl TckModel {
    pub fn with_standardization(mut self, stats: Standardization) -> Self {
        self.standardization = Some(stats);
        self
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: TckModel = io::read_json(path)?;
        if model.members.is_empty() {
            return Err(Error::Format(format!("{}: model has no members", path.display())));
        }
        for m in &model.members {
            m.check_against(model.time_steps, model.variables)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(model)
    }

    /// Concatenated posterior vectors of every member, `N × Σ G`.
    pub fn embed(&self, ds: &TimeSeriesDataset) -> Result<DenseMatrix> {
        if (ds.time_steps(), ds.variables()) != (self.time_steps, self.variables) {
            return Err(invalid!(
                "dataset is {}×{}, model was fitted on {}×{}",
                ds.time_steps(),
                ds.variables(),
                self.time_steps,
                self.variables
            ));
        }
        let blocks = par::try_map_indexed(self.members.len(), |q| posteriors(&self.members[q], ds))?;
        let width: usize = blocks.iter().map(DenseMatrix::cols).sum();
        let mut data = Vec::with_capacity(ds.len() * width);
        for i in 0..ds.len() {
            for b in &blocks {
                data.extend_from_slice(b.row(i));
            }
        }
        Ok(DenseMatrix::from_vec_unchecked(ds.len(), width, data))
    }
}

/// Fit every member of the ensemble on `train` (already standardized).
/// Members are fitted independently and may run in parallel; the result does
/// not depend on scheduling.
pub fn fit_tck(train: &TimeSeriesDataset, cfg: &TckConfig) -> Result<TckModel> {
    if train.is_empty() {
        return Err(invalid!("cannot fit the kernel on an empty training set"));
    }
    let specs = sample_member_configs(cfg, train.len(), train.time_steps(), train.variables())?;
    let members = par::try_map_indexed(specs.len(), |q| {
        let spec = &specs[q];
        map_em_fit(spec, train).map_err(|e| {
            let detail = format!(
                "member {} (G={}, segment {}..{}, attributes {:?}): {e}",
                spec.index, spec.components, spec.segment.0, spec.segment.1, spec.attributes
            );
            match e {
                Error::Numerical(_) => Error::Numerical(detail),
                _ => Error::Invalid(detail),
            }
        })
    })?;
    Ok(TckModel {
        members,
        standardization: None,
        config: cfg.clone(),
        time_steps: train.time_steps(),
        variables: train.variables(),
    })
}

/// Non-negative kernel matrix; square instances are Gram matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix(DenseMatrix);

impl KernelMatrix {
    /// Wrap an existing matrix, checking entries are finite and non-negative.
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(invalid!("kernel entries must be finite"));
        }
        if m.as_slice().iter().any(|&v| v < 0.0) {
            return Err(invalid!("kernel entries must be non-negative"));
        }
        Ok(KernelMatrix(m))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.0
    }

    pub fn is_square(&self) -> bool {
        self.0.rows() == self.0.cols()
    }

    /// Restriction to `indices × indices`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> DenseMatrix {
        self.0.select(indices, indices)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.0.write_csv(path)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        KernelMatrix::new(DenseMatrix::read_csv(path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// `K = Σ_members Π_a Π_bᵀ` where `Π` are member posteriors (`|a| × |b|`).
pub fn kernel_matrix(model: &TckModel, a: &TimeSeriesDataset, b: &TimeSeriesDataset) -> Result<KernelMatrix> {
    let ea = model.embed(a)?;
    let eb = if std::ptr::eq(a, b) { None } else { Some(model.embed(b)?) };
    let eb = eb.as_ref().unwrap_or(&ea);
    let rows = par::map_indexed(ea.rows(), |i| {
        let ri = ea.row(i);
        (0..eb.rows()).map(|j| dot(ri, eb.row(j))).collect::<Vec<f64>>()
    });
    Ok(KernelMatrix(DenseMatrix::from_vec_unchecked(
        ea.rows(),
        eb.rows(),
        rows.concat(),
    )))
}

/// Square kernel of `ds` against itself.
pub fn gram_matrix(model: &TckModel, ds: &TimeSeriesDataset) -> Result<KernelMatrix> {
    kernel_matrix(model, ds, ds)
}
