//! Collocation sampling, the training loop, curriculum staging and
//! in-process data-parallel training.
//!
//! Serial and data-parallel training share one loop. Each data-parallel
//! worker runs it on its own replica and shard, and a [`Reducer`] averages
//! the local gradients behind a barrier; serial training uses the identity
//! reducer.

use std::fs::{self, File};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Barrier, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::diffgraph::{Graph, Value};
use crate::error::{Error, Result};
use crate::losses::{
    causality_weights, dirichlet_loss, ic_loss, periodic_bc_loss, pointwise_residual_sq,
    poynting_penalty, segment_losses, weighted_pde_loss, CausalityConfig, EnergyConfig, LossState,
    MetricsRow, PdeKind, BC, IC, PDE,
};
use crate::models::{Bound, Network};
use crate::optimizers::{
    should_switch, Adam, AdamConfig, ExponentialLr, Lbfgs, LbfgsConfig, LbfgsStatus, Pair,
    SwitchPolicy,
};
use crate::tensor::Tensor;

/// Placement of grid nodes along one axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoints {
    /// Both ends included.
    #[default]
    Closed,
    /// Lower end included, upper end dropped (periodic axes).
    LeftClosed,
    /// Cell midpoints.
    Open,
}

/// Nodes of a 1-D uniform grid.
pub fn linspace(lo: f64, hi: f64, n: usize, ends: Endpoints) -> Vec<f64> {
    let w = hi - lo;
    match ends {
        Endpoints::Closed if n == 1 => vec![lo],
        Endpoints::Closed => (0..n).map(|i| lo + w * i as f64 / (n - 1) as f64).collect(),
        Endpoints::LeftClosed => (0..n).map(|i| lo + w * i as f64 / n as f64).collect(),
        Endpoints::Open => (0..n).map(|i| lo + w * (i as f64 + 0.5) / n as f64).collect(),
    }
}

/// Tensor product of per-axis grids; the last axis varies fastest.
pub fn tensor_product(axes: &[Vec<f64>]) -> Tensor {
    let d = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut data = Vec::with_capacity(total * d);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        for (j, &i) in idx.iter().enumerate() {
            data.push(axes[j][i]);
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Tensor::from_parts(vec![total, d], data)
}

/// Uniform tensor grid over `bounds` with `dims[j]` nodes on axis `j`.
pub fn sample_uniform(bounds: &[(f64, f64)], dims: &[usize], ends: &[Endpoints]) -> Result<Tensor> {
    if dims.len() != bounds.len() || dims.iter().any(|&n| n == 0) {
        return Err(Error::Invalid("one positive count per axis is required".into()));
    }
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .zip(dims)
        .enumerate()
        .map(|(j, (&(lo, hi), &n))| linspace(lo, hi, n, ends.get(j).copied().unwrap_or_default()))
        .collect();
    Ok(tensor_product(&axes))
}

fn lhs_axis(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    strata
        .into_iter()
        .map(|s| lo + (hi - lo) * (s as f64 + rng.random::<f64>()) / n as f64)
        .collect()
}

/// Joint Latin hypercube: `n` points with exactly one in each of the `n`
/// equal strata of every axis.
pub fn sample_lhs(bounds: &[(f64, f64)], n: usize, seed: u64) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::Invalid("LHS needs at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = bounds.iter().map(|&(lo, hi)| lhs_axis(&mut rng, lo, hi, n)).collect();
    let d = bounds.len();
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for c in &cols {
            data.push(c[i]);
        }
    }
    Ok(Tensor::from_parts(vec![n, d], data))
}

/// Independent 1-D stratification per axis combined as a tensor product.
pub fn sample_lhs_per_axis(bounds: &[(f64, f64)], dims: &[usize], seed: u64) -> Result<Tensor> {
    if dims.len() != bounds.len() || dims.iter().any(|&n| n == 0) {
        return Err(Error::Invalid("one positive count per axis is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axes: Vec<Vec<f64>> = bounds
        .iter()
        .zip(dims)
        .map(|(&(lo, hi), &n)| lhs_axis(&mut rng, lo, hi, n))
        .collect();
    for a in &mut axes {
        a.sort_by(f64::total_cmp);
    }
    Ok(tensor_product(&axes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    Uniform {
        dims: Vec<usize>,
        #[serde(default)]
        ends: Vec<Endpoints>,
    },
    Lhs {
        n: usize,
    },
    LhsPerAxis {
        dims: Vec<usize>,
    },
}

impl Sampling {
    pub fn len(&self) -> usize {
        match self {
            Sampling::Uniform { dims, .. } | Sampling::LhsPerAxis { dims } => dims.iter().product(),
            Sampling::Lhs { n } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn draw(&self, bounds: &[(f64, f64)], seed: u64) -> Result<Tensor> {
        match self {
            Sampling::Uniform { dims, ends } => sample_uniform(bounds, dims, ends),
            Sampling::Lhs { n } => sample_lhs(bounds, *n, seed),
            Sampling::LhsPerAxis { dims } => sample_lhs_per_axis(bounds, dims, seed),
        }
    }
}

/// Boundary treatment that enters the loss. Architecturally periodic models
/// use `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    None,
    /// Paired values (and optionally normal derivatives) on opposite faces of
    /// every spatial axis.
    Periodic { derivative: bool },
    /// Fixed value on both faces of every spatial axis.
    Dirichlet { value: f64 },
}

pub type InitialFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// What the trainer needs to know about a PDE problem. Inputs are the
/// spatial coordinates followed by time.
#[derive(Clone)]
pub struct Problem {
    pub pde: PdeKind,
    pub bounds: Vec<(f64, f64)>,
    /// Field values at `t = t0` from the spatial coordinates.
    pub initial: InitialFn,
    pub boundary: BoundaryKind,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("pde", &self.pde)
            .field("bounds", &self.bounds)
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn spatial_dims(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn time_bounds(&self) -> (f64, f64) {
        *self.bounds.last().expect("validated bounds")
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.len() != self.pde.input_dim() {
            return Err(Error::Config(format!(
                "{} coordinate bounds for a PDE with {} inputs",
                self.bounds.len(),
                self.pde.input_dim()
            )));
        }
        if self.bounds.iter().any(|(lo, hi)| !(hi > lo)) {
            return Err(Error::Config("every axis needs lo < hi".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundarySet {
    Periodic { axis: usize, left: Tensor, right: Tensor },
    Dirichlet { points: Tensor, value: f64 },
}

/// Interior, initial and boundary points of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub interior: Tensor,
    pub initial: Tensor,
    pub initial_targets: Tensor,
    pub boundary: Vec<BoundarySet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub interior: Sampling,
    /// Initial-condition nodes per spatial axis.
    pub initial: usize,
    /// Boundary nodes along each axis tangent to a face.
    pub boundary: usize,
}

impl CollocationSet {
    pub fn build(problem: &Problem, cfg: &SamplingConfig, seed: u64) -> Result<Self> {
        problem.validate()?;
        let interior = cfg.interior.draw(&problem.bounds, seed)?;
        let sd = problem.spatial_dims();
        let (t0, _) = problem.time_bounds();

        let mut axes: Vec<Vec<f64>> = problem.bounds[..sd]
            .iter()
            .map(|&(lo, hi)| linspace(lo, hi, cfg.initial, Endpoints::Closed))
            .collect();
        axes.push(vec![t0]);
        let initial = tensor_product(&axes);
        let mut targets = Vec::new();
        let mut width = 0;
        for r in 0..initial.rows() {
            let row = &initial.data()[r * (sd + 1)..r * (sd + 1) + sd];
            let v = (problem.initial)(row);
            width = v.len();
            targets.extend(v);
        }
        if width != problem.pde.fields() {
            return Err(Error::Config(format!(
                "initial condition yields {width} values, expected {}",
                problem.pde.fields()
            )));
        }
        let initial_targets = Tensor::new(vec![initial.rows(), width], targets)?;

        let mut boundary = Vec::new();
        if !matches!(problem.boundary, BoundaryKind::None) {
            for axis in 0..sd {
                let face = |at: f64| {
                    let axes: Vec<Vec<f64>> = problem
                        .bounds
                        .iter()
                        .enumerate()
                        .map(|(j, &(lo, hi))| {
                            if j == axis {
                                vec![at]
                            } else {
                                linspace(lo, hi, cfg.boundary, Endpoints::Closed)
                            }
                        })
                        .collect();
                    tensor_product(&axes)
                };
                let (lo, hi) = problem.bounds[axis];
                match problem.boundary {
                    BoundaryKind::Periodic { .. } => boundary.push(BoundarySet::Periodic {
                        axis,
                        left: face(lo),
                        right: face(hi),
                    }),
                    BoundaryKind::Dirichlet { value } => {
                        let (l, r) = (face(lo), face(hi));
                        let mut data = l.data().to_vec();
                        data.extend_from_slice(r.data());
                        boundary.push(BoundarySet::Dirichlet {
                            points: Tensor::new(vec![l.rows() + r.rows(), l.cols()], data)?,
                            value,
                        });
                    }
                    BoundaryKind::None => unreachable!(),
                }
            }
        }
        Ok(Self {
            interior,
            initial,
            initial_targets,
            boundary,
        })
    }

    /// Contiguous interior slices for `workers` ranks, the last absorbing
    /// the remainder. Initial and boundary points are copied to every shard.
    pub fn shards(&self, workers: usize) -> Result<Vec<CollocationSet>> {
        let n = self.interior.rows();
        if workers == 0 || workers > n {
            return Err(Error::Config(format!("cannot split {n} points over {workers} workers")));
        }
        let base = n / workers;
        (0..workers)
            .map(|r| {
                let len = if r + 1 == workers { n - base * r } else { base };
                Ok(CollocationSet {
                    interior: self.interior.slice_rows(base * r, len)?,
                    ..self.clone()
                })
            })
            .collect()
    }
}

/// Energy-conservation penalty settings for the Maxwell system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyPenalty {
    pub weight: f64,
    /// Equally spaced sample times over the time interval.
    pub times: usize,
    pub grid: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Balancing {
    pub alpha: f64,
    pub update_period: usize,
}

impl Default for Balancing {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            update_period: 100,
        }
    }
}

fn default_gamma() -> f64 {
    1.0
}

fn default_save_every() -> usize {
    1000
}

fn default_lambda() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Per-epoch learning-rate decay.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub switch: Option<SwitchPolicy>,
    #[serde(default)]
    pub lbfgs: LbfgsConfig,
    #[serde(default = "default_lambda")]
    pub lambda: [f64; 3],
    #[serde(default)]
    pub balancing: Option<Balancing>,
    #[serde(default)]
    pub causality: Option<CausalityConfig>,
    #[serde(default)]
    pub energy: Option<EnergyPenalty>,
    /// Redraw the interior set every N epochs. Adam phase only.
    #[serde(default)]
    pub resample_every: Option<usize>,
    #[serde(default = "default_save_every")]
    pub save_every: usize,
    #[serde(default)]
    pub run_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            adam: AdamConfig::default(),
            gamma: 1.0,
            switch: None,
            lbfgs: LbfgsConfig::default(),
            lambda: [1.0; 3],
            balancing: None,
            causality: None,
            energy: None,
            resample_every: None,
            save_every: 1000,
            run_dir: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, problem: &Problem, sampling: Option<&SamplingConfig>) -> Result<()> {
        problem.validate()?;
        self.scheduler().validate()?;
        self.loss_state().validate()?;
        if self.save_every == 0 {
            return Err(Error::Config("save_every must be positive".into()));
        }
        if let Some(c) = &self.causality {
            if c.segments == 0 || c.eps < 0.0 {
                return Err(Error::Config("causality needs segments > 0 and eps >= 0".into()));
            }
        }
        if let Some(e) = &self.energy {
            if !matches!(problem.pde, PdeKind::MaxwellTe { .. }) {
                return Err(Error::Config("the energy penalty applies to the Maxwell system".into()));
            }
            if e.times < 2 || e.grid == 0 {
                return Err(Error::Config("energy penalty needs times >= 2 and grid > 0".into()));
            }
        }
        if let (Some(0), _) | (Some(_), Some(SamplingConfig { interior: Sampling::Uniform { .. }, .. })) =
            (self.resample_every, sampling)
        {
            return Err(Error::Config(
                "resample_every needs a positive cadence and a random sampling mode".into(),
            ));
        }
        Ok(())
    }

    fn scheduler(&self) -> ExponentialLr {
        ExponentialLr {
            base: self.adam.lr,
            gamma: self.gamma,
        }
    }

    fn loss_state(&self) -> LossState {
        let b = self.balancing.unwrap_or_default();
        LossState {
            lambda: self.lambda,
            alpha: b.alpha,
            update_period: b.update_period,
        }
    }
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    /// Next epoch to run.
    pub epoch: usize,
    pub adam: Adam,
    /// Present once the run has switched to L-BFGS.
    pub lbfgs: Option<Lbfgs>,
    pub loss: LossState,
    /// Total loss per completed epoch.
    pub history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateHeader {
    epoch: usize,
    adam_t: u64,
    betas: (f64, f64),
    adam_eps: f64,
    loss: LossState,
    history: Vec<f64>,
    lbfgs: Option<LbfgsConfig>,
    pairs: usize,
}

impl TrainState {
    pub fn fresh(n_params: usize, cfg: &TrainConfig) -> Self {
        Self {
            epoch: 0,
            adam: Adam::new(n_params, &cfg.adam),
            lbfgs: None,
            loss: cfg.loss_state(),
            history: Vec::new(),
        }
    }

    pub fn to_checkpoint<N: Network + ?Sized>(&self, net: &N) -> Checkpoint {
        let header = StateHeader {
            epoch: self.epoch,
            adam_t: self.adam.t,
            betas: self.adam.betas,
            adam_eps: self.adam.eps,
            loss: self.loss.clone(),
            history: self.history.clone(),
            lbfgs: self.lbfgs.as_ref().map(|l| l.cfg),
            pairs: self.lbfgs.as_ref().map_or(0, |l| l.pairs.len()),
        };
        let mut ck = Checkpoint::new(
            serde_json::json!({ "model": net.describe(), "train": header }),
            net.params(),
        );
        ck.push_state("adam.m", Tensor::row(self.adam.m.clone()));
        ck.push_state("adam.v", Tensor::row(self.adam.v.clone()));
        if let Some(l) = &self.lbfgs {
            for (i, p) in l.pairs.iter().enumerate() {
                ck.push_state(&format!("lbfgs.s{i}"), Tensor::row(p.s.clone()));
                ck.push_state(&format!("lbfgs.y{i}"), Tensor::row(p.y.clone()));
            }
        }
        ck
    }

    /// Restores parameters into `net` and returns the saved state.
    pub fn from_checkpoint<N: Network + ?Sized>(ck: &Checkpoint, net: &mut N) -> Result<Self> {
        net.params_mut().load_from(&ck.param_store())?;
        let h: StateHeader = serde_json::from_value(ck.header["train"].clone())
            .map_err(|e| Error::Format(format!("training state: {e}")))?;
        let get = |name: &str| -> Result<Vec<f64>> {
            ck.state(name)
                .map(|t| t.data().to_vec())
                .ok_or_else(|| Error::Format(format!("missing state `{name}`")))
        };
        let adam = Adam {
            betas: h.betas,
            eps: h.adam_eps,
            m: get("adam.m")?,
            v: get("adam.v")?,
            t: h.adam_t,
        };
        let lbfgs = match h.lbfgs {
            None => None,
            Some(cfg) => {
                let mut l = Lbfgs::new(cfg);
                for i in 0..h.pairs {
                    let s = get(&format!("lbfgs.s{i}"))?;
                    let y = get(&format!("lbfgs.y{i}"))?;
                    let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                    l.pairs.push_back(Pair { s, y, rho: 1.0 / sy });
                }
                Some(l)
            }
        };
        Ok(Self {
            epoch: h.epoch,
            adam,
            lbfgs,
            loss: h.loss,
            history: h.history,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub metrics: Vec<MetricsRow>,
    pub state: TrainState,
    pub switched_at: Option<usize>,
    /// Why training ended before `epochs`, if it did.
    pub stopped: Option<String>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.state.history.last().copied()
    }
}

// ---- loss evaluation ---------------------------------------------------------

const ENERGY: usize = 3;

struct Terms {
    values: [Option<Value>; 4],
    plain_pde: f64,
    omega: Option<Vec<f64>>,
}

fn build_terms<N: Network + ?Sized>(
    g: &mut Graph,
    bound: &Bound<'_, N>,
    problem: &Problem,
    data: &CollocationSet,
    cfg: &TrainConfig,
    frozen_omega: Option<&[f64]>,
) -> Result<Terms> {
    let mut values = [None; 4];
    let mut omega_used = None;
    let x = g.leaf(data.interior.clone());
    let r2 = match pointwise_residual_sq(g, bound, &problem.pde, x) {
        Err(Error::NonFinite { .. }) => {
            let mut scratch = Graph::new();
            let b = Bound::new(bound.net, &mut scratch);
            return Err(crate::losses::residual_loss(&mut scratch, &b, &problem.pde, &data.interior)
                .err()
                .unwrap_or(Error::NonFinite { op: "residual" }));
        }
        other => other?,
    };
    let plain = g.mean(r2)?;
    let plain_pde = g.value(plain).item();
    values[PDE] = Some(match &cfg.causality {
        None => plain,
        Some(c) => {
            let t = data.interior.column_values(problem.spatial_dims());
            let seg = segment_losses(g, r2, &t, problem.time_bounds(), c.segments)?;
            let omega = match frozen_omega {
                Some(w) => w.to_vec(),
                None => causality_weights(g.value(seg).data(), c.eps),
            };
            let loss = weighted_pde_loss(g, &omega, seg)?;
            omega_used = Some(omega);
            loss
        }
    });
    values[IC] = Some(ic_loss(g, bound, &data.initial, &data.initial_targets)?);
    let mut bc: Option<Value> = None;
    for set in &data.boundary {
        let term = match set {
            BoundarySet::Periodic { axis, left, right } => {
                let derivative = matches!(problem.boundary, BoundaryKind::Periodic { derivative: true });
                periodic_bc_loss(g, bound, left, right, *axis, derivative)?
            }
            BoundarySet::Dirichlet { points, value } => dirichlet_loss(g, bound, points, *value)?,
        };
        bc = Some(match bc {
            None => term,
            Some(acc) => g.add(acc, term)?,
        });
    }
    values[BC] = bc;
    if let Some(e) = &cfg.energy {
        let (t0, t1) = problem.time_bounds();
        let times: Vec<f64> = (0..e.times)
            .map(|i| t0 + (t1 - t0) * i as f64 / (e.times - 1) as f64)
            .collect();
        let ecfg = match problem.pde {
            PdeKind::MaxwellTe { eps, mu } => EnergyConfig {
                grid: e.grid,
                lo: problem.bounds[0].0,
                hi: problem.bounds[0].1,
                eps,
                mu,
            },
            _ => unreachable!("validated"),
        };
        values[ENERGY] = Some(poynting_penalty(g, bound, &times, &ecfg)?);
    }
    Ok(Terms {
        values,
        plain_pde,
        omega: omega_used,
    })
}

fn weights(lambda: &[f64; 3], cfg: &TrainConfig) -> [f64; 4] {
    [
        lambda[PDE],
        lambda[IC],
        lambda[BC],
        cfg.energy.map_or(0.0, |e| e.weight),
    ]
}

/// One worker's contribution to a step, or the reduced result.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalEval {
    /// Unweighted term values (pde, ic, bc, energy); zero when inactive.
    pub losses: [f64; 4],
    /// Mean squared residual without causality weights.
    pub plain_pde: f64,
    pub active: [bool; 4],
    pub grads: Grads,
    /// Causality weights used for the residual term.
    pub omega: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Grads {
    /// Gradient of the weighted total.
    Total(Vec<f64>),
    /// Gradient of each active term.
    PerTerm([Option<Vec<f64>>; 4]),
}

fn evaluate<N: Network + ?Sized>(
    net: &N,
    problem: &Problem,
    data: &CollocationSet,
    cfg: &TrainConfig,
    lambda: &[f64; 3],
    per_term: bool,
    frozen_omega: Option<&[f64]>,
) -> Result<LocalEval> {
    let mut g = Graph::new();
    let bound = Bound::new(net, &mut g);
    let wrt = bound.trainable();
    let terms = build_terms(&mut g, &bound, problem, data, cfg, frozen_omega)?;
    let mut losses = [0.0; 4];
    let mut active = [false; 4];
    for k in 0..4 {
        if let Some(v) = terms.values[k] {
            losses[k] = g.value(v).item();
            active[k] = true;
        }
    }
    let w = weights(lambda, cfg);
    let grads = if per_term {
        let mut out: [Option<Vec<f64>>; 4] = Default::default();
        for k in 0..4 {
            if let Some(v) = terms.values[k] {
                out[k] = Some(g.backward(v, &wrt)?.flatten());
            }
        }
        Grads::PerTerm(out)
    } else {
        let mut total: Option<Value> = None;
        for k in 0..4 {
            if let Some(v) = terms.values[k] {
                let s = g.scale(v, w[k])?;
                total = Some(match total {
                    None => s,
                    Some(acc) => g.add(acc, s)?,
                });
            }
        }
        let total = total.expect("the residual term is always present");
        Grads::Total(g.backward(total, &wrt)?.flatten())
    };
    Ok(LocalEval {
        losses,
        plain_pde: terms.plain_pde,
        active,
        grads,
        omega: terms.omega,
    })
}

fn total_loss(e: &LocalEval, w: &[f64; 4]) -> f64 {
    (0..4).filter(|&k| e.active[k]).map(|k| w[k] * e.losses[k]).sum()
}

fn combine(grads: &[Option<Vec<f64>>; 4], w: &[f64; 4]) -> Vec<f64> {
    let n = grads.iter().flatten().next().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for k in 0..4 {
        if let Some(gk) = &grads[k] {
            for (o, v) in out.iter_mut().zip(gk) {
                *o += w[k] * v;
            }
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ---- synchronization -----------------------------------------------------------

/// Gradient exchange between replicas.
pub trait Reducer {
    fn reduce(&mut self, local: Result<LocalEval>) -> Result<LocalEval>;
    /// Called after every parameter update with the new flat parameters.
    fn check(&mut self, params: &[f64]) -> Result<()>;
    fn is_leader(&self) -> bool;
}

struct Solo;

impl Reducer for Solo {
    fn reduce(&mut self, local: Result<LocalEval>) -> Result<LocalEval> {
        local
    }

    fn check(&mut self, _: &[f64]) -> Result<()> {
        Ok(())
    }

    fn is_leader(&self) -> bool {
        true
    }
}

/// Averages `evals` in rank order.
pub fn average(evals: &[LocalEval]) -> LocalEval {
    let w = evals.len() as f64;
    let mut acc = evals[0].clone();
    for e in &evals[1..] {
        for k in 0..4 {
            acc.losses[k] += e.losses[k];
        }
        acc.plain_pde += e.plain_pde;
        match (&mut acc.grads, &e.grads) {
            (Grads::Total(a), Grads::Total(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Grads::PerTerm(a), Grads::PerTerm(b)) => {
                for k in 0..4 {
                    if let (Some(a), Some(b)) = (&mut a[k], &b[k]) {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    }
                }
            }
            _ => unreachable!("all ranks take the same branch"),
        }
    }
    acc.losses.iter_mut().for_each(|v| *v /= w);
    acc.plain_pde /= w;
    match &mut acc.grads {
        Grads::Total(a) => a.iter_mut().for_each(|x| *x /= w),
        Grads::PerTerm(a) => a.iter_mut().flatten().flatten().for_each(|x| *x /= w),
    }
    acc
}

/// SHA-256 of the little-endian parameter bytes.
pub fn param_hash(params: &[f64]) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in params {
        h.update(v.to_le_bytes());
    }
    h.finalize().into()
}

struct Exchange {
    evals: Vec<Option<std::result::Result<LocalEval, String>>>,
    hashes: Vec<[u8; 32]>,
}

struct BarrierReducer {
    rank: usize,
    shared: Arc<(Barrier, Mutex<Exchange>)>,
}

impl Reducer for BarrierReducer {
    fn reduce(&mut self, local: Result<LocalEval>) -> Result<LocalEval> {
        let (barrier, ex) = &*self.shared;
        ex.lock().expect("exchange lock").evals[self.rank] = Some(local.map_err(|e| e.to_string()));
        barrier.wait();
        let result = {
            let guard = ex.lock().expect("exchange lock");
            let mut ok = Vec::with_capacity(guard.evals.len());
            let mut failure = None;
            for (r, slot) in guard.evals.iter().enumerate() {
                match slot.as_ref().expect("every rank posts") {
                    Ok(e) => ok.push(e.clone()),
                    Err(reason) if failure.is_none() => {
                        failure = Some(Error::Worker {
                            rank: r,
                            reason: reason.clone(),
                        })
                    }
                    Err(_) => {}
                }
            }
            match failure {
                Some(e) => Err(e),
                None => Ok(average(&ok)),
            }
        };
        // Nobody may overwrite a slot before every rank has read them all.
        barrier.wait();
        result
    }

    fn check(&mut self, params: &[f64]) -> Result<()> {
        let (barrier, ex) = &*self.shared;
        ex.lock().expect("exchange lock").hashes[self.rank] = param_hash(params);
        barrier.wait();
        let same = {
            let guard = ex.lock().expect("exchange lock");
            guard.hashes.iter().all(|h| *h == guard.hashes[0])
        };
        barrier.wait();
        if same {
            Ok(())
        } else {
            Err(Error::Worker {
                rank: self.rank,
                reason: "replica parameters diverged".into(),
            })
        }
    }

    fn is_leader(&self) -> bool {
        self.rank == 0
    }
}

// ---- training loop ---------------------------------------------------------------

struct Sink {
    csv: Option<File>,
    dir: Option<PathBuf>,
}

impl Sink {
    fn open(cfg: &TrainConfig, leader: bool, resuming: bool) -> Result<Self> {
        let Some(dir) = cfg.run_dir.as_ref().filter(|_| leader) else {
            return Ok(Self { csv: None, dir: None });
        };
        fs::create_dir_all(dir)?;
        let path = dir.join("metrics.csv");
        let csv = if resuming && path.exists() {
            fs::OpenOptions::new().append(true).open(path)?
        } else {
            let mut f = File::create(path)?;
            writeln!(f, "{}", MetricsRow::HEADER)?;
            f
        };
        Ok(Self {
            csv: Some(csv),
            dir: Some(dir.clone()),
        })
    }

    fn row(&mut self, row: &MetricsRow) -> Result<()> {
        if let Some(f) = &mut self.csv {
            writeln!(f, "{}", row.to_csv())?;
        }
        Ok(())
    }

    fn checkpoint<N: Network + ?Sized>(&self, state: &TrainState, net: &N, name: &str) -> Result<()> {
        if let Some(dir) = &self.dir {
            state.to_checkpoint(net).save(dir.join(name))?;
        }
        Ok(())
    }
}

fn mix_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[allow(clippy::too_many_arguments)]
fn run_loop<N: Network + ?Sized>(
    net: &mut N,
    problem: &Problem,
    data: &mut CollocationSet,
    sampling: Option<&SamplingConfig>,
    cfg: &TrainConfig,
    mut state: TrainState,
    reducer: &mut dyn Reducer,
) -> Result<TrainReport> {
    let leader = reducer.is_leader();
    let mut sink = Sink::open(cfg, leader, state.epoch > 0)?;
    let sched = cfg.scheduler();
    let mut metrics = Vec::new();
    let mut switched_at = None;
    let mut cached: Option<(f64, Vec<f64>)> = None;
    let mut search_failed = false;
    let mut stopped = None;

    while state.epoch < cfg.epochs {
        let epoch = state.epoch;
        if let (Some(every), Some(s)) = (cfg.resample_every, sampling) {
            if epoch > 0 && epoch % every == 0 && state.lbfgs.is_none() {
                data.interior = s.interior.draw(&problem.bounds, mix_seed(cfg.seed, epoch))?;
                cached = None;
            }
        }
        let mut params = net.params().flatten_trainable();
        let last_good = params.clone();
        let diverged = |reason: String| Error::Diverged { epoch, reason };

        if state.lbfgs.is_none() {
            let balance_now = cfg.balancing.is_some() && epoch % state.loss.update_period == 0;
            let local = evaluate(&*net, problem, data, cfg, &state.loss.lambda, balance_now, None);
            let eval = match reducer.reduce(local) {
                Err(e @ (Error::NonFinite { .. } | Error::NonFiniteResidual { .. })) => {
                    return Err(diverged(e.to_string()))
                }
                other => other?,
            };
            let grads = match &eval.grads {
                Grads::Total(g) => g.clone(),
                Grads::PerTerm(per) => {
                    let mut norms = [None; 3];
                    for k in 0..3 {
                        norms[k] = per[k].as_deref().map(norm);
                    }
                    state.loss.update(epoch, norms);
                    combine(per, &weights(&state.loss.lambda, cfg))
                }
            };
            let w = weights(&state.loss.lambda, cfg);
            let total = total_loss(&eval, &w);
            if !total.is_finite() {
                return Err(diverged(format!("loss {total}")));
            }
            let lr = sched.lr(epoch);
            if let Err(e) = state.adam.step(&mut params, &grads, lr) {
                net.params_mut().set_trainable(&last_good)?;
                return Err(diverged(e.to_string()));
            }
            net.params_mut().set_trainable(&params)?;
            reducer.check(&params)?;
            state.history.push(total);
            let row = MetricsRow {
                epoch,
                l_pde: eval.plain_pde,
                l_ic: eval.losses[IC],
                l_bc: eval.losses[BC],
                lambda: state.loss.lambda,
                lr,
            };
            sink.row(&row)?;
            metrics.push(row);
            if let Some(policy) = &cfg.switch {
                if should_switch(policy, epoch + 1, &state.history) {
                    state.lbfgs = Some(Lbfgs::new(cfg.lbfgs));
                    switched_at = Some(epoch + 1);
                }
            }
        } else {
            let lambda = state.loss.lambda;
            let w = weights(&lambda, cfg);
            // Causality weights are held fixed within one step so the line
            // search sees a smooth objective.
            let mut omega = None;
            let start = match cached.take() {
                Some(c) if cfg.causality.is_none() => Some(c),
                _ => None,
            };
            let (f, g) = match start {
                Some(c) => c,
                None => {
                    let e = evaluate(&*net, problem, data, cfg, &lambda, false, None)
                        .map_err(|e| diverged(e.to_string()))?;
                    omega = e.omega.clone();
                    let Grads::Total(gr) = e.grads.clone() else { unreachable!() };
                    (total_loss(&e, &w), gr)
                }
            };
            let mut loss_fn = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
                let mut trial = net.params().clone();
                trial.set_trainable(x)?;
                let probe = ProbeNet { inner: &*net, store: trial };
                let e = evaluate(&probe, problem, data, cfg, &lambda, false, omega.as_deref())?;
                let Grads::Total(gr) = e.grads.clone() else { unreachable!() };
                Ok((total_loss(&e, &w), gr))
            };
            let lbfgs = state.lbfgs.as_mut().expect("L-BFGS phase");
            let out = match lbfgs.step(&mut params, f, &g, &mut loss_fn) {
                Ok(out) => {
                    search_failed = false;
                    out
                }
                Err(Error::LineSearch { trials }) if !search_failed => {
                    // History was cleared; retry once from a gradient step.
                    search_failed = true;
                    state.epoch += 1;
                    let _ = trials;
                    continue;
                }
                Err(Error::LineSearch { trials }) => {
                    stopped = Some(format!("line search failed twice ({trials} trials) at epoch {epoch}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            net.params_mut().set_trainable(&params)?;
            let (l_pde, l_ic, l_bc) = {
                let e = evaluate(&*net, problem, data, cfg, &lambda, false, None)?;
                (e.plain_pde, e.losses[IC], e.losses[BC])
            };
            state.history.push(out.f);
            let row = MetricsRow {
                epoch,
                l_pde,
                l_ic,
                l_bc,
                lambda,
                lr: match out.status {
                    LbfgsStatus::Stepped { step, .. } => step,
                    LbfgsStatus::Converged => 0.0,
                },
            };
            sink.row(&row)?;
            metrics.push(row);
            cached = Some((out.f, out.g));
        }

        state.epoch += 1;
        if state.epoch % cfg.save_every == 0 {
            sink.checkpoint(&state, &*net, &format!("epoch{:07}.ckpt", state.epoch))?;
        }
    }
    sink.checkpoint(&state, &*net, "final.ckpt")?;
    Ok(TrainReport {
        metrics,
        state,
        switched_at,
        stopped,
    })
}

/// Presents an alternative parameter store through an existing network.
struct ProbeNet<'a, N: ?Sized> {
    inner: &'a N,
    store: crate::models::ParamStore,
}

impl<N: Network + ?Sized> Network for ProbeNet<'_, N> {
    fn params(&self) -> &crate::models::ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut crate::models::ParamStore {
        &mut self.store
    }

    fn forward(&self, g: &mut Graph, params: &[Value], x: Value) -> Result<Value> {
        self.inner.forward(g, params, x)
    }

    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }

    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }

    fn describe(&self) -> serde_json::Value {
        self.inner.describe()
    }
}

/// Trains `net` in place.
///
/// On a non-finite loss the parameters from before the failing step are kept
/// and [`Error::Diverged`] is returned.
pub fn train<N: Network + ?Sized>(
    net: &mut N,
    problem: &Problem,
    data: &CollocationSet,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate(problem, None)?;
    let state = TrainState::fresh(net.params().trainable_count(), cfg);
    run_loop(net, problem, &mut data.clone(), None, cfg, state, &mut Solo)
}

/// Like [`train`], with optional resampling of the interior points and
/// optional resumption from a saved state.
pub fn train_with(
    net: &mut dyn Network,
    problem: &Problem,
    sampling: &SamplingConfig,
    cfg: &TrainConfig,
    resume: Option<TrainState>,
) -> Result<TrainReport> {
    cfg.validate(problem, Some(sampling))?;
    let mut data = CollocationSet::build(problem, sampling, cfg.seed)?;
    let state = resume.unwrap_or_else(|| TrainState::fresh(net.params().trainable_count(), cfg));
    run_loop(net, problem, &mut data, Some(sampling), cfg, state, &mut Solo)
}

/// Continues from `state` on fixed collocation points.
pub fn resume<N: Network + ?Sized>(
    net: &mut N,
    problem: &Problem,
    data: &CollocationSet,
    cfg: &TrainConfig,
    state: TrainState,
) -> Result<TrainReport> {
    cfg.validate(problem, None)?;
    run_loop(net, problem, &mut data.clone(), None, cfg, state, &mut Solo)
}

/// One stage of a curriculum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurriculumStage {
    /// Replaces the problem's PDE (e.g. a larger wave speed).
    #[serde(default)]
    pub pde: Option<PdeKind>,
    /// Replaces the interior sampling.
    #[serde(default)]
    pub interior: Option<Sampling>,
    #[serde(default)]
    pub lambda: Option<[f64; 3]>,
    pub epochs: usize,
}

/// Runs the stages in order, each starting from the previous parameters with
/// fresh optimizer state. With `staged_sampling` the interior sizes must
/// strictly increase.
pub fn curriculum_run<N: Network + ?Sized>(
    net: &mut N,
    problem: &Problem,
    sampling: &SamplingConfig,
    stages: &[CurriculumStage],
    cfg: &TrainConfig,
    staged_sampling: bool,
) -> Result<Vec<TrainReport>> {
    if stages.is_empty() {
        return Err(Error::Config("a curriculum needs at least one stage".into()));
    }
    if staged_sampling {
        let sizes: Vec<usize> = stages
            .iter()
            .map(|s| s.interior.as_ref().unwrap_or(&sampling.interior).len())
            .collect();
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "staged sampling needs strictly increasing sizes, got {sizes:?}"
            )));
        }
    }
    let mut reports = Vec::with_capacity(stages.len());
    for (k, stage) in stages.iter().enumerate() {
        let mut p = problem.clone();
        if let Some(pde) = stage.pde {
            p.pde = pde;
        }
        let mut s = sampling.clone();
        if let Some(i) = &stage.interior {
            s.interior = i.clone();
        }
        let mut c = cfg.clone();
        c.epochs = stage.epochs;
        if let Some(l) = stage.lambda {
            c.lambda = l;
        }
        c.run_dir = cfg.run_dir.as_ref().map(|d| d.join(format!("stage{k}")));
        c.validate(&p, Some(&s))?;
        let mut data = CollocationSet::build(&p, &s, cfg.seed)?;
        let state = TrainState::fresh(net.params().trainable_count(), &c);
        reports.push(run_loop(net, &p, &mut data, Some(&s), &c, state, &mut Solo)?);
    }
    Ok(reports)
}

/// Synchronous data-parallel training over `workers` in-process replicas.
///
/// The interior points are split into contiguous shards; every replica
/// computes its local gradient, the gradients are averaged in rank order and
/// each replica applies the same Adam update. Replica parameter hashes are
/// compared after every step. Causality weights are computed per shard.
pub fn data_parallel_train<N: Network + Clone>(
    net: &mut N,
    problem: &Problem,
    data: &CollocationSet,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<TrainReport> {
    cfg.validate(problem, None)?;
    if cfg.switch.is_some() {
        return Err(Error::Config(
            "L-BFGS switching is not supported in data-parallel mode".into(),
        ));
    }
    let shards = data.shards(workers)?;
    let shared = Arc::new((
        Barrier::new(workers),
        Mutex::new(Exchange {
            evals: vec![None; workers],
            hashes: vec![[0; 32]; workers],
        }),
    ));
    let n_params = net.params().trainable_count();
    let results: Vec<Result<(TrainReport, N)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = shards
            .into_iter()
            .enumerate()
            .map(|(rank, mut shard)| {
                let mut replica = net.clone();
                let shared = Arc::clone(&shared);
                scope.spawn(move || {
                    let mut reducer = BarrierReducer { rank, shared };
                    let state = TrainState::fresh(n_params, cfg);
                    run_loop(&mut replica, problem, &mut shard, None, cfg, state, &mut reducer)
                        .map(|r| (r, replica))
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(rank, h)| {
                h.join().unwrap_or_else(|_| {
                    Err(Error::Worker {
                        rank,
                        reason: "worker panicked".into(),
                    })
                })
            })
            .collect()
    });
    let mut first = None;
    for (rank, r) in results.into_iter().enumerate() {
        match r {
            Ok(ok) if rank == 0 => first = Some(ok),
            Ok(_) => {}
            Err(e) => return Err(e),
        }
    }
    let (report, replica) = first.expect("rank 0 result");
    *net = replica;
    Ok(report)
}

/// Averaged full gradient over `workers` shards, for equivalence checks.
pub fn sharded_gradient<N: Network + ?Sized>(
    net: &N,
    problem: &Problem,
    data: &CollocationSet,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<Vec<f64>> {
    let evals: Vec<LocalEval> = data
        .shards(workers)?
        .iter()
        .map(|s| evaluate(net, problem, s, cfg, &cfg.lambda, false, None))
        .collect::<Result<_>>()?;
    match average(&evals).grads {
        Grads::Total(g) => Ok(g),
        Grads::PerTerm(_) => unreachable!(),
    }
}

/// Weighted total loss and its parameter gradient at `cfg.lambda`. Causality
/// weights enter as constants.
pub fn loss_and_gradient<N: Network + ?Sized>(
    net: &N,
    problem: &Problem,
    data: &CollocationSet,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    let e = evaluate(net, problem, data, cfg, &cfg.lambda, false, None)?;
    let f = total_loss(&e, &weights(&cfg.lambda, cfg));
    match e.grads {
        Grads::Total(g) => Ok((f, g)),
        Grads::PerTerm(_) => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Mlp, ModelSpec};

    #[test]
    fn uniform_grid_examples() {
        assert_eq!(linspace(0.0, 1.0, 3, Endpoints::Closed), vec![0.0, 0.5, 1.0]);
        let g = sample_uniform(&[(0.0, 1.0), (0.0, 1.0)], &[128, 128], &[]).unwrap();
        assert_eq!(g.rows(), 16384);
        let xs = linspace(-1.0, 3.0, 50, Endpoints::Closed);
        let h = xs[1] - xs[0];
        assert!(xs.windows(2).all(|w| ((w[1] - w[0]) - h).abs() < 1e-15));
        assert_eq!(linspace(0.0, 1.0, 4, Endpoints::LeftClosed), vec![0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn lhs_strata_and_determinism() {
        let b = [(0.0, 2.0), (-1.0, 1.0), (0.0, 1.5)];
        let p = sample_lhs(&b, 100, 7).unwrap();
        for (j, &(lo, hi)) in b.iter().enumerate() {
            let mut counts = [0; 100];
            for v in p.column_values(j) {
                assert!(v >= lo && v <= hi);
                counts[(((v - lo) / (hi - lo)) * 100.0).floor().min(99.0) as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1));
        }
        assert_eq!(p, sample_lhs(&b, 100, 7).unwrap());
        assert_eq!(sample_lhs(&b, 1, 3).unwrap().rows(), 1);
    }

    fn advection() -> Problem {
        Problem {
            pde: PdeKind::Advection { c: 1.0 },
            bounds: vec![(0.0, 2.0 * std::f64::consts::PI), (0.0, 1.0)],
            initial: Arc::new(|x: &[f64]| vec![x[0].sin()]),
            boundary: BoundaryKind::Periodic { derivative: true },
        }
    }

    fn small_set(p: &Problem) -> CollocationSet {
        let s = SamplingConfig {
            interior: Sampling::Uniform { dims: vec![8, 4], ends: vec![] },
            initial: 8,
            boundary: 4,
        };
        CollocationSet::build(p, &s, 0).unwrap()
    }

    #[test]
    fn zero_epochs_change_nothing() {
        let p = advection();
        let mut net = Mlp::new(ModelSpec::mlp(2, 6, 1, 1), 1).unwrap();
        let before = net.params().clone();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let rep = train(&mut net, &p, &small_set(&p), &cfg).unwrap();
        assert!(rep.metrics.is_empty());
        assert_eq!(net.params(), &before);
    }

    #[test]
    fn shards_cover_interior() {
        let p = advection();
        let data = small_set(&p);
        let shards = data.shards(3).unwrap();
        let rows: Vec<usize> = shards.iter().map(|s| s.interior.rows()).collect();
        assert_eq!(rows, vec![10, 10, 12]);
        let mut all = Vec::new();
        for s in &shards {
            all.extend_from_slice(s.interior.data());
            assert_eq!(s.initial, data.initial);
        }
        assert_eq!(all, data.interior.data());
    }

    #[test]
    fn curriculum_rejects_shrinking_sets() {
        let p = advection();
        let mut net = Mlp::new(ModelSpec::mlp(2, 4, 1, 1), 1).unwrap();
        let s = SamplingConfig {
            interior: Sampling::Lhs { n: 50 },
            initial: 4,
            boundary: 4,
        };
        let stages = vec![
            CurriculumStage { interior: Some(Sampling::Lhs { n: 40 }), epochs: 1, ..Default::default() },
            CurriculumStage { interior: Some(Sampling::Lhs { n: 40 }), epochs: 1, ..Default::default() },
        ];
        let cfg = TrainConfig::default();
        assert!(matches!(
            curriculum_run(&mut net, &p, &s, &stages, &cfg, true),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ddp_rejects_lbfgs_switch() {
        let p = advection();
        let mut net = Mlp::new(ModelSpec::mlp(2, 4, 1, 1), 1).unwrap();
        let cfg = TrainConfig {
            switch: Some(SwitchPolicy::EpochThreshold { epoch: 5 }),
            ..Default::default()
        };
        assert!(data_parallel_train(&mut net, &p, &small_set(&p), &cfg, 2).is_err());
    }
}
