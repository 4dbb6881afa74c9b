//! Benchmark problems, reference solutions, error metrics and the ablation
//! runner.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::{CausalityConfig, PdeKind};
use crate::models::{predict, Activation, AxisEmbedding, EmbeddingSpec, Mlp, ModelSpec, Network, RffSpec, WeightParam};
use crate::optimizers::{AdamConfig, SwitchPolicy};
use crate::quantum::{Ansatz, AngleScaling, CircuitSpec, Hybrid, HybridSpec};
use crate::tensor::Tensor;
use crate::trainer::{
    curriculum_run, data_parallel_train, linspace, CollocationSet, tensor_product, train_with, Balancing, BoundaryKind, CurriculumStage, EnergyPenalty,
    Endpoints, Problem, Sampling, SamplingConfig, TrainConfig, TrainReport,
};

/// `‖pred − ref‖₂ / ‖ref‖₂`.
pub fn rel_l2(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} reference values",
            pred.len(),
            reference.len()
        )));
    }
    let den: f64 = reference.iter().map(|r| r * r).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::Invalid("reference has zero norm".into()));
    }
    let num: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum::<f64>().sqrt();
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Characteristics,
    Fdm { nx: usize, dt: f64 },
    Spectral { modes: usize },
}

/// Reference values at `points` (`M × d`, spatial coordinates then time).
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub points: Tensor,
    pub values: Tensor,
    pub provenance: Provenance,
}

impl OracleSolution {
    fn check(self) -> Result<Self> {
        if !self.values.is_finite() {
            return Err(Error::Invalid("reference solution is not finite".into()));
        }
        Ok(self)
    }
}

// ---- advection ---------------------------------------------------------------------

/// `u(x, t) = sin(x − ct)` on a periodic `[0, 2π)` grid of `nx` points and
/// `nt` times spanning `[0, t_end]`.
pub fn oracle_advection(c: f64, nx: usize, nt: usize, t_end: f64) -> Result<OracleSolution> {
    let points = tensor_product(&[
        linspace(0.0, 2.0 * PI, nx, Endpoints::LeftClosed),
        linspace(0.0, t_end, nt, Endpoints::Closed),
    ]);
    let values = (0..points.rows())
        .map(|r| (points.at(r, 0) - c * points.at(r, 1)).sin())
        .collect();
    OracleSolution {
        values: Tensor::column(values),
        points,
        provenance: Provenance::Analytic,
    }
    .check()
}

// ---- Allen-Cahn ----------------------------------------------------------------------

fn allen_cahn_rhs(u: &[f64], out: &mut [f64], d_over_dx2: f64, k: f64) {
    let n = u.len();
    for i in 0..n {
        let at = |o: isize| u[(i as isize + o).rem_euclid(n as isize) as usize];
        let lap = (2.0 * (at(-3) + at(3)) - 27.0 * (at(-2) + at(2)) + 270.0 * (at(-1) + at(1)) - 490.0 * u[i]) / 180.0;
        out[i] = d_over_dx2 * lap - k * (u[i] * u[i] * u[i] - u[i]);
    }
}

/// RK4 with sixth-order periodic central differences on `nx` nodes of
/// `[-1, 1)`, from an arbitrary initial profile. Returns `nt` snapshots
/// evenly spaced over `[0, t_end]`, row-major `nt × nx`.
pub fn allen_cahn_fdm(
    u0: impl Fn(f64) -> f64,
    nx: usize,
    dt: f64,
    nt: usize,
    t_end: f64,
    diffusion: f64,
    reaction: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if nx < 7 || nt < 2 || !(dt > 0.0) {
        return Err(Error::Config("FDM needs nx >= 7, nt >= 2 and dt > 0".into()));
    }
    let dx = 2.0 / nx as f64;
    // RK4 covers |λ dt| ≤ 2.78 on the negative real axis.
    let lam = 1088.0 / 180.0 * diffusion / (dx * dx) + 2.0 * reaction;
    if lam * dt > 2.78 {
        return Err(Error::Config(format!(
            "unstable time step {dt}: need dt <= {:.3e} on this grid",
            2.78 / lam
        )));
    }
    let interval = t_end / (nt - 1) as f64;
    let steps = (interval / dt).round() as usize;
    if steps == 0 || ((steps as f64 * dt) - interval).abs() > 1e-9 * interval.max(1.0) {
        return Err(Error::Config(format!("dt {dt} must divide the output interval {interval}")));
    }
    let xs = linspace(-1.0, 1.0, nx, Endpoints::LeftClosed);
    let mut u: Vec<f64> = xs.iter().map(|&x| u0(x)).collect();
    let c = diffusion / (dx * dx);
    let mut out = Vec::with_capacity(nt * nx);
    out.extend_from_slice(&u);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    for _ in 1..nt {
        for _ in 0..steps {
            allen_cahn_rhs(&u, &mut k1, c, reaction);
            for i in 0..nx {
                tmp[i] = u[i] + 0.5 * dt * k1[i];
            }
            allen_cahn_rhs(&tmp, &mut k2, c, reaction);
            for i in 0..nx {
                tmp[i] = u[i] + 0.5 * dt * k2[i];
            }
            allen_cahn_rhs(&tmp, &mut k3, c, reaction);
            for i in 0..nx {
                tmp[i] = u[i] + dt * k3[i];
            }
            allen_cahn_rhs(&tmp, &mut k4, c, reaction);
            for i in 0..nx {
                u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if u.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::Diverged {
                epoch: out.len() / nx,
                reason: "finite-difference solution blew up".into(),
            });
        }
        out.extend_from_slice(&u);
    }
    Ok((xs, out))
}

pub fn allen_cahn_initial(x: f64) -> f64 {
    x * x * (PI * x).cos()
}

pub fn oracle_allen_cahn(nx: usize, dt: f64, nt: usize) -> Result<OracleSolution> {
    let PdeKind::AllenCahn { diffusion, reaction } = PdeKind::allen_cahn() else {
        unreachable!()
    };
    let (xs, u) = allen_cahn_fdm(allen_cahn_initial, nx, dt, nt, 1.0, diffusion, reaction)?;
    let ts = linspace(0.0, 1.0, nt, Endpoints::Closed);
    let mut pts = Vec::with_capacity(nx * nt * 2);
    let mut vals = Vec::with_capacity(nx * nt);
    for (i, &x) in xs.iter().enumerate() {
        for (k, &t) in ts.iter().enumerate() {
            pts.extend([x, t]);
            vals.push(u[k * nx + i]);
        }
    }
    OracleSolution {
        points: Tensor::new(vec![nx * nt, 2], pts)?,
        values: Tensor::column(vals),
        provenance: Provenance::Fdm { nx, dt },
    }
    .check()
}

// ---- Burgers ----------------------------------------------------------------------------

/// First shock time of `u_t + u u_x = 0` from `u0 = sin(πx)`.
pub const BURGERS_SHOCK: f64 = 1.0 / PI;

/// Exact pre-shock value from the characteristic through `(x, t)`.
pub fn burgers_characteristic(x: f64, t: f64) -> Result<f64> {
    if t >= BURGERS_SHOCK {
        return Err(Error::Invalid(format!("t = {t} is past the shock time")));
    }
    // ξ ↦ ξ + t sin(πξ) is increasing for t < 1/π; bisection on [0, 2].
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + t * (PI * mid).sin() < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok((PI * 0.5 * (lo + hi)).sin())
}

fn godunov_flux(l: f64, r: f64) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    if l <= r {
        if l > 0.0 {
            f(l)
        } else if r < 0.0 {
            f(r)
        } else {
            0.0
        }
    } else {
        f(l).max(f(r))
    }
}

/// Conservative upwind (Godunov) finite volumes on `nx` cells of `[0, 2]`
/// with zero wall values. Returns cell centres and `nt` snapshots over
/// `[0, t_end]`, which must end before the shock.
pub fn burgers_fdm(nx: usize, dt: f64, nt: usize, t_end: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if t_end >= BURGERS_SHOCK {
        return Err(Error::Config(format!("t_end {t_end} reaches the shock at {BURGERS_SHOCK}")));
    }
    if nx < 3 || nt < 2 || !(dt > 0.0) {
        return Err(Error::Config("FDM needs nx >= 3, nt >= 2 and dt > 0".into()));
    }
    let dx = 2.0 / nx as f64;
    if dt > dx {
        return Err(Error::Config(format!("CFL violated: dt {dt} > dx {dx} with max |u| = 1")));
    }
    let interval = t_end / (nt - 1) as f64;
    let steps = (interval / dt).ceil() as usize;
    let h = interval / steps as f64;
    let xs = linspace(0.0, 2.0, nx, Endpoints::Open);
    let mut u: Vec<f64> = xs.iter().map(|&x| (PI * x).sin()).collect();
    let mut out = Vec::with_capacity(nt * nx);
    out.extend_from_slice(&u);
    let mut flux = vec![0.0; nx + 1];
    for _ in 1..nt {
        for _ in 0..steps {
            for (i, f) in flux.iter_mut().enumerate() {
                let l = if i == 0 { -u[0] } else { u[i - 1] };
                let r = if i == nx { -u[nx - 1] } else { u[i] };
                *f = godunov_flux(l, r);
            }
            for i in 0..nx {
                u[i] -= h / dx * (flux[i + 1] - flux[i]);
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch: out.len() / nx,
                reason: "finite-volume solution blew up".into(),
            });
        }
        out.extend_from_slice(&u);
    }
    Ok((xs, out))
}

/// Characteristic solution on an `nx × nt` grid over `[0, 2] × [0, t_end]`.
pub fn oracle_burgers(nx: usize, nt: usize, t_end: f64) -> Result<OracleSolution> {
    let points = tensor_product(&[
        linspace(0.0, 2.0, nx, Endpoints::Closed),
        linspace(0.0, t_end, nt, Endpoints::Closed),
    ]);
    let values = (0..points.rows())
        .map(|r| burgers_characteristic(points.at(r, 0), points.at(r, 1)))
        .collect::<Result<Vec<_>>>()?;
    OracleSolution {
        values: Tensor::column(values),
        points,
        provenance: Provenance::Characteristics,
    }
    .check()
}

// ---- Maxwell -----------------------------------------------------------------------------

fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
    if inverse {
        let s = 1.0 / (n * n) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

fn wavenumber(j: usize, n: usize) -> f64 {
    let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
    PI * m
}

/// Exact evolution of the vacuum TE system (`ε = μ = 1`) on the periodic box
/// `[-1, 1)²` sampled at `n × n` nodes; fields are row-major with `x` varying
/// along rows (index `i` for `x`, `j` for `y`).
pub fn maxwell_spectral_evolve(ez: &[f64], hx: &[f64], hy: &[f64], n: usize, t: f64) -> Result<[Vec<f64>; 3]> {
    if ez.len() != n * n || hx.len() != n * n || hy.len() != n * n || n < 2 {
        return Err(Error::Invalid("fields must be n x n".into()));
    }
    let lift = |f: &[f64]| -> Vec<Complex64> { f.iter().map(|&v| Complex64::new(v, 0.0)).collect() };
    let (mut e, mut bx, mut by) = (lift(ez), lift(hx), lift(hy));
    fft2(&mut e, n, false);
    fft2(&mut bx, n, false);
    fft2(&mut by, n, false);
    let i1 = Complex64::new(0.0, 1.0);
    for a in 0..n {
        for b in 0..n {
            let (kx, ky) = (wavenumber(a, n), wavenumber(b, n));
            let k = (kx * kx + ky * ky).sqrt();
            if k == 0.0 {
                continue;
            }
            let idx = a * n + b;
            let perp = (kx * by[idx] - ky * bx[idx]) / k;
            let par = (kx * bx[idx] + ky * by[idx]) / k;
            let (s, c) = (k * t).sin_cos();
            let e_t = e[idx] * c + i1 * perp * s;
            let perp_t = perp * c + i1 * e[idx] * s;
            e[idx] = e_t;
            bx[idx] = (kx * par - ky * perp_t) / k;
            by[idx] = (ky * par + kx * perp_t) / k;
        }
    }
    fft2(&mut e, n, true);
    fft2(&mut bx, n, true);
    fft2(&mut by, n, true);
    let re = |v: Vec<Complex64>| v.into_iter().map(|c| c.re).collect::<Vec<_>>();
    Ok([re(e), re(bx), re(by)])
}

pub fn maxwell_initial(x: f64, y: f64) -> [f64; 3] {
    [(-25.0 * (x * x + y * y)).exp(), 0.0, 0.0]
}

/// Spectral reference for the Gaussian pulse at time `t` on an `n × n` grid.
pub fn oracle_maxwell_spectral(n: usize, t: f64) -> Result<OracleSolution> {
    let xs = linspace(-1.0, 1.0, n, Endpoints::LeftClosed);
    let mut ez = Vec::with_capacity(n * n);
    for &x in &xs {
        for &y in &xs {
            ez.push(maxwell_initial(x, y)[0]);
        }
    }
    let zero = vec![0.0; n * n];
    let [e, hx, hy] = maxwell_spectral_evolve(&ez, &zero, &zero, n, t)?;
    let points = tensor_product(&[xs.clone(), xs, vec![t]]);
    let mut values = Vec::with_capacity(3 * n * n);
    for k in 0..n * n {
        values.extend([e[k], hx[k], hy[k]]);
    }
    OracleSolution {
        points,
        values: Tensor::new(vec![n * n, 3], values)?,
        provenance: Provenance::Spectral { modes: n },
    }
    .check()
}

/// `½ Σ (E_z² + H_x² + H_y²) · cell` over a periodic grid of side 2.
pub fn grid_energy(fields: &[Vec<f64>; 3], n: usize) -> f64 {
    let cell = (2.0 / n as f64).powi(2);
    0.5 * cell * fields.iter().flat_map(|f| f.iter()).map(|v| v * v).sum::<f64>()
}

// ---- problems and runs ------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    Advection,
    AllenCahn,
    Burgers,
    Maxwell,
}

impl std::str::FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "advection" => Ok(Self::Advection),
            "allen-cahn" | "allen_cahn" => Ok(Self::AllenCahn),
            "burgers" => Ok(Self::Burgers),
            "maxwell" => Ok(Self::Maxwell),
            other => Err(Error::Config(format!("unknown problem `{other}`"))),
        }
    }
}

/// Quantum head replacing the last hidden layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumFlags {
    pub qubits: usize,
    pub layers: usize,
    pub ansatz: Ansatz,
    pub scaling: AngleScaling,
}

impl Default for QuantumFlags {
    fn default() -> Self {
        Self {
            qubits: 7,
            layers: 4,
            ansatz: Ansatz::StronglyEntangling,
            scaling: AngleScaling::Asin,
        }
    }
}

/// Technique toggles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Flags {
    pub rff: bool,
    pub rwf: bool,
    /// Periodic embedding of the spatial axes (no boundary loss).
    pub periodic: bool,
    /// Periodic embedding of time with a trainable period.
    pub periodic_time: bool,
    pub causality: bool,
    pub balancing: bool,
    /// Poynting energy penalty (Maxwell only).
    pub energy: bool,
    /// Switch to L-BFGS after this many Adam epochs.
    pub lbfgs_after: Option<usize>,
    pub quantum: Option<QuantumFlags>,
}

impl Flags {
    /// Parses a comma-separated list such as `rff,balancing,periodic`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut f = Flags::default();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, val) = item.split_once('=').unwrap_or((item, ""));
            match key {
                "rff" => f.rff = true,
                "rwf" => f.rwf = true,
                "periodic" | "hard-periodic" => f.periodic = true,
                "periodic-time" => f.periodic_time = true,
                "causality" => f.causality = true,
                "balancing" => f.balancing = true,
                "energy" => f.energy = true,
                "lbfgs" => {
                    f.lbfgs_after = Some(val.parse().map_err(|_| Error::Config(format!("bad epoch in `{item}`")))?)
                }
                "quantum" => f.quantum = Some(QuantumFlags::default()),
                other => return Err(Error::Config(format!("unknown flag `{other}`"))),
            }
        }
        Ok(f)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        for (on, name) in [
            (self.rff, "rff"),
            (self.rwf, "rwf"),
            (self.periodic, "periodic"),
            (self.periodic_time, "periodic-time"),
            (self.causality, "causality"),
            (self.balancing, "balancing"),
            (self.energy, "energy"),
        ] {
            if on {
                parts.push(name.to_string());
            }
        }
        if let Some(e) = self.lbfgs_after {
            parts.push(format!("lbfgs={e}"));
        }
        if let Some(q) = &self.quantum {
            parts.push(format!("quantum({:?},{:?})", q.ansatz, q.scaling));
        }
        if parts.is_empty() {
            "vanilla".into()
        } else {
            parts.join(",")
        }
    }
}

/// Sizes and schedules of a desk-scale run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeskConfig {
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub epochs: usize,
    pub lr: f64,
    /// Per-epoch learning-rate decay.
    pub gamma: f64,
    pub interior: Sampling,
    pub initial: usize,
    pub boundary: usize,
    pub rff_sigma: f64,
    pub rff_width: usize,
    pub rwf_mu: f64,
    pub rwf_sigma: f64,
    pub balancing: Balancing,
    pub causality: CausalityConfig,
    pub energy: EnergyPenalty,
    /// Wave speed (advection only).
    pub c: f64,
    /// End of the training and comparison window.
    pub t_end: f64,
    /// Time period of the periodic time embedding, as a multiple of `t_end`.
    pub time_period: f64,
    pub lambda: [f64; 3],
    /// Nodes per axis of the comparison grid.
    pub eval: usize,
    /// Redraw the interior points every this many epochs.
    pub resample_every: Option<usize>,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self::for_problem(ProblemId::Advection)
    }
}

impl DeskConfig {
    pub fn for_problem(id: ProblemId) -> Self {
        let base = Self {
            width: 64,
            depth: 3,
            activation: Activation::Tanh,
            epochs: 20_000,
            lr: 1e-3,
            gamma: 1.0,
            interior: Sampling::Uniform {
                dims: vec![64, 64],
                ends: vec![],
            },
            initial: 128,
            boundary: 64,
            rff_sigma: 1.0,
            rff_width: 64,
            rwf_mu: 1.0,
            rwf_sigma: 0.1,
            balancing: Balancing::default(),
            causality: CausalityConfig::default(),
            energy: EnergyPenalty {
                weight: 1.0,
                times: 4,
                grid: 16,
            },
            c: 10.0,
            t_end: 1.0,
            time_period: 2.0,
            lambda: [1.0; 3],
            eval: 128,
            resample_every: None,
        };
        match id {
            ProblemId::Advection => base,
            ProblemId::AllenCahn => Self {
                epochs: 40_000,
                ..base
            },
            ProblemId::Burgers => Self {
                t_end: 0.9 / PI,
                ..base
            },
            ProblemId::Maxwell => Self {
                epochs: 30_000,
                interior: Sampling::Lhs { n: 2048 },
                initial: 32,
                t_end: 1.5,
                eval: 64,
                ..base
            },
        }
    }
}

/// Everything needed to train one benchmark configuration.
#[derive(Clone, Debug)]
pub struct BenchSetup {
    pub id: ProblemId,
    pub problem: Problem,
    pub model: ModelChoice,
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ModelChoice {
    Classical(ModelSpec),
    Hybrid(HybridSpec),
}

impl ModelChoice {
    pub fn build(&self, seed: u64) -> Result<Box<dyn Network>> {
        Ok(match self {
            ModelChoice::Classical(s) => Box::new(Mlp::new(s.clone(), seed)?),
            ModelChoice::Hybrid(s) => Box::new(Hybrid::new(s.clone(), seed)?),
        })
    }
}

fn problem_for(id: ProblemId, cfg: &DeskConfig, flags: &Flags) -> Result<Problem> {
    let periodic_bc = if flags.periodic {
        BoundaryKind::None
    } else {
        BoundaryKind::Periodic { derivative: true }
    };
    Ok(match id {
        ProblemId::Advection => Problem {
            pde: PdeKind::Advection { c: cfg.c },
            bounds: vec![(0.0, 2.0 * PI), (0.0, cfg.t_end)],
            initial: Arc::new(|x: &[f64]| vec![x[0].sin()]),
            boundary: periodic_bc,
        },
        ProblemId::AllenCahn => Problem {
            pde: PdeKind::allen_cahn(),
            bounds: vec![(-1.0, 1.0), (0.0, cfg.t_end)],
            initial: Arc::new(|x: &[f64]| vec![allen_cahn_initial(x[0])]),
            boundary: periodic_bc,
        },
        ProblemId::Burgers => {
            if flags.periodic {
                return Err(Error::Config("Burgers uses wall boundary values, not periodic embedding".into()));
            }
            if cfg.t_end >= BURGERS_SHOCK {
                return Err(Error::Config("the Burgers window must end before the shock".into()));
            }
            Problem {
                pde: PdeKind::Burgers,
                bounds: vec![(0.0, 2.0), (0.0, cfg.t_end)],
                initial: Arc::new(|x: &[f64]| vec![(PI * x[0]).sin()]),
                boundary: BoundaryKind::Dirichlet { value: 0.0 },
            }
        }
        ProblemId::Maxwell => Problem {
            pde: PdeKind::maxwell(),
            bounds: vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, cfg.t_end)],
            initial: Arc::new(|x: &[f64]| maxwell_initial(x[0], x[1]).to_vec()),
            boundary: periodic_bc,
        },
    })
}

/// Builds the problem, model and training configuration for a flag set.
pub fn setup(id: ProblemId, flags: &Flags, cfg: &DeskConfig, seed: u64) -> Result<BenchSetup> {
    let problem = problem_for(id, cfg, flags)?;
    let d = problem.bounds.len();
    let sd = d - 1;
    let mut axes = Vec::with_capacity(d);
    for (j, &(lo, hi)) in problem.bounds.iter().enumerate() {
        axes.push(if j < sd && flags.periodic {
            AxisEmbedding::Periodic {
                period: hi - lo,
                trainable: false,
            }
        } else if j == sd && flags.periodic_time {
            AxisEmbedding::Periodic {
                period: cfg.time_period * (hi - lo),
                trainable: true,
            }
        } else {
            AxisEmbedding::Raw
        });
    }
    let out_dim = problem.pde.fields();
    let mut spec = ModelSpec {
        in_dim: d,
        hidden_dim: cfg.width,
        depth: cfg.depth,
        out_dim,
        activation: cfg.activation,
        embedding: EmbeddingSpec {
            axes,
            rff: flags.rff.then_some(RffSpec {
                sigma: cfg.rff_sigma,
                mean: 0.0,
                width: cfg.rff_width,
            }),
        },
        weight_param: if flags.rwf {
            WeightParam::Rwf {
                mu: cfg.rwf_mu,
                sigma: cfg.rwf_sigma,
            }
        } else {
            WeightParam::Plain
        },
        input_bounds: Some(problem.bounds.clone()),
    };
    let model = match flags.quantum {
        None => ModelChoice::Classical(spec),
        Some(q) => {
            spec.out_dim = q.qubits;
            spec.depth = cfg.depth.saturating_sub(1).max(1);
            ModelChoice::Hybrid(HybridSpec {
                trunk: spec,
                circuit: CircuitSpec {
                    scaling: q.scaling,
                    ..CircuitSpec::new(q.qubits, q.layers, q.ansatz)
                },
                out_dim,
            })
        }
    };
    let sampling = SamplingConfig {
        interior: match (&cfg.interior, d) {
            (Sampling::Uniform { dims, ends }, 3) if dims.len() == 2 => Sampling::Uniform {
                dims: vec![dims[0], dims[0], dims[1]],
                ends: ends.clone(),
            },
            (s, _) => s.clone(),
        },
        initial: cfg.initial,
        boundary: cfg.boundary,
    };
    let train = TrainConfig {
        epochs: cfg.epochs,
        adam: AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        gamma: cfg.gamma,
        switch: flags.lbfgs_after.map(|epoch| SwitchPolicy::EpochThreshold { epoch }),
        lambda: cfg.lambda,
        balancing: flags.balancing.then_some(cfg.balancing),
        causality: flags.causality.then_some(cfg.causality),
        energy: flags.energy.then_some(cfg.energy),
        resample_every: cfg.resample_every,
        seed,
        ..TrainConfig::default()
    };
    Ok(BenchSetup {
        id,
        problem,
        model,
        sampling,
        train,
    })
}

/// Reference solution on the comparison grid of `id`.
pub fn reference(id: ProblemId, cfg: &DeskConfig) -> Result<OracleSolution> {
    match id {
        ProblemId::Advection => {
            let nt = ((cfg.c.abs() / 10.0).max(1.0) * (cfg.eval / 2) as f64).ceil() as usize + 1;
            oracle_advection(cfg.c, cfg.eval, nt, cfg.t_end)
        }
        ProblemId::AllenCahn => {
            let full = oracle_allen_cahn(512, 1e-3, 101)?;
            let stride = (512 / cfg.eval.max(1)).max(1);
            let keep: Vec<usize> = (0..full.points.rows()).filter(|r| (r / 101) % stride == 0).collect();
            Ok(OracleSolution {
                points: full.points.select_rows(&keep),
                values: full.values.select_rows(&keep),
                provenance: full.provenance,
            })
        }
        ProblemId::Burgers => oracle_burgers(cfg.eval + 1, cfg.eval / 2 + 1, cfg.t_end),
        ProblemId::Maxwell => oracle_maxwell_spectral(cfg.eval, cfg.t_end),
    }
}

/// Relative L2 error over all fields stacked, and per field.
pub fn evaluate(net: &dyn Network, oracle: &OracleSolution) -> Result<(f64, Vec<f64>)> {
    let pred = predict(net, &oracle.points)?;
    let all = rel_l2(pred.data(), oracle.values.data())?;
    let k = oracle.values.cols();
    let per = (0..k)
        .map(|j| rel_l2(&pred.column_values(j), &oracle.values.column_values(j)).unwrap_or(f64::NAN))
        .collect();
    Ok((all, per))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub problem: ProblemId,
    pub flags: String,
    pub seed: u64,
    pub epochs: usize,
    pub final_losses: [f64; 3],
    pub rel_l2: f64,
    pub rel_l2_fields: Vec<f64>,
    pub params: usize,
    pub config_hash: String,
    pub wall_time_s: f64,
    pub artifacts: Vec<PathBuf>,
}

pub fn config_hash(id: ProblemId, flags: &Flags, cfg: &DeskConfig, seed: u64) -> String {
    let text = serde_json::json!({ "problem": id, "flags": flags, "config": cfg, "seed": seed }).to_string();
    Sha256::digest(text.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn report(
    id: ProblemId,
    flags: &Flags,
    cfg: &DeskConfig,
    seed: u64,
    net: &dyn Network,
    rep: &TrainReport,
    started: Instant,
    run_dir: Option<PathBuf>,
) -> Result<RunReport> {
    let (rel, per) = evaluate(net, &reference(id, cfg)?)?;
    let last = rep.metrics.last();
    Ok(RunReport {
        problem: id,
        flags: flags.label(),
        seed,
        epochs: rep.state.epoch,
        final_losses: last.map_or([f64::NAN; 3], |m| [m.l_pde, m.l_ic, m.l_bc]),
        rel_l2: rel,
        rel_l2_fields: per,
        params: net.params().trainable_count(),
        config_hash: config_hash(id, flags, cfg, seed),
        wall_time_s: started.elapsed().as_secs_f64(),
        artifacts: run_dir.into_iter().collect(),
    })
}

/// Trains one configuration and compares it with the problem's reference.
/// Divergence is returned as an error.
pub fn run_benchmark(
    id: ProblemId,
    flags: &Flags,
    cfg: &DeskConfig,
    seed: u64,
    run_dir: Option<PathBuf>,
) -> Result<(RunReport, Box<dyn Network>)> {
    let started = Instant::now();
    let mut s = setup(id, flags, cfg, seed)?;
    s.train.run_dir = run_dir.clone();
    let mut net = s.model.build(seed)?;
    let rep = train_with(net.as_mut(), &s.problem, &s.sampling, &s.train, None)?;
    let r = report(id, flags, cfg, seed, net.as_ref(), &rep, started, run_dir)?;
    Ok((r, net))
}

/// Like [`run_benchmark`] on `workers` synchronous data-parallel replicas.
pub fn run_data_parallel(
    id: ProblemId,
    flags: &Flags,
    cfg: &DeskConfig,
    seed: u64,
    workers: usize,
    run_dir: Option<PathBuf>,
) -> Result<(RunReport, Box<dyn Network>)> {
    let started = Instant::now();
    let mut s = setup(id, flags, cfg, seed)?;
    s.train.run_dir = run_dir.clone();
    let data = CollocationSet::build(&s.problem, &s.sampling, seed)?;
    let (rep, net): (TrainReport, Box<dyn Network>) = match &s.model {
        ModelChoice::Classical(spec) => {
            let mut net = Mlp::new(spec.clone(), seed)?;
            let rep = data_parallel_train(&mut net, &s.problem, &data, &s.train, workers)?;
            (rep, Box::new(net))
        }
        ModelChoice::Hybrid(spec) => {
            let mut net = Hybrid::new(spec.clone(), seed)?;
            let rep = data_parallel_train(&mut net, &s.problem, &data, &s.train, workers)?;
            (rep, Box::new(net))
        }
    };
    let r = report(id, flags, cfg, seed, net.as_ref(), &rep, started, run_dir)?;
    Ok((r, net))
}

/// Contents of a run configuration file: `[flags]` and `[desk]` tables, both
/// optional, the latter overriding the problem's defaults field by field.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFile {
    pub flags: Flags,
    pub desk: DeskConfig,
}

impl RunFile {
    pub fn parse(id: ProblemId, text: &str) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(k) = doc.keys().find(|k| *k != "flags" && *k != "desk") {
            return Err(Error::Config(format!("unknown section `{k}`")));
        }
        let bad = |e: serde_json::Error| Error::Config(e.to_string());
        let flags = match doc.get("flags") {
            Some(v) => serde_json::from_value(serde_json::to_value(v).map_err(bad)?).map_err(bad)?,
            None => Flags::default(),
        };
        let mut desk = serde_json::to_value(DeskConfig::for_problem(id)).map_err(bad)?;
        if let Some(over) = doc.get("desk") {
            let over = serde_json::to_value(over).map_err(bad)?;
            for (k, v) in over.as_object().into_iter().flatten() {
                if desk.get(k).is_none() {
                    return Err(Error::Config(format!("unknown desk setting `{k}`")));
                }
                desk[k] = v.clone();
            }
        }
        Ok(Self {
            flags,
            desk: serde_json::from_value(desk).map_err(bad)?,
        })
    }
}

/// Advection with the wave speed raised stage by stage, each stage starting
/// from the previous parameters. Stage samplings must grow strictly. Returns
/// the final-stage report.
pub fn advection_curriculum(
    stages: &[(f64, Sampling)],
    flags: &Flags,
    cfg: &DeskConfig,
    epochs_per_stage: usize,
    seed: u64,
) -> Result<(RunReport, Box<dyn Network>)> {
    let started = Instant::now();
    let (first, last) = match (stages.first(), stages.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Config("a curriculum needs at least one stage".into())),
    };
    let first_cfg = DeskConfig {
        c: first.0,
        interior: first.1.clone(),
        ..cfg.clone()
    };
    let s = setup(ProblemId::Advection, flags, &first_cfg, seed)?;
    let mut net = s.model.build(seed)?;
    let plan: Vec<CurriculumStage> = stages
        .iter()
        .map(|(c, sampling)| CurriculumStage {
            pde: Some(PdeKind::Advection { c: *c }),
            interior: Some(sampling.clone()),
            epochs: epochs_per_stage,
            ..Default::default()
        })
        .collect();
    let reps = curriculum_run(net.as_mut(), &s.problem, &s.sampling, &plan, &s.train, true)?;
    let final_cfg = DeskConfig { c: last.0, ..cfg.clone() };
    let r = report(ProblemId::Advection, flags, &final_cfg, seed, net.as_ref(), reps.last().expect("stages"), started, None)?;
    Ok((r, net))
}

/// Largest `|u|` over the final-time slice of the comparison grid.
pub fn final_slice_amplitude(net: &dyn Network, t_end: f64, nx: usize) -> Result<f64> {
    let pts = tensor_product(&[linspace(0.0, 2.0 * PI, nx, Endpoints::LeftClosed), vec![t_end]]);
    let u = predict(net, &pts)?;
    Ok(u.data().iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

// ---- ablation ------------------------------------------------------------------------------

/// Cross product of flag values. Axis keys are flag names, with dotted paths
/// for nested fields (e.g. `quantum.scaling`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub problem: ProblemId,
    #[serde(default)]
    pub base: Flags,
    pub axes: BTreeMap<String, Vec<serde_json::Value>>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub config: Option<DeskConfig>,
    #[serde(default = "one")]
    pub parallelism: usize,
}

fn one() -> usize {
    1
}

fn set_path(v: &mut serde_json::Value, path: &str, new: serde_json::Value) -> Result<()> {
    let mut cur = v;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{path}` does not name a flag")))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*p) {
                return Err(Error::Config(format!("unknown flag `{path}`")));
            }
            obj.insert(p.to_string(), new);
            return Ok(());
        }
        cur = obj
            .get_mut(*p)
            .filter(|x| !x.is_null())
            .ok_or_else(|| Error::Config(format!("`{path}` needs `{p}` set in the base flags")))?;
    }
    Ok(())
}

impl AblationGrid {
    /// Every cell of the cross product, in axis order.
    pub fn cells(&self) -> Result<Vec<(String, Flags)>> {
        if self.axes.values().any(Vec::is_empty) {
            return Err(Error::Config("every axis needs at least one value".into()));
        }
        let mut cells = vec![(Vec::<String>::new(), serde_json::to_value(self.base).expect("flags serialize"))];
        for (key, values) in &self.axes {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for (label, flags) in &cells {
                for v in values {
                    let mut f = flags.clone();
                    set_path(&mut f, key, v.clone())?;
                    let mut l = label.clone();
                    l.push(format!("{key}={v}"));
                    next.push((l, f));
                }
            }
            cells = next;
        }
        cells
            .into_iter()
            .map(|(l, f)| {
                let flags: Flags = serde_json::from_value(f).map_err(|e| Error::Config(e.to_string()))?;
                Ok((if l.is_empty() { flags.label() } else { l.join(",") }, flags))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub mean_rel_l2: f64,
    pub runs: Vec<std::result::Result<RunReport, String>>,
}

/// Runs every cell for every seed and returns rows sorted by mean error
/// (cells where every run failed go last).
pub fn ablation_runner(grid: &AblationGrid) -> Result<Vec<AblationRow>> {
    if grid.seeds.is_empty() {
        return Err(Error::Config("an ablation needs at least one seed".into()));
    }
    let cfg = grid.config.clone().unwrap_or_else(|| DeskConfig::for_problem(grid.problem));
    let cells = grid.cells()?;
    let jobs: Vec<(usize, Flags, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, (_, f))| grid.seeds.iter().map(move |&s| (i, *f, s)))
        .collect();
    let mut results: Vec<Option<std::result::Result<RunReport, String>>> = vec![None; jobs.len()];
    for (chunk_idx, chunk) in jobs.chunks(grid.parallelism.max(1)).enumerate() {
        let out: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(_, flags, seed)| {
                    let cfg = &cfg;
                    scope.spawn(move || {
                        run_benchmark(grid.problem, flags, cfg, *seed, None)
                            .map(|(r, _)| r)
                            .map_err(|e| e.to_string())
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err("run panicked".into())))
                .collect()
        });
        let base = chunk_idx * grid.parallelism.max(1);
        for (k, r) in out.into_iter().enumerate() {
            results[base + k] = Some(r);
        }
    }
    let mut rows: Vec<AblationRow> = cells
        .into_iter()
        .map(|(label, _)| AblationRow {
            label,
            mean_rel_l2: f64::NAN,
            runs: Vec::new(),
        })
        .collect();
    for ((cell, _, _), r) in jobs.iter().zip(results) {
        rows[*cell].runs.push(r.expect("every job ran"));
    }
    for row in &mut rows {
        let ok: Vec<f64> = row.runs.iter().filter_map(|r| r.as_ref().ok()).map(|r| r.rel_l2).collect();
        if !ok.is_empty() {
            row.mean_rel_l2 = ok.iter().sum::<f64>() / ok.len() as f64;
        }
    }
    rows.sort_by(|a, b| match (a.mean_rel_l2.is_nan(), b.mean_rel_l2.is_nan()) {
        (false, false) => a.mean_rel_l2.total_cmp(&b.mean_rel_l2),
        (x, y) => x.cmp(&y),
    });
    Ok(rows)
}

/// Plain-text table of ablation rows.
pub fn format_table(rows: &[AblationRow]) -> String {
    let mut out = String::from("configuration | mean rel L2 | runs ok\n");
    for r in rows {
        let ok = r.runs.iter().filter(|x| x.is_ok()).count();
        out.push_str(&format!("{} | {:.5e} | {}/{}\n", r.label, r.mean_rel_l2, ok, r.runs.len()));
    }
    out
}

/// Writes `x[, y], t, fields...` rows of the network on the comparison grid.
pub fn dump_fields(net: &dyn Network, oracle: &OracleSolution, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let pred = predict(net, &oracle.points)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let d = oracle.points.cols();
    let names: &[&str] = if d == 3 { &["x", "y", "t"] } else { &["x", "t"] };
    let fields: Vec<String> = (0..pred.cols()).map(|j| format!("u{j}")).collect();
    writeln!(f, "{},{}", names.join(","), fields.join(","))?;
    for r in 0..pred.rows() {
        let coords: Vec<String> = (0..d).map(|j| oracle.points.at(r, j).to_string()).collect();
        let vals: Vec<String> = (0..pred.cols()).map(|j| pred.at(r, j).to_string()).collect();
        writeln!(f, "{},{}", coords.join(","), vals.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgraph::Graph;
    use crate::losses::residual_loss;
    use crate::models::FnField;

    #[test]
    fn rel_l2_examples() {
        let r = [1.0, -2.0, 3.0];
        assert_eq!(rel_l2(&r, &r).unwrap(), 0.0);
        let p: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        assert!((rel_l2(&p, &r).unwrap() - 1.0).abs() < 1e-15);
        let n = (14.0f64).sqrt();
        assert!((rel_l2(&[1.0 + 1e-3, -2.0, 3.0], &r).unwrap() - 1e-3 / n).abs() < 1e-15);
        assert!(rel_l2(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn advection_oracle() {
        let o = oracle_advection(10.0, 16, 2, 2.0 * PI / 10.0).unwrap();
        for r in 0..o.points.rows() {
            let x = o.points.at(r, 0);
            assert!((o.values.at(r, 0) - x.sin()).abs() < 1e-14);
        }
        let mut g = Graph::new();
        let f = FnField(|g: &mut Graph, x| {
            let xs = g.col(x, 0)?;
            let ts = g.col(x, 1)?;
            let ct = g.scale(ts, 10.0)?;
            let arg = g.sub(xs, ct)?;
            g.sin(arg)
        });
        let pts = oracle_advection(10.0, 32, 9, 1.0).unwrap().points;
        let l = residual_loss(&mut g, &f, &PdeKind::Advection { c: 10.0 }, &pts).unwrap();
        assert!(g.value(l).item() <= 1e-20);
    }

    #[test]
    fn allen_cahn_fixed_point_and_convergence() {
        let (_, u) = allen_cahn_fdm(|_| 1.0, 64, 1e-3, 3, 1.0, 1e-4, 5.0).unwrap();
        assert!(u.iter().all(|&v| v == 1.0));
        assert!(allen_cahn_fdm(|_| 1.0, 512, 0.5, 3, 1.0, 1e-4, 5.0).is_err());
        let (_, coarse) = allen_cahn_fdm(allen_cahn_initial, 256, 1e-3, 2, 1.0, 1e-4, 5.0).unwrap();
        let (_, fine) = allen_cahn_fdm(allen_cahn_initial, 512, 1e-3, 2, 1.0, 1e-4, 5.0).unwrap();
        let c1: Vec<f64> = coarse[256..].to_vec();
        let f1: Vec<f64> = fine[512..].iter().step_by(2).copied().collect();
        let e = rel_l2(&c1, &f1).unwrap();
        assert!(e <= 1e-4, "self-convergence {e}");
    }

    #[test]
    fn burgers_shock_time_and_fdm() {
        let min_slope = (0..2001)
            .map(|i| {
                let x = 2.0 * i as f64 / 2000.0;
                PI * (PI * x).cos()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((-1.0 / min_slope - BURGERS_SHOCK).abs() < 1e-12);
        assert!(burgers_characteristic(0.5, BURGERS_SHOCK).is_err());
        let t_end = 0.9 / PI;
        let (xs, u) = burgers_fdm(2000, 5e-4, 2, t_end).unwrap();
        let exact: Vec<f64> = xs.iter().map(|&x| burgers_characteristic(x, t_end).unwrap()).collect();
        let e = rel_l2(&u[2000..], &exact).unwrap();
        assert!(e < 2e-2, "upwind vs characteristics {e}");
        assert!(burgers_fdm(100, 0.05, 2, 0.2).is_err());
        assert!(burgers_fdm(100, 1e-3, 2, 0.5).is_err());
    }

    #[test]
    fn maxwell_oracle() {
        let o = oracle_maxwell_spectral(64, 0.0).unwrap();
        for r in 0..o.points.rows() {
            let want = maxwell_initial(o.points.at(r, 0), o.points.at(r, 1));
            for k in 0..3 {
                assert!((o.values.at(r, k) - want[k]).abs() <= 1e-12);
            }
        }
        let fields = |o: &OracleSolution| -> [Vec<f64>; 3] { [o.values.column_values(0), o.values.column_values(1), o.values.column_values(2)] };
        let e0 = grid_energy(&fields(&o), 64);
        for t in [0.3, 0.75, 1.5] {
            let e = grid_energy(&fields(&oracle_maxwell_spectral(64, t).unwrap()), 64);
            assert!((e - e0).abs() <= 1e-10, "energy drift at {t}: {}", e - e0);
        }
    }

    #[test]
    fn maxwell_plane_wave() {
        let n = 32;
        let xs = linspace(-1.0, 1.0, n, Endpoints::LeftClosed);
        let wave = |x: f64, t: f64| (2.0 * PI * (x + t)).cos();
        let mut ez = Vec::new();
        for &x in &xs {
            for _ in &xs {
                ez.push(wave(x, 0.0));
            }
        }
        let zero = vec![0.0; n * n];
        let [e, hx, hy] = maxwell_spectral_evolve(&ez, &zero, &ez, n, 0.37).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            for j in 0..n {
                let k = i * n + j;
                assert!((e[k] - wave(x, 0.37)).abs() < 1e-12);
                assert!((hy[k] - wave(x, 0.37)).abs() < 1e-12);
                assert!(hx[k].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flags_and_grid() {
        let f = Flags::parse("rff,balancing,periodic,lbfgs=500").unwrap();
        assert!(f.rff && f.balancing && f.periodic && f.lbfgs_after == Some(500));
        assert!(Flags::parse("nope").is_err());
        let q = AblationGrid {
            problem: ProblemId::Maxwell,
            base: Flags {
                quantum: Some(QuantumFlags::default()),
                ..Default::default()
            },
            axes: BTreeMap::from([
                (
                    "quantum.scaling".to_string(),
                    AngleScaling::ALL.iter().map(|s| serde_json::to_value(s).unwrap()).collect(),
                ),
                (
                    "quantum.ansatz".to_string(),
                    Ansatz::ALL.iter().map(|s| serde_json::to_value(s).unwrap()).collect(),
                ),
                ("energy".to_string(), vec![true.into(), false.into()]),
            ]),
            seeds: vec![0],
            config: None,
            parallelism: 1,
        };
        let cells = q.cells().unwrap();
        assert_eq!(cells.len(), 40);
        let mut labels: Vec<_> = cells.iter().map(|c| c.0.clone()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 40);
    }
}
