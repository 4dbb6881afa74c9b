//! Residual, initial and boundary losses, adaptive loss weights, temporal
//! causality weights and the Maxwell energy penalty.

use serde::{Deserialize, Serialize};

use crate::diffgraph::{Graph, Value};
use crate::error::{Error, Result};
use crate::models::Field;
use crate::tensor::Tensor;

/// The PDE whose residual is minimized.
///
/// Scalar equations take inputs `(x, t)`; the Maxwell system takes
/// `(x, y, t)` and produces `(E_z, H_x, H_y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdeKind {
    /// `u_t + c u_x = 0`
    Advection { c: f64 },
    /// `u_t - d u_xx + k u³ - k u = 0`
    AllenCahn { diffusion: f64, reaction: f64 },
    /// `u_t + u u_x = 0`
    Burgers,
    MaxwellTe { eps: f64, mu: f64 },
}

impl PdeKind {
    pub fn allen_cahn() -> Self {
        PdeKind::AllenCahn {
            diffusion: 1e-4,
            reaction: 5.0,
        }
    }

    pub fn maxwell() -> Self {
        PdeKind::MaxwellTe { eps: 1.0, mu: 1.0 }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            PdeKind::MaxwellTe { .. } => 3,
            _ => 2,
        }
    }

    pub fn fields(&self) -> usize {
        match self {
            PdeKind::MaxwellTe { .. } => 3,
            _ => 1,
        }
    }

    /// Highest derivative order needed along each input coordinate.
    pub fn derivative_orders(&self) -> Vec<u8> {
        match self {
            PdeKind::AllenCahn { .. } => vec![2, 1],
            PdeKind::MaxwellTe { .. } => vec![1, 1, 1],
            _ => vec![1, 1],
        }
    }
}

/// Residuals at the rows of the leaf `x`, one column per equation.
pub fn residual(g: &mut Graph, field: &dyn Field, pde: &PdeKind, x: Value) -> Result<Value> {
    let u = field.eval(g, x)?;
    if g.value(u).cols() != pde.fields() {
        return Err(Error::Invalid(format!(
            "field has {} outputs, the PDE needs {}",
            g.value(u).cols(),
            pde.fields()
        )));
    }
    match *pde {
        PdeKind::Advection { c } => {
            let d = g.derivative_wrt_input(u, x, 1)?;
            let ux = g.col(d, 0)?;
            let ut = g.col(d, 1)?;
            let cux = g.scale(ux, c)?;
            g.add(ut, cux)
        }
        PdeKind::Burgers => {
            let d = g.derivative_wrt_input(u, x, 1)?;
            let ux = g.col(d, 0)?;
            let ut = g.col(d, 1)?;
            let uux = g.mul(u, ux)?;
            g.add(ut, uux)
        }
        PdeKind::AllenCahn {
            diffusion,
            reaction,
        } => {
            let d = g.derivative_wrt_input(u, x, 1)?;
            let ux = g.col(d, 0)?;
            let ut = g.col(d, 1)?;
            let s = g.sum(ux)?;
            let h = g.grad(s, &[x])?[0];
            let uxx = g.col(h, 0)?;
            let diff = g.scale(uxx, -diffusion)?;
            let u3 = g.powi(u, 3)?;
            let cubic = g.sub(u3, u)?;
            let react = g.scale(cubic, reaction)?;
            let a = g.add(ut, diff)?;
            g.add(a, react)
        }
        PdeKind::MaxwellTe { eps, mu } => {
            let mut grads = Vec::with_capacity(3);
            for k in 0..3 {
                let comp = g.col(u, k)?;
                grads.push(g.derivative_wrt_input(comp, x, 1)?);
            }
            let (de, dhx, dhy) = (grads[0], grads[1], grads[2]);
            let ez_x = g.col(de, 0)?;
            let ez_y = g.col(de, 1)?;
            let ez_t = g.col(de, 2)?;
            let hx_y = g.col(dhx, 1)?;
            let hx_t = g.col(dhx, 2)?;
            let hy_x = g.col(dhy, 0)?;
            let hy_t = g.col(dhy, 2)?;

            let curl = g.sub(hy_x, hx_y)?;
            let curl = g.scale(curl, 1.0 / eps)?;
            let r1 = g.sub(ez_t, curl)?;
            let ey = g.scale(ez_y, 1.0 / mu)?;
            let r2 = g.add(hx_t, ey)?;
            let ex = g.scale(ez_x, 1.0 / mu)?;
            let r3 = g.sub(hy_t, ex)?;
            g.concat_cols(&[r1, r2, r3])
        }
    }
}

/// Per-point squared residual summed over equations, `N × 1`.
pub fn pointwise_residual_sq(
    g: &mut Graph,
    field: &dyn Field,
    pde: &PdeKind,
    x: Value,
) -> Result<Value> {
    let r = residual(g, field, pde, x)?;
    let r2 = g.square(r)?;
    if g.value(r2).cols() == 1 {
        Ok(r2)
    } else {
        g.sum_cols(r2)
    }
}

/// Mean over points of the squared residual.
///
/// A non-finite value anywhere is reported with the index of the first
/// offending collocation point.
pub fn residual_loss(
    g: &mut Graph,
    field: &dyn Field,
    pde: &PdeKind,
    points: &Tensor,
) -> Result<Value> {
    if points.rows() == 0 {
        return Err(Error::Invalid("empty collocation set".into()));
    }
    let mark = g.len();
    let x = g.leaf(points.clone());
    match pointwise_residual_sq(g, field, pde, x).and_then(|r2| g.mean(r2)) {
        Err(Error::NonFinite { .. }) => {
            g.truncate(mark);
            Err(locate_non_finite(g, field, pde, points))
        }
        other => other,
    }
}

fn locate_non_finite(g: &mut Graph, field: &dyn Field, pde: &PdeKind, points: &Tensor) -> Error {
    let mark = g.len();
    for i in 0..points.rows() {
        let xi = g.leaf(points.select_rows(&[i]));
        let bad = match pointwise_residual_sq(g, field, pde, xi) {
            Ok(r) => !g.value(r).is_finite(),
            Err(_) => true,
        };
        g.truncate(mark);
        if bad {
            return Error::NonFiniteResidual { index: i };
        }
    }
    Error::NonFinite { op: "residual" }
}

/// Mean squared mismatch against `targets` (`N × fields`).
pub fn ic_loss(g: &mut Graph, field: &dyn Field, points: &Tensor, targets: &Tensor) -> Result<Value> {
    if points.rows() == 0 {
        return Err(Error::Invalid("empty initial-condition set".into()));
    }
    let x = g.constant(points.clone());
    let u = field.eval(g, x)?;
    if g.shape(u) != targets.shape() {
        return Err(Error::Invalid(format!(
            "prediction {:?} vs targets {:?}",
            g.shape(u),
            targets.shape()
        )));
    }
    let y = g.constant(targets.clone());
    let d = g.sub(u, y)?;
    g.mse(d)
}

/// Mean squared deviation from a constant boundary value.
pub fn dirichlet_loss(g: &mut Graph, field: &dyn Field, points: &Tensor, value: f64) -> Result<Value> {
    if points.rows() == 0 {
        return Err(Error::Invalid("empty boundary set".into()));
    }
    let x = g.constant(points.clone());
    let u = field.eval(g, x)?;
    let d = g.offset(u, -value)?;
    g.mse(d)
}

/// Soft periodic condition between paired boundary points: mean squared
/// difference of the values plus, when `with_derivative`, of the derivative
/// along `axis`.
pub fn periodic_bc_loss(
    g: &mut Graph,
    field: &dyn Field,
    left: &Tensor,
    right: &Tensor,
    axis: usize,
    with_derivative: bool,
) -> Result<Value> {
    if left.rows() == 0 {
        return Err(Error::Invalid("empty boundary set".into()));
    }
    if left.shape() != right.shape() {
        return Err(Error::Invalid("boundary pairs differ in shape".into()));
    }
    let xl = g.leaf(left.clone());
    let xr = g.leaf(right.clone());
    let ul = field.eval(g, xl)?;
    let ur = field.eval(g, xr)?;
    let d = g.sub(ul, ur)?;
    let mut loss = g.mse(d)?;
    if with_derivative {
        for k in 0..g.value(ul).cols() {
            let cl = g.col(ul, k)?;
            let cr = g.col(ur, k)?;
            let gl = g.derivative_wrt_input(cl, xl, 1)?;
            let gr = g.derivative_wrt_input(cr, xr, 1)?;
            let dl = g.col(gl, axis)?;
            let dr = g.col(gr, axis)?;
            let dd = g.sub(dl, dr)?;
            let m = g.mse(dd)?;
            loss = g.add(loss, m)?;
        }
    }
    Ok(loss)
}

/// Index of each loss term in weight and norm triples.
pub const PDE: usize = 0;
pub const IC: usize = 1;
pub const BC: usize = 2;

/// Adaptive loss weights `(λ_pde, λ_ic, λ_bc)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossState {
    pub lambda: [f64; 3],
    pub alpha: f64,
    pub update_period: usize,
}

impl Default for LossState {
    fn default() -> Self {
        Self {
            lambda: [1.0; 3],
            alpha: 0.9,
            update_period: 100,
        }
    }
}

/// `λ̂_k = Σ_j ‖∇L_j‖ / ‖∇L_k‖`, with denominators floored at `1e-9`.
pub fn balance_targets(norms: &[f64]) -> Vec<f64> {
    let total: f64 = norms.iter().sum();
    norms.iter().map(|n| total / n.max(1e-9)).collect()
}

impl LossState {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1)", self.alpha)));
        }
        if self.update_period == 0 {
            return Err(Error::Config("update_period must be positive".into()));
        }
        if self.lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("loss weights must be positive".into()));
        }
        Ok(())
    }

    /// Moving-average update from the gradient norms of the unweighted
    /// terms. Inactive terms (`None`) keep their weight and do not enter the
    /// sum. Only applied when `epoch` is a multiple of the update period;
    /// returns whether an update happened.
    pub fn update(&mut self, epoch: usize, norms: [Option<f64>; 3]) -> bool {
        if epoch % self.update_period != 0 {
            return false;
        }
        let active: Vec<usize> = (0..3).filter(|&k| norms[k].is_some()).collect();
        let values: Vec<f64> = active.iter().map(|&k| norms[k].unwrap_or(0.0)).collect();
        let targets = balance_targets(&values);
        for (&k, hat) in active.iter().zip(targets) {
            self.lambda[k] = self.alpha * self.lambda[k] + (1.0 - self.alpha) * hat;
        }
        true
    }
}

/// Temporal causality settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalityConfig {
    pub segments: usize,
    pub eps: f64,
}

impl Default for CausalityConfig {
    fn default() -> Self {
        Self {
            segments: 10,
            eps: 1.0,
        }
    }
}

/// `ω_1 = 1`, `ω_i = exp(-ε Σ_{k<i} L^k)`.
pub fn causality_weights(segment_losses: &[f64], eps: f64) -> Vec<f64> {
    let mut acc = 0.0;
    segment_losses
        .iter()
        .map(|l| {
            let w = (-eps * acc).exp();
            acc += l;
            w
        })
        .collect()
}

/// Mean squared residual per time segment, `M × 1`.
///
/// `t` holds the time coordinate of each row of `r2`; segments split
/// `[t0, t1]` uniformly and a point on an interior edge belongs to the later
/// segment. A segment without points contributes zero.
pub fn segment_losses(
    g: &mut Graph,
    r2: Value,
    t: &[f64],
    (t0, t1): (f64, f64),
    segments: usize,
) -> Result<Value> {
    let n = t.len();
    if segments == 0 || g.value(r2).rows() != n {
        return Err(Error::Invalid("segment layout does not match residuals".into()));
    }
    let width = (t1 - t0) / segments as f64;
    let idx: Vec<usize> = t
        .iter()
        .map(|&ti| (((ti - t0) / width).floor().max(0.0) as usize).min(segments - 1))
        .collect();
    let mut counts = vec![0usize; segments];
    for &i in &idx {
        counts[i] += 1;
    }
    let mut m = vec![0.0; segments * n];
    for (j, &i) in idx.iter().enumerate() {
        m[i * n + j] = 1.0 / counts[i] as f64;
    }
    let s = g.constant(Tensor::matrix(segments, n, m)?);
    g.matmul(s, r2)
}

/// `(1/M) Σ ω_i L^i` with `ω` held constant.
pub fn weighted_pde_loss(g: &mut Graph, omega: &[f64], seg: Value) -> Result<Value> {
    let m = omega.len();
    if g.value(seg).numel() != m || m == 0 {
        return Err(Error::Invalid("weights and segments differ in length".into()));
    }
    let w = g.constant(Tensor::column(omega.iter().map(|o| o / m as f64).collect()));
    let seg = g.reshape(seg, &[m, 1])?;
    let p = g.mul(w, seg)?;
    g.sum(p)
}

/// Quadrature settings for the electromagnetic energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    pub grid: usize,
    pub lo: f64,
    pub hi: f64,
    pub eps: f64,
    pub mu: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            lo: -1.0,
            hi: 1.0,
            eps: 1.0,
            mu: 1.0,
        }
    }
}

impl EnergyConfig {
    pub fn cell_area(&self) -> f64 {
        let h = (self.hi - self.lo) / self.grid as f64;
        h * h
    }

    /// Midpoint grid at time `t`, rows `(x, y, t)`.
    pub fn points(&self, t: f64) -> Tensor {
        let n = self.grid;
        let h = (self.hi - self.lo) / n as f64;
        let mut data = Vec::with_capacity(n * n * 3);
        for i in 0..n {
            for j in 0..n {
                data.extend_from_slice(&[
                    self.lo + (i as f64 + 0.5) * h,
                    self.lo + (j as f64 + 0.5) * h,
                    t,
                ]);
            }
        }
        Tensor::from_parts(vec![n * n, 3], data)
    }
}

/// `½ Σ (ε E_z² + μ(H_x² + H_y²)) · cell` for `N × 3` field values.
pub fn field_energy(g: &mut Graph, fields: Value, cfg: &EnergyConfig) -> Result<Value> {
    let w = Tensor::from_rows(&[vec![cfg.eps], vec![cfg.mu], vec![cfg.mu]])?;
    let w = g.constant(w);
    let sq = g.square(fields)?;
    let weighted = g.matmul(sq, w)?;
    let s = g.sum(weighted)?;
    g.scale(s, 0.5 * cfg.cell_area())
}

/// Mean squared change of total field energy between consecutive sample
/// times.
pub fn poynting_penalty(
    g: &mut Graph,
    field: &dyn Field,
    times: &[f64],
    cfg: &EnergyConfig,
) -> Result<Value> {
    if times.len() < 2 {
        return Err(Error::Invalid("energy penalty needs at least two times".into()));
    }
    let mut energies = Vec::with_capacity(times.len());
    for &t in times {
        let x = g.constant(cfg.points(t));
        let u = field.eval(g, x)?;
        energies.push(field_energy(g, u, cfg)?);
    }
    let mut total: Option<Value> = None;
    for w in energies.windows(2) {
        let d = g.sub(w[1], w[0])?;
        let d2 = g.square(d)?;
        total = Some(match total {
            None => d2,
            Some(acc) => g.add(acc, d2)?,
        });
    }
    let total = total.expect("at least one pair");
    g.scale(total, 1.0 / (times.len() - 1) as f64)
}

/// One line of the per-epoch metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub l_pde: f64,
    pub l_ic: f64,
    pub l_bc: f64,
    pub lambda: [f64; 3],
    pub lr: f64,
}

impl MetricsRow {
    pub const HEADER: &'static str = "epoch,L_pde,L_ic,L_bc,lambda_pde,lambda_ic,lambda_bc,lr";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.l_pde,
            self.l_ic,
            self.l_bc,
            self.lambda[0],
            self.lambda[1],
            self.lambda[2],
            self.lr
        )
    }

    pub fn total(&self) -> f64 {
        self.lambda[PDE] * self.l_pde + self.lambda[IC] * self.l_ic + self.lambda[BC] * self.l_bc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnField;
    use std::f64::consts::PI;

    fn grid(nx: usize, nt: usize, x1: f64, t1: f64) -> Tensor {
        let mut rows = Vec::new();
        for i in 0..nx {
            for j in 0..nt {
                rows.push(vec![x1 * i as f64 / (nx - 1) as f64, t1 * j as f64 / (nt - 1) as f64]);
            }
        }
        Tensor::from_rows(&rows).unwrap()
    }

    fn constant_field(v: f64) -> FnField<impl Fn(&mut Graph, Value) -> Result<Value>> {
        FnField(move |g: &mut Graph, x: Value| {
            let z = g.col(x, 0)?;
            let z = g.scale(z, 0.0)?;
            g.offset(z, v)
        })
    }

    #[test]
    fn advection_translate_is_exact() {
        let c = 10.0;
        let f = FnField(move |g: &mut Graph, x: Value| {
            let xs = g.col(x, 0)?;
            let ts = g.col(x, 1)?;
            let ct = g.scale(ts, -c)?;
            let a = g.add(xs, ct)?;
            g.sin(a)
        });
        let mut g = Graph::new();
        let l = residual_loss(&mut g, &f, &PdeKind::Advection { c }, &grid(9, 9, 2.0 * PI, 1.0)).unwrap();
        assert!(g.value(l).item() <= 1e-20);
    }

    #[test]
    fn allen_cahn_constant_states() {
        let pts = grid(5, 5, 1.0, 1.0);
        for (v, expected) in [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.5, 3.515625)] {
            let mut g = Graph::new();
            let l = residual_loss(&mut g, &constant_field(v), &PdeKind::allen_cahn(), &pts).unwrap();
            assert!((g.value(l).item() - expected).abs() < 1e-12, "u = {v}");
        }
    }

    #[test]
    fn maxwell_plane_wave_is_exact() {
        // E_z = H_y = cos(2π(x + t)), H_x = 0 travels in -x.
        let f = FnField(|g: &mut Graph, x: Value| {
            let xs = g.col(x, 0)?;
            let ts = g.col(x, 2)?;
            let s = g.add(xs, ts)?;
            let p = g.scale(s, 2.0 * PI)?;
            let e = g.cos(p)?;
            let z = g.scale(e, 0.0)?;
            g.concat_cols(&[e, z, e])
        });
        let pts = Tensor::from_rows(&[
            vec![0.1, 0.2, 0.3],
            vec![-0.7, 0.4, 1.1],
            vec![0.9, -0.9, 0.0],
        ])
        .unwrap();
        let mut g = Graph::new();
        let l = residual_loss(&mut g, &f, &PdeKind::maxwell(), &pts).unwrap();
        assert!(g.value(l).item() <= 1e-18);
    }

    #[test]
    fn non_finite_residual_reports_index() {
        // sqrt(x) has an infinite derivative at x = 0, only row 2 sits there.
        let f = FnField(|g: &mut Graph, x: Value| {
            let xs = g.col(x, 0)?;
            g.sqrt(xs)
        });
        let pts = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.1], vec![0.0, 0.2]]).unwrap();
        let mut g = Graph::new();
        let err = residual_loss(&mut g, &f, &PdeKind::Burgers, &pts).unwrap_err();
        assert!(matches!(err, Error::NonFiniteResidual { index: 2 }), "{err:?}");
    }

    #[test]
    fn ic_and_bc_losses() {
        let mut g = Graph::new();
        let pts = Tensor::from_rows(&[vec![0.3, 0.0]]).unwrap();
        let two = constant_field(2.0);
        let l = ic_loss(&mut g, &two, &pts, &Tensor::column(vec![0.0])).unwrap();
        assert_eq!(g.value(l).item(), 4.0);
        let l = ic_loss(&mut g, &two, &pts, &Tensor::column(vec![2.0])).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        let empty = Tensor::zeros(&[0, 2]);
        assert!(ic_loss(&mut g, &two, &empty, &Tensor::zeros(&[0, 1])).is_err());
        assert!(dirichlet_loss(&mut g, &two, &empty, 0.0).is_err());

        let periodic = FnField(|g: &mut Graph, x: Value| {
            let xs = g.col(x, 0)?;
            let a = g.scale(xs, PI)?;
            g.sin(a)
        });
        let left = Tensor::from_rows(&[vec![0.0, 0.1], vec![0.0, 0.7]]).unwrap();
        let right = Tensor::from_rows(&[vec![2.0, 0.1], vec![2.0, 0.7]]).unwrap();
        let l = periodic_bc_loss(&mut g, &periodic, &left, &right, 0, true).unwrap();
        assert!(g.value(l).item() <= 1e-20);
    }

    #[test]
    fn balancing_examples() {
        assert_eq!(balance_targets(&[2.0, 2.0, 2.0]).iter().map(|v| v.round()).collect::<Vec<_>>(), vec![3.0; 3]);
        let t = balance_targets(&[1.0, 2.0, 3.0]);
        for (a, b) in t.iter().zip([6.0, 3.0, 2.0]) {
            assert!((a - b).abs() < 1e-8);
        }
        let mut s = LossState::default();
        s.lambda = [1.0; 3];
        assert!(s.update(0, [Some(1.0), Some(1.0), Some(1.0)]));
        assert!((s.lambda[0] - (0.9 + 0.1 * 3.0)).abs() < 1e-15);
        assert!(!s.update(50, [Some(1.0); 3]));
        let before = s.lambda[BC];
        s.update(100, [Some(1.0), Some(2.0), None]);
        assert_eq!(s.lambda[BC], before);
    }

    #[test]
    fn causality_examples() {
        assert_eq!(causality_weights(&[0.0; 4], 1.0), vec![1.0; 4]);
        let w = causality_weights(&[2f64.ln(), 0.3], 1.0);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.5).abs() < 1e-15);
        assert_eq!(causality_weights(&[5.0, 3.0, 1.0], 0.0), vec![1.0; 3]);
    }

    #[test]
    fn segment_losses_average_within_segments() {
        let mut g = Graph::new();
        let r2 = g.constant(Tensor::column(vec![1.0, 3.0, 10.0, 20.0]));
        let seg = segment_losses(&mut g, r2, &[0.0, 0.2, 0.5, 1.0], (0.0, 1.0), 2).unwrap();
        assert_eq!(g.value(seg).data(), &[2.0, 15.0]);
        let l = weighted_pde_loss(&mut g, &[1.0, 0.5], seg).unwrap();
        assert_eq!(g.value(l).item(), (2.0 + 7.5) / 2.0);
    }

    #[test]
    fn energy_penalty_cases() {
        let cfg = EnergyConfig { grid: 16, ..Default::default() };
        let mut g = Graph::new();
        let zero = FnField(|g: &mut Graph, x: Value| g.scale(x, 0.0));
        let p = poynting_penalty(&mut g, &zero, &[0.0, 0.5, 1.0], &cfg).unwrap();
        assert_eq!(g.value(p).item(), 0.0);
        assert!(poynting_penalty(&mut g, &zero, &[0.0], &cfg).is_err());

        // Fields scaled by 2^{-t/0.5}: energy quarters at each half step.
        let decay = FnField(|g: &mut Graph, x: Value| {
            let xs = g.col(x, 0)?;
            let ts = g.col(x, 2)?;
            let a = g.scale(ts, -2.0 * 2f64.ln())?;
            let amp = g.exp(a)?;
            let c = g.cos(xs)?;
            let e = g.mul(amp, c)?;
            g.concat_cols(&[e, e, e])
        });
        let p = poynting_penalty(&mut g, &decay, &[0.0, 0.5], &cfg).unwrap();
        let mut e0 = 0.0;
        let pts = cfg.points(0.0);
        for r in 0..pts.rows() {
            e0 += 0.5 * 3.0 * pts.at(r, 0).cos().powi(2) * cfg.cell_area();
        }
        let expected = (0.25 * e0 - e0).powi(2);
        assert!((g.value(p).item() - expected).abs() < 1e-12);
    }

    #[test]
    fn metrics_row_layout() {
        let row = MetricsRow {
            epoch: 3,
            l_pde: 0.5,
            l_ic: 0.25,
            l_bc: 0.0,
            lambda: [1.0, 2.0, 3.0],
            lr: 1e-3,
        };
        assert_eq!(row.to_csv(), "3,0.5,0.25,0,1,2,3,0.001");
        assert_eq!(MetricsRow::HEADER.split(',').count(), 8);
    }
}
