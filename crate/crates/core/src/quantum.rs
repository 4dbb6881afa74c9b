//! Dense statevector simulation of parametrized circuits, parameter-shift
//! differentiation, circuit-evaluation counting and a hybrid
//! classical-quantum network.
//!
//! Basis states are little-endian: qubit `q` is bit `q` of the basis index.
//! Two independent simulators are provided: [`pqc_forward`] works on complex
//! amplitudes directly, [`graph_circuit`] records the same circuit on a
//! [`Graph`] as separate real and imaginary parts so it can be differentiated.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diffgraph::{Graph, Value};
use crate::error::{shape_err, Error, Result};
use crate::models::{Mlp, ModelSpec, Network, ParamStore};
use crate::tensor::Tensor;

pub const MAX_QUBITS: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    #[default]
    X,
    Y,
    Z,
}

/// Map from a bounded activation to a rotation angle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleScaling {
    #[default]
    None,
    Pi,
    Bias,
    Asin,
    Acos,
}

impl AngleScaling {
    pub const ALL: [AngleScaling; 5] = [Self::None, Self::Pi, Self::Bias, Self::Asin, Self::Acos];

    pub fn apply(self, a: f64) -> Result<f64> {
        if matches!(self, Self::Asin | Self::Acos) && !(-1.0..=1.0).contains(&a) {
            return Err(Error::Invalid(format!("{self:?} scaling needs inputs in [-1, 1], got {a}")));
        }
        Ok(match self {
            Self::None => a,
            Self::Pi => a * PI,
            Self::Bias => (a + 1.0) * FRAC_PI_2,
            Self::Asin => a.asin() + FRAC_PI_2,
            Self::Acos => a.acos(),
        })
    }

    pub fn record(self, g: &mut Graph, a: Value) -> Result<Value> {
        match self {
            Self::None => Ok(a),
            Self::Pi => g.scale(a, PI),
            Self::Bias => {
                let s = g.scale(a, FRAC_PI_2)?;
                g.offset(s, FRAC_PI_2)
            }
            Self::Asin => {
                let s = g.asin(a)?;
                g.offset(s, FRAC_PI_2)
            }
            Self::Acos => g.acos(a),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    /// One `RX` per qubit, then CNOTs `(q, q+1)`.
    BasicEntangling,
    /// General rotation per qubit, then CNOTs `(q, q+r mod n)` with the range
    /// `r` cycling through `1..n` by layer.
    #[default]
    StronglyEntangling,
    /// General rotations only.
    NoEntanglement,
    /// General rotations, then a CNOT for every pair `i < j` in index order.
    /// Experimental.
    CrossMesh,
}

impl Ansatz {
    pub const ALL: [Ansatz; 4] = [
        Self::BasicEntangling,
        Self::StronglyEntangling,
        Self::NoEntanglement,
        Self::CrossMesh,
    ];

    pub fn angles_per_qubit(self) -> usize {
        match self {
            Self::BasicEntangling => 1,
            _ => 3,
        }
    }

    /// `(control, target)` pairs of layer `layer`, applied in order.
    pub fn cnots(self, n: usize, layer: usize) -> Vec<(usize, usize)> {
        match self {
            Self::BasicEntangling => (0..n.saturating_sub(1)).map(|q| (q, q + 1)).collect(),
            Self::StronglyEntangling if n > 1 => {
                let r = layer % (n - 1) + 1;
                (0..n).map(|q| (q, (q + r) % n)).collect()
            }
            Self::StronglyEntangling | Self::NoEntanglement => Vec::new(),
            Self::CrossMesh => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    #[serde(default)]
    pub ansatz: Ansatz,
    #[serde(default)]
    pub basis: Basis,
    #[serde(default)]
    pub scaling: AngleScaling,
    /// Wrap weights through `atan2(sin w, cos w)` before use.
    #[serde(default)]
    pub reparametrize: bool,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize, n_layers: usize, ansatz: Ansatz) -> Self {
        Self {
            n_qubits,
            n_layers,
            ansatz,
            basis: Basis::X,
            scaling: AngleScaling::None,
            reparametrize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {}",
                self.n_qubits
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// `[layers, qubits, angles]`.
    pub fn param_shape(&self) -> [usize; 3] {
        [self.n_layers, self.n_qubits, self.ansatz.angles_per_qubit()]
    }

    pub fn param_count(&self) -> usize {
        self.param_shape().iter().product()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        self.validate()?;
        if theta.len() != self.param_count() {
            return Err(shape_err(
                "circuit",
                format!("expected {} weights {:?}, got {}", self.param_count(), self.param_shape(), theta.len()),
            ));
        }
        Ok(())
    }

    fn weights(&self, theta: &[f64]) -> Vec<f64> {
        if self.reparametrize {
            theta.iter().map(|w| w.sin().atan2(w.cos())).collect()
        } else {
            theta.to_vec()
        }
    }
}

/// Counts full circuit executions.
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::SeqCst)
    }

    fn tick(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }
}

// ---- complex simulator ----------------------------------------------------------

type Gate = [[C; 2]; 2];

pub fn rx(t: f64) -> Gate {
    let (s, c) = (t / 2.0).sin_cos();
    [[C::new(c, 0.0), C::new(0.0, -s)], [C::new(0.0, -s), C::new(c, 0.0)]]
}

pub fn ry(t: f64) -> Gate {
    let (s, c) = (t / 2.0).sin_cos();
    [[C::new(c, 0.0), C::new(-s, 0.0)], [C::new(s, 0.0), C::new(c, 0.0)]]
}

pub fn rz(t: f64) -> Gate {
    [[C::from_polar(1.0, -t / 2.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::from_polar(1.0, t / 2.0)]]
}

fn gate_mul(a: &Gate, b: &Gate) -> Gate {
    let mut out = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `RZ(omega) · RY(theta) · RZ(phi)`.
pub fn rot(phi: f64, theta: f64, omega: f64) -> Gate {
    gate_mul(&rz(omega), &gate_mul(&ry(theta), &rz(phi)))
}

/// Batch of statevectors, row-major `batch × 2^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub batch: usize,
    pub n: usize,
    pub amps: Vec<C>,
}

impl StateVector {
    pub fn zero(batch: usize, n: usize) -> Self {
        let dim = 1 << n;
        let mut amps = vec![C::new(0.0, 0.0); batch * dim];
        for b in 0..batch {
            amps[b * dim] = C::new(1.0, 0.0);
        }
        Self { batch, n, amps }
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn row(&self, b: usize) -> &[C] {
        &self.amps[b * self.dim()..(b + 1) * self.dim()]
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.batch)
            .map(|b| self.row(b).iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }
}

/// Product state from already scaled angles (`B × n`).
pub fn embed_angles(phi: &Tensor, basis: Basis) -> Result<StateVector> {
    if phi.rank() != 2 {
        return Err(shape_err("angle_embed", "angles must be B x n"));
    }
    let (batch, n) = (phi.rows(), phi.cols());
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Config(format!("qubit count must be in 1..={MAX_QUBITS}")));
    }
    let dim = 1usize << n;
    let mut amps = Vec::with_capacity(batch * dim);
    for b in 0..batch {
        let qubits: Vec<[C; 2]> = (0..n)
            .map(|q| {
                let g = match basis {
                    Basis::X => rx(phi.at(b, q)),
                    Basis::Y => ry(phi.at(b, q)),
                    Basis::Z => rz(phi.at(b, q)),
                };
                [g[0][0], g[1][0]]
            })
            .collect();
        for i in 0..dim {
            let mut a = C::new(1.0, 0.0);
            for (q, v) in qubits.iter().enumerate() {
                a *= v[(i >> q) & 1];
            }
            amps.push(a);
        }
    }
    Ok(StateVector { batch, n, amps })
}

/// Scales the inputs and embeds them.
pub fn angle_embed(x: &Tensor, scaling: AngleScaling, basis: Basis) -> Result<StateVector> {
    embed_angles(&scaled_angles(x, scaling)?, basis)
}

pub fn scaled_angles(x: &Tensor, scaling: AngleScaling) -> Result<Tensor> {
    let data = x.data().iter().map(|&a| scaling.apply(a)).collect::<Result<Vec<_>>>()?;
    Tensor::new(x.shape().to_vec(), data)
}

/// Kronecker product of per-qubit gates, qubit 0 acting on the lowest bit.
fn wall(gates: &[Gate]) -> Vec<C> {
    let n = gates.len();
    let dim = 1usize << n;
    let mut out = vec![C::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut a = C::new(1.0, 0.0);
            for (q, g) in gates.iter().enumerate() {
                a *= g[(i >> q) & 1][(j >> q) & 1];
            }
            out[i * dim + j] = a;
        }
    }
    out
}

/// Basis permutation realized by applying `cnots` in order.
pub fn cnot_permutation(n: usize, cnots: &[(usize, usize)]) -> Vec<usize> {
    (0..1usize << n)
        .map(|mut i| {
            for &(c, t) in cnots {
                i ^= ((i >> c) & 1) << t;
            }
            i
        })
        .collect()
}

/// Dense `2^n × 2^n` operator of one layer: rotation wall, then entangler.
pub fn build_layer(spec: &CircuitSpec, layer: usize, weights: &[f64]) -> Result<Vec<C>> {
    spec.validate()?;
    let n = spec.n_qubits;
    let k = spec.ansatz.angles_per_qubit();
    if weights.len() != n * k {
        return Err(shape_err("build_layer", format!("expected {} weights, got {}", n * k, weights.len())));
    }
    let gates: Vec<Gate> = (0..n)
        .map(|q| match spec.ansatz {
            Ansatz::BasicEntangling => rx(weights[q]),
            _ => rot(weights[3 * q], weights[3 * q + 1], weights[3 * q + 2]),
        })
        .collect();
    let w = wall(&gates);
    let perm = cnot_permutation(n, &spec.ansatz.cnots(n, layer));
    let dim = 1usize << n;
    let mut u = vec![C::new(0.0, 0.0); dim * dim];
    for (k, &p) in perm.iter().enumerate() {
        u[p * dim..(p + 1) * dim].copy_from_slice(&w[k * dim..(k + 1) * dim]);
    }
    Ok(u)
}

/// `ψ ← Uψ` for every batch row.
pub fn apply(state: &mut StateVector, u: &[C]) -> Result<()> {
    let dim = state.dim();
    if u.len() != dim * dim {
        return Err(shape_err("apply", format!("operator has {} entries for dimension {dim}", u.len())));
    }
    let mut out = vec![C::new(0.0, 0.0); dim];
    for b in 0..state.batch {
        let row = &mut state.amps[b * dim..(b + 1) * dim];
        for (i, o) in out.iter_mut().enumerate() {
            *o = u[i * dim..(i + 1) * dim].iter().zip(row.iter()).map(|(a, x)| a * x).sum();
        }
        row.copy_from_slice(&out);
    }
    Ok(())
}

/// `⟨Z_q⟩` per batch row and qubit.
pub fn measure_z(state: &StateVector) -> Tensor {
    let n = state.n;
    let mut data = vec![0.0; state.batch * n];
    for b in 0..state.batch {
        for (i, a) in state.row(b).iter().enumerate() {
            let p = a.norm_sqr();
            for q in 0..n {
                data[b * n + q] += if (i >> q) & 1 == 0 { p } else { -p };
            }
        }
    }
    Tensor::from_parts(vec![state.batch, n], data)
}

/// Circuit on already scaled angles; counts one evaluation.
pub fn pqc_forward_angles(spec: &CircuitSpec, theta: &[f64], phi: &Tensor, counter: &EvalCounter) -> Result<Tensor> {
    spec.check_theta(theta)?;
    if phi.rank() != 2 || phi.cols() != spec.n_qubits {
        return Err(shape_err("pqc_forward", format!("expected B x {} angles", spec.n_qubits)));
    }
    let mut state = embed_angles(phi, spec.basis)?;
    let w = spec.weights(theta);
    let per = spec.n_qubits * spec.ansatz.angles_per_qubit();
    for l in 0..spec.n_layers {
        let u = build_layer(spec, l, &w[l * per..(l + 1) * per])?;
        apply(&mut state, &u)?;
    }
    counter.tick();
    Ok(measure_z(&state))
}

/// Embed → layers → measure on raw inputs `x` (`B × n`); counts one evaluation.
pub fn pqc_forward(spec: &CircuitSpec, theta: &[f64], x: &Tensor, counter: &EvalCounter) -> Result<Tensor> {
    pqc_forward_angles(spec, theta, &scaled_angles(x, spec.scaling)?, counter)
}

/// Differentiation target for the shift rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftTarget {
    Theta(usize),
    /// Embedding angle of qubit `j`, after scaling.
    Angle(usize),
}

/// Mixed partial of all `⟨Z_q⟩` with respect to `targets` by iterated
/// parameter shift with `s = π/2`; costs `2^k` evaluations for `k` targets.
pub fn parameter_shift(
    spec: &CircuitSpec,
    theta: &[f64],
    phi: &Tensor,
    targets: &[ShiftTarget],
    counter: &EvalCounter,
) -> Result<Tensor> {
    let Some((&first, rest)) = targets.split_first() else {
        return pqc_forward_angles(spec, theta, phi, counter);
    };
    let shifted = |sign: f64| -> Result<Tensor> {
        match first {
            ShiftTarget::Theta(p) => {
                if p >= theta.len() {
                    return Err(Error::Invalid(format!("no trainable weight {p}")));
                }
                let mut t = theta.to_vec();
                t[p] += sign * FRAC_PI_2;
                parameter_shift(spec, &t, phi, rest, counter)
            }
            ShiftTarget::Angle(j) => {
                if j >= spec.n_qubits {
                    return Err(Error::Invalid(format!("no embedding angle {j}")));
                }
                let mut a = phi.clone();
                for b in 0..a.rows() {
                    a.data_mut()[b * spec.n_qubits + j] += sign * FRAC_PI_2;
                }
                parameter_shift(spec, theta, &a, rest, counter)
            }
        }
    };
    let plus = shifted(1.0)?;
    let minus = shifted(-1.0)?;
    let data = plus.data().iter().zip(minus.data()).map(|(p, m)| (p - m) / 2.0).collect();
    Tensor::new(plus.shape().to_vec(), data)
}

// ---- graph simulator ------------------------------------------------------------

/// Complex node pair; `None` parts are exactly zero.
#[derive(Clone, Copy, Debug)]
struct Cv {
    re: Option<Value>,
    im: Option<Value>,
}

fn opt_add(g: &mut Graph, a: Option<Value>, b: Option<Value>) -> Result<Option<Value>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(g.add(a, b)?),
        (x, None) | (None, x) => x,
    })
}

fn opt_sub(g: &mut Graph, a: Option<Value>, b: Option<Value>) -> Result<Option<Value>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(g.sub(a, b)?),
        (a, None) => a,
        (None, Some(b)) => Some(g.neg(b)?),
    })
}

/// Product of two real parts, either of which may be a rank-0 scalar or
/// a matrix, or the result of elementwise multiplication.
fn opt_mul(g: &mut Graph, a: Option<Value>, b: Option<Value>, how: &dyn Fn(&mut Graph, Value, Value) -> Result<Value>) -> Result<Option<Value>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(how(g, a, b)?),
        _ => None,
    })
}

fn cmul_with(g: &mut Graph, a: Cv, b: Cv, how: &dyn Fn(&mut Graph, Value, Value) -> Result<Value>) -> Result<Cv> {
    let rr = opt_mul(g, a.re, b.re, how)?;
    let ii = opt_mul(g, a.im, b.im, how)?;
    let ri = opt_mul(g, a.re, b.im, how)?;
    let ir = opt_mul(g, a.im, b.re, how)?;
    Ok(Cv {
        re: opt_sub(g, rr, ii)?,
        im: opt_add(g, ri, ir)?,
    })
}

fn zeros_like(g: &mut Graph, shape: &[usize]) -> Value {
    g.constant(Tensor::zeros(shape))
}

fn materialize(g: &mut Graph, v: Option<Value>, shape: &[usize]) -> Value {
    v.unwrap_or_else(|| zeros_like(g, shape))
}

fn concat_rows(g: &mut Graph, a: Value, b: Value) -> Result<Value> {
    let at = g.transpose(a)?;
    let bt = g.transpose(b)?;
    let c = g.concat_cols(&[at, bt])?;
    g.transpose(c)
}

/// 2×2 gate from graph scalars (rank 0).
type GGate = [[Cv; 2]; 2];

fn scalar_of(g: &mut Graph, theta: Value, p: usize) -> Result<Value> {
    let s = g.slice_cols(theta, p, 1)?;
    g.reshape(s, &[])
}

fn graph_rx(g: &mut Graph, t: Value) -> Result<GGate> {
    let h = g.scale(t, 0.5)?;
    let c = g.cos(h)?;
    let s = g.sin(h)?;
    let ms = g.neg(s)?;
    let diag = Cv { re: Some(c), im: None };
    let off = Cv { re: None, im: Some(ms) };
    Ok([[diag, off], [off, diag]])
}

/// Closed form of `RZ(omega) RY(theta) RZ(phi)`.
fn graph_rot(g: &mut Graph, phi: Value, theta: Value, omega: Value) -> Result<GGate> {
    let sum = g.add(phi, omega)?;
    let a = g.scale(sum, 0.5)?;
    let diff = g.sub(phi, omega)?;
    let b = g.scale(diff, 0.5)?;
    let h = g.scale(theta, 0.5)?;
    let (c, s) = (g.cos(h)?, g.sin(h)?);
    let (ca, sa, cb, sb) = (g.cos(a)?, g.sin(a)?, g.cos(b)?, g.sin(b)?);
    let ca_c = g.mul(ca, c)?;
    let sa_c = g.mul(sa, c)?;
    let cb_s = g.mul(cb, s)?;
    let sb_s = g.mul(sb, s)?;
    let m_sa_c = g.neg(sa_c)?;
    let m_cb_s = g.neg(cb_s)?;
    let m_sb_s = g.neg(sb_s)?;
    Ok([
        [
            Cv { re: Some(ca_c), im: Some(m_sa_c) },
            Cv { re: Some(m_cb_s), im: Some(m_sb_s) },
        ],
        [
            Cv { re: Some(cb_s), im: Some(m_sb_s) },
            Cv { re: Some(ca_c), im: Some(sa_c) },
        ],
    ])
}

/// Dense wall on the graph; `W_{q+1} = [[g00 W_q, g01 W_q], [g10 W_q, g11 W_q]]`
/// with the new qubit as the most significant bit.
fn graph_wall(g: &mut Graph, gates: &[GGate]) -> Result<(Value, Value)> {
    let one = g.constant(Tensor::ones(&[1, 1]));
    let mut w = Cv { re: Some(one), im: None };
    let mut dim = 1;
    let scalar_times = |g: &mut Graph, s: Value, m: Value| g.mul_scalar(m, s);
    for gate in gates {
        let mut rows = Vec::with_capacity(2);
        for row in gate {
            let mut blocks = Vec::with_capacity(2);
            for entry in row {
                blocks.push(cmul_with(g, w, *entry, &|g, m, s| scalar_times(g, s, m))?);
            }
            let re0 = materialize(g, blocks[0].re, &[dim, dim]);
            let re1 = materialize(g, blocks[1].re, &[dim, dim]);
            let im0 = materialize(g, blocks[0].im, &[dim, dim]);
            let im1 = materialize(g, blocks[1].im, &[dim, dim]);
            rows.push((g.concat_cols(&[re0, re1])?, g.concat_cols(&[im0, im1])?));
        }
        let re = concat_rows(g, rows[0].0, rows[1].0)?;
        let im = concat_rows(g, rows[0].1, rows[1].1)?;
        w = Cv { re: Some(re), im: Some(im) };
        dim *= 2;
    }
    Ok((w.re.expect("set"), w.im.expect("set")))
}

fn graph_embed(g: &mut Graph, phi: Value, n: usize, basis: Basis) -> Result<Cv> {
    let batch = g.value(phi).rows();
    let mut state: Option<Cv> = None;
    for q in 0..n {
        let col = g.col(phi, q)?;
        let h = g.scale(col, 0.5)?;
        let c = g.cos(h)?;
        let s = g.sin(h)?;
        let (a0, a1) = match basis {
            Basis::X => {
                let ms = g.neg(s)?;
                (Cv { re: Some(c), im: None }, Cv { re: None, im: Some(ms) })
            }
            Basis::Y => (Cv { re: Some(c), im: None }, Cv { re: Some(s), im: None }),
            Basis::Z => {
                let ms = g.neg(s)?;
                (Cv { re: Some(c), im: Some(ms) }, Cv { re: None, im: None })
            }
        };
        state = Some(match state {
            None => {
                let re0 = materialize(g, a0.re, &[batch, 1]);
                let re1 = materialize(g, a1.re, &[batch, 1]);
                let im0 = materialize(g, a0.im, &[batch, 1]);
                let im1 = materialize(g, a1.im, &[batch, 1]);
                Cv {
                    re: Some(g.concat_cols(&[re0, re1])?),
                    im: Some(g.concat_cols(&[im0, im1])?),
                }
            }
            Some(st) => {
                let width = 1usize << q;
                let bc = |g: &mut Graph, m: Value, col: Value| {
                    let wide = g.broadcast_cols(col, width)?;
                    g.mul(m, wide)
                };
                let p0 = cmul_with(g, st, a0, &bc)?;
                let p1 = cmul_with(g, st, a1, &bc)?;
                let re0 = materialize(g, p0.re, &[batch, width]);
                let re1 = materialize(g, p1.re, &[batch, width]);
                let im0 = materialize(g, p0.im, &[batch, width]);
                let im1 = materialize(g, p1.im, &[batch, width]);
                Cv {
                    re: Some(g.concat_cols(&[re0, re1])?),
                    im: Some(g.concat_cols(&[im0, im1])?),
                }
            }
        });
    }
    Ok(state.expect("at least one qubit"))
}

/// The circuit recorded on `g`: `theta` is `1 × P`, `phi` holds scaled
/// angles (`B × n`). Returns `⟨Z_q⟩` as `B × n`.
pub fn graph_circuit(g: &mut Graph, spec: &CircuitSpec, theta: Value, phi: Value) -> Result<Value> {
    spec.validate()?;
    let n = spec.n_qubits;
    let dim = spec.dim();
    if g.shape(theta) != [1, spec.param_count()] || g.value(phi).cols() != n {
        return Err(shape_err("graph_circuit", "weights must be 1 x P and angles B x n"));
    }
    let theta = if spec.reparametrize {
        let t = g.value(theta).clone();
        let shift = t.data().iter().map(|w| w.sin().atan2(w.cos()) - w).collect();
        let c = g.constant(Tensor::new(t.shape().to_vec(), shift)?);
        g.add(theta, c)?
    } else {
        theta
    };
    let mut st = graph_embed(g, phi, n, spec.basis)?;
    let batch = g.value(phi).rows();
    let k = spec.ansatz.angles_per_qubit();
    for l in 0..spec.n_layers {
        let mut gates = Vec::with_capacity(n);
        for q in 0..n {
            let base = (l * n + q) * k;
            gates.push(match spec.ansatz {
                Ansatz::BasicEntangling => {
                    let t = scalar_of(g, theta, base)?;
                    graph_rx(g, t)?
                }
                _ => {
                    let a = scalar_of(g, theta, base)?;
                    let b = scalar_of(g, theta, base + 1)?;
                    let c = scalar_of(g, theta, base + 2)?;
                    graph_rot(g, a, b, c)?
                }
            });
        }
        let (wr, wi) = graph_wall(g, &gates)?;
        let wrt = g.transpose(wr)?;
        let wit = g.transpose(wi)?;
        let a = Cv { re: Some(wrt), im: Some(wit) };
        st = cmul_with(g, st, a, &|g, x, y| g.matmul(x, y))?;
        let perm = cnot_permutation(n, &spec.ansatz.cnots(n, l));
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            // Rows are states, so the entangler acts as `ψ Eᵀ`.
            let mut et = Tensor::zeros(&[dim, dim]);
            for (k, &p) in perm.iter().enumerate() {
                et.data_mut()[k * dim + p] = 1.0;
            }
            let et = g.constant(et);
            st = Cv {
                re: st.re.map(|v| g.matmul(v, et)).transpose()?,
                im: st.im.map(|v| g.matmul(v, et)).transpose()?,
            };
        }
    }
    let re = materialize(g, st.re, &[batch, dim]);
    let im = materialize(g, st.im, &[batch, dim]);
    let r2 = g.square(re)?;
    let i2 = g.square(im)?;
    let prob = g.add(r2, i2)?;
    let mut z = Tensor::zeros(&[dim, n]);
    for i in 0..dim {
        for q in 0..n {
            z.data_mut()[i * n + q] = if (i >> q) & 1 == 0 { 1.0 } else { -1.0 };
        }
    }
    let z = g.constant(z);
    g.matmul(prob, z)
}

// ---- complexity -------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityInput {
    /// Embedding angles.
    pub q: u64,
    /// Trainable circuit parameters.
    pub p: u64,
    /// Highest coordinate-derivative order of the PDE.
    pub k: u32,
    /// Mixed partials needed at each order `1..=k`; defaults to all of them
    /// (`S_1 = Q` for first-order problems).
    pub s: Option<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub n_loss: u128,
    pub n_step: u128,
    pub s: Vec<u64>,
    pub bounds: Vec<u128>,
    pub bound_ok: Vec<bool>,
}

/// `C(n, k)` with `None` on overflow.
pub fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of multi-indices of total order `k` over `q` variables.
pub fn multiset_count(q: u64, k: u32) -> Option<u128> {
    if k == 0 {
        return Some(1);
    }
    if q == 0 {
        return Some(0);
    }
    binomial(q as u128 + k as u128 - 1, k as u128)
}

pub fn estimate_complexity(inp: &ComplexityInput) -> Result<ComplexityReport> {
    let overflow = || Error::Invalid("evaluation count overflows".into());
    let bounds: Vec<u128> = (1..=inp.k)
        .map(|k| multiset_count(inp.q, k).ok_or_else(overflow))
        .collect::<Result<_>>()?;
    let s = match &inp.s {
        Some(s) if s.len() != inp.k as usize => {
            return Err(Error::Invalid(format!("{} values of S_k for order {}", s.len(), inp.k)))
        }
        Some(s) => s.clone(),
        None => bounds
            .iter()
            .map(|&b| u64::try_from(b).map_err(|_| overflow()))
            .collect::<Result<_>>()?,
    };
    let bound_ok: Vec<bool> = s.iter().zip(&bounds).map(|(&s, &b)| s as u128 <= b).collect();
    if let Some(k) = bound_ok.iter().position(|ok| !ok) {
        return Err(Error::Invalid(format!(
            "S_{} = {} exceeds C(Q+k-1, k) = {}",
            k + 1,
            s[k],
            bounds[k]
        )));
    }
    let mut n_loss: u128 = 1;
    for (k, &sk) in s.iter().enumerate() {
        let term = (sk as u128).checked_mul(1u128.checked_shl(k as u32 + 1).ok_or_else(overflow)?);
        n_loss = n_loss.checked_add(term.ok_or_else(overflow)?).ok_or_else(overflow)?;
    }
    let n_step = (1 + 2 * inp.p as u128).checked_mul(n_loss).ok_or_else(overflow)?;
    Ok(ComplexityReport {
        n_loss,
        n_step,
        s,
        bounds,
        bound_ok,
    })
}

/// Multi-indices of order `k` over `q` variables as sorted index lists, in
/// lexicographic order.
pub fn multi_indices(q: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(q: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..q {
            cur.push(i);
            rec(q, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(q, k, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountCheck {
    pub counted_loss: u64,
    pub counted_step: u64,
    pub report: ComplexityReport,
}

/// Pointwise loss assembled from the forward value and the first `S_k`
/// embedding-angle partials of each order, all taken by parameter shift on
/// `⟨Z_0⟩`.
pub fn shift_rule_loss(
    spec: &CircuitSpec,
    theta: &[f64],
    phi: &Tensor,
    s: &[u64],
    counter: &EvalCounter,
) -> Result<f64> {
    let mut psi = pqc_forward_angles(spec, theta, phi, counter)?.at(0, 0);
    for (k, &sk) in s.iter().enumerate() {
        for alpha in multi_indices(spec.n_qubits, k + 1).into_iter().take(sk as usize) {
            let targets: Vec<ShiftTarget> = alpha.into_iter().map(ShiftTarget::Angle).collect();
            psi += parameter_shift(spec, theta, phi, &targets, counter)?.at(0, 0);
        }
    }
    Ok(psi * psi)
}

/// Counts circuit executions for one pointwise loss and for one full
/// parameter-shift update over the first `inp.p` weights, and requires both
/// to equal the predicted counts.
pub fn count_and_verify(spec: &CircuitSpec, theta: &[f64], phi: &Tensor, inp: &ComplexityInput) -> Result<CountCheck> {
    if inp.q != spec.n_qubits as u64 {
        return Err(Error::Invalid(format!("Q = {} but the circuit has {} qubits", inp.q, spec.n_qubits)));
    }
    if inp.p as usize > spec.param_count() {
        return Err(Error::Invalid(format!("P = {} exceeds the circuit's {} weights", inp.p, spec.param_count())));
    }
    if phi.rows() != 1 {
        return Err(shape_err("count_and_verify", "one sample is required"));
    }
    let report = estimate_complexity(inp)?;
    let counter = EvalCounter::new();
    shift_rule_loss(spec, theta, phi, &report.s, &counter)?;
    let counted_loss = counter.get();

    counter.reset();
    shift_rule_loss(spec, theta, phi, &report.s, &counter)?;
    for p in 0..inp.p as usize {
        for sign in [1.0, -1.0] {
            let mut t = theta.to_vec();
            t[p] += sign * FRAC_PI_2;
            shift_rule_loss(spec, &t, phi, &report.s, &counter)?;
        }
    }
    let counted_step = counter.get();
    if counted_loss as u128 != report.n_loss || counted_step as u128 != report.n_step {
        return Err(Error::CountMismatch {
            counted: counted_step,
            predicted: report.n_step as u64,
            breakdown: format!(
                "loss counted {counted_loss} vs predicted {}; step counted {counted_step} vs predicted {}; S = {:?}",
                report.n_loss, report.n_step, report.s
            ),
        });
    }
    Ok(CountCheck {
        counted_loss,
        counted_step,
        report,
    })
}

/// Runs [`count_and_verify`] on `cases` random configurations with
/// `Q ≤ 4`, `K ≤ 2`, `P ≤ 10`.
pub fn verify_counter_matrix(seed: u64, cases: usize) -> Result<Vec<CountCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|_| {
            let q = rng.random_range(1..=4usize);
            let k = rng.random_range(0..=2u32);
            let p = rng.random_range(0..=10u64);
            let ansatz = Ansatz::ALL[rng.random_range(0..Ansatz::ALL.len())];
            let layers = (p as usize).div_ceil(q * ansatz.angles_per_qubit()).max(1);
            let spec = CircuitSpec::new(q, layers, ansatz);
            let s: Vec<u64> = (1..=k)
                .map(|kk| rng.random_range(0..=multiset_count(q as u64, kk).expect("small") as u64))
                .collect();
            let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.random_range(-PI..PI)).collect();
            let phi = Tensor::row((0..q).map(|_| rng.random_range(-PI..PI)).collect());
            count_and_verify(&spec, &theta, &phi, &ComplexityInput { q: q as u64, p, k, s: Some(s) })
        })
        .collect()
}

// ---- hybrid network ------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridSpec {
    /// Classical trunk; its `out_dim` must equal the qubit count.
    pub trunk: ModelSpec,
    pub circuit: CircuitSpec,
    pub out_dim: usize,
}

impl HybridSpec {
    pub fn validate(&self) -> Result<()> {
        self.trunk.validate()?;
        self.circuit.validate()?;
        if self.trunk.out_dim != self.circuit.n_qubits {
            return Err(Error::Config(format!(
                "trunk emits {} features for {} qubits",
                self.trunk.out_dim, self.circuit.n_qubits
            )));
        }
        Ok(())
    }

    /// Classical network with the circuit replaced by one more hidden layer.
    pub fn matched_baseline(&self) -> ModelSpec {
        let mut s = self.trunk.clone();
        s.depth += 1;
        s.out_dim = self.out_dim;
        s
    }
}

/// Trunk → `tanh` → angle scaling → circuit → `⟨Z⟩` → linear head.
#[derive(Clone, Debug)]
pub struct Hybrid {
    spec: HybridSpec,
    trunk: Mlp,
    store: ParamStore,
    n_trunk: usize,
}

impl Hybrid {
    pub fn new(spec: HybridSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let trunk = Mlp::new(spec.trunk.clone(), seed)?;
        let mut store = ParamStore::new();
        for p in trunk.params().entries() {
            store.push(format!("trunk.{}", p.name), p.tensor.clone(), p.trainable);
        }
        let n_trunk = store.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_4154);
        let theta = (0..spec.circuit.param_count())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        store.push("pqc.theta", Tensor::row(theta), true);
        let q = spec.circuit.n_qubits;
        let std = (2.0 / (q + spec.out_dim) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        let w = (0..q * spec.out_dim).map(|_| normal.sample(&mut rng)).collect();
        store.push("head.weight", Tensor::new(vec![q, spec.out_dim], w)?, true);
        store.push("head.bias", Tensor::zeros(&[1, spec.out_dim]), true);
        Ok(Self {
            spec,
            trunk,
            store,
            n_trunk,
        })
    }

    pub fn spec(&self) -> &HybridSpec {
        &self.spec
    }

    /// Scaled embedding angles for `x`, evaluated on `g`.
    pub fn angles(&self, g: &mut Graph, params: &[Value], x: Value) -> Result<Value> {
        let a = self.trunk.forward(g, &params[..self.n_trunk], x)?;
        let a = g.tanh(a)?;
        self.spec.circuit.scaling.record(g, a)
    }
}

impl Network for Hybrid {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, g: &mut Graph, params: &[Value], x: Value) -> Result<Value> {
        let phi = self.angles(g, params, x)?;
        let z = graph_circuit(g, &self.spec.circuit, params[self.n_trunk], phi)?;
        g.linear(z, params[self.n_trunk + 1], params[self.n_trunk + 2])
    }

    fn in_dim(&self) -> usize {
        self.spec.trunk.in_dim
    }

    fn out_dim(&self) -> usize {
        self.spec.out_dim
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "hybrid", "spec": self.spec })
    }
}

/// Trainable-parameter counts of a hybrid model and its matched classical
/// baseline, and the relative reduction in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Census {
    pub hybrid: usize,
    pub baseline: usize,
    pub reduction_pct: f64,
}

pub fn census(spec: &HybridSpec) -> Result<Census> {
    let hybrid = Hybrid::new(spec.clone(), 0)?.params().trainable_count();
    let baseline = Mlp::new(spec.matched_baseline(), 0)?.params().trainable_count();
    Ok(Census {
        hybrid,
        baseline,
        reduction_pct: 100.0 * (baseline as f64 - hybrid as f64) / baseline as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_theta(spec: &CircuitSpec, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..spec.param_count()).map(|_| rng.random_range(-PI..PI)).collect()
    }

    #[test]
    fn scalings() {
        assert_eq!(AngleScaling::Bias.apply(-1.0).unwrap(), 0.0);
        assert_eq!(AngleScaling::Bias.apply(1.0).unwrap(), PI);
        assert_eq!(AngleScaling::Asin.apply(0.0).unwrap(), FRAC_PI_2);
        assert_eq!(AngleScaling::Acos.apply(1.0).unwrap(), 0.0);
        assert!(AngleScaling::Asin.apply(1.5).is_err());
        assert!(AngleScaling::Acos.apply(-1.01).is_err());
    }

    #[test]
    fn zero_angles_give_ground_state() {
        let s = embed_angles(&Tensor::zeros(&[2, 3]), Basis::X).unwrap();
        assert_eq!(s, StateVector::zero(2, 3));
        assert_eq!(measure_z(&s).data(), &[1.0; 6]);
    }

    #[test]
    fn single_qubit_expectation_is_cosine() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = CircuitSpec::new(1, 0, Ansatz::NoEntanglement);
        let c = EvalCounter::new();
        for _ in 0..20 {
            let t: f64 = rng.random_range(-2.0 * PI..2.0 * PI);
            let z = pqc_forward(&spec, &[], &Tensor::matrix(1, 1, vec![t]).unwrap(), &c).unwrap();
            assert!((z.item() - t.cos()).abs() <= 1e-12);
        }
        assert_eq!(c.get(), 20);
    }

    #[test]
    fn excited_qubit_reads_minus_one() {
        let s = embed_angles(&Tensor::row(vec![0.0, PI, 0.0]), Basis::X).unwrap();
        let z = measure_z(&s);
        assert!((z.data()[1] + 1.0).abs() < 1e-15);
        assert!((z.data()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_and_unitarity() {
        let spec = CircuitSpec::new(3, 1, Ansatz::NoEntanglement);
        let u = build_layer(&spec, 0, &[0.0; 9]).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((u[i * 8 + j] - C::new(want, 0.0)).norm() < 1e-15);
            }
        }
        for ansatz in Ansatz::ALL {
            for n in 1..=5 {
                let spec = CircuitSpec::new(n, 3, ansatz);
                let theta = rand_theta(&spec, n as u64);
                let per = n * ansatz.angles_per_qubit();
                let u = build_layer(&spec, 2, &theta[2 * per..3 * per]).unwrap();
                let dim = 1 << n;
                for i in 0..dim {
                    for j in 0..dim {
                        let dot: C = (0..dim).map(|k| u[k * dim + i].conj() * u[k * dim + j]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((dot - C::new(want, 0.0)).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn ladder_keeps_ground_state() {
        let spec = CircuitSpec::new(4, 2, Ansatz::StronglyEntangling);
        let perm = cnot_permutation(4, &spec.ansatz.cnots(4, 1));
        assert_eq!(perm[0], 0);
        assert_eq!(Ansatz::StronglyEntangling.cnots(4, 0), vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(Ansatz::StronglyEntangling.cnots(4, 1), vec![(0, 2), (1, 3), (2, 0), (3, 1)]);
        assert_eq!(Ansatz::CrossMesh.cnots(3, 0), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn shift_rule_closed_forms() {
        let spec = CircuitSpec::new(1, 0, Ansatz::NoEntanglement);
        let c = EvalCounter::new();
        for t in [-2.0, -0.3, 0.0, 0.7, 2.5] {
            let phi = Tensor::matrix(1, 1, vec![t]).unwrap();
            let d1 = parameter_shift(&spec, &[], &phi, &[ShiftTarget::Angle(0)], &c).unwrap();
            assert!((d1.item() + f64::sin(t)).abs() <= 1e-12);
            c.reset();
            let d2 = parameter_shift(&spec, &[], &phi, &[ShiftTarget::Angle(0); 2], &c).unwrap();
            assert!((d2.item() + f64::cos(t)).abs() <= 1e-12);
            assert_eq!(c.get(), 4);
        }
    }

    #[test]
    fn graph_path_matches_complex_path() {
        for (i, ansatz) in Ansatz::ALL.into_iter().enumerate() {
            for basis in [Basis::X, Basis::Y, Basis::Z] {
                let spec = CircuitSpec { basis, ..CircuitSpec::new(3, 2, ansatz) };
                let theta = rand_theta(&spec, i as u64 + 10);
                let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                let phi = Tensor::matrix(4, 3, (0..12).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
                let want = pqc_forward_angles(&spec, &theta, &phi, &EvalCounter::new()).unwrap();
                let mut g = Graph::new();
                let t = g.leaf(Tensor::row(theta));
                let p = g.leaf(phi);
                let z = graph_circuit(&mut g, &spec, t, p).unwrap();
                assert!(g.value(z).max_abs_diff(&want) < 1e-13);
            }
        }
    }

    #[test]
    fn complexity_examples() {
        let r = estimate_complexity(&ComplexityInput { q: 7, p: 84, k: 1, s: Some(vec![7]) }).unwrap();
        assert_eq!((r.n_loss, r.n_step), (15, 2535));
        let r = estimate_complexity(&ComplexityInput { q: 5, p: 9, k: 0, s: None }).unwrap();
        assert_eq!((r.n_loss, r.n_step), (1, 19));
        let r = estimate_complexity(&ComplexityInput { q: 2, p: 1, k: 2, s: Some(vec![2, 3]) }).unwrap();
        assert_eq!((r.n_loss, r.n_step), (17, 51));
        assert_eq!(r.bounds, vec![2, 3]);
        assert!(estimate_complexity(&ComplexityInput { q: 2, p: 1, k: 2, s: Some(vec![2, 4]) }).is_err());
        assert_eq!(multi_indices(2, 2), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn counter_examples() {
        let spec = CircuitSpec::new(3, 1, Ansatz::StronglyEntangling);
        let theta = rand_theta(&spec, 3);
        let phi = Tensor::row(vec![0.1, 0.2, 0.3]);
        let r = count_and_verify(&spec, &theta, &phi, &ComplexityInput { q: 3, p: 5, k: 1, s: Some(vec![3]) }).unwrap();
        assert_eq!((r.counted_loss, r.counted_step), (7, 77));
        let r = count_and_verify(&spec, &theta, &phi, &ComplexityInput { q: 3, p: 0, k: 0, s: None }).unwrap();
        assert_eq!(r.counted_loss, 1);
    }

    #[test]
    fn hybrid_zero_trunk_sees_ground_state() {
        let mut trunk = ModelSpec::mlp(3, 4, 1, 2);
        trunk.activation = crate::models::Activation::Tanh;
        let spec = HybridSpec {
            trunk,
            circuit: CircuitSpec::new(2, 1, Ansatz::NoEntanglement),
            out_dim: 3,
        };
        let mut h = Hybrid::new(spec, 0).unwrap();
        let n = h.params().trainable_count();
        let mut flat = vec![0.0; n];
        let head_w = h.params().entries().iter().position(|p| p.name == "head.weight").unwrap();
        let offset: usize = h.params().entries()[..head_w]
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.tensor.numel())
            .sum();
        flat[offset..offset + 6].copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        h.params_mut().set_trainable(&flat).unwrap();
        let out = crate::models::predict(&h, &Tensor::matrix(2, 3, vec![0.3; 6]).unwrap()).unwrap();
        assert_eq!(out.data(), &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
    }
}
