//! Network architectures and input embeddings.
//!
//! Weights are stored `in × out` so a layer is `x · W + b` on row-major
//! batches. The factorized form keeps `V` in the same layout and a `1 × out`
//! scale row `s`, giving `W = V ⊙ exp(s)` broadcast down the rows; this is the
//! transpose of `diag(exp(s)) · V` in the `out × in` convention used by
//! [`rwf_materialize`].

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diffgraph::{Graph, Value};
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sine { w0: f64 },
    Swish,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::Tanh
    }
}

/// How one input coordinate enters the network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisEmbedding {
    /// Passed through, affinely mapped to `[-1, 1]` when bounds are known.
    Raw,
    /// Replaced by `cos(2πx/P), sin(2πx/P)`.
    Periodic { period: f64, trainable: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffSpec {
    #[serde(default = "default_rff_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub mean: f64,
    /// Number of frequencies; the map emits twice this many features.
    pub width: usize,
}

fn default_rff_sigma() -> f64 {
    10.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    /// One entry per input column; empty means all raw.
    #[serde(default)]
    pub axes: Vec<AxisEmbedding>,
    /// Applied to the output of the per-axis stage.
    #[serde(default)]
    pub rff: Option<RffSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightParam {
    Plain,
    Rwf { mu: f64, sigma: f64 },
}

impl Default for WeightParam {
    fn default() -> Self {
        WeightParam::Plain
    }
}

impl WeightParam {
    pub fn rwf_default() -> Self {
        WeightParam::Rwf { mu: 1.0, sigma: 0.1 }
    }
}

/// Layered network description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub in_dim: usize,
    pub hidden_dim: usize,
    /// Number of hidden layers.
    pub depth: usize,
    pub out_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub embedding: EmbeddingSpec,
    #[serde(default)]
    pub weight_param: WeightParam,
    /// Per-axis `(lo, hi)` used to rescale raw axes to `[-1, 1]`.
    #[serde(default)]
    pub input_bounds: Option<Vec<(f64, f64)>>,
}

impl ModelSpec {
    pub fn mlp(in_dim: usize, hidden_dim: usize, depth: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            hidden_dim,
            depth,
            out_dim,
            activation: Activation::Tanh,
            embedding: EmbeddingSpec::default(),
            weight_param: WeightParam::Plain,
            input_bounds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        let axes = &self.embedding.axes;
        if !axes.is_empty() && axes.len() != self.in_dim {
            return Err(Error::Config(format!(
                "{} axis embeddings for {} inputs",
                axes.len(),
                self.in_dim
            )));
        }
        for a in axes {
            if let AxisEmbedding::Periodic { period, .. } = a {
                if !(*period > 0.0 && period.is_finite()) {
                    return Err(Error::Config(format!("non-positive period {period}")));
                }
            }
        }
        if let Some(b) = &self.input_bounds {
            if b.len() != self.in_dim || b.iter().any(|(lo, hi)| !(hi > lo)) {
                return Err(Error::Config("input_bounds must give lo < hi per input".into()));
            }
        }
        if let Some(r) = &self.embedding.rff {
            if r.width == 0 || !(r.sigma >= 0.0) {
                return Err(Error::Config("rff needs width > 0 and sigma >= 0".into()));
            }
        }
        Ok(())
    }

    fn axis(&self, j: usize) -> AxisEmbedding {
        self.embedding.axes.get(j).copied().unwrap_or(AxisEmbedding::Raw)
    }

    /// Width after the per-axis stage.
    pub fn axis_features(&self) -> usize {
        (0..self.in_dim)
            .map(|j| match self.axis(j) {
                AxisEmbedding::Raw => 1,
                AxisEmbedding::Periodic { .. } => 2,
            })
            .sum()
    }

    /// Input width of the first linear layer.
    pub fn first_layer_in(&self) -> usize {
        match &self.embedding.rff {
            Some(r) => 2 * r.width,
            None => self.axis_features(),
        }
    }
}

/// A named tensor in a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor,
    pub trainable: bool,
}

/// Ordered parameter collection; the order defines the flat layout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor, trainable: bool) -> usize {
        self.entries.push(Param {
            name: name.into(),
            tensor,
            trainable,
        });
        self.entries.len() - 1
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.entries.iter().find(|p| p.name == name)
    }

    pub fn tensor_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.entries[idx].tensor
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|p| p.trainable).map(|p| p.tensor.numel()).sum()
    }

    pub fn flatten_trainable(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable_count());
        for p in self.entries.iter().filter(|p| p.trainable) {
            out.extend_from_slice(p.tensor.data());
        }
        out
    }

    pub fn set_trainable(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_count() {
            return Err(shape_err(
                "set_trainable",
                format!("expected {} values, got {}", self.trainable_count(), flat.len()),
            ));
        }
        let mut off = 0;
        for p in self.entries.iter_mut().filter(|p| p.trainable) {
            let n = p.tensor.numel();
            p.tensor.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Records every entry in `g`: trainable ones as leaves, frozen ones as
    /// constants. Returns handles in store order.
    pub fn bind(&self, g: &mut Graph) -> Vec<Value> {
        self.entries
            .iter()
            .map(|p| {
                if p.trainable {
                    g.leaf(p.tensor.clone())
                } else {
                    g.constant(p.tensor.clone())
                }
            })
            .collect()
    }

    /// The trainable subset of `handles` returned by [`ParamStore::bind`].
    pub fn trainable_handles(&self, handles: &[Value]) -> Vec<Value> {
        self.entries
            .iter()
            .zip(handles)
            .filter(|(p, _)| p.trainable)
            .map(|(_, &h)| h)
            .collect()
    }

    /// Copies values from `other`, matching by name and shape.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        for p in &mut self.entries {
            let src = other
                .get(&p.name)
                .ok_or_else(|| Error::Format(format!("missing tensor `{}`", p.name)))?;
            if src.tensor.shape() != p.tensor.shape() {
                return Err(Error::Format(format!(
                    "tensor `{}` has shape {:?}, expected {:?}",
                    p.name,
                    src.tensor.shape(),
                    p.tensor.shape()
                )));
            }
            p.tensor = src.tensor.clone();
        }
        Ok(())
    }
}

/// A trainable model evaluated on a graph.
pub trait Network: Send + Sync {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// Evaluates the `N × in_dim` input `x`; `params` come from
    /// [`ParamStore::bind`] on the same graph.
    fn forward(&self, g: &mut Graph, params: &[Value], x: Value) -> Result<Value>;
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Architecture description stored in checkpoint headers.
    fn describe(&self) -> serde_json::Value;
}

/// Something that maps an `N × d` input node to an `N × m` output node.
pub trait Field {
    fn eval(&self, g: &mut Graph, x: Value) -> Result<Value>;
}

/// A network together with its parameter handles on one graph.
pub struct Bound<'a, N: ?Sized> {
    pub net: &'a N,
    pub params: Vec<Value>,
}

impl<'a, N: Network + ?Sized> Bound<'a, N> {
    pub fn new(net: &'a N, g: &mut Graph) -> Self {
        let params = net.params().bind(g);
        Self { net, params }
    }

    pub fn trainable(&self) -> Vec<Value> {
        self.net.params().trainable_handles(&self.params)
    }
}

impl<N: Network + ?Sized> Field for Bound<'_, N> {
    fn eval(&self, g: &mut Graph, x: Value) -> Result<Value> {
        self.net.forward(g, &self.params, x)
    }
}

/// A closed-form field written with graph operations, with no parameters.
pub struct FnField<F>(pub F);

impl<F> Field for FnField<F>
where
    F: Fn(&mut Graph, Value) -> Result<Value>,
{
    fn eval(&self, g: &mut Graph, x: Value) -> Result<Value> {
        (self.0)(g, x)
    }
}

#[derive(Clone, Debug)]
enum LayerIdx {
    Plain { w: usize, b: usize },
    Rwf { v: usize, s: usize, b: usize },
}

/// Multilayer perceptron with optional periodic, Fourier-feature and
/// factorized-weight variants.
#[derive(Clone, Debug)]
pub struct Mlp {
    spec: ModelSpec,
    store: ParamStore,
    periods: Vec<Option<usize>>,
    rff: Option<usize>,
    layers: Vec<LayerIdx>,
}

fn xavier(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let data = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
    Tensor::from_parts(vec![fan_in, fan_out], data)
}

impl Mlp {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();

        let mut periods = Vec::with_capacity(spec.in_dim);
        for j in 0..spec.in_dim {
            periods.push(match spec.axis(j) {
                AxisEmbedding::Periodic { period, trainable } => {
                    Some(store.push(format!("embed.period{j}"), Tensor::scalar(period), trainable))
                }
                AxisEmbedding::Raw => None,
            });
        }

        let rff = spec.embedding.rff.map(|r| {
            let normal = Normal::new(r.mean, r.sigma).expect("validated sigma");
            let n = spec.axis_features();
            let data = (0..n * r.width).map(|_| normal.sample(&mut rng)).collect();
            store.push("rff.b", Tensor::from_parts(vec![n, r.width], data), false)
        });

        let mut widths = vec![spec.first_layer_in()];
        widths.extend(std::iter::repeat(spec.hidden_dim).take(spec.depth));
        widths.push(spec.out_dim);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (i, pair) in widths.windows(2).enumerate() {
            let (fi, fo) = (pair[0], pair[1]);
            let w = xavier(&mut rng, fi, fo);
            let layer = match spec.weight_param {
                WeightParam::Plain => {
                    let w = store.push(format!("layer{i}.weight"), w, true);
                    let b = store.push(format!("layer{i}.bias"), Tensor::zeros(&[1, fo]), true);
                    LayerIdx::Plain { w, b }
                }
                WeightParam::Rwf { mu, sigma } => {
                    let normal = Normal::new(mu, sigma)
                        .map_err(|e| Error::Config(format!("rwf scale distribution: {e}")))?;
                    let s: Vec<f64> = (0..fo).map(|_| normal.sample(&mut rng)).collect();
                    let v = store.push(format!("layer{i}.v"), w, true);
                    let s = store.push(format!("layer{i}.s"), Tensor::row(s), true);
                    let b = store.push(format!("layer{i}.bias"), Tensor::zeros(&[1, fo]), true);
                    LayerIdx::Rwf { v, s, b }
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            spec,
            store,
            periods,
            rff,
            layers,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Per-axis stage: normalization or periodic features, concatenated.
    fn embed(&self, g: &mut Graph, params: &[Value], x: Value) -> Result<Value> {
        let n = g.value(x).rows();
        let mut parts = Vec::with_capacity(self.spec.in_dim * 2);
        for j in 0..self.spec.in_dim {
            let col = g.col(x, j)?;
            match self.periods[j] {
                Some(pi) => {
                    let inv = g.recip(params[pi])?;
                    let w = g.scale(inv, 2.0 * PI)?;
                    let wb = g.broadcast_scalar(w, &[n, 1])?;
                    let phase = g.mul(col, wb)?;
                    parts.push(g.cos(phase)?);
                    parts.push(g.sin(phase)?);
                }
                None => match &self.spec.input_bounds {
                    Some(b) => {
                        let (lo, hi) = b[j];
                        let s = g.scale(col, 2.0 / (hi - lo))?;
                        parts.push(g.offset(s, -(hi + lo) / (hi - lo))?);
                    }
                    None => parts.push(col),
                },
            }
        }
        g.concat_cols(&parts)
    }

    fn activate(&self, g: &mut Graph, h: Value) -> Result<Value> {
        match self.spec.activation {
            Activation::Tanh => g.tanh(h),
            Activation::Sine { w0 } => {
                let s = g.scale(h, w0)?;
                g.sin(s)
            }
            Activation::Swish => {
                let s = g.sigmoid(h)?;
                g.mul(h, s)
            }
        }
    }
}

impl Network for Mlp {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn forward(&self, g: &mut Graph, params: &[Value], x: Value) -> Result<Value> {
        if g.value(x).rank() != 2 || g.value(x).cols() != self.spec.in_dim {
            return Err(shape_err(
                "mlp_forward",
                format!("expected N x {}, got {:?}", self.spec.in_dim, g.shape(x)),
            ));
        }
        let mut h = self.embed(g, params, x)?;
        if let Some(bi) = self.rff {
            h = rff_map(g, h, params[bi])?;
        }
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (w, b) = match *layer {
                LayerIdx::Plain { w, b } => (params[w], params[b]),
                LayerIdx::Rwf { v, s, b } => {
                    let rows = g.value(params[v]).rows();
                    let es = g.exp(params[s])?;
                    let esb = g.broadcast_rows(es, rows)?;
                    (g.mul(params[v], esb)?, params[b])
                }
            };
            h = g.linear(h, w, b)?;
            if i != last {
                h = self.activate(g, h)?;
            }
        }
        Ok(h)
    }

    fn in_dim(&self) -> usize {
        self.spec.in_dim
    }

    fn out_dim(&self) -> usize {
        self.spec.out_dim
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "mlp": self.spec })
    }
}

/// `[cos(xB), sin(xB)]` for an `N × d` input and a `d × m` frequency matrix.
pub fn rff_map(g: &mut Graph, x: Value, b: Value) -> Result<Value> {
    let xb = g.matmul(x, b)?;
    let c = g.cos(xb)?;
    let s = g.sin(xb)?;
    g.concat_cols(&[c, s])
}

/// `diag(exp(s)) · V` for `V` stored `out × in`.
pub fn rwf_materialize(v: &Tensor, s: &[f64]) -> Result<Tensor> {
    if v.rank() != 2 || s.len() != v.rows() {
        return Err(shape_err(
            "rwf_materialize",
            format!("V {:?} with {} scales", v.shape(), s.len()),
        ));
    }
    let cols = v.cols();
    let data = v
        .data()
        .iter()
        .enumerate()
        .map(|(k, &x)| s[k / cols].exp() * x)
        .collect();
    Ok(Tensor::from_parts(v.shape().to_vec(), data))
}

/// `[cos(2πx/Px), sin(2πx/Px), cos(2πt/Pt), sin(2πt/Pt)]` for `N × 1` columns.
pub fn periodic_embed(g: &mut Graph, x: Value, t: Value, px: f64, pt: f64) -> Result<Value> {
    if !(px > 0.0) || !(pt > 0.0) {
        return Err(Error::Invalid(format!("periods must be positive, got {px}, {pt}")));
    }
    let ax = g.scale(x, 2.0 * PI / px)?;
    let at = g.scale(t, 2.0 * PI / pt)?;
    let parts = [g.cos(ax)?, g.sin(ax)?, g.cos(at)?, g.sin(at)?];
    g.concat_cols(&parts)
}

/// Evaluates a network on plain values without keeping the graph.
pub fn predict<N: Network + ?Sized>(net: &N, x: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let params = net.params().bind(&mut g);
    let xv = g.constant(x.clone());
    let out = net.forward(&mut g, &params, xv)?;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn rff_zero_input_and_width() {
        let mut spec = ModelSpec::mlp(2, 16, 1, 1);
        spec.embedding.rff = Some(RffSpec { sigma: 10.0, mean: 0.0, width: 256 });
        let net = Mlp::new(spec, 3).unwrap();
        let b = net.params().get("rff.b").unwrap();
        assert!(!b.trainable);
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[1, 2]));
        let bv = g.constant(b.tensor.clone());
        let f = rff_map(&mut g, x, bv).unwrap();
        let out = g.value(f);
        assert_eq!(out.cols(), 512);
        assert!(out.data()[..256].iter().all(|&v| v == 1.0));
        assert!(out.data()[256..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rff_columns_are_two_pi_periodic() {
        let mut g = Graph::new();
        let b = Tensor::matrix(1, 3, vec![0.5, 2.0, -4.0]).unwrap();
        let bv = g.constant(b.clone());
        let x = g.constant(Tensor::column(vec![0.3]));
        let base = rff_map(&mut g, x, bv).unwrap();
        for j in 0..3 {
            let shifted = 0.3 + 2.0 * PI / b.data()[j];
            let xs = g.constant(Tensor::column(vec![shifted]));
            let f = rff_map(&mut g, xs, bv).unwrap();
            for half in [0, 3] {
                let d = g.value(f).data()[j + half] - g.value(base).data()[j + half];
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rwf_materialize_scales_rows() {
        let v = Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        assert_eq!(rwf_materialize(&v, &[0.0, 0.0]).unwrap(), v);
        let w = rwf_materialize(&v, &[2f64.ln(), 2f64.ln()]).unwrap();
        for (a, b) in w.data().iter().zip(v.data()) {
            assert!((a - 2.0 * b).abs() < 1e-15);
        }
        assert!(rwf_materialize(&v, &[0.0]).is_err());
    }

    #[test]
    fn periodic_embed_values() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::column(vec![0.0, 1.7]));
        let t = g.constant(Tensor::column(vec![0.0, 0.2]));
        let e = periodic_embed(&mut g, x, t, 2.0, 1.0).unwrap();
        assert_eq!(g.value(e).at(0, 0), 1.0);
        assert_eq!(g.value(e).at(0, 1), 0.0);
        let x2 = g.constant(Tensor::column(vec![2.0, 3.7]));
        let e2 = periodic_embed(&mut g, x2, t, 2.0, 1.0).unwrap();
        assert!(g.value(e).max_abs_diff(g.value(e2)) < 1e-12);
        assert!(periodic_embed(&mut g, x, t, 0.0, 1.0).is_err());
    }

    #[test]
    fn zero_weight_net_outputs_final_bias() {
        let mut net = Mlp::new(ModelSpec::mlp(2, 8, 2, 1), 1).unwrap();
        let n = net.params().trainable_count();
        let mut flat = vec![0.0; n];
        *flat.last_mut().unwrap() = 0.75;
        net.params_mut().set_trainable(&flat).unwrap();
        let x = Tensor::from_rows(&[vec![0.1, 0.2], vec![-3.0, 5.0]]).unwrap();
        let out = predict(&net, &x).unwrap();
        assert_eq!(out.data(), &[0.75, 0.75]);
    }

    #[test]
    fn sine_activation_vanishes_at_origin() {
        let mut spec = ModelSpec::mlp(1, 1, 1, 1);
        spec.activation = Activation::Sine { w0: 30.0 };
        let mut net = Mlp::new(spec, 0).unwrap();
        // hidden = sin(w0 · (x w1 + 0)), output = hidden · w2 + 0
        net.params_mut().set_trainable(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let out = predict(&net, &Tensor::column(vec![0.0])).unwrap();
        assert_eq!(out.item(), 0.0);
    }

    #[test]
    fn one_unit_tanh_matches_hand_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::new(ModelSpec::mlp(1, 1, 1, 1), 0).unwrap();
        for _ in 0..5 {
            let p: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x: f64 = rng.random_range(-2.0..2.0);
            net.params_mut().set_trainable(&p).unwrap();
            let out = predict(&net, &Tensor::column(vec![x])).unwrap().item();
            let hand = (p[0] * x + p[1]).tanh() * p[2] + p[3];
            assert!((out - hand).abs() < 1e-12);
        }
    }

    #[test]
    fn rwf_with_zero_scale_matches_plain() {
        let plain = Mlp::new(ModelSpec::mlp(2, 6, 2, 1), 9).unwrap();
        let mut spec = ModelSpec::mlp(2, 6, 2, 1);
        spec.weight_param = WeightParam::rwf_default();
        let mut rwf = Mlp::new(spec, 9).unwrap();
        // Order per layer is v, s, bias in the factorized store.
        let mut reordered = Vec::new();
        let mut it = plain.params().entries().iter();
        while let (Some(w), Some(b)) = (it.next(), it.next()) {
            reordered.extend_from_slice(w.tensor.data());
            reordered.extend(std::iter::repeat(0.0).take(w.tensor.cols()));
            reordered.extend_from_slice(b.tensor.data());
        }
        rwf.params_mut().set_trainable(&reordered).unwrap();
        let x = Tensor::from_rows(&[vec![0.3, -0.2], vec![1.1, 0.9]]).unwrap();
        assert_eq!(predict(&plain, &x).unwrap(), predict(&rwf, &x).unwrap());
    }

    #[test]
    fn census_rules() {
        let mut spec = ModelSpec::mlp(2, 4, 1, 1);
        spec.embedding.axes = vec![
            AxisEmbedding::Periodic { period: 2.0, trainable: false },
            AxisEmbedding::Periodic { period: 1.0, trainable: true },
        ];
        spec.embedding.rff = Some(RffSpec { sigma: 1.0, mean: 0.0, width: 3 });
        spec.weight_param = WeightParam::rwf_default();
        let net = Mlp::new(spec, 0).unwrap();
        // period t (1) + layer0 v 6x4, s 4, b 4 + layer1 v 4x1, s 1, b 1
        assert_eq!(net.params().trainable_count(), 1 + 24 + 4 + 4 + 4 + 1 + 1);
        assert!(!net.params().get("embed.period0").unwrap().trainable);
        assert!(!net.params().get("rff.b").unwrap().trainable);
    }

    #[test]
    fn identical_seeds_identical_models() {
        let a = Mlp::new(ModelSpec::mlp(2, 8, 2, 1), 42).unwrap();
        let b = Mlp::new(ModelSpec::mlp(2, 8, 2, 1), 42).unwrap();
        let c = Mlp::new(ModelSpec::mlp(2, 8, 2, 1), 43).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn spec_validation() {
        assert!(Mlp::new(ModelSpec::mlp(2, 8, 0, 1), 0).is_err());
        let mut spec = ModelSpec::mlp(2, 8, 1, 1);
        spec.embedding.axes = vec![AxisEmbedding::Periodic { period: -1.0, trainable: false }; 2];
        assert!(Mlp::new(spec, 0).is_err());
    }
}
