//! From-scratch models on hypercube inputs: linear regression, deep linear
//! networks and ReLU MLPs, with SGD (momentum), Adam and noisy GD.
//!
//! All models minimize the unhalved square loss `mean (f_NN(x) - y)²`; the
//! reported generalization error in [`crate::harness`] is the ½-scaled one.
//!
//! Layer `ℓ` maps `h ↦ h W_ℓ + b_ℓ` with `W_ℓ` of shape `(in, out)`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::boolfn::FourierSpectrum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    LinearRegression,
    DeepLinear,
    Mlp,
}

impl ModelKind {
    pub fn is_linear(self) -> bool {
        !matches!(self, ModelKind::Mlp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// Weights and biases from `U(-N_in^{-α}, N_in^{-α})`, `N_in` the layer fan-in.
    UniformFanIn { alpha: f64 },
    /// Independent `N(mean, variance)` draws for every parameter.
    Normal { mean: f64, variance: f64 },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::UniformFanIn { alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub input_dim: usize,
    /// Hidden widths; empty for linear regression.
    pub hidden: Vec<usize>,
    pub init: InitScheme,
}

impl ModelConfig {
    pub fn linear_regression(n: usize) -> Self {
        Self {
            kind: ModelKind::LinearRegression,
            input_dim: n,
            hidden: vec![],
            init: InitScheme::default(),
        }
    }

    /// `depth` affine layers, hidden layers of `width`.
    pub fn deep_linear(n: usize, depth: usize, width: usize) -> Self {
        Self {
            kind: ModelKind::DeepLinear,
            input_dim: n,
            hidden: vec![width; depth.saturating_sub(1)],
            init: InitScheme::default(),
        }
    }

    /// Four hidden ReLU layers 512/1024/512/64.
    pub fn mlp_full(n: usize) -> Self {
        Self::mlp(n, vec![512, 1024, 512, 64])
    }

    /// Desk-scale MLP 2048/128/64/16. The wide first layer is what keeps
    /// the learned function close to its low-degree completion; a 64-wide
    /// first layer does not.
    pub fn mlp_desk(n: usize) -> Self {
        Self::mlp(n, vec![2048, 128, 64, 16])
    }

    pub fn mlp(n: usize, hidden: Vec<usize>) -> Self {
        Self {
            kind: ModelKind::Mlp,
            input_dim: n,
            hidden,
            init: InitScheme::default(),
        }
    }

    pub fn with_init(mut self, init: InitScheme) -> Self {
        self.init = init;
        self
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(1);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidModel("input dimension must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidModel("hidden widths must be positive".into()));
        }
        if self.kind == ModelKind::LinearRegression && !self.hidden.is_empty() {
            return Err(Error::InvalidModel("linear regression has no hidden layers".into()));
        }
        match self.init {
            InitScheme::UniformFanIn { alpha } if !alpha.is_finite() => {
                Err(Error::InvalidModel(format!("init exponent {alpha} not finite")))
            }
            InitScheme::Normal { variance, .. } if !(variance >= 0.0) => {
                Err(Error::InvalidModel(format!("init variance {variance} must be >= 0")))
            }
            _ => Ok(()),
        }
    }
}

/// One affine map `h ↦ h W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }


    fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weights.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    fn tensors(&self) -> [&[f64]; 2] {
        [
            self.weights.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }
}

/// Per-layer parameter gradients, same shapes as the model's layers.
pub type Gradients = Vec<Layer>;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    layers: Vec<Layer>,
}

impl Model {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let widths = cfg.widths();
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let mut layer = Layer::zeros(fan_in, fan_out);
            match cfg.init {
                InitScheme::UniformFanIn { alpha } => {
                    let h = (fan_in as f64).powf(-alpha);
                    let dist = Uniform::new_inclusive(-h, h);
                    for t in layer.tensors_mut() {
                        t.iter_mut().for_each(|v| *v = dist.sample(rng));
                    }
                }
                InitScheme::Normal { mean, variance } => {
                    let dist = Normal::new(mean, variance.sqrt())
                        .map_err(|e| Error::InvalidModel(e.to_string()))?;
                    for t in layer.tensors_mut() {
                        t.iter_mut().for_each(|v| *v = dist.sample(rng));
                    }
                }
            }
            layers.push(layer);
        }
        Ok(Self {
            kind: cfg.kind,
            layers,
        })
    }

    pub fn from_layers(kind: ModelKind, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidModel("model needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::InvalidModel(format!("layer {i}: bias width mismatch")));
            }
            if i + 1 < layers.len() && l.weights.ncols() != layers[i + 1].weights.nrows() {
                return Err(Error::InvalidModel(format!("layer {i}: widths do not chain")));
            }
            if !l.weights.is_standard_layout() || !l.bias.is_standard_layout() {
                return Err(Error::InvalidModel(format!("layer {i}: non-contiguous tensor")));
            }
        }
        if layers.last().unwrap().weights.ncols() != 1 {
            return Err(Error::InvalidModel("output width must be 1".into()));
        }
        if kind == ModelKind::LinearRegression && layers.len() != 1 {
            return Err(Error::InvalidModel("linear regression has one layer".into()));
        }
        Ok(Self { kind, layers })
    }

    /// Linear regression `xᵀW + b` from explicit parameters.
    pub fn linear(weights: &[f64], bias: f64) -> Self {
        let w = Array2::from_shape_vec((weights.len(), 1), weights.to_vec()).unwrap();
        Self {
            kind: ModelKind::LinearRegression,
            layers: vec![Layer {
                weights: w,
                bias: Array1::from_elem(1, bias),
            }],
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    /// Total scalar parameter count `E`.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn relu_hidden(&self) -> bool {
        self.kind == ModelKind::Mlp
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let xs = ArrayView2::from_shape((1, x.len()), x).unwrap();
        Ok(self.forward_batch(xs)[0])
    }

    /// Outputs for each row of `xs` (shape `(batch, n)`).
    pub fn forward_batch(&self, xs: ArrayView2<f64>) -> Array1<f64> {
        let mut h = xs.dot(&self.layers[0].weights) + &self.layers[0].bias;
        for layer in &self.layers[1..] {
            if self.relu_hidden() {
                h.mapv_inplace(relu);
            }
            h = h.dot(&layer.weights) + &layer.bias;
        }
        h.index_axis_move(Axis(1), 0)
    }

    /// Post-activation outputs of every hidden layer, each of shape `(batch, width)`.
    pub fn hidden_outputs(&self, xs: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut out = Vec::with_capacity(self.layers.len() - 1);
        let mut h = xs.to_owned();
        for layer in &self.layers[..self.layers.len() - 1] {
            h = h.dot(&layer.weights) + &layer.bias;
            if self.relu_hidden() {
                h.mapv_inplace(relu);
            }
            out.push(h.clone());
        }
        out
    }

    /// Collapsed affine map `(a, c)` with `f(x) = x·a + c`; `None` for MLPs.
    pub fn collapse(&self) -> Option<(Array1<f64>, f64)> {
        if !self.kind.is_linear() {
            return None;
        }
        let down = self.downstream_vectors();
        let a = self.layers[0].weights.dot(&down[0]);
        let c = self
            .layers
            .iter()
            .zip(&down)
            .map(|(l, u)| l.bias.dot(u))
            .sum();
        Some((a, c))
    }

    /// `u_ℓ = W_{ℓ+1} ⋯ W_L` as a vector over layer `ℓ`'s outputs (`u_L = [1]`).
    fn downstream_vectors(&self) -> Vec<Array1<f64>> {
        let l = self.layers.len();
        let mut down = vec![Array1::from_elem(1, 1.0); l];
        for i in (0..l - 1).rev() {
            down[i] = self.layers[i + 1].weights.dot(&down[i + 1]);
        }
        down
    }

    /// Mean square loss `mean (f(x) - y)²` and its gradient over the batch.
    ///
    /// Linear kinds use the rank-one factorization of the gradient; MLPs use
    /// [`Model::gradient_backprop`].
    pub fn gradient(&self, xs: ArrayView2<f64>, ys: ArrayView1<f64>) -> Result<(f64, Gradients)> {
        self.check_batch(xs, ys)?;
        if self.kind.is_linear() {
            Ok(self.gradient_linear(xs, ys))
        } else {
            Ok(self.gradient_backprop_unchecked(xs, ys))
        }
    }

    /// Reverse-mode gradient through every layer; ReLU subgradient at 0 is 0.
    pub fn gradient_backprop(
        &self,
        xs: ArrayView2<f64>,
        ys: ArrayView1<f64>,
    ) -> Result<(f64, Gradients)> {
        self.check_batch(xs, ys)?;
        Ok(self.gradient_backprop_unchecked(xs, ys))
    }

    fn check_batch(&self, xs: ArrayView2<f64>, ys: ArrayView1<f64>) -> Result<()> {
        if xs.nrows() == 0 {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if xs.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: xs.ncols(),
            });
        }
        if ys.len() != xs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: xs.nrows(),
                got: ys.len(),
            });
        }
        Ok(())
    }

    fn gradient_backprop_unchecked(
        &self,
        xs: ArrayView2<f64>,
        ys: ArrayView1<f64>,
    ) -> (f64, Gradients) {
        let batch = xs.nrows() as f64;
        // pre-activations z_ℓ and layer inputs h_{ℓ-1}
        let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        let mut h = xs.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.weights) + &layer.bias;
            inputs.push(h);
            h = if i + 1 < self.layers.len() && self.relu_hidden() {
                z.mapv(relu)
            } else {
                z.clone()
            };
            pre.push(z);
        }
        let out = h.index_axis_move(Axis(1), 0);
        let resid = &out - &ys;
        let loss = resid.dot(&resid) / batch;

        let mut delta = (resid * (2.0 / batch)).insert_axis(Axis(1));
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = inputs[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                if self.relu_hidden() {
                    back.zip_mut_with(&pre[i - 1], |d, &z| {
                        if z <= 0.0 {
                            *d = 0.0
                        }
                    });
                }
                delta = back;
            }
            grads.push(Layer {
                weights: standard(gw),
                bias: gb,
            });
        }
        grads.reverse();
        (loss, grads)
    }

    /// For a linear network every per-sample gradient of `W_ℓ` is
    /// `δ_i h_{ℓ-1}(x_i) u_ℓᵀ`, so the batch gradient only needs
    /// `Σ δ_i x_i` and `Σ δ_i`, pushed forward through the layers.
    fn gradient_linear(&self, xs: ArrayView2<f64>, ys: ArrayView1<f64>) -> (f64, Gradients) {
        let batch = xs.nrows() as f64;
        let down = self.downstream_vectors();
        let a = self.layers[0].weights.dot(&down[0]);
        let c: f64 = self
            .layers
            .iter()
            .zip(&down)
            .map(|(l, u)| l.bias.dot(u))
            .sum();
        let resid = xs.dot(&a) + c - &ys;
        let loss = resid.dot(&resid) / batch;
        let delta = resid * (2.0 / batch);
        let g1 = delta.sum();
        let mut v = xs.t().dot(&delta);
        let mut grads = Vec::with_capacity(self.layers.len());
        for (layer, u) in self.layers.iter().zip(&down) {
            let gw = outer(&v, u);
            let gb = u * g1;
            v = v.dot(&layer.weights) + &(&layer.bias * g1);
            grads.push(Layer {
                weights: gw,
                bias: gb,
            });
        }
        (loss, grads)
    }

    /// Flat parameter vector, layer-major, weights (row-major) before bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for t in l.tensors() {
                out.extend_from_slice(t);
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            for t in l.tensors_mut() {
                t.copy_from_slice(&flat[off..off + t.len()]);
                off += t.len();
            }
        }
        Ok(())
    }

    /// Snapshot as CSV: `layer,tensor,row,col,value`, layer-major, row-major.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# kind={}", self.kind)?;
        writeln!(out, "layer,tensor,row,col,value")?;
        for (i, l) in self.layers.iter().enumerate() {
            for ((r, c), v) in l.weights.indexed_iter() {
                writeln!(out, "{i},weight,{r},{c},{v:?}")?;
            }
            for (c, v) in l.bias.iter().enumerate() {
                writeln!(out, "{i},bias,0,{c},{v:?}")?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Self> {
        let mut kind = None;
        let mut entries: Vec<(usize, bool, usize, usize, f64)> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if let Some(k) = line.strip_prefix("# kind=") {
                kind = Some(k.parse::<ModelKind>()?);
                continue;
            }
            if line.is_empty() || line.starts_with("layer,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("snapshot line {}: `{line}`", lineno + 1));
            if f.len() != 5 {
                return Err(bad());
            }
            let is_weight = match f[1] {
                "weight" => true,
                "bias" => false,
                _ => return Err(bad()),
            };
            entries.push((
                f[0].parse().map_err(|_| bad())?,
                is_weight,
                f[2].parse().map_err(|_| bad())?,
                f[3].parse().map_err(|_| bad())?,
                f[4].parse().map_err(|_| bad())?,
            ));
        }
        let kind = kind.ok_or_else(|| Error::Parse("snapshot missing kind header".into()))?;
        let n_layers = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let ws: Vec<_> = entries.iter().filter(|e| e.0 == i && e.1).collect();
            let rows = ws.iter().map(|e| e.2 + 1).max().unwrap_or(0);
            let cols = ws.iter().map(|e| e.3 + 1).max().unwrap_or(0);
            let mut layer = Layer::zeros(rows, cols);
            for e in ws {
                layer.weights[(e.2, e.3)] = e.4;
            }
            for e in entries.iter().filter(|e| e.0 == i && !e.1) {
                if e.3 >= cols {
                    return Err(Error::Parse(format!("layer {i}: bias index out of range")));
                }
                layer.bias[e.3] = e.4;
            }
            layers.push(layer);
        }
        Self::from_layers(kind, layers)
    }
}

#[inline]
fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    standard(a2.dot(&b2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// `v ← μ v + g`, `θ ← θ - γ v`.
    Sgd { momentum: f64 },
    /// Bias-corrected first/second moment estimates.
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// `θ ← θ - γ [g]_A + Z`, `Z ~ N(0, σ_z²)` per coordinate.
    NoisyGd { clamp: f64, noise_std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub lr: f64,
    pub batch: usize,
}

impl OptimizerConfig {
    pub fn sgd(lr: f64, momentum: f64, batch: usize) -> Self {
        Self {
            method: Method::Sgd { momentum },
            lr,
            batch,
        }
    }

    pub fn adam(lr: f64, batch: usize) -> Self {
        Self {
            method: Method::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            lr,
            batch,
        }
    }

    pub fn noisy_gd(lr: f64, clamp: f64, noise_std: f64, batch: usize) -> Self {
        Self {
            method: Method::NoisyGd { clamp, noise_std },
            lr,
            batch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidOptimizer(m));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if self.batch == 0 {
            return bad("batch size must be positive".into());
        }
        match self.method {
            Method::Sgd { momentum } if !(0.0..1.0).contains(&momentum) => {
                bad(format!("momentum {momentum} outside [0, 1)"))
            }
            Method::Adam { beta1, beta2, eps }
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) =>
            {
                bad("adam betas must lie in [0, 1) and eps > 0".into())
            }
            Method::NoisyGd { clamp, noise_std } if !(clamp > 0.0) || !(noise_std >= 0.0) => {
                bad("noisy GD needs clamp > 0 and noise_std >= 0".into())
            }
            _ => Ok(()),
        }
    }
}

/// Optimizer with its per-parameter state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, model: &Model) -> Result<Self> {
        cfg.validate()?;
        let e = model.param_count();
        let second = match cfg.method {
            Method::Adam { .. } => vec![0.0; e],
            _ => vec![],
        };
        Ok(Self {
            cfg,
            first: vec![0.0; e],
            second,
            t: 0,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update in place.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        model: &mut Model,
        grads: &[Layer],
        rng: &mut R,
    ) -> Result<()> {
        if grads.len() != model.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: model.layers.len(),
                got: grads.len(),
            });
        }
        self.t += 1;
        let lr = self.cfg.lr;
        let mut off = 0;
        for (layer, g) in model.layers.iter_mut().zip(grads) {
            for (p, g) in layer.tensors_mut().into_iter().zip(g.tensors()) {
                if p.len() != g.len() {
                    return Err(Error::DimensionMismatch {
                        expected: p.len(),
                        got: g.len(),
                    });
                }
                let range = off..off + p.len();
                off += p.len();
                match self.cfg.method {
                    Method::Sgd { momentum } => {
                        for ((p, &g), v) in p.iter_mut().zip(g).zip(&mut self.first[range]) {
                            *v = momentum * *v + g;
                            *p -= lr * *v;
                        }
                    }
                    Method::Adam { beta1, beta2, eps } => {
                        let c1 = 1.0 - beta1.powi(self.t as i32);
                        let c2 = 1.0 - beta2.powi(self.t as i32);
                        let (m, v) = (&mut self.first[range.clone()], &mut self.second[range]);
                        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m).zip(v) {
                            *m = beta1 * *m + (1.0 - beta1) * g;
                            *v = beta2 * *v + (1.0 - beta2) * g * g;
                            let mh = *m / c1;
                            let vh = *v / c2;
                            *p -= lr * mh / (vh.sqrt() + eps);
                        }
                    }
                    Method::NoisyGd { clamp, noise_std } => {
                        let noise = if noise_std > 0.0 {
                            Some(Normal::new(0.0, noise_std).map_err(|e| {
                                Error::InvalidOptimizer(e.to_string())
                            })?)
                        } else {
                            None
                        };
                        for (p, &g) in p.iter_mut().zip(g) {
                            *p -= lr * g.clamp(-clamp, clamp);
                            if let Some(z) = &noise {
                                *p += z.sample(rng);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Population-gradient GD trajectory of linear regression under holdout of
/// coordinate `k`, from the three scalar recursions:
///
/// * `W_j ← (1-2γ) W_j + 2γ f̂({j})` for `j ≠ k`
/// * `W_k + b ← (1-4γ)(W_k + b) + 4γ (f̂(∅) + f̂({k}))`
/// * `W_k - b` unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormRun {
    /// Parameters `(W, b)` after each step, starting with the initialization.
    pub trajectory: Vec<(Vec<f64>, f64)>,
    /// Exact `½ E_U (f - f̃)²` of the final parameters.
    pub gen_error: f64,
    /// Large-`t` limit `(b⁰ - W_k⁰ - f̂(∅) + f̂({k}))² / 4`.
    pub gen_error_limit: f64,
}

pub fn linreg_closed_form(
    target: &FourierSpectrum,
    k: usize,
    init_weights: &[f64],
    init_bias: f64,
    lr: f64,
    steps: usize,
) -> Result<ClosedFormRun> {
    let n = target.n();
    crate::boolfn::check_coord(k, n)?;
    if init_weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: init_weights.len(),
        });
    }
    if !(lr > 0.0 && lr < 0.25) {
        return Err(Error::InvalidOptimizer(format!(
            "closed form needs 0 < lr < 1/4, got {lr}"
        )));
    }
    let high: f64 = target.degree_weights()[2.min(n + 1)..].iter().sum();
    if high > 1e-12 {
        return Err(Error::NonLinearTarget(high));
    }
    let f0 = target.coeff(0);
    let fj: Vec<f64> = (0..n).map(|j| target.coeff(1 << j)).collect();
    let ki = k - 1;
    let frozen_mean = f0 + fj[ki];

    let mut w = init_weights.to_vec();
    let mut b = init_bias;
    let diff = w[ki] - b;
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push((w.clone(), b));
    for _ in 0..steps {
        for j in (0..n).filter(|&j| j != ki) {
            w[j] = (1.0 - 2.0 * lr) * w[j] + 2.0 * lr * fj[j];
        }
        let sum = (1.0 - 4.0 * lr) * (w[ki] + b) + 4.0 * lr * frozen_mean;
        w[ki] = 0.5 * (sum + diff);
        b = 0.5 * (sum - diff);
        trajectory.push((w.clone(), b));
    }
    let gen_error = 0.5
        * ((b - f0).powi(2)
            + (0..n).map(|j| (w[j] - fj[j]).powi(2)).sum::<f64>());
    let gen_error_limit = (init_bias - init_weights[ki] - f0 + fj[ki]).powi(2) / 4.0;
    Ok(ClosedFormRun {
        trajectory,
        gen_error,
        gen_error_limit,
    })
}

/// Initialization-averaged limit `(f̂(∅) - f̂({k}))²/4 + σ²/2`.
///
/// When the frozen function is unbiased (`f̂(∅) + f̂({k}) = 0`) the first
/// term equals `Inf_k(f) = f̂({k})²`.
pub fn linreg_init_averaged_limit(target: &FourierSpectrum, k: usize, variance: f64) -> Result<f64> {
    crate::boolfn::check_coord(k, target.n())?;
    let d = target.coeff(0) - target.coeff(1 << (k - 1));
    Ok(d * d / 4.0 + variance / 2.0)
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LinearRegression => "linear_regression",
            ModelKind::DeepLinear => "deep_linear",
            ModelKind::Mlp => "mlp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_regression" => Ok(ModelKind::LinearRegression),
            "deep_linear" => Ok(ModelKind::DeepLinear),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::Parse(format!("unknown model kind `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{point, BooleanFunction};
    use ndarray::Array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(n: usize, b: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Array1<f64>) {
        let xs = Array::from_shape_fn((b, n), |_| if rng.gen::<bool>() { 1.0 } else { -1.0 });
        let ys = Array::from_shape_fn(b, |_| rng.gen_range(-2.0..2.0));
        (xs, ys)
    }

    #[test]
    fn linear_regression_represents_linear_target() {
        let f = BooleanFunction::from_evaluator(4, |x| 0.5 + x[0] - 2.0 * x[3]).unwrap();
        let s = f.fourier_transform();
        let w: Vec<f64> = (0..4).map(|j| s.coeff(1 << j)).collect();
        let m = Model::linear(&w, s.coeff(0));
        for mask in 0..16 {
            let x = point(4, mask);
            assert!((m.forward(&x).unwrap() - f.value(mask)).abs() < 1e-12);
        }
        assert!(m.forward(&[1.0; 3]).is_err());
    }

    #[test]
    fn zero_model_outputs_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = Model::init(&ModelConfig::mlp(6, vec![64, 128, 64, 16]), &mut rng).unwrap();
        let zeros = vec![0.0; m.param_count()];
        m.set_flat_params(&zeros).unwrap();
        for mask in 0..64 {
            assert_eq!(m.forward(&point(6, mask)).unwrap(), 0.0);
        }
    }

    #[test]
    fn param_count_and_widths() {
        let cfg = ModelConfig::mlp(11, vec![64, 128, 64, 16]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Model::init(&cfg, &mut rng).unwrap();
        assert_eq!(
            m.param_count(),
            11 * 64 + 64 + 64 * 128 + 128 + 128 * 64 + 64 + 64 * 16 + 16 + 16 + 1
        );
        assert_eq!(cfg.widths(), vec![11, 64, 128, 64, 16, 1]);
        assert_eq!(ModelConfig::mlp_desk(11).widths(), vec![11, 2048, 128, 64, 16, 1]);
    }

    #[test]
    fn deep_linear_collapses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Model::init(&ModelConfig::deep_linear(5, 3, 7), &mut rng).unwrap();
        // explicit matrix product
        let l = m.layers();
        let a = l[0].weights.dot(&l[1].weights).dot(&l[2].weights);
        let c = l[0].bias.dot(&l[1].weights).dot(&l[2].weights) + l[1].bias.dot(&l[2].weights) + &l[2].bias;
        let (a2, c2) = m.collapse().unwrap();
        for mask in 0..32 {
            let x = Array1::from(point(5, mask));
            let want = x.dot(&a.column(0)) + c[0];
            assert!((m.forward(x.as_slice().unwrap()).unwrap() - want).abs() < 1e-12);
            assert!((x.dot(&a2) + c2 - want).abs() < 1e-12);
        }
        let mlp = Model::init(&ModelConfig::mlp(5, vec![4]), &mut rng).unwrap();
        assert!(mlp.collapse().is_none());
    }

    #[test]
    fn linear_gradient_matches_closed_form_single_sample() {
        let w = [0.3, -0.2, 0.5];
        let b = 0.1;
        let m = Model::linear(&w, b);
        let x = [1.0, -1.0, 1.0];
        let y = 0.7;
        let xs = ArrayView2::from_shape((1, 3), &x).unwrap();
        let ys = Array1::from_elem(1, y);
        let (_, g) = m.gradient(xs, ys.view()).unwrap();
        let r = 0.3 + 0.2 + 0.5 + 0.1 - y;
        for j in 0..3 {
            assert!((g[0].weights[(j, 0)] - 2.0 * x[j] * r).abs() < 1e-15);
        }
        assert!((g[0].bias[0] - 2.0 * r).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for cfg in [ModelConfig::mlp(4, vec![8, 6]), ModelConfig::deep_linear(4, 3, 5)] {
            let m = Model::init(&cfg, &mut rng).unwrap();
            let (xs, _) = random_batch(4, 9, &mut rng);
            let ys = m.forward_batch(xs.view());
            let (loss, g) = m.gradient(xs.view(), ys.view()).unwrap();
            assert!(loss < 1e-28);
            assert!(g.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.abs() < 1e-14)));
        }
    }

    #[test]
    fn linear_fast_path_equals_backprop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for depth in 1..=4 {
            let m = Model::init(&ModelConfig::deep_linear(6, depth, 9), &mut rng).unwrap();
            let (xs, ys) = random_batch(6, 17, &mut rng);
            let (l1, g1) = m.gradient(xs.view(), ys.view()).unwrap();
            let (l2, g2) = m.gradient_backprop(xs.view(), ys.view()).unwrap();
            assert!((l1 - l2).abs() < 1e-12 * l2.max(1.0));
            for (a, b) in g1.iter().zip(&g2) {
                for (x, y) in a.weights.iter().zip(b.weights.iter()) {
                    assert!((x - y).abs() < 1e-12);
                }
                for (x, y) in a.bias.iter().zip(b.bias.iter()) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ModelConfig::mlp(5, vec![7, 6]);
        let mut m = Model::init(&cfg, &mut rng).unwrap();
        let (xs, ys) = random_batch(5, 8, &mut rng);
        let (_, g) = m.gradient(xs.view(), ys.view()).unwrap();
        let flat_g: Vec<f64> = g.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>()).collect();
        let theta = m.flat_params();
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            m.set_flat_params(&t).unwrap();
            let lp = m.gradient(xs.view(), ys.view()).unwrap().0;
            t[i] -= 2.0 * h;
            m.set_flat_params(&t).unwrap();
            let lm = m.gradient(xs.view(), ys.view()).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - flat_g[i]).abs() <= 1e-6 * fd.abs().max(1.0), "param {i}: {fd} vs {}", flat_g[i]);
        }
        m.set_flat_params(&theta).unwrap();
    }

    #[test]
    fn empty_batch_rejected() {
        let m = Model::linear(&[1.0, 2.0], 0.0);
        let xs = Array2::<f64>::zeros((0, 2));
        let ys = Array1::<f64>::zeros(0);
        assert!(m.gradient(xs.view(), ys.view()).is_err());
    }

    #[test]
    fn noisy_gd_degenerate_is_plain_gd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m0 = Model::init(&ModelConfig::mlp(3, vec![4]), &mut rng).unwrap();
        let (xs, ys) = random_batch(3, 6, &mut rng);
        let (_, g) = m0.gradient(xs.view(), ys.view()).unwrap();
        let mut a = m0.clone();
        let mut b = m0.clone();
        let mut oa = Optimizer::new(OptimizerConfig::noisy_gd(0.1, f64::INFINITY, 0.0, 6), &a).unwrap();
        let mut ob = Optimizer::new(OptimizerConfig::sgd(0.1, 0.0, 6), &b).unwrap();
        oa.step(&mut a, &g, &mut rng).unwrap();
        ob.step(&mut b, &g, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_gd_clamps_coordinates() {
        let mut m = Model::linear(&[0.0], 0.0);
        let g = vec![Layer {
            weights: Array2::from_elem((1, 1), 5.0),
            bias: Array1::from_elem(1, -0.5),
        }];
        let mut o = Optimizer::new(OptimizerConfig::noisy_gd(0.1, 1.0, 0.0, 1), &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        o.step(&mut m, &g, &mut rng).unwrap();
        assert!((m.layers()[0].weights[(0, 0)] + 0.1).abs() < 1e-15);
        assert!((m.layers()[0].bias[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn noisy_gd_noise_has_requested_spread() {
        let mut m = Model::linear(&vec![0.0; 2000], 0.0);
        let g = vec![Layer::zeros(2000, 1)];
        let mut o = Optimizer::new(OptimizerConfig::noisy_gd(0.1, 1.0, 0.3, 1), &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        o.step(&mut m, &g, &mut rng).unwrap();
        let p = m.flat_params();
        let var = p.iter().map(|v| v * v).sum::<f64>() / p.len() as f64;
        assert!((var.sqrt() - 0.3).abs() < 0.02);
    }

    #[test]
    fn adam_two_step_trace() {
        let mut m = Model::linear(&[1.0], 0.0);
        let mut o = Optimizer::new(OptimizerConfig::adam(0.1, 1), &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let grad = |w: f64, b: f64| {
            vec![Layer {
                weights: Array2::from_elem((1, 1), w),
                bias: Array1::from_elem(1, b),
            }]
        };
        // t = 1: m = 0.1 g, v = 0.001 g², m̂ = g, v̂ = g² ⇒ step = lr · g/(|g| + eps)
        o.step(&mut m, &grad(2.0, -4.0), &mut rng).unwrap();
        let w1 = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        let b1 = 0.1 * 4.0 / (4.0 + 1e-8);
        assert!((m.layers()[0].weights[(0, 0)] - w1).abs() < 1e-15);
        assert!((m.layers()[0].bias[0] - b1).abs() < 1e-15);
        // t = 2 with g = 1 for the weight
        o.step(&mut m, &grad(1.0, 0.0), &mut rng).unwrap();
        let mm = 0.9 * 0.2 + 0.1 * 1.0;
        let vv = 0.999 * 0.004 + 0.001 * 1.0;
        let mh = mm / (1.0 - 0.81);
        let vh = vv / (1.0 - 0.999f64.powi(2));
        let w2 = w1 - 0.1 * mh / (vh.sqrt() + 1e-8);
        assert!((m.layers()[0].weights[(0, 0)] - w2).abs() < 1e-14);
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let mut m = Model::linear(&[0.0], 0.0);
        let g = vec![Layer {
            weights: Array2::from_elem((1, 1), 1.0),
            bias: Array1::from_elem(1, 0.0),
        }];
        let mut o = Optimizer::new(OptimizerConfig::sgd(0.5, 0.9, 1), &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        o.step(&mut m, &g, &mut rng).unwrap();
        o.step(&mut m, &g, &mut rng).unwrap();
        // -0.5·1 - 0.5·1.9
        assert!((m.layers()[0].weights[(0, 0)] + 1.45).abs() < 1e-15);
    }

    #[test]
    fn optimizer_validation() {
        assert!(OptimizerConfig::sgd(0.0, 0.9, 8).validate().is_err());
        assert!(OptimizerConfig::sgd(0.1, 1.0, 8).validate().is_err());
        assert!(OptimizerConfig::sgd(0.1, 0.9, 0).validate().is_err());
        assert!(OptimizerConfig::noisy_gd(0.1, 0.0, 0.1, 8).validate().is_err());
        assert!(OptimizerConfig::adam(5e-4, 64).validate().is_ok());
    }

    #[test]
    fn closed_form_conserves_difference_and_converges() {
        let s = FourierSpectrum::from_terms(3, &[(0, -1.0), (0b010, 1.0), (0b001, 0.5)]).unwrap();
        let run = linreg_closed_form(&s, 2, &[0.0, 0.5, 0.0], 0.2, 0.1, 300).unwrap();
        for (w, b) in &run.trajectory {
            assert!((w[1] - b - 0.3).abs() < 1e-12);
        }
        assert!((run.gen_error - run.gen_error_limit).abs() < 1e-12);
        // zero init, unbiased frozen target ⇒ influence f̂({2})² = 1
        let run = linreg_closed_form(&s, 2, &[0.0; 3], 0.0, 0.1, 300).unwrap();
        assert!((run.gen_error - 1.0).abs() < 1e-12);
        assert!((linreg_init_averaged_limit(&s, 2, 0.1).unwrap() - 1.05).abs() < 1e-15);
    }

    #[test]
    fn closed_form_rejects_bad_inputs() {
        let lin = FourierSpectrum::from_terms(2, &[(1, 1.0)]).unwrap();
        let quad = FourierSpectrum::from_terms(2, &[(3, 1.0)]).unwrap();
        assert!(matches!(
            linreg_closed_form(&quad, 1, &[0.0; 2], 0.0, 0.1, 1),
            Err(Error::NonLinearTarget(_))
        ));
        assert!(linreg_closed_form(&lin, 1, &[0.0; 2], 0.0, 0.25, 1).is_err());
        assert!(linreg_closed_form(&lin, 3, &[0.0; 2], 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = Model::init(&ModelConfig::mlp(3, vec![4, 2]), &mut rng).unwrap();
        let mut buf = Vec::new();
        m.write_snapshot(&mut buf).unwrap();
        let back = Model::read_snapshot(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, m);
    }
}
