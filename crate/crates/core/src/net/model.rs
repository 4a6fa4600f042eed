use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::mtp::{FeatureMatrix, MtpDataset, Triplet};

use super::{Activation, BranchSpec, HeadSpec, LossKind, NetError, OutputKind, Side};

/// What a branch consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchInput {
    /// One-hot position among `n` ids; the single layer is a lookup table.
    OneHot(usize),
    /// Dense side-information vectors of the given width.
    Features(usize),
}

/// A concrete input to one branch.
#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Index(usize),
    Features(&'a [f64]),
}

/// A named weight tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of one fully connected layer. Weights are stored
/// `inputs x outputs`, row-major, so a one-hot input selects a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    weight: usize,
    bias: Option<usize>,
}

impl Dense {
    fn affine(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let w = &params[self.weight..self.weight + self.inputs * self.outputs];
        let mut z = match self.bias {
            Some(b) => params[b..b + self.outputs].to_vec(),
            None => vec![0.0; self.outputs],
        };
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            let row = &w[i * self.outputs..(i + 1) * self.outputs];
            for (zo, wo) in z.iter_mut().zip(row) {
                *zo += xi * wo;
            }
        }
        z
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `x`.
    fn backward(&self, params: &[f64], grad: &mut [f64], x: &[f64], dz: &[f64]) -> Vec<f64> {
        let n = self.inputs * self.outputs;
        if let Some(b) = self.bias {
            for (g, d) in grad[b..b + self.outputs].iter_mut().zip(dz) {
                *g += d;
            }
        }
        let w = &params[self.weight..self.weight + n];
        let gw = &mut grad[self.weight..self.weight + n];
        let mut dx = vec![0.0; self.inputs];
        for i in 0..self.inputs {
            let row = i * self.outputs..(i + 1) * self.outputs;
            let mut acc = 0.0;
            for ((g, wv), d) in gw[row.clone()].iter_mut().zip(&w[row]).zip(dz) {
                *g += x[i] * d;
                acc += wv * d;
            }
            dx[i] = acc;
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BranchArch {
    input: BranchInput,
    layers: Vec<Dense>,
    activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
enum HeadArch {
    Dot,
    Mlp {
        layers: Vec<Dense>,
        activation: Activation,
        output: usize,
        width: usize,
    },
}

/// Intermediate values of one branch forward pass.
#[derive(Debug, Clone)]
struct BranchTrace {
    /// Input to each layer (empty for lookups).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    index: Option<usize>,
    out: Vec<f64>,
}

#[derive(Debug, Clone)]
struct HeadTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    last: Vec<f64>,
}

/// Two embedding branches joined by a dot-product or MLP head.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBranchModel {
    instance: BranchArch,
    target: BranchArch,
    head: HeadArch,
    output: OutputKind,
    embedding_dim: usize,
    tensors: Vec<TensorInfo>,
    params: Vec<f64>,
}

struct Builder {
    tensors: Vec<TensorInfo>,
    len: usize,
}

impl Builder {
    fn tensor(&mut self, name: String, rows: usize, cols: usize) -> usize {
        let offset = self.len;
        self.tensors.push(TensorInfo {
            name,
            rows,
            cols,
            offset,
        });
        self.len += rows * cols;
        offset
    }

    fn dense(&mut self, prefix: &str, inputs: usize, outputs: usize, bias: bool) -> Dense {
        let weight = self.tensor(format!("{prefix}.weight"), inputs, outputs);
        let bias = bias.then(|| self.tensor(format!("{prefix}.bias"), 1, outputs));
        Dense {
            inputs,
            outputs,
            weight,
            bias,
        }
    }

    fn branch(&mut self, name: &str, input: BranchInput, spec: &BranchSpec) -> Result<BranchArch, NetError> {
        if spec.n_layers == 0 || spec.embedding_dim == 0 {
            return Err(NetError::InvalidSpec(format!(
                "{name} branch needs at least one layer and a positive embedding size"
            )));
        }
        let layers = match input {
            BranchInput::OneHot(n) => {
                if spec.n_layers != 1 {
                    return Err(NetError::InvalidSpec(format!(
                        "{name} branch encodes one-hot ids and allows exactly one layer, got {}",
                        spec.n_layers
                    )));
                }
                vec![self.dense(&format!("{name}.0"), n, spec.embedding_dim, false)]
            }
            BranchInput::Features(d) => {
                if spec.n_layers > 1 && spec.width == 0 {
                    return Err(NetError::InvalidSpec(format!("{name} branch has zero width")));
                }
                let mut dims = vec![d];
                dims.extend(std::iter::repeat_n(spec.width, spec.n_layers - 1));
                dims.push(spec.embedding_dim);
                dims.windows(2)
                    .enumerate()
                    .map(|(l, w)| self.dense(&format!("{name}.{l}"), w[0], w[1], true))
                    .collect()
            }
        };
        Ok(BranchArch {
            input,
            layers,
            activation: spec.activation,
        })
    }
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Loss of a single raw network output `s` against `y`, and d loss / d s.
pub(crate) fn pointwise_loss(kind: LossKind, s: f64, y: f64) -> (f64, f64) {
    match kind {
        LossKind::Bce => (softplus(s) - y * s, sigmoid(s) - y),
        LossKind::Mse => {
            let e = s - y;
            (e * e, 2.0 * e)
        }
    }
}

impl TwoBranchModel {
    /// Builds a model for `dataset`: a side with features gets a dense
    /// branch, a side without gets a one-hot lookup table. Weights are drawn
    /// from N(0, 2/fan_in) truncated at two standard deviations.
    pub fn build(
        dataset: &MtpDataset,
        instance: &BranchSpec,
        target: &BranchSpec,
        head: &HeadSpec,
        output: OutputKind,
        seed: u64,
    ) -> Result<Self, NetError> {
        let instance_input = match &dataset.instance_features {
            Some(f) => BranchInput::Features(f.dim()),
            None => BranchInput::OneHot(dataset.n_instances()),
        };
        let target_input = match &dataset.target_features {
            Some(f) => BranchInput::Features(f.dim()),
            None => BranchInput::OneHot(dataset.n_targets()),
        };
        Self::with_inputs(instance_input, target_input, instance, target, head, output, seed)
    }

    pub fn with_inputs(
        instance_input: BranchInput,
        target_input: BranchInput,
        instance: &BranchSpec,
        target: &BranchSpec,
        head: &HeadSpec,
        output: OutputKind,
        seed: u64,
    ) -> Result<Self, NetError> {
        if instance.embedding_dim != target.embedding_dim {
            return Err(NetError::DimensionMismatch(format!(
                "instance embedding {} != target embedding {}",
                instance.embedding_dim, target.embedding_dim
            )));
        }
        let k = instance.embedding_dim;
        let mut b = Builder {
            tensors: Vec::new(),
            len: 0,
        };
        let instance = b.branch("instance", instance_input, instance)?;
        let target = b.branch("target", target_input, target)?;
        let head = match head {
            HeadSpec::Dot => HeadArch::Dot,
            HeadSpec::Mlp {
                input_dim,
                hidden,
                activation,
            } => {
                if *input_dim != 2 * k {
                    return Err(NetError::DimensionMismatch(format!(
                        "mlp head expects input width {input_dim}, embeddings concatenate to {}",
                        2 * k
                    )));
                }
                if hidden.contains(&0) {
                    return Err(NetError::InvalidSpec("mlp head layer of width 0".into()));
                }
                let mut dims = vec![2 * k];
                dims.extend(hidden);
                let layers = dims
                    .windows(2)
                    .enumerate()
                    .map(|(l, w)| b.dense(&format!("head.{l}"), w[0], w[1], true))
                    .collect();
                let width = *dims.last().expect("non-empty");
                let output = b.tensor("head.h".into(), width, 1);
                HeadArch::Mlp {
                    layers,
                    activation: *activation,
                    output,
                    width,
                }
            }
        };
        let mut model = Self {
            instance,
            target,
            head,
            output,
            embedding_dim: k,
            tensors: b.tensors,
            params: vec![0.0; b.len],
        };
        model.initialize(seed);
        Ok(model)
    }

    fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        for t in &self.tensors {
            if t.name.ends_with(".bias") {
                continue;
            }
            let std = (2.0 / t.rows as f64).sqrt();
            for w in &mut self.params[t.range()] {
                *w = loop {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if z.abs() <= 2.0 {
                        break z * std;
                    }
                };
            }
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output
    }

    pub fn branch_input(&self, side: Side) -> BranchInput {
        match side {
            Side::Instance => self.instance.input,
            Side::Target => self.target.input,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors.iter().map(|t| (t.rows, t.cols)).collect()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let t = self.tensors.iter().find(|t| t.name == name)?;
        Some(&self.params[t.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let t = self.tensors.iter().find(|t| t.name == name)?.range();
        Some(&mut self.params[t])
    }

    /// Returns the same network with the two branches' roles exchanged.
    /// Only defined for the dot head, which is symmetric in its inputs.
    pub fn swap_branches(&self) -> Result<Self, NetError> {
        if self.head != HeadArch::Dot {
            return Err(NetError::InvalidSpec("branch swap requires the dot head".into()));
        }
        let n_inst = self
            .tensors
            .iter()
            .filter(|t| t.name.starts_with("instance."))
            .map(TensorInfo::len)
            .sum::<usize>();
        let mut b = Builder {
            tensors: Vec::new(),
            len: 0,
        };
        let spec_of = |arch: &BranchArch| BranchSpec {
            n_layers: arch.layers.len(),
            width: if arch.layers.len() > 1 {
                arch.layers[0].outputs
            } else {
                0
            },
            embedding_dim: self.embedding_dim,
            activation: arch.activation,
        };
        let instance = b.branch("instance", self.target.input, &spec_of(&self.target))?;
        let target = b.branch("target", self.instance.input, &spec_of(&self.instance))?;
        let mut params = self.params[n_inst..].to_vec();
        params.extend_from_slice(&self.params[..n_inst]);
        Ok(Self {
            instance,
            target,
            head: HeadArch::Dot,
            output: self.output,
            embedding_dim: self.embedding_dim,
            tensors: b.tensors,
            params,
        })
    }

    pub fn input_for<'a>(&self, side: Side, index: usize, features: Option<&'a FeatureMatrix>) -> Input<'a> {
        match (self.branch_input(side), features) {
            (BranchInput::Features(_), Some(f)) => Input::Features(f.row(index)),
            _ => Input::Index(index),
        }
    }

    fn branch_forward(&self, arch: &BranchArch, input: Input<'_>) -> BranchTrace {
        match (arch.input, input) {
            (BranchInput::OneHot(n), Input::Index(i)) => {
                assert!(i < n, "one-hot index {i} out of range {n}");
                let layer = arch.layers[0];
                let start = layer.weight + i * layer.outputs;
                BranchTrace {
                    inputs: Vec::new(),
                    pre: Vec::new(),
                    index: Some(i),
                    out: self.params[start..start + layer.outputs].to_vec(),
                }
            }
            (BranchInput::Features(d), Input::Features(x)) => {
                assert_eq!(x.len(), d, "feature width mismatch");
                let mut inputs = Vec::with_capacity(arch.layers.len());
                let mut pre = Vec::with_capacity(arch.layers.len());
                let mut h = x.to_vec();
                let last = arch.layers.len() - 1;
                for (l, layer) in arch.layers.iter().enumerate() {
                    let z = layer.affine(&self.params, &h);
                    inputs.push(std::mem::take(&mut h));
                    h = if l < last {
                        z.iter().map(|v| arch.activation.apply(*v)).collect()
                    } else {
                        z.clone()
                    };
                    pre.push(z);
                }
                BranchTrace {
                    inputs,
                    pre,
                    index: None,
                    out: h,
                }
            }
            (expected, _) => panic!("input kind does not match branch {expected:?}"),
        }
    }

    fn branch_backward(&self, arch: &BranchArch, trace: &BranchTrace, dout: &[f64], grad: &mut [f64]) {
        if let Some(i) = trace.index {
            let layer = arch.layers[0];
            let start = layer.weight + i * layer.outputs;
            for (g, d) in grad[start..start + layer.outputs].iter_mut().zip(dout) {
                *g += d;
            }
            return;
        }
        let last = arch.layers.len() - 1;
        let mut delta = dout.to_vec();
        for l in (0..arch.layers.len()).rev() {
            if l < last {
                for (d, z) in delta.iter_mut().zip(&trace.pre[l]) {
                    *d *= arch.activation.derivative(*z);
                }
            }
            delta = arch.layers[l].backward(&self.params, grad, &trace.inputs[l], &delta);
        }
    }

    fn head_forward(&self, p: &[f64], q: &[f64]) -> (f64, Option<HeadTrace>) {
        match &self.head {
            HeadArch::Dot => (p.iter().zip(q).map(|(a, b)| a * b).sum(), None),
            HeadArch::Mlp {
                layers,
                activation,
                output,
                width,
            } => {
                let mut h: Vec<f64> = p.iter().chain(q).copied().collect();
                let mut inputs = Vec::with_capacity(layers.len());
                let mut pre = Vec::with_capacity(layers.len());
                for layer in layers {
                    let z = layer.affine(&self.params, &h);
                    inputs.push(std::mem::take(&mut h));
                    h = z.iter().map(|v| activation.apply(*v)).collect();
                    pre.push(z);
                }
                let hv = &self.params[*output..*output + *width];
                let s = hv.iter().zip(&h).map(|(a, b)| a * b).sum();
                (s, Some(HeadTrace { inputs, pre, last: h }))
            }
        }
    }

    /// Gradients of the head w.r.t. p and q given d loss / d s.
    fn head_backward(
        &self,
        p: &[f64],
        q: &[f64],
        trace: Option<&HeadTrace>,
        ds: f64,
        grad: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>) {
        match (&self.head, trace) {
            (HeadArch::Dot, _) => (q.iter().map(|v| ds * v).collect(), p.iter().map(|v| ds * v).collect()),
            (
                HeadArch::Mlp {
                    layers,
                    activation,
                    output,
                    width,
                },
                Some(trace),
            ) => {
                let hv = &self.params[*output..*output + *width];
                for (g, z) in grad[*output..*output + *width].iter_mut().zip(&trace.last) {
                    *g += ds * z;
                }
                let mut delta: Vec<f64> = hv.iter().map(|h| ds * h).collect();
                for l in (0..layers.len()).rev() {
                    for (d, z) in delta.iter_mut().zip(&trace.pre[l]) {
                        *d *= activation.derivative(*z);
                    }
                    delta = layers[l].backward(&self.params, grad, &trace.inputs[l], &delta);
                }
                let k = self.embedding_dim;
                (delta[..k].to_vec(), delta[k..].to_vec())
            }
            (HeadArch::Mlp { .. }, None) => unreachable!("mlp head always records a trace"),
        }
    }

    /// Raw network output (before the output nonlinearity).
    pub fn logit(&self, x: Input<'_>, t: Input<'_>) -> f64 {
        let p = self.branch_forward(&self.instance, x);
        let q = self.branch_forward(&self.target, t);
        self.head_forward(&p.out, &q.out).0
    }

    pub fn forward(&self, x: Input<'_>, t: Input<'_>) -> f64 {
        let s = self.logit(x, t);
        match self.output {
            OutputKind::Logistic => sigmoid(s),
            OutputKind::Identity => s,
        }
    }

    pub fn embed(&self, side: Side, input: Input<'_>) -> Vec<f64> {
        let arch = match side {
            Side::Instance => &self.instance,
            Side::Target => &self.target,
        };
        self.branch_forward(arch, input).out
    }

    /// Mean loss over `triplets` and, when `grad` is given, accumulates the
    /// gradient of that mean into it.
    pub fn loss_and_gradient(
        &self,
        dataset: &MtpDataset,
        triplets: &[Triplet],
        kind: LossKind,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        if triplets.is_empty() {
            return 0.0;
        }
        let scale = 1.0 / triplets.len() as f64;
        let mut total = 0.0;
        for t in triplets {
            let xi = self.input_for(Side::Instance, t.instance, dataset.instance_features.as_ref());
            let ti = self.input_for(Side::Target, t.target, dataset.target_features.as_ref());
            let p = self.branch_forward(&self.instance, xi);
            let q = self.branch_forward(&self.target, ti);
            let (s, head_trace) = self.head_forward(&p.out, &q.out);
            let (loss, ds) = pointwise_loss(kind, s, t.score);
            total += loss;
            if let Some(g) = grad.as_deref_mut() {
                let (dp, dq) = self.head_backward(&p.out, &q.out, head_trace.as_ref(), ds * scale, g);
                self.branch_backward(&self.instance, &p, &dp, g);
                self.branch_backward(&self.target, &q, &dq, g);
            }
        }
        total * scale
    }
}
