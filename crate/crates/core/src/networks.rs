//! Fully connected and convolutional target networks, pruning masks, forward
//! passes and the empirical sup-gap estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circulant::{ConvTensor, Im2Col};
use crate::error::{Error, Result};
use crate::linalg::{hadamard, l2_norm, Matrix, Vector};
use crate::sampling::{sample_matrix_with, sample_unit_cube, sample_unit_sphere, DistributionSpec, SeedSpec};

/// Coordinate-wise activations. All three are 1-Lipschitz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    pub fn lipschitz(self) -> f64 {
        1.0
    }

    /// Whether `σ(c x) = c σ(x)` for `c ≥ 0`, which makes the sup over the
    /// unit ball equal the sup over the sphere.
    pub fn positively_homogeneous(self) -> bool {
        matches!(self, Activation::Relu | Activation::Identity)
    }
}

/// `F(x) = W_l σ_{l-1}(W_{l-1} ⋯ σ_1(W_1 x))`. `activations[k]` follows
/// `weights[k]`; nothing follows the last layer.
#[derive(Clone, Debug, PartialEq)]
pub struct FcnModel {
    weights: Vec<Matrix>,
    activations: Vec<Activation>,
}

impl FcnModel {
    pub fn new(weights: Vec<Matrix>, activations: Vec<Activation>) -> Result<Self> {
        if weights.len() < 3 {
            return Err(Error::InvalidParameter(format!("depth must be at least 3, got {}", weights.len())));
        }
        if activations.len() != weights.len() - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} activations for {} layers",
                activations.len(),
                weights.len()
            )));
        }
        for k in 1..weights.len() {
            if weights[k].cols() != weights[k - 1].rows() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} expects input width {}, previous layer outputs {}",
                    k + 1,
                    weights[k].cols(),
                    weights[k - 1].rows()
                )));
            }
        }
        Ok(FcnModel { weights, activations })
    }

    /// Samples every `W_k` i.i.d. from `dist`, layer `k` on `seed.child(k)`.
    pub fn sample(widths: &[usize], activation: Activation, dist: &DistributionSpec, seed: SeedSpec) -> Result<Self> {
        dist.validate()?;
        if widths.len() < 4 {
            return Err(Error::InvalidParameter("need widths d_0..d_l with l >= 3".into()));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidParameter("widths must be positive".into()));
        }
        let weights = (1..widths.len())
            .map(|k| {
                let mut rng = seed.child(k as u64).rng();
                sample_matrix_with(dist, widths[k], widths[k - 1], &mut rng)
            })
            .collect();
        Self::new(weights, vec![activation; widths.len() - 2])
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// `d_0, …, d_l`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.weights[0].cols()).chain(self.weights.iter().map(Matrix::rows)).collect()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    /// `M_k ∘ W_k` for every layer.
    pub fn pruned(&self, mask: &MaskSet) -> Result<FcnModel> {
        mask.check_fcn(self)?;
        let weights = self
            .weights
            .iter()
            .zip(&mask.layers)
            .map(|(w, m)| match m {
                LayerMask::Dense(m) => hadamard(m, w),
                LayerMask::Filter(_) => unreachable!("checked above"),
            })
            .collect::<Result<Vec<_>>>()?;
        FcnModel::new(weights, self.activations.clone())
    }

    /// Forward pass over `n` inputs stored as the columns of a `d_0 x n` matrix.
    fn forward_columns(&self, x: Matrix) -> Matrix {
        let mut h = x;
        for (k, w) in self.weights.iter().enumerate() {
            h = w.matmul(&h).expect("validated shapes");
            if let Some(act) = self.activations.get(k) {
                h = h.map(|v| act.apply(v));
            }
        }
        h
    }
}

/// `l - 1` wrap-around convolution layers on `p x p` maps followed by a dense
/// layer on the flattened last feature map, one activation after every
/// convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    spatial: usize,
    convs: Vec<ConvTensor>,
    dense: Matrix,
    activation: Activation,
}

impl CnnModel {
    pub fn new(spatial: usize, convs: Vec<ConvTensor>, dense: Matrix, activation: Activation) -> Result<Self> {
        if convs.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "depth must be at least 3, got {}",
                convs.len() + 1
            )));
        }
        for (k, f) in convs.iter().enumerate() {
            if f.kernel() >= spatial {
                return Err(Error::InvalidParameter(format!(
                    "layer {} kernel size {} must be below spatial size {spatial}",
                    k + 1,
                    f.kernel()
                )));
            }
            if k > 0 && f.in_channels() != convs[k - 1].out_channels() {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} expects {} input channels, previous layer outputs {}",
                    k + 1,
                    f.in_channels(),
                    convs[k - 1].out_channels()
                )));
            }
        }
        let last = convs.last().expect("nonempty").out_channels();
        if dense.cols() != last * spatial * spatial {
            return Err(Error::DimensionMismatch(format!(
                "dense layer has {} inputs, feature map has {}",
                dense.cols(),
                last * spatial * spatial
            )));
        }
        Ok(CnnModel {
            spatial,
            convs,
            dense,
            activation,
        })
    }

    /// Samples each convolution from `dist` scaled to the shape of its full
    /// `p²d_k x p²d_{k-1}` map, and the dense layer to its own shape.
    /// `channels` is `d_0, …, d_{l-1}`.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        channels: &[usize],
        output_dim: usize,
        spatial: usize,
        kernel: usize,
        activation: Activation,
        dist: &DistributionSpec,
        seed: SeedSpec,
    ) -> Result<Self> {
        dist.validate()?;
        if channels.len() < 3 {
            return Err(Error::InvalidParameter("need channels d_0..d_{l-1} with l >= 3".into()));
        }
        if channels.contains(&0) || output_dim == 0 || kernel == 0 {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        let p2 = spatial * spatial;
        let convs = (1..channels.len())
            .map(|k| {
                let mut rng = seed.child(k as u64).rng();
                let (dout, din) = (channels[k], channels[k - 1]);
                ConvTensor::from_fn(dout, din, kernel, |_, _, _, _| dist.sample(p2 * dout, p2 * din, &mut rng))
            })
            .collect();
        let mut rng = seed.child(channels.len() as u64).rng();
        let last = *channels.last().expect("nonempty");
        let dense = sample_matrix_with(dist, output_dim, last * p2, &mut rng);
        Self::new(spatial, convs, dense, activation)
    }

    pub fn depth(&self) -> usize {
        self.convs.len() + 1
    }

    pub fn spatial(&self) -> usize {
        self.spatial
    }

    pub fn convs(&self) -> &[ConvTensor] {
        &self.convs
    }

    pub fn dense(&self) -> &Matrix {
        &self.dense
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.convs[0].in_channels() * self.spatial * self.spatial
    }

    pub fn output_dim(&self) -> usize {
        self.dense.rows()
    }

    /// Zeroes every filter `(s, t)` whose filter-mask entry is 0.
    pub fn pruned(&self, mask: &MaskSet) -> Result<CnnModel> {
        mask.check_cnn(self)?;
        let convs = self
            .convs
            .iter()
            .zip(&mask.layers)
            .map(|(f, m)| match m {
                LayerMask::Filter(fm) => f.with_filters_zeroed(|s, t| fm.get(s, t) != 0.0),
                LayerMask::Dense(_) => unreachable!("checked above"),
            })
            .collect();
        let dense = match &mask.layers[self.convs.len()] {
            LayerMask::Dense(m) => hadamard(m, &self.dense)?,
            LayerMask::Filter(_) => unreachable!("checked above"),
        };
        CnnModel::new(self.spatial, convs, dense, self.activation)
    }

    fn forward_batch(&self, xs: &[f64], n: usize) -> Vec<f64> {
        let mut h = xs.to_vec();
        for f in &self.convs {
            h = Im2Col::new(f, self.spatial).apply_batch(&h, n);
            h.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        }
        let width = self.dense.cols();
        let cols = Matrix::from_col_major(width, n, h).expect("finite activations");
        self.dense.matmul(&cols).expect("validated shapes").as_col_major().to_vec()
    }
}

/// Per-layer pruning mask.
///
/// `Dense` masks match the weight matrix entrywise. `Filter` masks are
/// `d_k x d_{k-1}` and switch whole filters, i.e. whole `B_st` blocks of the
/// circulant map, on or off.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerMask {
    Dense(Matrix),
    Filter(Matrix),
}

impl LayerMask {
    pub fn matrix(&self) -> &Matrix {
        match self {
            LayerMask::Dense(m) | LayerMask::Filter(m) => m,
        }
    }

    pub fn is_all_ones(&self) -> bool {
        self.matrix().as_col_major().iter().all(|&x| x == 1.0)
    }

    /// The entrywise mask on the weight matrix; a filter mask is expanded to
    /// `p² x p²` blocks.
    pub fn expand(&self, spatial: usize) -> Matrix {
        match self {
            LayerMask::Dense(m) => m.clone(),
            LayerMask::Filter(m) => {
                let p2 = spatial * spatial;
                Matrix::from_fn(m.rows() * p2, m.cols() * p2, |i, j| m.get(i / p2, j / p2))
            }
        }
    }
}

/// `M_1, …, M_l` with `M_1` and `M_l` all ones.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskSet {
    layers: Vec<LayerMask>,
}

impl MaskSet {
    pub fn new(layers: Vec<LayerMask>) -> Result<Self> {
        if layers.len() < 3 {
            return Err(Error::InvalidParameter("a mask set needs at least 3 layers".into()));
        }
        for (k, m) in layers.iter().enumerate() {
            if m.matrix().as_col_major().iter().any(|&x| x != 0.0 && x != 1.0) {
                return Err(Error::InvalidParameter(format!("mask {} has entries outside {{0, 1}}", k + 1)));
            }
        }
        if !layers[0].is_all_ones() || !layers[layers.len() - 1].is_all_ones() {
            return Err(Error::InvalidParameter("first and last layers must not be pruned".into()));
        }
        Ok(MaskSet { layers })
    }

    pub fn all_ones_fcn(model: &FcnModel) -> Self {
        MaskSet {
            layers: model.weights.iter().map(|w| LayerMask::Dense(Matrix::ones(w.rows(), w.cols()))).collect(),
        }
    }

    pub fn all_ones_cnn(model: &CnnModel) -> Self {
        let mut layers: Vec<LayerMask> = model
            .convs
            .iter()
            .map(|f| LayerMask::Filter(Matrix::ones(f.out_channels(), f.in_channels())))
            .collect();
        layers.push(LayerMask::Dense(Matrix::ones(model.dense.rows(), model.dense.cols())));
        MaskSet { layers }
    }

    pub fn layers(&self) -> &[LayerMask] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    fn check_fcn(&self, model: &FcnModel) -> Result<()> {
        if self.layers.len() != model.weights.len() {
            return Err(Error::DimensionMismatch("mask depth differs from model depth".into()));
        }
        for (k, (w, m)) in model.weights.iter().zip(&self.layers).enumerate() {
            match m {
                LayerMask::Dense(m) if m.rows() == w.rows() && m.cols() == w.cols() => {}
                _ => {
                    return Err(Error::DimensionMismatch(format!(
                        "mask {} does not match a {}x{} dense layer",
                        k + 1,
                        w.rows(),
                        w.cols()
                    )))
                }
            }
        }
        Ok(())
    }

    fn check_cnn(&self, model: &CnnModel) -> Result<()> {
        if self.layers.len() != model.depth() {
            return Err(Error::DimensionMismatch("mask depth differs from model depth".into()));
        }
        for (k, (f, m)) in model.convs.iter().zip(&self.layers).enumerate() {
            match m {
                LayerMask::Filter(m) if m.rows() == f.out_channels() && m.cols() == f.in_channels() => {}
                _ => {
                    return Err(Error::DimensionMismatch(format!(
                        "mask {} is not a {}x{} filter mask",
                        k + 1,
                        f.out_channels(),
                        f.in_channels()
                    )))
                }
            }
        }
        match &self.layers[model.convs.len()] {
            LayerMask::Dense(m) if m.rows() == model.dense.rows() && m.cols() == model.dense.cols() => Ok(()),
            _ => Err(Error::DimensionMismatch("last mask does not match the dense layer".into())),
        }
    }
}

/// `γ_k = ‖M_k‖₀ / D_k` for 0-based layer `layer`.
pub fn compression_ratio(mask: &MaskSet, layer: usize) -> Result<f64> {
    let m = mask
        .layers
        .get(layer)
        .ok_or_else(|| Error::InvalidParameter(format!("layer {layer} out of range")))?
        .matrix();
    Ok(m.count_nonzero() as f64 / m.len() as f64)
}

pub fn forward_fcn(model: &FcnModel, mask: Option<&MaskSet>, x: &Vector) -> Result<Vector> {
    if x.dim() != model.weights[0].cols() {
        return Err(Error::DimensionMismatch(format!(
            "input of dimension {} for a network with d_0 = {}",
            x.dim(),
            model.weights[0].cols()
        )));
    }
    let pruned;
    let model = match mask {
        Some(m) => {
            pruned = model.pruned(m)?;
            &pruned
        }
        None => model,
    };
    let x = Matrix::from_col_major(x.dim(), 1, x.as_slice().to_vec())?;
    Vector::new(model.forward_columns(x).as_col_major().to_vec())
}

/// Input is a flattened `d_0 x p x p` map in channel, row, column order.
pub fn forward_cnn(model: &CnnModel, mask: Option<&MaskSet>, x: &Vector) -> Result<Vector> {
    if x.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input of dimension {} for a network expecting {}",
            x.dim(),
            model.input_dim()
        )));
    }
    let pruned;
    let model = match mask {
        Some(m) => {
            pruned = model.pruned(m)?;
            &pruned
        }
        None => model,
    };
    Vector::new(model.forward_batch(x.as_slice(), 1))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Fcn(FcnModel),
    Cnn(CnnModel),
}

impl Network {
    pub fn input_dim(&self) -> usize {
        match self {
            Network::Fcn(m) => m.weights[0].cols(),
            Network::Cnn(m) => m.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Network::Fcn(m) => m.weights.last().expect("nonempty").rows(),
            Network::Cnn(m) => m.output_dim(),
        }
    }

    pub fn pruned(&self, mask: &MaskSet) -> Result<Network> {
        Ok(match self {
            Network::Fcn(m) => Network::Fcn(m.pruned(mask)?),
            Network::Cnn(m) => Network::Cnn(m.pruned(mask)?),
        })
    }

    /// Outputs for `n` inputs laid end to end; outputs are laid out the same way.
    pub fn forward_batch(&self, xs: &[f64], n: usize) -> Result<Vec<f64>> {
        if xs.len() != n * self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {n} inputs of dimension {}",
                xs.len(),
                self.input_dim()
            )));
        }
        Ok(match self {
            Network::Fcn(m) => {
                let x = Matrix::from_col_major(self.input_dim(), n, xs.to_vec())?;
                m.forward_columns(x).as_col_major().to_vec()
            }
            Network::Cnn(m) => m.forward_batch(xs, n),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Unit sphere; equals the unit-ball sup for positively homogeneous nets.
    Sphere,
    /// Unit cube `[0, 1]^{d_0}`.
    Cube,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapEstimate {
    /// Max over the sample set.
    pub sup: f64,
    /// `‖f(x_i) − F(x_i)‖` in sample order. Sample `i` is the same point for
    /// every `n > i`, so prefixes of this vector are the estimates for
    /// smaller sample sets.
    pub gaps: Vec<f64>,
}

const GAP_CHUNK: usize = 64;

/// `max_i ‖pruned(x_i) − target(x_i)‖₂` over `n` points of `domain`.
pub fn estimate_sup_gap(target: &Network, pruned: &Network, domain: Domain, n: usize, seed: SeedSpec) -> Result<GapEstimate> {
    if target.input_dim() != pruned.input_dim() || target.output_dim() != pruned.output_dim() {
        return Err(Error::DimensionMismatch("target and pruned networks differ in shape".into()));
    }
    let dim = target.input_dim();
    let points = match domain {
        Domain::Sphere => sample_unit_sphere(dim, n, seed)?,
        Domain::Cube => sample_unit_cube(dim, n, seed)?,
    };
    let out_dim = target.output_dim();
    let chunks: Vec<Vec<f64>> = points
        .par_chunks(GAP_CHUNK)
        .map(|chunk| {
            let xs: Vec<f64> = chunk.iter().flat_map(|x| x.as_slice().iter().copied()).collect();
            let a = target.forward_batch(&xs, chunk.len())?;
            let b = pruned.forward_batch(&xs, chunk.len())?;
            Ok(a.chunks(out_dim)
                .zip(b.chunks(out_dim))
                .map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .collect())
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = chunks.into_iter().flatten().collect();
    let sup = gaps.iter().copied().fold(0.0, f64::max);
    Ok(GapEstimate { sup, gaps })
}

/// Convenience: `‖f(x) − F(x)‖` at a single point.
pub fn pointwise_gap(target: &Network, pruned: &Network, x: &Vector) -> Result<f64> {
    let a = Vector::new(target.forward_batch(x.as_slice(), 1)?)?;
    let b = Vector::new(pruned.forward_batch(x.as_slice(), 1)?)?;
    Ok(l2_norm(&a.sub(&b)?))
}

// ---- model files ----

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<f64>,
}

impl MatrixFile {
    fn from_matrix(m: &Matrix) -> Self {
        MatrixFile {
            rows: m.rows(),
            cols: m.cols(),
            data: m.to_row_major(),
        }
    }

    fn into_matrix(self) -> Result<Matrix> {
        Matrix::from_row_major(self.rows, self.cols, &self.data)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvFile {
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
    /// Row-major over `(s, t, i, j)`.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ModelFile {
    Fcn {
        format_version: u32,
        activations: Vec<Activation>,
        weights: Vec<MatrixFile>,
    },
    Cnn {
        format_version: u32,
        spatial: usize,
        activation: Activation,
        convs: Vec<ConvFile>,
        dense: MatrixFile,
    },
}

impl Network {
    pub fn to_json(&self) -> Result<String> {
        let file = match self {
            Network::Fcn(m) => ModelFile::Fcn {
                format_version: MODEL_FORMAT_VERSION,
                activations: m.activations.clone(),
                weights: m.weights.iter().map(MatrixFile::from_matrix).collect(),
            },
            Network::Cnn(m) => ModelFile::Cnn {
                format_version: MODEL_FORMAT_VERSION,
                spatial: m.spatial,
                activation: m.activation,
                convs: m
                    .convs
                    .iter()
                    .map(|f| ConvFile {
                        out_channels: f.out_channels(),
                        in_channels: f.in_channels(),
                        kernel: f.kernel(),
                        data: f.as_slice().to_vec(),
                    })
                    .collect(),
                dense: MatrixFile::from_matrix(&m.dense),
            },
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Network> {
        let file: ModelFile = serde_json::from_str(s)?;
        let check = |v: u32| {
            if v == MODEL_FORMAT_VERSION {
                Ok(())
            } else {
                Err(Error::Config(format!("unsupported model format version {v}")))
            }
        };
        match file {
            ModelFile::Fcn {
                format_version,
                activations,
                weights,
            } => {
                check(format_version)?;
                let weights = weights.into_iter().map(MatrixFile::into_matrix).collect::<Result<_>>()?;
                Ok(Network::Fcn(FcnModel::new(weights, activations)?))
            }
            ModelFile::Cnn {
                format_version,
                spatial,
                activation,
                convs,
                dense,
            } => {
                check(format_version)?;
                let convs = convs
                    .into_iter()
                    .map(|c| ConvTensor::new(c.out_channels, c.in_channels, c.kernel, c.data))
                    .collect::<Result<_>>()?;
                Ok(Network::Cnn(CnnModel::new(spatial, convs, dense.into_matrix()?, activation)?))
            }
        }
    }
}
