//! Mask construction: random with and without replacement, magnitude based
//! (layer-wise and global) and random filter pruning for CNNs.
//!
//! Layer indices are 0-based. Every scheme leaves the first and last layers
//! untouched; counts supplied for those layers must be zero.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::networks::{LayerMask, MaskSet, Network};
use crate::sampling::SeedSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneScheme {
    RandomWithReplacement,
    RandomWithoutReplacement,
    MagnitudeLayerwise,
    MagnitudeGlobal,
    FilterRandom,
}

impl PruneScheme {
    pub fn is_random(self) -> bool {
        !matches!(self, PruneScheme::MagnitudeLayerwise | PruneScheme::MagnitudeGlobal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PruneScheme::RandomWithReplacement => "random-with-replacement",
            PruneScheme::RandomWithoutReplacement => "random-without-replacement",
            PruneScheme::MagnitudeLayerwise => "magnitude-layerwise",
            PruneScheme::MagnitudeGlobal => "magnitude-global",
            PruneScheme::FilterRandom => "filter-random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneAmount {
    /// `⌊D_k^{1−α}⌋` entries per internal layer (filter scheme: `⌊d^{2−α}⌋`
    /// filters). For `magnitude-global` the per-layer counts are summed.
    Alpha(f64),
    /// One count per layer, first and last zero.
    Counts(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneSpec {
    pub scheme: PruneScheme,
    pub amount: PruneAmount,
    /// Required by the random schemes, ignored otherwise.
    pub seed: Option<SeedSpec>,
}

/// `⌊x⌋`, except that values within rounding noise of an integer snap to it.
pub(crate) fn floor_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// `⌊D^{1−α}⌋` for `α ∈ (0, 1)`.
pub fn prune_count(alpha: f64, d_total: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if d_total == 0 {
        return Err(Error::InvalidParameter("layer size must be positive".into()));
    }
    Ok(floor_snapped((d_total as f64).powf(1.0 - alpha)) as usize)
}

/// `⌊d^{2−α}⌋` filters for `α ∈ (0, 2)`. For a `d' x d` layer this is
/// `⌊(d' d)^{1−α/2}⌋`, which reduces to the square case when `d' = d`.
pub fn filter_prune_count(alpha: f64, out_channels: usize, in_channels: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if out_channels == 0 || in_channels == 0 {
        return Err(Error::InvalidParameter("channel counts must be positive".into()));
    }
    let n = (out_channels * in_channels) as f64;
    Ok(floor_snapped(n.powf(1.0 - alpha / 2.0)) as usize)
}

fn check_counts(dims: &[(usize, usize)], counts: &[usize]) -> Result<()> {
    if dims.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 layers".into()));
    }
    if counts.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!("{} counts for {} layers", counts.len(), dims.len())));
    }
    if counts[0] != 0 || counts[counts.len() - 1] != 0 {
        return Err(Error::InvalidParameter("first and last layers must not be pruned".into()));
    }
    Ok(())
}

fn ones_layers(dims: &[(usize, usize)]) -> Vec<Matrix> {
    dims.iter().map(|&(r, c)| Matrix::ones(r, c)).collect()
}

fn dense_set(layers: Vec<Matrix>) -> Result<MaskSet> {
    MaskSet::new(layers.into_iter().map(LayerMask::Dense).collect())
}

/// Repeats `count` times: pick a row, pick a column, zero that entry.
/// Repeated picks collapse, so at most `count` entries end up zero.
pub fn mask_random_with_replacement(dims: &[(usize, usize)], counts: &[usize], seed: SeedSpec) -> Result<MaskSet> {
    check_counts(dims, counts)?;
    let mut layers = ones_layers(dims);
    for (k, m) in layers.iter_mut().enumerate() {
        zero_with_replacement(m, counts[k], seed.child(k as u64));
    }
    dense_set(layers)
}

fn zero_with_replacement(m: &mut Matrix, count: usize, seed: SeedSpec) {
    if count == 0 {
        return;
    }
    let (rows, cols) = (m.rows(), m.cols());
    let mut rng = seed.rng();
    for _ in 0..count {
        let i = rng.random_range(0..rows);
        let j = rng.random_range(0..cols);
        m.set(i, j, 0.0);
    }
}

/// Zeros exactly `count` entries per layer, uniformly over subsets.
pub fn mask_random_without_replacement(dims: &[(usize, usize)], counts: &[usize], seed: SeedSpec) -> Result<MaskSet> {
    check_counts(dims, counts)?;
    let mut layers = ones_layers(dims);
    for (k, m) in layers.iter_mut().enumerate() {
        let count = counts[k];
        if count == 0 {
            continue;
        }
        let (rows, cols) = (m.rows(), m.cols());
        let total = rows * cols;
        if count > total {
            return Err(Error::InvalidParameter(format!(
                "cannot prune {count} of {total} entries in layer {k}"
            )));
        }
        let mut rng = seed.child(k as u64).rng();
        // Partial Fisher-Yates: the first `count` slots end up a uniform subset.
        let mut idx: Vec<usize> = (0..total).collect();
        for s in 0..count {
            let r = rng.random_range(s..total);
            idx.swap(s, r);
            let lin = idx[s];
            m.set(lin / cols, lin % cols, 0.0);
        }
    }
    dense_set(layers)
}

/// Order by magnitude, ties by (layer, row, column).
fn by_magnitude(a: &(f64, usize, usize, usize), b: &(f64, usize, usize, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .then(a.3.cmp(&b.3))
}

fn magnitude_keys(w: &Matrix, layer: usize) -> Vec<(f64, usize, usize, usize)> {
    let mut keys = Vec::with_capacity(w.len());
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            keys.push((w.get(i, j).abs(), layer, i, j));
        }
    }
    keys
}

fn zero_smallest(keys: &mut [(f64, usize, usize, usize)], count: usize, layers: &mut [Matrix]) {
    if count == 0 {
        return;
    }
    if count < keys.len() {
        keys.select_nth_unstable_by(count - 1, by_magnitude);
    }
    for &(_, k, i, j) in &keys[..count.min(keys.len())] {
        layers[k].set(i, j, 0.0);
    }
}

/// Zeros the `counts[k]` smallest-magnitude entries of each layer. Ties go to
/// the lexicographically smaller (row, column).
pub fn mask_magnitude_layerwise(weights: &[Matrix], counts: &[usize]) -> Result<MaskSet> {
    let dims: Vec<(usize, usize)> = weights.iter().map(|w| (w.rows(), w.cols())).collect();
    check_counts(&dims, counts)?;
    let mut layers = ones_layers(&dims);
    for (k, w) in weights.iter().enumerate() {
        if counts[k] > w.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot prune {} of {} entries in layer {k}",
                counts[k],
                w.len()
            )));
        }
        let mut keys = magnitude_keys(w, k);
        zero_smallest(&mut keys, counts[k], &mut layers);
    }
    dense_set(layers)
}

/// Zeros the `total` smallest-magnitude entries pooled over the internal
/// layers. Ties go to the earlier layer, then (row, column).
pub fn mask_magnitude_global(weights: &[Matrix], total: usize) -> Result<MaskSet> {
    let dims: Vec<(usize, usize)> = weights.iter().map(|w| (w.rows(), w.cols())).collect();
    if dims.len() < 3 {
        return Err(Error::InvalidParameter("need at least 3 layers".into()));
    }
    let internal = 1..weights.len() - 1;
    let capacity: usize = weights[internal.clone()].iter().map(Matrix::len).sum();
    if total > capacity {
        return Err(Error::InvalidParameter(format!(
            "cannot prune {total} of {capacity} internal entries"
        )));
    }
    let mut layers = ones_layers(&dims);
    let mut keys: Vec<_> = internal.flat_map(|k| magnitude_keys(&weights[k], k)).collect();
    zero_smallest(&mut keys, total, &mut layers);
    dense_set(layers)
}

/// For convolution layers with channel shapes `conv_dims` followed by a dense
/// layer of shape `dense_dims`: picks `counts[k]` filter pairs `(s, t)` with
/// replacement and zeros them. `counts` covers the convolution layers only
/// and its first entry must be zero.
pub fn mask_filter_random(
    conv_dims: &[(usize, usize)],
    dense_dims: (usize, usize),
    counts: &[usize],
    seed: SeedSpec,
) -> Result<MaskSet> {
    if conv_dims.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 convolution layers".into()));
    }
    if counts.len() != conv_dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} counts for {} convolution layers",
            counts.len(),
            conv_dims.len()
        )));
    }
    if counts[0] != 0 {
        return Err(Error::InvalidParameter("first layer must not be pruned".into()));
    }
    let mut layers: Vec<LayerMask> = Vec::with_capacity(conv_dims.len() + 1);
    for (k, &(dout, din)) in conv_dims.iter().enumerate() {
        let mut m = Matrix::ones(dout, din);
        zero_with_replacement(&mut m, counts[k], seed.child(k as u64));
        layers.push(LayerMask::Filter(m));
    }
    layers.push(LayerMask::Dense(Matrix::ones(dense_dims.0, dense_dims.1)));
    MaskSet::new(layers)
}

/// Per-layer counts that `spec` implies for `net` (zeros for first and last).
pub fn layer_counts(spec: &PruneSpec, net: &Network) -> Result<Vec<usize>> {
    let dims = layer_dims(net);
    let l = dims.len();
    match &spec.amount {
        PruneAmount::Counts(c) => Ok(c.clone()),
        PruneAmount::Alpha(alpha) => (0..l)
            .map(|k| {
                if k == 0 || k == l - 1 {
                    return Ok(0);
                }
                let (r, c) = dims[k];
                match spec.scheme {
                    PruneScheme::FilterRandom => filter_prune_count(*alpha, r, c),
                    _ => prune_count(*alpha, r * c),
                }
            })
            .collect(),
    }
}

/// Shapes of the objects each layer's mask covers: weight matrices for an
/// FCN; channel pairs for CNN convolutions and the dense matrix last.
pub fn layer_dims(net: &Network) -> Vec<(usize, usize)> {
    match net {
        Network::Fcn(m) => m.weights().iter().map(|w| (w.rows(), w.cols())).collect(),
        Network::Cnn(m) => m
            .convs()
            .iter()
            .map(|f| (f.out_channels(), f.in_channels()))
            .chain(std::iter::once((m.dense().rows(), m.dense().cols())))
            .collect(),
    }
}

/// Builds the mask `spec` describes for `net`.
pub fn build_mask(spec: &PruneSpec, net: &Network) -> Result<MaskSet> {
    let counts = layer_counts(spec, net)?;
    let seed = || {
        spec.seed
            .ok_or_else(|| Error::InvalidParameter(format!("scheme {} needs a seed", spec.scheme.as_str())))
    };
    match (spec.scheme, net) {
        (PruneScheme::FilterRandom, Network::Cnn(m)) => {
            let conv_dims: Vec<(usize, usize)> = m.convs().iter().map(|f| (f.out_channels(), f.in_channels())).collect();
            if counts.last() != Some(&0) {
                return Err(Error::InvalidParameter("last layer must not be pruned".into()));
            }
            mask_filter_random(&conv_dims, (m.dense().rows(), m.dense().cols()), &counts[..counts.len() - 1], seed()?)
        }
        (PruneScheme::FilterRandom, Network::Fcn(_)) => {
            Err(Error::InvalidParameter("filter-random applies to CNNs only".into()))
        }
        (_, Network::Cnn(_)) => Err(Error::InvalidParameter(format!(
            "scheme {} applies to FCNs only",
            spec.scheme.as_str()
        ))),
        (PruneScheme::RandomWithReplacement, Network::Fcn(_)) => {
            mask_random_with_replacement(&layer_dims(net), &counts, seed()?)
        }
        (PruneScheme::RandomWithoutReplacement, Network::Fcn(_)) => {
            mask_random_without_replacement(&layer_dims(net), &counts, seed()?)
        }
        (PruneScheme::MagnitudeLayerwise, Network::Fcn(m)) => mask_magnitude_layerwise(m.weights(), &counts),
        (PruneScheme::MagnitudeGlobal, Network::Fcn(m)) => mask_magnitude_global(m.weights(), counts.iter().sum()),
    }
}

/// Balls-into-bins event for one pruned layer: every row holds at most
/// `3·count/rows` zeros and every column at most `3·count/cols`.
pub fn zero_load_event(mask: &Matrix, count: usize) -> (bool, bool) {
    let (rows, cols) = (mask.rows(), mask.cols());
    let mut row_zeros = vec![0usize; rows];
    let mut col_zeros = vec![0usize; cols];
    for j in 0..cols {
        for i in 0..rows {
            if mask.get(i, j) == 0.0 {
                row_zeros[i] += 1;
                col_zeros[j] += 1;
            }
        }
    }
    let c = 3.0 * count as f64;
    let rows_ok = row_zeros.iter().all(|&z| z as f64 <= c / rows as f64);
    let cols_ok = col_zeros.iter().all(|&z| z as f64 <= c / cols as f64);
    (rows_ok, cols_ok)
}
