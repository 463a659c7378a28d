//! Memory-cache frame selection, the FIFO motion queue with pluggable
//! forecasters, and the gated combiner.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::harness::write_atomic;
use crate::rng::SeededRng;
use crate::{Error, Result};

/// Row-major real matrix of `rows` frames (or tokens) by `dim` features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: usize, dim: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != rows * dim {
            return Err(Error::DimensionMismatch { expected: rows * dim, actual: row_major.len() });
        }
        if row_major.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix { data: DMatrix::from_row_slice(rows, dim, row_major) })
    }

    pub fn from_vecs(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.len() });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_rows(rows.len(), dim, &flat)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
}

impl ProjectionPair {
    pub fn new(w_q: DMatrix<f64>, w_k: DMatrix<f64>) -> Result<Self> {
        let d = w_q.nrows();
        for m in [&w_q, &w_k] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: m.ncols().max(m.nrows()) });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("projection"));
            }
        }
        Ok(ProjectionPair { w_q, w_k })
    }

    pub fn identity(d: usize) -> Self {
        ProjectionPair { w_q: DMatrix::identity(d, d), w_k: DMatrix::identity(d, d) }
    }

    /// Gaussian entries with std `1/sqrt(d)`.
    pub fn seeded(d: usize, seed: u64) -> Self {
        let mut rng = SeededRng::derived(seed, 0x5052_4f4a);
        let scale = 1.0 / (d.max(1) as f64).sqrt();
        let mut draw = || DMatrix::from_fn(d, d, |_, _| rng.normal() * scale);
        let w_q = draw();
        let w_k = draw();
        ProjectionPair { w_q, w_k }
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }

    /// Reads `dims: d` followed by `W_q` then `W_k`, both row-major.
    pub fn load(path: &Path) -> Result<Self> {
        let (d, values) = read_tensor_file(path)?;
        if values.len() != 2 * d * d {
            return Err(tensor_len_error(path, 2 * d * d, values.len()));
        }
        let (q, k) = values.split_at(d * d);
        Self::new(DMatrix::from_row_slice(d, d, q), DMatrix::from_row_slice(d, d, k))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut values = row_major(&self.w_q);
        values.extend(row_major(&self.w_k));
        write_tensor_file(path, self.dim(), &values, self.dim())
    }
}

/// How the L x L self-attention branch is reduced to one score per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelfBranchReduce {
    /// Mean attention each frame receives.
    #[default]
    ColumnMean,
    /// Mean attention each frame pays (constant 1/L for a row-stochastic matrix).
    RowMean,
    /// Scalar mean of the whole matrix, broadcast to every frame.
    FullMean,
}

impl std::str::FromStr for SelfBranchReduce {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "column" => Ok(Self::ColumnMean),
            "row" => Ok(Self::RowMean),
            "full" => Ok(Self::FullMean),
            other => Err(Error::Config(format!("unknown reducer {other:?} (column|row|full)"))),
        }
    }
}

fn softmax_rows(mut logits: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in logits.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    logits
}

/// `softmax((F_q W_q)(F_k W_k)^T / sqrt(d))` over the key axis.
pub fn attention_scores(f_q: &FeatureMatrix, f_k: &FeatureMatrix, proj: &ProjectionPair) -> Result<DMatrix<f64>> {
    let d = proj.dim();
    for f in [f_q, f_k] {
        if f.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: f.dim() });
        }
    }
    if f_k.rows() == 0 {
        return Err(Error::Empty("key features"));
    }
    let q = f_q.as_matrix() * &proj.w_q;
    let k = f_k.as_matrix() * &proj.w_k;
    let logits = (q * k.transpose()) / (d as f64).sqrt();
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("attention logits"));
    }
    Ok(softmax_rows(logits))
}

/// Per-frame importance: cross-branch relevance plus reduced self-attention.
pub fn importance_scores(
    current: &FeatureMatrix,
    memory: &FeatureMatrix,
    proj: &ProjectionPair,
    reduce: SelfBranchReduce,
) -> Result<Vec<f64>> {
    if current.rows() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: current.rows() });
    }
    let cross = attention_scores(current, memory, proj)?;
    let own = attention_scores(memory, memory, proj)?;
    let l = memory.rows();
    let consistency: Vec<f64> = match reduce {
        SelfBranchReduce::ColumnMean => own.column_iter().map(|c| c.mean()).collect(),
        SelfBranchReduce::RowMean => own.row_iter().map(|r| r.mean()).collect(),
        SelfBranchReduce::FullMean => vec![own.mean(); l],
    };
    Ok((0..l).map(|j| cross[(0, j)] + consistency[j]).collect())
}

/// Top-`k` memory frames, descending by importance, ties to the lower index.
pub fn memory_cache_select(
    current: &FeatureMatrix,
    memory: &FeatureMatrix,
    proj: &ProjectionPair,
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    memory_cache_select_with(current, memory, proj, k, SelfBranchReduce::default())
}

pub fn memory_cache_select_with(
    current: &FeatureMatrix,
    memory: &FeatureMatrix,
    proj: &ProjectionPair,
    k: usize,
    reduce: SelfBranchReduce,
) -> Result<Vec<(usize, f64)>> {
    let l = memory.rows();
    if k == 0 || k > l {
        return Err(Error::SelectionOutOfRange { k, len: l });
    }
    let scores = importance_scores(current, memory, proj, reduce)?;
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}

/// Mean over tokens.
pub fn spatial_pool(tokens: &FeatureMatrix) -> Result<FeatureMatrix> {
    if tokens.rows() == 0 {
        return Err(Error::Empty("token matrix"));
    }
    let mean = tokens.as_matrix().row_mean();
    Ok(FeatureMatrix { data: DMatrix::from_row_slice(1, tokens.dim(), mean.as_slice()) })
}

/// Fixed-capacity FIFO of motion-state vectors, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionQueue {
    capacity: usize,
    dim: usize,
    entries: VecDeque<Vec<f64>>,
}

impl MotionQueue {
    pub fn new(capacity: usize, dim: usize) -> Self {
        MotionQueue { capacity: capacity.max(1), dim, entries: VecDeque::with_capacity(capacity + 1) }
    }

    pub fn push(&mut self, state: Vec<f64>) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: state.len() });
        }
        self.entries.push_back(state);
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.entries.iter()
    }

    pub fn last(&self) -> Option<&Vec<f64>> {
        self.entries.back()
    }
}

pub fn queue_push(mut q: MotionQueue, state: Vec<f64>) -> Result<MotionQueue> {
    q.push(state)?;
    Ok(q)
}

/// Anything that maps a motion history to a next-state prediction.
/// Implementations must be deterministic for a fixed queue.
pub trait Forecaster {
    fn predict_next(&self, queue: &MotionQueue) -> Result<Vec<f64>>;
}

/// Last state plus the mean first difference of the queue.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl Forecaster for ConstantVelocity {
    fn predict_next(&self, queue: &MotionQueue) -> Result<Vec<f64>> {
        let first = queue.iter().next().ok_or(Error::Empty("motion queue"))?;
        let last = queue.last().expect("non-empty");
        let steps = (queue.len() - 1) as f64;
        if steps == 0.0 {
            return Ok(last.clone());
        }
        // Differences telescope to (last - first) / steps.
        Ok(last.iter().zip(first).map(|(l, f)| l + (l - f) / steps).collect())
    }
}

/// Fixed linear embedding from motion state into the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMap {
    matrix: DMatrix<f64>,
}

impl LatentMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        LatentMap { matrix }
    }

    pub fn seeded(latent_dim: usize, state_dim: usize, seed: u64) -> Self {
        let mut rng = SeededRng::derived(seed, 0x4c41_5445);
        let scale = 1.0 / (state_dim.max(1) as f64).sqrt();
        LatentMap { matrix: DMatrix::from_fn(latent_dim, state_dim, |_, _| rng.normal() * scale) }
    }

    pub fn embed(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: self.matrix.ncols(), actual: state.len() });
        }
        Ok((&self.matrix * DVector::from_column_slice(state)).iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub state: Vec<f64>,
    pub latent: Vec<f64>,
}

pub fn forecast(q: &MotionQueue, forecaster: &dyn Forecaster, map: &LatentMap) -> Result<Forecast> {
    if q.is_empty() {
        return Err(Error::Empty("motion queue"));
    }
    let state = forecaster.predict_next(q)?;
    let latent = map.embed(&state)?;
    Ok(Forecast { state, latent })
}

/// Single affine layer `2d -> d` followed by the logistic function.
#[derive(Debug, Clone, PartialEq)]
pub struct GateNetwork {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GateNetwork {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        let d = bias.len();
        if weights.nrows() != d || weights.ncols() != 2 * d {
            return Err(Error::DimensionMismatch { expected: 2 * d, actual: weights.ncols() });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gate network"));
        }
        Ok(GateNetwork { weights, bias })
    }

    /// Zero weights with a constant bias on every unit.
    pub fn constant(d: usize, bias: f64) -> Self {
        GateNetwork { weights: DMatrix::zeros(d, 2 * d), bias: DVector::from_element(d, bias) }
    }

    pub fn seeded(d: usize, seed: u64) -> Self {
        let mut rng = SeededRng::derived(seed, 0x4741_5445);
        let scale = 1.0 / ((2 * d).max(1) as f64).sqrt();
        let weights = DMatrix::from_fn(d, 2 * d, |_, _| rng.normal() * scale);
        GateNetwork { weights, bias: DVector::zeros(d) }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    pub fn gate(&self, z_h: &[f64], z_hat: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        for v in [z_h, z_hat] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: v.len() });
            }
        }
        let input = DVector::from_iterator(2 * d, z_h.iter().chain(z_hat).copied());
        let pre = &self.weights * input + &self.bias;
        Ok(pre.iter().map(|&v| sigmoid(v)).collect())
    }

    /// Reads `dims: d` followed by the `d x 2d` weights then `d` biases.
    pub fn load(path: &Path) -> Result<Self> {
        let (d, values) = read_tensor_file(path)?;
        let expected = 2 * d * d + d;
        if values.len() != expected {
            return Err(tensor_len_error(path, expected, values.len()));
        }
        let (w, b) = values.split_at(2 * d * d);
        Self::new(DMatrix::from_row_slice(d, 2 * d, w), DVector::from_column_slice(b))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut values = row_major(&self.weights);
        values.extend(self.bias.iter().copied());
        write_tensor_file(path, self.dim(), &values, 2 * self.dim())
    }
}

/// `(1 - g) * z_h + g * z_hat` with `g` from the gate network.
pub fn gated_fuse(z_h: &[f64], z_hat: &[f64], gate: &GateNetwork) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = gate.gate(z_h, z_hat)?;
    let fused = z_h
        .iter()
        .zip(z_hat)
        .zip(&g)
        .map(|((h, p), g)| (1.0 - g) * h + g * p)
        .collect();
    Ok((fused, g))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
}

fn tensor_len_error(path: &Path, expected: usize, actual: usize) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: format!("expected {expected} values after header, found {actual}"),
    }
}

fn read_tensor_file(path: &Path) -> Result<(usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line, msg };
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| parse_err(1, "missing `dims: d` header".into()))?;
    let d = header
        .trim()
        .strip_prefix("dims:")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| parse_err(1, format!("bad header {header:?}, expected `dims: d`")))?;
    let mut values = Vec::new();
    for (i, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| parse_err(i + 1, format!("not a number: {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(i + 1, format!("non-finite value {tok:?}")));
            }
            values.push(v);
        }
    }
    Ok((d, values))
}

fn write_tensor_file(path: &Path, d: usize, values: &[f64], per_line: usize) -> Result<()> {
    let mut out = format!("dims: {d}\n");
    for row in values.chunks(per_line.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    write_atomic(path, out.as_bytes())
}
