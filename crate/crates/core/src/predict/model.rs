use ndarray::{s, Array2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::sparse::{mean_aggregator, normalized_adjacency, Csr};
use super::{Arch, ModelConfig};
use crate::error::{Error, Result};
use crate::graph::{Adjacency, Edge};
use crate::seed;

/// Training-graph structure shared by all encoders.
#[derive(Debug, Clone)]
pub struct Graph {
    pub adj: Adjacency,
    pub a_hat: Csr,
    pub mean: Csr,
    pub mean_t: Csr,
}

impl Graph {
    pub fn new(n: usize, train_edges: &[Edge]) -> Self {
        let adj = Adjacency::from_edges(n, train_edges);
        let mean = mean_aggregator(&adj);
        Self {
            a_hat: normalized_adjacency(train_edges, n),
            mean_t: mean.transpose(),
            mean,
            adj,
        }
    }

    pub fn n(&self) -> usize {
        self.adj.n()
    }
}

/// Weights in a flat list: encoder layer `l` owns `W_l` at `2l` and `b_l`
/// (a `1 x out` row) at `2l + 1`; the scorer, when present, follows as
/// `W1, b1, W2 (hidden x 1), b2 (1 x 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub input_dim: usize,
    pub tensors: Vec<Array2<f64>>,
}

const CHECKPOINT_FORMAT: &str = "qclp-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    shape: [usize; 2],
    data: Vec<f64>,
}

/// JSON checkpoint: config, input dimension and every tensor with its shape.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    input_dim: usize,
    tensors: Vec<TensorRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Act {
    Relu,
    Identity,
}

fn glorot(rng: &mut seed::Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-a..=a))
}

impl ModelParams {
    pub fn init(config: &ModelConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input dim must be >= 1".into()));
        }
        let mut rng = seed::rng(seed::derive(config.seed, "model_init", &[]));
        let h = config.hidden;
        let mut tensors = Vec::new();
        for l in 0..config.layers {
            let fan_in = if l == 0 { input_dim } else { h };
            let fan_in = if config.arch == Arch::Sage { 2 * fan_in } else { fan_in };
            tensors.push(glorot(&mut rng, fan_in, h));
            tensors.push(Array2::zeros((1, h)));
        }
        if config.arch != Arch::Gae {
            let s_in = if config.arch == Arch::Ncn { 2 * h } else { h };
            tensors.push(glorot(&mut rng, s_in, h));
            tensors.push(Array2::zeros((1, h)));
            tensors.push(glorot(&mut rng, h, 1));
            tensors.push(Array2::zeros((1, 1)));
        }
        Ok(Self {
            config: config.clone(),
            input_dim,
            tensors,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            input_dim: self.input_dim,
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorRecord {
                    shape: [t.nrows(), t.ncols()],
                    data: t.iter().copied().collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string(&ck)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let expected = Self::init(&ck.config, ck.input_dim)?;
        if expected.tensors.len() != ck.tensors.len() {
            return Err(Error::Format("tensor count does not match config".into()));
        }
        let tensors = ck
            .tensors
            .into_iter()
            .zip(&expected.tensors)
            .map(|(r, want)| {
                if r.shape != [want.nrows(), want.ncols()] {
                    return Err(Error::Format(format!(
                        "tensor shape {:?} does not match config",
                        r.shape
                    )));
                }
                Array2::from_shape_vec((r.shape[0], r.shape[1]), r.data).map_err(|e| Error::Format(e.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config: ck.config,
            input_dim: ck.input_dim,
            tensors,
        })
    }

    pub fn arch(&self) -> Arch {
        self.config.arch
    }

    pub fn layers(&self) -> usize {
        self.config.layers
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect()
    }

    fn scorer(&self) -> Option<&[Array2<f64>]> {
        let start = 2 * self.layers();
        (self.arch() != Arch::Gae).then(|| &self.tensors[start..start + 4])
    }

    /// Node representations in evaluation mode.
    pub fn encode(&self, g: &Graph, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.encode_cached(g, x, None, Act::Relu)?.output)
    }

    pub(crate) fn encode_cached(
        &self,
        g: &Graph,
        x: &Array2<f64>,
        mut dropout: Option<&mut seed::Rng>,
        act: Act,
    ) -> Result<Forward> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        if x.nrows() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                found: x.nrows(),
            });
        }
        let p = self.config.dropout;
        let mut caches = Vec::with_capacity(self.layers());
        let mut h = x.clone();
        for l in 0..self.layers() {
            let (w, b) = (&self.tensors[2 * l], &self.tensors[2 * l + 1]);
            // inverted dropout between layers, training mode only
            let mask = match (&mut dropout, l > 0 && p > 0.0) {
                (Some(rng), true) => {
                    let keep = 1.0 / (1.0 - p);
                    let m = Array2::from_shape_fn(h.raw_dim(), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
                    h = &h * &m;
                    Some(m)
                }
                _ => None,
            };
            let prop = match self.arch() {
                Arch::Mlp => h.clone(),
                Arch::Gcn | Arch::Gae | Arch::Ncn => g.a_hat.matmul(&h),
                Arch::Sage => {
                    let agg = g.mean.matmul(&h);
                    ndarray::concatenate(Axis(1), &[h.view(), agg.view()]).expect("same row count")
                }
            };
            let z = prop.dot(w) + b;
            let linear = act == Act::Identity || (self.arch() == Arch::Gae && l + 1 == self.layers());
            let out = if linear { z.clone() } else { z.mapv(|v| v.max(0.0)) };
            caches.push(LayerCache { prop, z, mask, linear });
            h = out;
        }
        Ok(Forward { output: h, caches })
    }

    /// Gradients of the encoder tensors given `dL/dH` of the encoder output.
    pub(crate) fn encoder_backward(&self, g: &Graph, fwd: &Forward, mut dh: Array2<f64>, grads: &mut [Array2<f64>]) {
        for l in (0..self.layers()).rev() {
            let c = &fwd.caches[l];
            let dz = if c.linear {
                dh
            } else {
                let mut dz = dh;
                ndarray::Zip::from(&mut dz).and(&c.z).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz
            };
            grads[2 * l] += &c.prop.t().dot(&dz);
            grads[2 * l + 1] += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            if l == 0 {
                break;
            }
            let dprop = dz.dot(&self.tensors[2 * l].t());
            let mut dx = match self.arch() {
                Arch::Mlp => dprop,
                Arch::Gcn | Arch::Gae | Arch::Ncn => g.a_hat.matmul(&dprop),
                Arch::Sage => {
                    let d_in = dprop.ncols() / 2;
                    let own = dprop.slice(s![.., ..d_in]).to_owned();
                    let nb = dprop.slice(s![.., d_in..]).to_owned();
                    own + g.mean_t.matmul(&nb)
                }
            };
            if let Some(m) = &c.mask {
                dx *= m;
            }
            dh = dx;
        }
    }

    /// Decoder input rows for `pairs`.
    pub(crate) fn pair_input(&self, g: &Graph, h: &Array2<f64>, pairs: &[Edge]) -> Array2<f64> {
        let d = h.ncols();
        let width = if self.arch() == Arch::Ncn { 2 * d } else { d };
        let mut out = Array2::zeros((pairs.len(), width));
        for (k, e) in pairs.iter().enumerate() {
            let mut row = out.row_mut(k);
            let (hu, hv) = (h.row(e.u), h.row(e.v));
            for i in 0..d {
                row[i] = hu[i] * hv[i];
            }
            if self.arch() == Arch::Ncn {
                for w in g.adj.common_neighbors(e.u, e.v) {
                    let hw = h.row(w);
                    for i in 0..d {
                        row[d + i] += hw[i];
                    }
                }
            }
        }
        out
    }

    /// Logits for `pairs` given node representations `h`.
    pub fn score_with(&self, g: &Graph, h: &Array2<f64>, pairs: &[Edge]) -> Vec<f64> {
        match self.scorer() {
            None => pairs.iter().map(|e| h.row(e.u).dot(&h.row(e.v))).collect(),
            Some(s) => {
                let xin = self.pair_input(g, h, pairs);
                let hidden = (xin.dot(&s[0]) + &s[1]).mapv(|v| v.max(0.0));
                let logits = hidden.dot(&s[2]) + &s[3];
                logits.column(0).to_vec()
            }
        }
    }

    /// Logit for one pair, evaluated in the given endpoint order.
    pub fn score(&self, g: &Graph, h: &Array2<f64>, u: usize, v: usize) -> f64 {
        self.score_with(g, h, &[Edge { u, v }])[0]
    }

    /// Mean BCE-with-logits over `batch` and its gradient. `dropout` enables
    /// training mode.
    pub(crate) fn loss_and_grads(
        &self,
        g: &Graph,
        x: &Array2<f64>,
        batch: &[(Edge, f64)],
        dropout: Option<&mut seed::Rng>,
        act: Act,
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let fwd = self.encode_cached(g, x, dropout, act)?;
        let h = &fwd.output;
        let mut grads = self.zeros_like();
        let mut dh = Array2::<f64>::zeros(h.raw_dim());
        let m = batch.len().max(1) as f64;
        let mut loss = 0.0;
        let d = h.ncols();
        let l2 = 2 * self.layers();

        for chunk in batch.chunks(CHUNK) {
            let pairs: Vec<Edge> = chunk.iter().map(|(e, _)| *e).collect();
            // dL/dlogit for every pair in the chunk
            let (logits, xin, hidden) = match self.scorer() {
                None => (self.score_with(g, h, &pairs), None, None),
                Some(s) => {
                    let xin = self.pair_input(g, h, &pairs);
                    let hidden = (xin.dot(&s[0]) + &s[1]).mapv(|v| v.max(0.0));
                    let logits = (hidden.dot(&s[2]) + &s[3]).column(0).to_vec();
                    (logits, Some(xin), Some(hidden))
                }
            };
            let mut dlogit = Vec::with_capacity(chunk.len());
            for ((_, y), z) in chunk.iter().zip(&logits) {
                loss += softplus(*z) - y * z;
                dlogit.push((sigmoid(*z) - y) / m);
            }
            match (xin, hidden) {
                (Some(xin), Some(hidden)) => {
                    let s = self.scorer().expect("scorer present");
                    let dl = ndarray::Array1::from(dlogit).insert_axis(Axis(1));
                    grads[l2 + 2] += &hidden.t().dot(&dl);
                    grads[l2 + 3] += &dl.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let mut dhid = dl.dot(&s[2].t());
                    ndarray::Zip::from(&mut dhid).and(&hidden).for_each(|g, &a| {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    grads[l2] += &xin.t().dot(&dhid);
                    grads[l2 + 1] += &dhid.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxin = dhid.dot(&s[0].t());
                    for (k, e) in pairs.iter().enumerate() {
                        let row = dxin.row(k);
                        for i in 0..d {
                            let (hu, hv) = (h[(e.u, i)], h[(e.v, i)]);
                            dh[(e.u, i)] += row[i] * hv;
                            dh[(e.v, i)] += row[i] * hu;
                        }
                        if self.arch() == Arch::Ncn {
                            for w in g.adj.common_neighbors(e.u, e.v) {
                                for i in 0..d {
                                    dh[(w, i)] += row[d + i];
                                }
                            }
                        }
                    }
                }
                _ => {
                    for (e, dl) in pairs.iter().zip(&dlogit) {
                        for i in 0..d {
                            let (hu, hv) = (h[(e.u, i)], h[(e.v, i)]);
                            dh[(e.u, i)] += dl * hv;
                            dh[(e.v, i)] += dl * hu;
                        }
                    }
                }
            }
        }
        self.encoder_backward(g, &fwd, dh, &mut grads);
        Ok((loss / m, grads))
    }
}

const CHUNK: usize = 1 << 15;

pub(crate) struct LayerCache {
    prop: Array2<f64>,
    z: Array2<f64>,
    mask: Option<Array2<f64>>,
    linear: bool,
}

pub(crate) struct Forward {
    pub output: Array2<f64>,
    caches: Vec<LayerCache>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    crate::classic::sigmoid(x)
}

/// `ln(1 + e^x)`, stable.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
