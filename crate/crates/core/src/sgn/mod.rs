//! Sparse graph network over the γ-nearest directed graph.
//!
//! The encoder projects node coordinates and edge distances to width `D` and
//! applies `L` sparse graph convolution layers. Each layer computes a
//! feature-wise softmax attention over a node's out-edges, updates nodes
//! with `v + ReLU(BN(W_s v_i + Σ attn ⊙ W_n v_j))` and edges with
//! `e + ReLU(BN(W_f v_i + W_t v_j + W_o e_ij + r_ij))`, where `r_ij` is
//! `W_r e_ji` when the opposite edge exists and `W_r p` otherwise. Two
//! decoders follow: a per-node softmax over out-edge scores β, and node
//! penalties `π = C tanh(W_π v_f)`.
//!
//! Everything is generic over [`Scalar`]; training uses `f32`, gradient
//! verification `f64`.

mod backward;
mod forward;
mod io;
mod loss;
mod ops;
mod train;

pub use backward::{backward, backward_node_decoder};
pub use forward::{forward, ForwardCache, GraphBatch, Mode, SgnOutput};
pub use io::{load_model, save_model, MODEL_MAGIC};
pub use loss::{edge_loss, node_loss, node_loss_from_degrees, one_tree_degrees, EdgeLoss, NodeLoss, BETA_CLAMP};
pub use train::{
    adam_step, finetune_node_decoder, prepare_input, train, AdamState, EpochLog, FinetuneConfig, LabeledGraph, TrainConfig,
    TrainingLog,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

/// Penalty clamp scale `C`.
pub const DEFAULT_PENALTY_SCALE: f64 = 10.0;
/// Batch-norm running-average momentum.
pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Desk-scale width and depth.
pub const DEFAULT_WIDTH: usize = 32;
pub const DEFAULT_LAYERS: usize = 6;

/// Trainable tensors of one convolution layer; every `w_*` is `D × D` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<S> {
    pub w_a: Vec<S>,
    pub w_s: Vec<S>,
    pub w_n: Vec<S>,
    pub w_r: Vec<S>,
    pub w_f: Vec<S>,
    pub w_t: Vec<S>,
    pub w_o: Vec<S>,
    /// Stand-in for a missing opposite edge.
    pub p: Vec<S>,
    pub bn_node_scale: Vec<S>,
    pub bn_node_shift: Vec<S>,
    pub bn_edge_scale: Vec<S>,
    pub bn_edge_shift: Vec<S>,
}

/// Every trainable tensor. Also used as the gradient and Adam-moment container.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<S> {
    /// `D × 2`
    pub node_in_w: Vec<S>,
    pub node_in_b: Vec<S>,
    /// `D × 1`
    pub edge_in_w: Vec<S>,
    pub edge_in_b: Vec<S>,
    pub layers: Vec<LayerParams<S>>,
    pub edge_dec_w1: Vec<S>,
    pub edge_dec_b1: Vec<S>,
    pub edge_dec_w2: Vec<S>,
    pub edge_dec_b2: Vec<S>,
    /// `1 × D`
    pub w_beta: Vec<S>,
    pub node_dec_w1: Vec<S>,
    pub node_dec_b1: Vec<S>,
    pub node_dec_w2: Vec<S>,
    pub node_dec_b2: Vec<S>,
    /// `1 × D`
    pub w_pi: Vec<S>,
}

/// Number of tensors in the node decoder, which form the tail of [`Params::tensors`].
pub const NODE_DECODER_TENSORS: usize = 5;

impl<S: Scalar> Params<S> {
    fn zeros(d: usize, layers: usize) -> Self {
        let z = |len: usize| vec![S::zero(); len];
        Params {
            node_in_w: z(d * 2),
            node_in_b: z(d),
            edge_in_w: z(d),
            edge_in_b: z(d),
            layers: (0..layers)
                .map(|_| LayerParams {
                    w_a: z(d * d),
                    w_s: z(d * d),
                    w_n: z(d * d),
                    w_r: z(d * d),
                    w_f: z(d * d),
                    w_t: z(d * d),
                    w_o: z(d * d),
                    p: z(d),
                    bn_node_scale: z(d),
                    bn_node_shift: z(d),
                    bn_edge_scale: z(d),
                    bn_edge_shift: z(d),
                })
                .collect(),
            edge_dec_w1: z(d * d),
            edge_dec_b1: z(d),
            edge_dec_w2: z(d * d),
            edge_dec_b2: z(d),
            w_beta: z(d),
            node_dec_w1: z(d * d),
            node_dec_b1: z(d),
            node_dec_w2: z(d * d),
            node_dec_b2: z(d),
            w_pi: z(d),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let d = self.node_in_b.len();
        Self::zeros(d, self.layers.len())
    }

    /// Tensors in declaration order.
    pub fn tensors(&self) -> Vec<&Vec<S>> {
        let mut out = vec![&self.node_in_w, &self.node_in_b, &self.edge_in_w, &self.edge_in_b];
        for l in &self.layers {
            out.extend([
                &l.w_a,
                &l.w_s,
                &l.w_n,
                &l.w_r,
                &l.w_f,
                &l.w_t,
                &l.w_o,
                &l.p,
                &l.bn_node_scale,
                &l.bn_node_shift,
                &l.bn_edge_scale,
                &l.bn_edge_shift,
            ]);
        }
        out.extend([
            &self.edge_dec_w1,
            &self.edge_dec_b1,
            &self.edge_dec_w2,
            &self.edge_dec_b2,
            &self.w_beta,
            &self.node_dec_w1,
            &self.node_dec_b1,
            &self.node_dec_w2,
            &self.node_dec_b2,
            &self.w_pi,
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<S>> {
        let mut out = vec![&mut self.node_in_w, &mut self.node_in_b, &mut self.edge_in_w, &mut self.edge_in_b];
        for l in &mut self.layers {
            out.extend([
                &mut l.w_a,
                &mut l.w_s,
                &mut l.w_n,
                &mut l.w_r,
                &mut l.w_f,
                &mut l.w_t,
                &mut l.w_o,
                &mut l.p,
                &mut l.bn_node_scale,
                &mut l.bn_node_shift,
                &mut l.bn_edge_scale,
                &mut l.bn_edge_shift,
            ]);
        }
        out.extend([
            &mut self.edge_dec_w1,
            &mut self.edge_dec_b1,
            &mut self.edge_dec_w2,
            &mut self.edge_dec_b2,
            &mut self.w_beta,
            &mut self.node_dec_w1,
            &mut self.node_dec_b1,
            &mut self.node_dec_w2,
            &mut self.node_dec_b2,
            &mut self.w_pi,
        ]);
        out
    }

    /// Human-readable tensor names, aligned with [`Params::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out: Vec<String> = ["node_in_w", "node_in_b", "edge_in_w", "edge_in_b"].map(String::from).to_vec();
        for l in 0..self.layers.len() {
            for name in [
                "w_a", "w_s", "w_n", "w_r", "w_f", "w_t", "w_o", "p", "bn_node_scale", "bn_node_shift", "bn_edge_scale",
                "bn_edge_shift",
            ] {
                out.push(format!("layer{l}.{name}"));
            }
        }
        out.extend(
            [
                "edge_dec_w1",
                "edge_dec_b1",
                "edge_dec_w2",
                "edge_dec_b2",
                "w_beta",
                "node_dec_w1",
                "node_dec_b1",
                "node_dec_w2",
                "node_dec_b2",
                "w_pi",
            ]
            .map(String::from),
        );
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened copy in declaration order.
    pub fn flatten(&self) -> Vec<S> {
        self.tensors().into_iter().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Running batch-norm statistics of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerStats<S> {
    pub node_mean: Vec<S>,
    pub node_var: Vec<S>,
    pub edge_mean: Vec<S>,
    pub edge_var: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgnModel<S> {
    pub width: usize,
    pub gamma: usize,
    /// Penalty clamp scale `C`.
    pub penalty_scale: S,
    pub params: Params<S>,
    pub running: Vec<LayerStats<S>>,
    /// Bumped on every parameter update so stale caches can be detected.
    pub(crate) generation: u64,
}

/// Trainable scalar count: `5D + L(7D² + 5D) + 2(2D² + 3D)`.
pub fn parameter_count(d: usize, layers: usize) -> usize {
    5 * d + layers * (7 * d * d + 5 * d) + 2 * (2 * d * d + 3 * d)
}

/// Glorot-uniform weights, zero biases, unit BN scale, zero BN shift.
pub fn init_model<S: Scalar>(width: usize, layers: usize, gamma: usize, seed: u64) -> Result<SgnModel<S>> {
    if width < 2 || layers < 1 || gamma < 1 {
        return Err(Error::InvalidArgument(format!("need D >= 2, L >= 1, gamma >= 1; got {width}, {layers}, {gamma}")));
    }
    let d = width;
    let mut rng = rng_from_seed(seed);
    let mut glorot = |fan_out: usize, fan_in: usize| -> Vec<S> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        (0..fan_out * fan_in).map(|_| S::of(rng.random_range(-bound..bound))).collect()
    };
    let mut params = Params::<S>::zeros(d, layers);
    params.node_in_w = glorot(d, 2);
    params.edge_in_w = glorot(d, 1);
    for l in &mut params.layers {
        l.w_a = glorot(d, d);
        l.w_s = glorot(d, d);
        l.w_n = glorot(d, d);
        l.w_r = glorot(d, d);
        l.w_f = glorot(d, d);
        l.w_t = glorot(d, d);
        l.w_o = glorot(d, d);
        l.p = glorot(d, 1);
        l.bn_node_scale = vec![S::one(); d];
        l.bn_edge_scale = vec![S::one(); d];
    }
    params.edge_dec_w1 = glorot(d, d);
    params.edge_dec_w2 = glorot(d, d);
    params.w_beta = glorot(1, d);
    params.node_dec_w1 = glorot(d, d);
    params.node_dec_w2 = glorot(d, d);
    params.w_pi = glorot(1, d);
    let running = (0..layers)
        .map(|_| LayerStats {
            node_mean: vec![S::zero(); d],
            node_var: vec![S::one(); d],
            edge_mean: vec![S::zero(); d],
            edge_var: vec![S::one(); d],
        })
        .collect();
    Ok(SgnModel { width, gamma, penalty_scale: S::of(DEFAULT_PENALTY_SCALE), params, running, generation: 0 })
}

impl<S: Scalar> SgnModel<S> {
    pub fn layers(&self) -> usize {
        self.params.layers.len()
    }

    /// Folds a training-mode forward's batch statistics into the running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<S>) {
        let m = S::of(BN_MOMENTUM);
        let keep = S::one() - m;
        for (stats, layer) in self.running.iter_mut().zip(&cache.layers) {
            let (nn, ne) = (cache.n_nodes as f64, cache.n_edges as f64);
            let node_unbias = S::of(if nn > 1.0 { nn / (nn - 1.0) } else { 1.0 });
            let edge_unbias = S::of(if ne > 1.0 { ne / (ne - 1.0) } else { 1.0 });
            for f in 0..self.width {
                stats.node_mean[f] = keep * stats.node_mean[f] + m * layer.node_bn.mean[f];
                stats.node_var[f] = keep * stats.node_var[f] + m * layer.node_bn.var[f] * node_unbias;
                stats.edge_mean[f] = keep * stats.edge_mean[f] + m * layer.edge_bn.mean[f];
                stats.edge_var[f] = keep * stats.edge_var[f] + m * layer.edge_bn.var[f] * edge_unbias;
            }
        }
    }

    /// Converts every tensor to another scalar type.
    pub fn cast<T: Scalar>(&self) -> SgnModel<T> {
        let conv = |v: &Vec<S>| -> Vec<T> { v.iter().map(|x| T::of(x.as_f64())).collect() };
        let mut params = Params::<T>::zeros(self.width, self.layers());
        for (dst, src) in params.tensors_mut().into_iter().zip(self.params.tensors()) {
            *dst = conv(src);
        }
        SgnModel {
            width: self.width,
            gamma: self.gamma,
            penalty_scale: T::of(self.penalty_scale.as_f64()),
            params,
            running: self
                .running
                .iter()
                .map(|s| LayerStats {
                    node_mean: conv(&s.node_mean),
                    node_var: conv(&s.node_var),
                    edge_mean: conv(&s.edge_mean),
                    edge_var: conv(&s.edge_var),
                })
                .collect(),
            generation: 0,
        }
    }
}
