use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::instance::{build_sparse_graph, generate_uniform, SparseGraph, TspInstance};
use crate::oracle::tour_edge_indicator;
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;
use crate::search::Tour;

use super::backward::{backward, backward_node_decoder};
use super::forward::{forward, GraphBatch, Mode, SgnOutput};
use super::loss::{edge_loss, node_loss_from_degrees, one_tree_degrees};
use super::{Params, SgnModel, NODE_DECODER_TENSORS};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub m: Params<S>,
    pub v: Params<S>,
    pub t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(model: &SgnModel<S>) -> Self {
        AdamState { m: model.params.zeros_like(), v: model.params.zeros_like(), t: 0 }
    }
}

/// Bias-corrected Adam update. Tensors whose `mask` entry is false are left untouched.
pub fn adam_step<S: Scalar>(
    model: &mut SgnModel<S>,
    grads: &Params<S>,
    state: &mut AdamState<S>,
    lr: f64,
    mask: Option<&[bool]>,
) -> Result<()> {
    let sizes = |p: &Params<S>| p.tensors().iter().map(|t| t.len()).collect::<Vec<_>>();
    let expected = sizes(&model.params);
    if sizes(grads) != expected || sizes(&state.m) != expected || sizes(&state.v) != expected {
        return Err(Error::InvalidSize("optimizer state does not match the model".into()));
    }
    if mask.is_some_and(|m| m.len() != expected.len()) {
        return Err(Error::InvalidSize("mask length".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (S::of(ADAM_BETA1), S::of(ADAM_BETA2));
    let c1 = S::of(1.0 - ADAM_BETA1.powi(t));
    let c2 = S::of(1.0 - ADAM_BETA2.powi(t));
    let (lr, eps) = (S::of(lr), S::of(ADAM_EPS));
    let params = model.params.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (k, (((p, g), m), v)) in params.into_iter().zip(grads.tensors()).zip(ms).zip(vs).enumerate() {
        if mask.is_some_and(|mask| !mask[k]) {
            continue;
        }
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (S::one() - b1) * g[i];
            v[i] = b2 * v[i] + (S::one() - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    model.generation += 1;
    Ok(())
}

/// Normalised instance, its sparse graph, and per-edge optimal-tour labels.
#[derive(Clone, Debug)]
pub struct LabeledGraph {
    pub instance: TspInstance,
    pub graph: SparseGraph,
    pub labels: Vec<bool>,
}

/// Unit-square copy of `inst` and its sparse graph, with the scale factor
/// mapping network penalties back to original units.
pub fn prepare_input(inst: &TspInstance, gamma: usize) -> Result<(TspInstance, SparseGraph, f64)> {
    let (norm, scale) = inst.normalize_unit_square()?;
    let graph = build_sparse_graph(&norm, gamma)?;
    Ok((norm, graph, scale))
}

impl LabeledGraph {
    pub fn new(inst: &TspInstance, gamma: usize, optimal: &Tour) -> Result<Self> {
        if optimal.n() != inst.n() {
            return Err(Error::InvalidSize("label tour size".into()));
        }
        let (instance, graph, _) = prepare_input(inst, gamma)?;
        let labels = tour_edge_indicator(&graph, optimal);
        Ok(LabeledGraph { instance, graph, labels })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_graphs: usize,
    pub eta_pi: f64,
    pub seed: u64,
    /// Normalisation used by the training forwards. [`Mode::Infer`] freezes
    /// the running statistics.
    pub mode: Mode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, epochs: 16, batch_graphs: 32, eta_pi: 1.0, seed: 0, mode: Mode::Train }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.eta_pi >= 0.0 && self.eta_pi.is_finite()) || self.batch_graphs == 0 {
            return Err(Error::InvalidArgument(format!(
                "need lr > 0, eta_pi >= 0, batch_graphs >= 1; got {}, {}, {}",
                self.lr, self.eta_pi, self.batch_graphs
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub edge_loss: f64,
    pub node_loss: f64,
    /// `edge_loss + eta_pi · node_loss`.
    pub total_loss: f64,
    pub batches: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    /// `epoch edge_loss node_loss total_loss` per line.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            writeln!(out, "{} {:.9e} {:.9e} {:.9e}", e.epoch, e.edge_loss, e.node_loss, e.total_loss).unwrap();
        }
        out
    }
}

/// Penalty losses per graph and `dL/dπ` for the whole batch.
fn penalty_terms<S: Scalar>(
    out: &SgnOutput<S>,
    instances: &[&TspInstance],
    offsets: &[usize],
    weight: f64,
) -> Result<(f64, Vec<S>, Vec<usize>)> {
    let graphs = instances.len() as f64;
    let mut value = 0.0;
    let mut d_pi = vec![S::zero(); out.pi.len()];
    let mut all_degrees = Vec::with_capacity(out.pi.len());
    for (k, inst) in instances.iter().enumerate() {
        let (lo, hi) = (offsets[k], offsets[k + 1]);
        let pi: Vec<f64> = out.pi[lo..hi].iter().map(|p| p.as_f64()).collect();
        let degrees = one_tree_degrees(inst, &pi)?;
        value += node_loss_from_degrees(&pi, &degrees) / graphs;
        let scale = weight / ((hi - lo) as f64 * graphs);
        for (i, &d) in degrees.iter().enumerate() {
            d_pi[lo + i] = S::of(-(d as f64 - 2.0) * scale);
        }
        all_degrees.extend(degrees);
    }
    Ok((value, d_pi, all_degrees))
}

/// Same-size mini-batches over a shuffled dataset.
fn epoch_batches(data: &[LabeledGraph], batch: usize, rng: &mut crate::rng::ProjectRng) -> Vec<Vec<usize>> {
    let mut sizes: Vec<usize> = data.iter().map(|g| g.instance.n()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut out = Vec::new();
    for n in sizes {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data[i].instance.n() == n).collect();
        idx.shuffle(rng);
        out.extend(idx.chunks(batch).map(<[usize]>::to_vec));
    }
    out.shuffle(rng);
    out
}

/// Minimises `L_β + η_π L_π` with Adam over `cfg.epochs` passes.
pub fn train<S: Scalar>(mut model: SgnModel<S>, data: &[LabeledGraph], cfg: &TrainConfig) -> Result<(SgnModel<S>, TrainingLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if let Some(bad) = data.iter().find(|g| g.graph.gamma() != model.gamma || g.labels.len() != g.graph.edge_count()) {
        return Err(Error::InvalidArgument(format!(
            "training graph with gamma {} and {} labels does not fit a gamma {} model",
            bad.graph.gamma(),
            bad.labels.len(),
            model.gamma
        )));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut adam = AdamState::new(&model);
    let mut log = TrainingLog::default();
    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(data, cfg.batch_graphs, &mut rng);
        let (mut sum_edge, mut sum_node, mut weight) = (0.0, 0.0, 0.0);
        for idx in &batches {
            let parts: Vec<(&SparseGraph, &[[f64; 2]])> =
                idx.iter().map(|&i| (&data[i].graph, data[i].instance.coords())).collect();
            let batch = GraphBatch::<S>::new(&parts)?;
            let labels: Vec<bool> = idx.iter().flat_map(|&i| data[i].labels.iter().copied()).collect();
            let (out, cache) = forward(&model, &batch, cfg.mode)?;
            let el = edge_loss(&out, &labels, &batch.offsets)?;
            let instances: Vec<&TspInstance> = idx.iter().map(|&i| &data[i].instance).collect();
            let (nl, d_pi, _) = penalty_terms(&out, &instances, &batch.offsets, cfg.eta_pi)?;
            let grads = backward(&model, &cache, &el.d_beta, &d_pi)?;
            if cfg.mode == Mode::Train {
                model.update_running_stats(&cache);
            }
            adam_step(&mut model, &grads, &mut adam, cfg.lr, None)?;
            let w = idx.len() as f64;
            sum_edge += el.value * w;
            sum_node += nl * w;
            weight += w;
        }
        let (edge, node) = (sum_edge / weight, sum_node / weight);
        log.epochs.push(EpochLog { epoch, edge_loss: edge, node_loss: node, total_loss: edge + cfg.eta_pi * node, batches: batches.len() });
    }
    if !model.params.all_finite() {
        return Err(Error::NumericFailure { stage: "training", layer: model.layers() });
    }
    Ok((model, log))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub inst_size: usize,
    pub iterations: usize,
    pub batch_graphs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl FinetuneConfig {
    /// 100 iterations with `max(1, 5000 / n)` graphs per batch.
    pub fn new(inst_size: usize, seed: u64) -> Self {
        FinetuneConfig { inst_size, iterations: 100, batch_graphs: (5000 / inst_size.max(1)).max(1), lr: 1e-3, seed }
    }
}

/// Adapts the node decoder alone to instances of `cfg.inst_size` using the
/// penalty loss on freshly generated uniform instances. Encoder, edge decoder
/// and normalisation statistics stay bit-identical.
pub fn finetune_node_decoder<S: Scalar>(mut model: SgnModel<S>, cfg: &FinetuneConfig) -> Result<SgnModel<S>> {
    if cfg.inst_size <= model.gamma || cfg.batch_graphs == 0 || !(cfg.lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fine-tuning needs n > gamma, a non-empty batch and lr > 0; got n = {}, batch {}, lr {}",
            cfg.inst_size, cfg.batch_graphs, cfg.lr
        )));
    }
    let tensors = model.params.tensors().len();
    let mask: Vec<bool> = (0..tensors).map(|k| k >= tensors - NODE_DECODER_TENSORS).collect();
    let mut adam = AdamState::new(&model);
    for it in 0..cfg.iterations {
        let mut prepared = Vec::with_capacity(cfg.batch_graphs);
        for k in 0..cfg.batch_graphs {
            let seed = derive_seed(cfg.seed, (it * cfg.batch_graphs + k) as u64);
            let (norm, graph, _) = prepare_input(&generate_uniform(cfg.inst_size, seed)?, model.gamma)?;
            prepared.push((norm, graph));
        }
        let parts: Vec<(&SparseGraph, &[[f64; 2]])> = prepared.iter().map(|(i, g)| (g, i.coords())).collect();
        let batch = GraphBatch::<S>::new(&parts)?;
        let (out, cache) = forward(&model, &batch, Mode::Infer)?;
        let instances: Vec<&TspInstance> = prepared.iter().map(|(i, _)| i).collect();
        let (_, d_pi, _) = penalty_terms(&out, &instances, &batch.offsets, 1.0)?;
        let grads = backward_node_decoder(&model, &cache, &d_pi)?;
        adam_step(&mut model, &grads, &mut adam, cfg.lr, Some(&mask))?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_held_karp;
    use crate::sgn::init_model;

    fn dataset(count: usize, n: usize, gamma: usize, seed: u64) -> Vec<LabeledGraph> {
        (0..count)
            .map(|k| {
                let inst = generate_uniform(n, derive_seed(seed, k as u64)).unwrap();
                let opt = exact_held_karp(&inst).unwrap();
                LabeledGraph::new(&inst, gamma, &opt.tour).unwrap()
            })
            .collect()
    }

    #[test]
    fn adam_first_step_is_sign_like() {
        let mut model = init_model::<f64>(4, 1, 2, 0).unwrap();
        let before = model.params.clone();
        let mut grads = model.params.zeros_like();
        grads.w_pi = vec![5.0, -3.0, 100.0, -0.5];
        let mut st = AdamState::new(&model);
        adam_step(&mut model, &grads, &mut st, 0.01, None).unwrap();
        for k in 0..4 {
            let moved = model.params.w_pi[k] - before.w_pi[k];
            assert!((moved + 0.01 * grads.w_pi[k].signum()).abs() < 1e-8);
        }
        assert_eq!(model.params.w_beta, before.w_beta);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_zero_grads_and_mask() {
        let mut model = init_model::<f32>(4, 2, 2, 1).unwrap();
        let before = model.params.clone();
        let zeros = model.params.zeros_like();
        let mut st = AdamState::new(&model);
        adam_step(&mut model, &zeros, &mut st, 0.1, None).unwrap();
        assert_eq!(model.params, before);
        let mut ones = model.params.zeros_like();
        ones.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|x| *x = 1.0));
        let n = ones.tensors().len();
        let mask: Vec<bool> = (0..n).map(|k| k == n - 1).collect();
        adam_step(&mut model, &ones, &mut st, 0.1, Some(&mask)).unwrap();
        assert_eq!(model.params.w_beta, before.w_beta);
        assert_ne!(model.params.w_pi, before.w_pi);
        let other = init_model::<f32>(5, 2, 2, 1).unwrap();
        assert!(adam_step(&mut model, &other.params, &mut st, 0.1, None).is_err());
    }

    #[test]
    fn training_is_deterministic_and_logs_every_epoch() {
        let data = dataset(6, 8, 3, 1);
        let cfg = TrainConfig { epochs: 3, batch_graphs: 4, seed: 9, ..TrainConfig::default() };
        let m0 = init_model::<f32>(6, 2, 3, 2).unwrap();
        let (a, la) = train(m0.clone(), &data, &cfg).unwrap();
        let (b, lb) = train(m0.clone(), &data, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(la, lb);
        assert_eq!(la.epochs.len(), 3);
        assert!(la.epochs.iter().all(|e| e.batches == 2));
        for e in &la.epochs {
            assert!((e.total_loss - (e.edge_loss + cfg.eta_pi * e.node_loss)).abs() < 1e-9);
        }
        assert!(train(m0.clone(), &[], &cfg).is_err());
        assert!(train(m0, &data, &TrainConfig { lr: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn zero_penalty_weight_leaves_penalty_head_untouched() {
        let data = dataset(4, 8, 3, 2);
        let cfg = TrainConfig { epochs: 2, batch_graphs: 2, eta_pi: 0.0, ..TrainConfig::default() };
        let m0 = init_model::<f64>(4, 1, 3, 3).unwrap();
        let (m, _) = train(m0.clone(), &data, &cfg).unwrap();
        assert_eq!(m.params.w_pi, m0.params.w_pi);
        assert_eq!(m.params.node_dec_w1, m0.params.node_dec_w1);
        assert_ne!(m.params.w_beta, m0.params.w_beta);
    }

    /// Smallest edge loss reachable on the per-node simplex: a node with `k`
    /// optimal out-edges does best with `β = 1/k` on each.
    fn simplex_floor(data: &[LabeledGraph]) -> f64 {
        let per_graph = |g: &LabeledGraph| {
            let gamma = g.graph.gamma();
            let total: f64 = g
                .labels
                .chunks(gamma)
                .map(|row| {
                    let k = row.iter().filter(|&&y| y).count() as f64;
                    if k > 0.0 { k * k.ln() } else { 0.0 }
                })
                .sum();
            total / g.labels.len() as f64
        };
        data.iter().map(per_graph).sum::<f64>() / data.len() as f64
    }

    #[test]
    fn overfits_a_tiny_dataset() {
        let data = dataset(10, 12, 4, 3);
        let cfg = TrainConfig { epochs: 300, batch_graphs: 10, eta_pi: 0.0, lr: 3e-3, seed: 1, mode: Mode::Train };
        let (_, log) = train(init_model::<f32>(16, 3, 4, 4).unwrap(), &data, &cfg).unwrap();
        let floor = simplex_floor(&data);
        let first = log.epochs[0].edge_loss;
        let last = log.epochs.last().unwrap().edge_loss;
        assert!(last - floor < 0.1 * (first - floor), "edge loss {first} -> {last}, floor {floor}");
    }

    #[test]
    fn finetune_freezes_everything_but_the_node_decoder() {
        let m0 = init_model::<f32>(6, 2, 4, 5).unwrap();
        let cfg = FinetuneConfig { iterations: 3, batch_graphs: 2, ..FinetuneConfig::new(12, 1) };
        let m = finetune_node_decoder(m0.clone(), &cfg).unwrap();
        let (a, b) = (m.params.tensors(), m0.params.tensors());
        let k = a.len() - NODE_DECODER_TENSORS;
        assert!(a[..k] == b[..k]);
        assert!(a[k..] != b[k..]);
        assert_eq!(m.running, m0.running);
        let same = finetune_node_decoder(m0.clone(), &FinetuneConfig { iterations: 0, ..cfg }).unwrap();
        assert_eq!(same.params, m0.params);
        assert_eq!(FinetuneConfig::new(32, 0).batch_graphs, 156);
        assert_eq!(FinetuneConfig::new(9000, 0).batch_graphs, 1);
    }
}
