use crate::error::{Error, Result};
use crate::instance::{SparseGraph, NO_REVERSE};
use crate::scalar::Scalar;

use super::ops::{batch_norm, linear, relu_in_place, BnRecord};
use super::{SgnModel, BN_EPS};

/// Batch-norm statistics source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Statistics of the current batch.
    Train,
    /// Running averages stored in the model.
    Infer,
}

/// Disjoint union of same-γ graphs with their input features.
#[derive(Clone, Debug)]
pub struct GraphBatch<S> {
    pub n_nodes: usize,
    pub gamma: usize,
    /// Global head node of every edge.
    pub targets: Vec<usize>,
    /// Global opposite-edge index or [`NO_REVERSE`].
    pub reverse: Vec<usize>,
    /// `N × 2` coordinates.
    pub node_x: Vec<S>,
    /// One distance per edge.
    pub edge_x: Vec<S>,
    /// Node offset of each graph, plus the total at the end.
    pub offsets: Vec<usize>,
}

impl<S: Scalar> GraphBatch<S> {
    pub fn single(graph: &SparseGraph, coords: &[[f64; 2]]) -> Result<Self> {
        Self::new(&[(graph, coords)])
    }

    pub fn new(parts: &[(&SparseGraph, &[[f64; 2]])]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidArgument("empty graph batch".into()));
        };
        let gamma = first.0.gamma();
        let mut b = GraphBatch {
            n_nodes: 0,
            gamma,
            targets: Vec::new(),
            reverse: Vec::new(),
            node_x: Vec::new(),
            edge_x: Vec::new(),
            offsets: vec![0],
        };
        for (graph, coords) in parts {
            if graph.gamma() != gamma {
                return Err(Error::InvalidArgument("mixed gamma in one batch".into()));
            }
            if coords.len() != graph.n() {
                return Err(Error::InvalidSize(format!("{} coordinates for {} nodes", coords.len(), graph.n())));
            }
            let (node_base, edge_base) = (b.n_nodes, b.targets.len());
            b.targets.extend(graph.targets().iter().map(|&t| t + node_base));
            b.reverse.extend(graph.reverse_index().iter().map(|&r| if r == NO_REVERSE { r } else { r + edge_base }));
            b.edge_x.extend(graph.edge_distances().iter().map(|&d| S::of(d)));
            b.node_x.extend(coords.iter().flat_map(|p| [S::of(p[0]), S::of(p[1])]));
            b.n_nodes += graph.n();
            b.offsets.push(b.n_nodes);
        }
        Ok(b)
    }

    pub fn n_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn graph_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Network outputs over a batch, flat in batch order.
#[derive(Clone, Debug, PartialEq)]
pub struct SgnOutput<S> {
    pub gamma: usize,
    /// One score per directed edge; each node's `gamma` entries sum to 1.
    pub beta: Vec<S>,
    /// One penalty per node, `|π| ≤ C`.
    pub pi: Vec<S>,
}

impl<S: Scalar> SgnOutput<S> {
    pub fn beta_f64(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b.as_f64()).collect()
    }

    pub fn pi_f64(&self) -> Vec<f64> {
        self.pi.iter().map(|p| p.as_f64()).collect()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LayerCache<S> {
    pub v_in: Vec<S>,
    pub e_in: Vec<S>,
    pub attn: Vec<S>,
    pub nv: Vec<S>,
    pub node_bn: BnRecord<S>,
    pub node_act: Vec<S>,
    pub edge_bn: BnRecord<S>,
    pub edge_act: Vec<S>,
}

/// Intermediate values retained for [`super::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache<S> {
    pub mode: Mode,
    pub(crate) generation: u64,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub(crate) batch: GraphBatch<S>,
    pub(crate) layers: Vec<LayerCache<S>>,
    pub(crate) v_final: Vec<S>,
    pub(crate) e_final: Vec<S>,
    pub(crate) edge_h1: Vec<S>,
    pub(crate) edge_h2: Vec<S>,
    pub(crate) beta: Vec<S>,
    pub(crate) node_h1: Vec<S>,
    pub(crate) node_h2: Vec<S>,
    pub(crate) tanh_u: Vec<S>,
}

fn check_finite<S: Scalar>(v: &[S], stage: &'static str, layer: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericFailure { stage, layer })
    }
}

/// Softmax over each node's `gamma` consecutive entries, feature-wise for width `d`.
pub(crate) fn grouped_softmax<S: Scalar>(x: &[S], gamma: usize, d: usize) -> Vec<S> {
    let mut out = vec![S::zero(); x.len()];
    let group = gamma * d;
    for (src, dst) in x.chunks_exact(group).zip(out.chunks_exact_mut(group)) {
        for f in 0..d {
            let mut mx = S::neg_infinity();
            for s in 0..gamma {
                mx = mx.max(src[s * d + f]);
            }
            let mut total = S::zero();
            for s in 0..gamma {
                let e = (src[s * d + f] - mx).exp();
                dst[s * d + f] = e;
                total += e;
            }
            for s in 0..gamma {
                dst[s * d + f] /= total;
            }
        }
    }
    out
}

/// Runs the encoder and both decoders over `batch`.
pub fn forward<S: Scalar>(model: &SgnModel<S>, batch: &GraphBatch<S>, mode: Mode) -> Result<(SgnOutput<S>, ForwardCache<S>)> {
    if batch.gamma != model.gamma {
        return Err(Error::InvalidArgument(format!("model expects gamma {}, batch has {}", model.gamma, batch.gamma)));
    }
    let d = model.width;
    let (n, e, g) = (batch.n_nodes, batch.n_edges(), batch.gamma);
    let p = &model.params;
    let eps = S::of(BN_EPS);

    let mut v = linear(&batch.node_x, n, 2, &p.node_in_w, d, Some(&p.node_in_b));
    let mut ev = linear(&batch.edge_x, e, 1, &p.edge_in_w, d, Some(&p.edge_in_b));
    check_finite(&v, "node input projection", 0)?;
    check_finite(&ev, "edge input projection", 0)?;

    let mut layers = Vec::with_capacity(p.layers.len());
    for (l, lp) in p.layers.iter().enumerate() {
        let a = linear(&ev, e, d, &lp.w_a, d, None);
        let attn = grouped_softmax(&a, g, d);
        let nv = linear(&v, n, d, &lp.w_n, d, None);
        let mut h = linear(&v, n, d, &lp.w_s, d, None);
        for (edge, &j) in batch.targets.iter().enumerate() {
            let i = edge / g;
            let (hi, aj, nj) = (i * d, edge * d, j * d);
            for f in 0..d {
                h[hi + f] += attn[aj + f] * nv[nj + f];
            }
        }
        let stats = |m: &[S], var: &[S]| match mode {
            Mode::Infer => Some((m.to_vec(), var.to_vec())),
            Mode::Train => None,
        };
        let run = &model.running[l];
        let ns = stats(&run.node_mean, &run.node_var);
        let (mut node_act, node_bn) =
            batch_norm(&h, n, d, &lp.bn_node_scale, &lp.bn_node_shift, ns.as_ref().map(|(a, b)| (&a[..], &b[..])), eps);
        relu_in_place(&mut node_act);

        let fv = linear(&v, n, d, &lp.w_f, d, None);
        let tv = linear(&v, n, d, &lp.w_t, d, None);
        let mut he = linear(&ev, e, d, &lp.w_o, d, None);
        let re = linear(&ev, e, d, &lp.w_r, d, None);
        let rp = linear(&lp.p, 1, d, &lp.w_r, d, None);
        for edge in 0..e {
            let i = edge / g;
            let j = batch.targets[edge];
            let rev = batch.reverse[edge];
            let r = if rev == NO_REVERSE { &rp[..] } else { &re[rev * d..(rev + 1) * d] };
            let row = &mut he[edge * d..(edge + 1) * d];
            for f in 0..d {
                row[f] += fv[i * d + f] + tv[j * d + f] + r[f];
            }
        }
        let es = stats(&run.edge_mean, &run.edge_var);
        let (mut edge_act, edge_bn) =
            batch_norm(&he, e, d, &lp.bn_edge_scale, &lp.bn_edge_shift, es.as_ref().map(|(a, b)| (&a[..], &b[..])), eps);
        relu_in_place(&mut edge_act);

        let v_next: Vec<S> = v.iter().zip(&node_act).map(|(&a, &b)| a + b).collect();
        let e_next: Vec<S> = ev.iter().zip(&edge_act).map(|(&a, &b)| a + b).collect();
        check_finite(&v_next, "node update", l)?;
        check_finite(&e_next, "edge update", l)?;
        layers.push(LayerCache {
            v_in: std::mem::replace(&mut v, v_next),
            e_in: std::mem::replace(&mut ev, e_next),
            attn,
            nv,
            node_bn,
            node_act,
            edge_bn,
            edge_act,
        });
    }

    let mut edge_h1 = linear(&ev, e, d, &p.edge_dec_w1, d, Some(&p.edge_dec_b1));
    relu_in_place(&mut edge_h1);
    let mut edge_h2 = linear(&edge_h1, e, d, &p.edge_dec_w2, d, Some(&p.edge_dec_b2));
    relu_in_place(&mut edge_h2);
    let z = linear(&edge_h2, e, d, &p.w_beta, 1, None);
    let beta = grouped_softmax(&z, g, 1);
    check_finite(&beta, "edge decoder", p.layers.len())?;

    let mut node_h1 = linear(&v, n, d, &p.node_dec_w1, d, Some(&p.node_dec_b1));
    relu_in_place(&mut node_h1);
    let mut node_h2 = linear(&node_h1, n, d, &p.node_dec_w2, d, Some(&p.node_dec_b2));
    relu_in_place(&mut node_h2);
    let u = linear(&node_h2, n, d, &p.w_pi, 1, None);
    let tanh_u: Vec<S> = u.iter().map(|x| x.tanh()).collect();
    let pi: Vec<S> = tanh_u.iter().map(|&t| model.penalty_scale * t).collect();
    check_finite(&pi, "node decoder", p.layers.len())?;

    let out = SgnOutput { gamma: g, beta: beta.clone(), pi };
    let cache = ForwardCache {
        mode,
        generation: model.generation,
        n_nodes: n,
        n_edges: e,
        batch: batch.clone(),
        layers,
        v_final: v,
        e_final: ev,
        edge_h1,
        edge_h2,
        beta,
        node_h1,
        node_h2,
        tanh_u,
    };
    Ok((out, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_sparse_graph, generate_uniform};
    use crate::sgn::init_model;

    fn batch_for(n: usize, gamma: usize, seed: u64) -> (crate::instance::TspInstance, SparseGraph) {
        let inst = generate_uniform(n, seed).unwrap();
        let g = build_sparse_graph(&inst, gamma).unwrap();
        (inst, g)
    }

    #[test]
    fn outputs_are_finite_and_well_formed() {
        let model = init_model::<f64>(8, 3, 4, 1).unwrap();
        let (inst, g) = batch_for(15, 4, 2);
        let batch = GraphBatch::single(&g, inst.coords()).unwrap();
        for mode in [Mode::Train, Mode::Infer] {
            let (out, _) = forward(&model, &batch, mode).unwrap();
            assert_eq!(out.beta.len(), 60);
            assert_eq!(out.pi.len(), 15);
            for row in out.beta.chunks(4) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                assert!(row.iter().all(|&b| b > 0.0 && b < 1.0));
            }
            assert!(out.pi.iter().all(|p| p.abs() <= 10.0));
        }
    }

    #[test]
    fn zero_decoders_give_uniform_scores() {
        let mut model = init_model::<f32>(6, 2, 5, 3).unwrap();
        model.params.w_beta.iter_mut().for_each(|w| *w = 0.0);
        model.params.w_pi.iter_mut().for_each(|w| *w = 0.0);
        let (inst, g) = batch_for(12, 5, 4);
        let (out, _) = forward(&model, &GraphBatch::single(&g, inst.coords()).unwrap(), Mode::Infer).unwrap();
        assert!(out.beta.iter().all(|&b| (b - 0.2).abs() < 1e-7));
        assert!(out.pi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn saturated_penalties_stay_clamped() {
        let mut model = init_model::<f64>(4, 1, 3, 5).unwrap();
        model.params.w_pi.iter_mut().for_each(|w| *w *= 1e6);
        let (inst, g) = batch_for(9, 3, 6);
        let (out, _) = forward(&model, &GraphBatch::single(&g, inst.coords()).unwrap(), Mode::Infer).unwrap();
        assert!(out.pi.iter().all(|p| p.abs() <= 10.0));
    }

    #[test]
    fn permutation_equivariance() {
        let model = init_model::<f64>(8, 3, 4, 7).unwrap();
        let (inst, g) = batch_for(14, 4, 8);
        let perm: Vec<usize> = (0..14).map(|i| (i * 5 + 3) % 14).collect();
        let mut coords = vec![[0.0; 2]; 14];
        for i in 0..14 {
            coords[perm[i]] = inst.coords()[i];
        }
        let pg = g.permuted(&perm);
        for mode in [Mode::Train, Mode::Infer] {
            let (a, _) = forward(&model, &GraphBatch::single(&g, inst.coords()).unwrap(), mode).unwrap();
            let (b, _) = forward(&model, &GraphBatch::single(&pg, &coords).unwrap(), mode).unwrap();
            for i in 0..14 {
                assert!((a.pi[i] - b.pi[perm[i]]).abs() < 1e-6);
                for s in 0..4 {
                    assert!((a.beta[i * 4 + s] - b.beta[perm[i] * 4 + s]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn batch_union_offsets_and_errors() {
        let (i1, g1) = batch_for(6, 3, 1);
        let (i2, g2) = batch_for(6, 3, 2);
        let b = GraphBatch::<f32>::new(&[(&g1, i1.coords()), (&g2, i2.coords())]).unwrap();
        assert_eq!(b.offsets, vec![0, 6, 12]);
        assert!(b.targets[18..].iter().all(|&t| t >= 6));
        let (i3, g3) = batch_for(6, 2, 3);
        assert!(GraphBatch::<f32>::new(&[(&g1, i1.coords()), (&g3, i3.coords())]).is_err());
        assert!(GraphBatch::<f32>::single(&g1, &i1.coords()[..5]).is_err());
        let model = init_model::<f32>(4, 1, 2, 0).unwrap();
        assert!(forward(&model, &b, Mode::Infer).is_err());
    }

    #[test]
    fn non_finite_input_reports_failure() {
        let model = init_model::<f64>(4, 2, 3, 0).unwrap();
        let (inst, g) = batch_for(8, 3, 1);
        let mut b = GraphBatch::single(&g, inst.coords()).unwrap();
        b.edge_x[0] = f64::NAN;
        assert!(matches!(forward(&model, &b, Mode::Infer), Err(Error::NumericFailure { .. })));
    }
}
