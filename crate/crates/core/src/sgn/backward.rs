use crate::error::{Error, Result};
use crate::instance::NO_REVERSE;
use crate::scalar::Scalar;

use super::forward::{ForwardCache, Mode};
use super::ops::{batch_norm_backward, linear_backward, relu_backward};
use super::{Params, SgnModel};

fn check_cache<S: Scalar>(model: &SgnModel<S>, cache: &ForwardCache<S>, d_beta: &[S], d_pi: &[S]) -> Result<()> {
    if cache.generation != model.generation {
        return Err(Error::InvalidState("forward cache predates the latest parameter update".into()));
    }
    if d_beta.len() != cache.n_edges || d_pi.len() != cache.n_nodes {
        return Err(Error::InvalidSize(format!(
            "upstream gradients sized {}/{} for {} edges and {} nodes",
            d_beta.len(),
            d_pi.len(),
            cache.n_edges,
            cache.n_nodes
        )));
    }
    Ok(())
}

/// Accumulates node-decoder gradients into `grads` and returns `dL/dv_f`.
fn node_decoder_backward<S: Scalar>(model: &SgnModel<S>, cache: &ForwardCache<S>, d_pi: &[S], grads: &mut Params<S>) -> Vec<S> {
    let (n, d) = (cache.n_nodes, model.width);
    let p = &model.params;
    let du: Vec<S> =
        d_pi.iter().zip(&cache.tanh_u).map(|(&g, &t)| g * model.penalty_scale * (S::one() - t * t)).collect();
    let mut dh2 = vec![S::zero(); n * d];
    linear_backward(&cache.node_h2, n, d, &p.w_pi, 1, &du, &mut grads.w_pi, None, Some(&mut dh2));
    relu_backward(&cache.node_h2, &mut dh2);
    let mut dh1 = vec![S::zero(); n * d];
    linear_backward(
        &cache.node_h1,
        n,
        d,
        &p.node_dec_w2,
        d,
        &dh2,
        &mut grads.node_dec_w2,
        Some(&mut grads.node_dec_b2),
        Some(&mut dh1),
    );
    relu_backward(&cache.node_h1, &mut dh1);
    let mut dv = vec![S::zero(); n * d];
    linear_backward(
        &cache.v_final,
        n,
        d,
        &p.node_dec_w1,
        d,
        &dh1,
        &mut grads.node_dec_w1,
        Some(&mut grads.node_dec_b1),
        Some(&mut dv),
    );
    dv
}

/// Node-decoder gradients for upstream `dL/dπ`; valid for caches of either mode.
pub fn backward_node_decoder<S: Scalar>(model: &SgnModel<S>, cache: &ForwardCache<S>, d_pi: &[S]) -> Result<Params<S>> {
    check_cache(model, cache, &vec![S::zero(); cache.n_edges], d_pi)?;
    let mut grads = model.params.zeros_like();
    node_decoder_backward(model, cache, d_pi, &mut grads);
    Ok(grads)
}

/// Reverse-mode gradients of every parameter given upstream `dL/dβ` and `dL/dπ`.
pub fn backward<S: Scalar>(model: &SgnModel<S>, cache: &ForwardCache<S>, d_beta: &[S], d_pi: &[S]) -> Result<Params<S>> {
    check_cache(model, cache, d_beta, d_pi)?;
    let batch_stats = cache.mode == Mode::Train;
    let d = model.width;
    let (n, e) = (cache.n_nodes, cache.n_edges);
    let batch = &cache.batch;
    let g = batch.gamma;
    let p = &model.params;
    let mut grads = p.zeros_like();

    let mut dv = node_decoder_backward(model, cache, d_pi, &mut grads);

    let mut dz = vec![S::zero(); e];
    for (k, (b, db)) in cache.beta.chunks_exact(g).zip(d_beta.chunks_exact(g)).enumerate() {
        let dot: S = b.iter().zip(db).map(|(&x, &y)| x * y).sum();
        for s in 0..g {
            dz[k * g + s] = b[s] * (db[s] - dot);
        }
    }
    let mut dh2 = vec![S::zero(); e * d];
    linear_backward(&cache.edge_h2, e, d, &p.w_beta, 1, &dz, &mut grads.w_beta, None, Some(&mut dh2));
    relu_backward(&cache.edge_h2, &mut dh2);
    let mut dh1 = vec![S::zero(); e * d];
    linear_backward(
        &cache.edge_h1,
        e,
        d,
        &p.edge_dec_w2,
        d,
        &dh2,
        &mut grads.edge_dec_w2,
        Some(&mut grads.edge_dec_b2),
        Some(&mut dh1),
    );
    relu_backward(&cache.edge_h1, &mut dh1);
    let mut de = vec![S::zero(); e * d];
    linear_backward(
        &cache.e_final,
        e,
        d,
        &p.edge_dec_w1,
        d,
        &dh1,
        &mut grads.edge_dec_w1,
        Some(&mut grads.edge_dec_b1),
        Some(&mut de),
    );

    for (l, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &p.layers[l];
        let lg = &mut grads.layers[l];
        // skip connections carry dv and de through unchanged
        let mut dv_prev = dv.clone();
        let mut de_prev = de.clone();

        let mut dye = de;
        relu_backward(&lc.edge_act, &mut dye);
        let dhe =
            batch_norm_backward(&lc.edge_bn, e, d, &lp.bn_edge_scale, &dye, &mut lg.bn_edge_scale, &mut lg.bn_edge_shift, batch_stats);
        let mut dfv = vec![S::zero(); n * d];
        let mut dtv = vec![S::zero(); n * d];
        let mut dre = vec![S::zero(); e * d];
        let mut drp = vec![S::zero(); d];
        for edge in 0..e {
            let i = edge / g;
            let j = batch.targets[edge];
            let rev = batch.reverse[edge];
            let row = &dhe[edge * d..(edge + 1) * d];
            for f in 0..d {
                dfv[i * d + f] += row[f];
                dtv[j * d + f] += row[f];
            }
            let dst = if rev == NO_REVERSE { &mut drp[..] } else { &mut dre[rev * d..(rev + 1) * d] };
            for f in 0..d {
                dst[f] += row[f];
            }
        }
        linear_backward(&lc.v_in, n, d, &lp.w_f, d, &dfv, &mut lg.w_f, None, Some(&mut dv_prev));
        linear_backward(&lc.v_in, n, d, &lp.w_t, d, &dtv, &mut lg.w_t, None, Some(&mut dv_prev));
        linear_backward(&lc.e_in, e, d, &lp.w_o, d, &dhe, &mut lg.w_o, None, Some(&mut de_prev));
        linear_backward(&lc.e_in, e, d, &lp.w_r, d, &dre, &mut lg.w_r, None, Some(&mut de_prev));
        linear_backward(&lp.p, 1, d, &lp.w_r, d, &drp, &mut lg.w_r, None, Some(&mut lg.p));

        let mut dyn_ = dv;
        relu_backward(&lc.node_act, &mut dyn_);
        let dhn =
            batch_norm_backward(&lc.node_bn, n, d, &lp.bn_node_scale, &dyn_, &mut lg.bn_node_scale, &mut lg.bn_node_shift, batch_stats);
        linear_backward(&lc.v_in, n, d, &lp.w_s, d, &dhn, &mut lg.w_s, None, Some(&mut dv_prev));
        let mut dattn = vec![S::zero(); e * d];
        let mut dnv = vec![S::zero(); n * d];
        for (edge, &j) in batch.targets.iter().enumerate() {
            let i = edge / g;
            for f in 0..d {
                let up = dhn[i * d + f];
                dattn[edge * d + f] = up * lc.nv[j * d + f];
                dnv[j * d + f] += up * lc.attn[edge * d + f];
            }
        }
        let mut da = vec![S::zero(); e * d];
        for node in 0..n {
            for f in 0..d {
                let mut dot = S::zero();
                for s in 0..g {
                    let k = (node * g + s) * d + f;
                    dot += lc.attn[k] * dattn[k];
                }
                for s in 0..g {
                    let k = (node * g + s) * d + f;
                    da[k] = lc.attn[k] * (dattn[k] - dot);
                }
            }
        }
        linear_backward(&lc.e_in, e, d, &lp.w_a, d, &da, &mut lg.w_a, None, Some(&mut de_prev));
        linear_backward(&lc.v_in, n, d, &lp.w_n, d, &dnv, &mut lg.w_n, None, Some(&mut dv_prev));

        dv = dv_prev;
        de = de_prev;
    }

    linear_backward(&batch.node_x, n, 2, &p.node_in_w, d, &dv, &mut grads.node_in_w, Some(&mut grads.node_in_b), None);
    linear_backward(&batch.edge_x, e, 1, &p.edge_in_w, d, &de, &mut grads.edge_in_w, Some(&mut grads.edge_in_b), None);
    Ok(grads)
}
