//! Dense kernels shared by the forward and backward passes.

use crate::scalar::Scalar;

/// `y[r] = W x[r] + b` for `rows` inputs of width `inp`; `w` is `out × inp` row-major.
pub(crate) fn linear<S: Scalar>(x: &[S], rows: usize, inp: usize, w: &[S], out: usize, bias: Option<&[S]>) -> Vec<S> {
    debug_assert_eq!(x.len(), rows * inp);
    debug_assert_eq!(w.len(), out * inp);
    let mut wt = vec![S::zero(); inp * out];
    for o in 0..out {
        for i in 0..inp {
            wt[i * out + o] = w[o * inp + i];
        }
    }
    let mut y = vec![S::zero(); rows * out];
    for r in 0..rows {
        let yr = &mut y[r * out..(r + 1) * out];
        if let Some(b) = bias {
            yr.copy_from_slice(b);
        }
        for (i, &a) in x[r * inp..(r + 1) * inp].iter().enumerate() {
            for (yv, &wv) in yr.iter_mut().zip(&wt[i * out..(i + 1) * out]) {
                *yv += a * wv;
            }
        }
    }
    y
}

/// Accumulates gradients of [`linear`]: `dw += dyᵀ x`, `db += Σ dy`, and
/// `dx += dy W` when `dx` is given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<S: Scalar>(
    x: &[S],
    rows: usize,
    inp: usize,
    w: &[S],
    out: usize,
    dy: &[S],
    dw: &mut [S],
    db: Option<&mut [S]>,
    dx: Option<&mut [S]>,
) {
    debug_assert_eq!(dy.len(), rows * out);
    for r in 0..rows {
        let xr = &x[r * inp..(r + 1) * inp];
        for (o, &g) in dy[r * out..(r + 1) * out].iter().enumerate() {
            if g == S::zero() {
                continue;
            }
            for (d, &xv) in dw[o * inp..(o + 1) * inp].iter_mut().zip(xr) {
                *d += g * xv;
            }
        }
    }
    if let Some(db) = db {
        for r in 0..rows {
            for (d, &g) in db.iter_mut().zip(&dy[r * out..(r + 1) * out]) {
                *d += g;
            }
        }
    }
    if let Some(dx) = dx {
        for r in 0..rows {
            let dxr = &mut dx[r * inp..(r + 1) * inp];
            for (o, &g) in dy[r * out..(r + 1) * out].iter().enumerate() {
                if g == S::zero() {
                    continue;
                }
                for (d, &wv) in dxr.iter_mut().zip(&w[o * inp..(o + 1) * inp]) {
                    *d += g * wv;
                }
            }
        }
    }
}

pub(crate) fn relu_in_place<S: Scalar>(x: &mut [S]) {
    for v in x {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Zeros `dy` wherever the ReLU output was not positive.
pub(crate) fn relu_backward<S: Scalar>(activated: &[S], dy: &mut [S]) {
    for (g, &a) in dy.iter_mut().zip(activated) {
        if a <= S::zero() {
            *g = S::zero();
        }
    }
}

/// Per-feature normalisation record for one batch-norm application.
#[derive(Clone, Debug)]
pub(crate) struct BnRecord<S> {
    /// Batch mean and biased variance; running stats when inferring.
    pub mean: Vec<S>,
    pub var: Vec<S>,
    pub inv_std: Vec<S>,
    pub xhat: Vec<S>,
}

/// `y = scale · (h − μ) / √(σ² + ε) + shift` over `rows × d`.
pub(crate) fn batch_norm<S: Scalar>(
    h: &[S],
    rows: usize,
    d: usize,
    scale: &[S],
    shift: &[S],
    stats: Option<(&[S], &[S])>,
    eps: S,
) -> (Vec<S>, BnRecord<S>) {
    let (mean, var) = match stats {
        Some((m, v)) => (m.to_vec(), v.to_vec()),
        None => {
            let inv_n = S::one() / S::of(rows as f64);
            let mut mean = vec![S::zero(); d];
            for r in 0..rows {
                for (m, &v) in mean.iter_mut().zip(&h[r * d..(r + 1) * d]) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m *= inv_n);
            let mut var = vec![S::zero(); d];
            for r in 0..rows {
                for f in 0..d {
                    let c = h[r * d + f] - mean[f];
                    var[f] += c * c;
                }
            }
            var.iter_mut().for_each(|v| *v *= inv_n);
            (mean, var)
        }
    };
    let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![S::zero(); rows * d];
    let mut y = vec![S::zero(); rows * d];
    for r in 0..rows {
        for f in 0..d {
            let k = r * d + f;
            xhat[k] = (h[k] - mean[f]) * inv_std[f];
            y[k] = scale[f] * xhat[k] + shift[f];
        }
    }
    (y, BnRecord { mean, var, inv_std, xhat })
}

/// Backward through [`batch_norm`]; returns `dh`. With `batch_stats` false the
/// statistics were constants and the map is affine.
#[allow(clippy::too_many_arguments)]
pub(crate) fn batch_norm_backward<S: Scalar>(
    rec: &BnRecord<S>,
    rows: usize,
    d: usize,
    scale: &[S],
    dy: &[S],
    dscale: &mut [S],
    dshift: &mut [S],
    batch_stats: bool,
) -> Vec<S> {
    let mut sum_dy = vec![S::zero(); d];
    let mut sum_dy_xhat = vec![S::zero(); d];
    for r in 0..rows {
        for f in 0..d {
            let k = r * d + f;
            sum_dy[f] += dy[k];
            sum_dy_xhat[f] += dy[k] * rec.xhat[k];
        }
    }
    for f in 0..d {
        dscale[f] += sum_dy_xhat[f];
        dshift[f] += sum_dy[f];
    }
    let mut dh = vec![S::zero(); rows * d];
    if !batch_stats {
        for r in 0..rows {
            for f in 0..d {
                let k = r * d + f;
                dh[k] = dy[k] * scale[f] * rec.inv_std[f];
            }
        }
        return dh;
    }
    let inv_n = S::one() / S::of(rows as f64);
    for r in 0..rows {
        for f in 0..d {
            let k = r * d + f;
            let dxhat = dy[k] * scale[f];
            let mean_dxhat = sum_dy[f] * scale[f] * inv_n;
            let mean_dxhat_xhat = sum_dy_xhat[f] * scale[f] * inv_n;
            dh[k] = rec.inv_std[f] * (dxhat - mean_dxhat - rec.xhat[k] * mean_dxhat_xhat);
        }
    }
    dh
}
