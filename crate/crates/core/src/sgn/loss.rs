use crate::error::{Error, Result};
use crate::instance::TspInstance;
use crate::onetree::minimum_one_tree;
use crate::scalar::Scalar;
use crate::subgrad::PiVector;

use super::forward::SgnOutput;

/// β is clamped to `[ε, 1 − ε]` inside the logarithms.
pub const BETA_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeLoss<S> {
    pub value: f64,
    pub d_beta: Vec<S>,
}

/// Binary cross-entropy of β against optimal-edge labels, averaged over each
/// graph's `γ |V|` edges and then over the graphs delimited by `offsets`.
pub fn edge_loss<S: Scalar>(out: &SgnOutput<S>, labels: &[bool], offsets: &[usize]) -> Result<EdgeLoss<S>> {
    let g = out.gamma;
    if labels.len() != out.beta.len() || offsets.last().map(|&n| n * g) != Some(labels.len()) {
        return Err(Error::InvalidSize(format!("{} labels for {} edges", labels.len(), out.beta.len())));
    }
    let graphs = offsets.len() - 1;
    let mut value = 0.0;
    let mut d_beta = vec![S::zero(); labels.len()];
    for w in offsets.windows(2) {
        let (lo, hi) = (w[0] * g, w[1] * g);
        let scale = 1.0 / ((hi - lo) as f64 * graphs as f64);
        let mut sum = 0.0;
        for k in lo..hi {
            let raw = out.beta[k].as_f64();
            let b = raw.clamp(BETA_CLAMP, 1.0 - BETA_CLAMP);
            let inside = raw > BETA_CLAMP && raw < 1.0 - BETA_CLAMP;
            if labels[k] {
                sum += b.ln();
                if inside {
                    d_beta[k] = S::of(-scale / b);
                }
            } else {
                sum += (1.0 - b).ln();
                if inside {
                    d_beta[k] = S::of(scale / (1.0 - b));
                }
            }
        }
        value -= sum * scale;
    }
    Ok(EdgeLoss { value, d_beta })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeLoss {
    pub value: f64,
    pub degrees: Vec<usize>,
}

/// Node degrees of the minimum 1-tree under penalties `pi`.
pub fn one_tree_degrees(inst: &TspInstance, pi: &[f64]) -> Result<Vec<usize>> {
    Ok(minimum_one_tree(inst, &PiVector::from(pi.to_vec()))?.degrees)
}

/// `−(1/|V|) Σ (d_i − 2) π_i` for given degrees.
pub fn node_loss_from_degrees(pi: &[f64], degrees: &[usize]) -> f64 {
    let n = pi.len() as f64;
    -pi.iter().zip(degrees).map(|(&p, &d)| (d as f64 - 2.0) * p).sum::<f64>() / n
}

/// Penalty loss with degrees read from the minimum 1-tree of `inst` under `pi`.
pub fn node_loss(pi: &[f64], inst: &TspInstance) -> Result<NodeLoss> {
    if pi.len() != inst.n() {
        return Err(Error::InvalidSize(format!("{} penalties for {} nodes", pi.len(), inst.n())));
    }
    let degrees = one_tree_degrees(inst, pi)?;
    Ok(NodeLoss { value: node_loss_from_degrees(pi, &degrees), degrees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgn::forward::grouped_softmax;
    use crate::testutil::unit_square;

    fn out(beta: Vec<f64>, gamma: usize) -> SgnOutput<f64> {
        let n = beta.len() / gamma;
        SgnOutput { gamma, beta, pi: vec![0.0; n] }
    }

    #[test]
    fn hand_evaluated_edge_loss() {
        let l = edge_loss(&out(vec![0.5, 0.5], 2), &[true, false], &[0, 1]).unwrap();
        assert!((l.value - 2f64.ln()).abs() < 1e-15);
        let tiny = edge_loss(&out(vec![1e-14, 1e-14], 2), &[false, false], &[0, 1]).unwrap();
        assert!(tiny.value.abs() < 1e-12);
        assert!(edge_loss(&out(vec![0.5, 0.5], 2), &[true], &[0, 1]).is_err());
    }

    #[test]
    fn clamped_zero_score_on_an_optimal_edge_is_finite() {
        let l = edge_loss(&out(vec![0.0, 1.0], 2), &[true, false], &[0, 1]).unwrap();
        assert!(l.value.is_finite());
        assert_eq!(l.d_beta, vec![0.0, 0.0]);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let gamma = 4;
        let z: Vec<f64> = vec![0.3, -1.2, 0.8, 0.1, 2.0, -0.5, 0.0, 0.4];
        let labels = [true, false, true, false, false, true, false, true];
        let loss_of = |z: &[f64]| edge_loss(&out(grouped_softmax(z, gamma, 1), gamma), &labels, &[0, 2]).unwrap();
        let base = loss_of(&z);
        let beta = grouped_softmax(&z, gamma, 1);
        for k in 0..z.len() {
            let node = k / gamma;
            let row = node * gamma..(node + 1) * gamma;
            let dot: f64 = row.clone().map(|t| beta[t] * base.d_beta[t]).sum();
            let analytic = beta[k] * (base.d_beta[k] - dot);
            let h = 1e-6;
            let mut zp = z.clone();
            zp[k] += h;
            let mut zm = z.clone();
            zm[k] -= h;
            let fd = (loss_of(&zp).value - loss_of(&zm).value) / (2.0 * h);
            assert!((analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6) < 1e-4);
        }
    }

    #[test]
    fn node_loss_examples() {
        assert_eq!(node_loss_from_degrees(&[1.0, 2.0, 3.0, 4.0], &[2, 2, 2, 2]), 0.0);
        assert_eq!(node_loss_from_degrees(&[1.0, 0.0, 0.0, 0.0], &[3, 1, 2, 2]), -0.25);
        let sq = unit_square();
        let l = node_loss(&[0.3, -0.2, 0.1, 0.0], &sq).unwrap();
        assert_eq!(l.degrees.iter().sum::<usize>(), 8);
        assert!(node_loss(&[0.0; 3], &sq).is_err());
    }
}
