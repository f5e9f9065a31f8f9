//! Model file: an ASCII header line `SGN1 <D> <L> <gamma> <C>` followed by
//! every tensor as little-endian `f32`, in field order. Each layer's running
//! batch-norm statistics follow the corresponding scale and shift.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{init_model, SgnModel};

pub const MODEL_MAGIC: &str = "SGN1";

/// Mutable views of every stored block, in file order.
fn blocks<S: Scalar>(model: &mut SgnModel<S>) -> Vec<&mut Vec<S>> {
    let p = &mut model.params;
    let mut out = vec![&mut p.node_in_w, &mut p.node_in_b, &mut p.edge_in_w, &mut p.edge_in_b];
    for (l, s) in p.layers.iter_mut().zip(model.running.iter_mut()) {
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
            &mut s.node_mean,
            &mut s.node_var,
            &mut l.bn_edge_scale,
            &mut l.bn_edge_shift,
            &mut s.edge_mean,
            &mut s.edge_var,
        ]);
    }
    out.extend([
        &mut p.edge_dec_w1,
        &mut p.edge_dec_b1,
        &mut p.edge_dec_w2,
        &mut p.edge_dec_b2,
        &mut p.w_beta,
        &mut p.node_dec_w1,
        &mut p.node_dec_b1,
        &mut p.node_dec_w2,
        &mut p.node_dec_b2,
        &mut p.w_pi,
    ]);
    out
}

pub fn save_model<S: Scalar>(model: &SgnModel<S>) -> Vec<u8> {
    let mut out = format!(
        "{MODEL_MAGIC} {} {} {} {}\n",
        model.width,
        model.layers(),
        model.gamma,
        model.penalty_scale.as_f64() as f32
    )
    .into_bytes();
    let mut copy = model.clone();
    for block in blocks(&mut copy) {
        for x in block.iter() {
            out.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn load_model<S: Scalar>(bytes: &[u8]) -> Result<SgnModel<S>> {
    let Some(nl) = bytes.iter().position(|&b| b == b'\n') else {
        return if bytes.starts_with(MODEL_MAGIC.as_bytes()) {
            Err(Error::CorruptFile("missing header terminator".into()))
        } else {
            Err(Error::UnsupportedFormat("not a model file".into()))
        };
    };
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::UnsupportedFormat("binary header".into()))?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    match fields.first() {
        Some(&MODEL_MAGIC) => {}
        Some(m) if m.starts_with("SGN") => return Err(Error::UnsupportedFormat(format!("model version {m}"))),
        _ => return Err(Error::UnsupportedFormat("not a model file".into())),
    }
    if fields.len() != 5 {
        return Err(Error::CorruptFile(format!("header has {} fields", fields.len())));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| Error::CorruptFile(format!("bad header field {s:?}")));
    let (d, l, gamma) = (int(fields[1])?, int(fields[2])?, int(fields[3])?);
    let c: f32 = fields[4].parse().map_err(|_| Error::CorruptFile(format!("bad header field {:?}", fields[4])))?;
    if d < 2 || l < 1 || gamma < 1 || d > 4096 || l > 1024 || !(c > 0.0 && c.is_finite()) {
        return Err(Error::CorruptFile(format!("implausible header {header:?}")));
    }
    let mut model = init_model::<S>(d, l, gamma, 0)?;
    model.penalty_scale = S::of(c as f64);
    let body = &bytes[nl + 1..];
    let expected: usize = blocks(&mut model).iter().map(|b| b.len()).sum::<usize>() * 4;
    if body.len() != expected {
        return Err(Error::CorruptFile(format!("body holds {} bytes, header implies {expected}", body.len())));
    }
    let mut words = body.chunks_exact(4).map(|w| f32::from_le_bytes(w.try_into().expect("4-byte chunk")));
    for block in blocks(&mut model) {
        for x in block.iter_mut() {
            let v = words.next().expect("length checked");
            if !v.is_finite() {
                return Err(Error::CorruptFile("non-finite parameter".into()));
            }
            *x = S::of(v as f64);
        }
    }
    if model.running.iter().any(|s| s.node_var.iter().chain(&s.edge_var).any(|&v| v <= S::zero())) {
        return Err(Error::CorruptFile("non-positive running variance".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_sparse_graph, generate_uniform};
    use crate::sgn::forward::{forward, GraphBatch, Mode};

    fn trained_looking() -> SgnModel<f32> {
        let mut m = init_model::<f32>(6, 2, 4, 3).unwrap();
        for (k, s) in m.running.iter_mut().enumerate() {
            s.node_mean.iter_mut().for_each(|x| *x = 0.1 * k as f32 + 0.3);
            s.edge_var.iter_mut().for_each(|x| *x = 1.7);
        }
        m.params.node_in_b[2] = -0.125;
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = trained_looking();
        let bytes = save_model(&m);
        assert!(bytes.starts_with(b"SGN1 6 2 4 10\n"));
        let back: SgnModel<f32> = load_model(&bytes).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(back.running, m.running);
        assert_eq!(save_model(&back), bytes);
        let inst = generate_uniform(10, 1).unwrap();
        let g = build_sparse_graph(&inst, 4).unwrap();
        let b = GraphBatch::single(&g, inst.coords()).unwrap();
        assert_eq!(forward(&m, &b, Mode::Infer).unwrap().0, forward(&back, &b, Mode::Infer).unwrap().0);
    }

    #[test]
    fn damaged_files_are_rejected() {
        let bytes = save_model(&trained_looking());
        assert!(matches!(load_model::<f32>(&bytes[..bytes.len() - 3]), Err(Error::CorruptFile(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(load_model::<f32>(&extra), Err(Error::CorruptFile(_))));
        let mut v2 = bytes.clone();
        v2[3] = b'2';
        assert!(matches!(load_model::<f32>(&v2), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(load_model::<f32>(b"hello world"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(load_model::<f32>(b"SGN1 6 x 4 10\n"), Err(Error::CorruptFile(_))));
        let mut nan = bytes.clone();
        let at = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        nan[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(load_model::<f32>(&nan), Err(Error::CorruptFile(_))));
    }
}
