use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamStore, Var};

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// `weight * -ln(probs[label])`, with the probability clamped at [`LOG_FLOOR`].
pub fn example_loss(probs: [f64; 2], label: u8, weight: f64) -> f64 {
    weight * -probs[usize::from(label)].max(LOG_FLOOR).ln()
}

/// Mean of the example losses plus `l2 / 2 * |theta|^2` over trainable parameters.
pub fn objective(losses: &[f64], params: &ParamStore, l2: f64) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::Malformed("objective over an empty batch".into()));
    }
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok(mean + 0.5 * l2 * params.l2_squared())
}

/// Graph form of [`example_loss`].
pub fn example_loss_graph(g: &mut Graph, probs: Var, label: u8, weight: f64) -> Result<Var> {
    let p = g.pick(probs, usize::from(label))?;
    let lp = g.log_clamped(p, LOG_FLOOR)?;
    g.scale(lp, -weight)
}

/// Graph form of [`objective`]; `bound` pairs every trainable parameter with
/// its node in `g`.
pub fn objective_graph(g: &mut Graph, losses: &[Var], bound: &[Var], l2: f64) -> Result<Var> {
    let (&first, rest) = losses
        .split_first()
        .ok_or_else(|| Error::Malformed("objective over an empty batch".into()))?;
    let mut total = first;
    for &l in rest {
        total = g.add(total, l)?;
    }
    let mut obj = g.scale(total, 1.0 / losses.len() as f64)?;
    if l2 > 0.0 {
        for &p in bound {
            let sq = g.hadamard(p, p)?;
            let s = g.sum(sq)?;
            let term = g.scale(s, 0.5 * l2)?;
            obj = g.add(obj, term)?;
        }
    }
    Ok(obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example_loss_cases() {
        assert_eq!(example_loss([0.0, 1.0], 1, 1.0), 0.0);
        assert!((example_loss([0.5, 0.5], 0, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((example_loss([0.9, 0.1], 1, 2.0) - 4.605170185988091).abs() < 1e-12);
        // Clamped, not infinite.
        assert!((example_loss([1.0, 0.0], 1, 1.0) - 12.0 * std::f64::consts::LN_10).abs() < 1e-9);
    }

    fn store(values: &[&[f64]]) -> ParamStore {
        let mut s = ParamStore::new();
        for (i, v) in values.iter().enumerate() {
            s.add(format!("p{i}"), Tensor::vector(v.to_vec()).unwrap()).unwrap();
        }
        s
    }

    #[test]
    fn objective_cases() {
        let s = store(&[&[1.0, 1.0], &[-1.0]]);
        assert_eq!(objective(&[0.2, 0.4], &s, 0.0).unwrap(), (0.2 + 0.4) / 2.0);
        assert_eq!(objective(&[0.0, 0.0], &s, 2.0).unwrap(), 3.0);
        assert!(objective(&[], &s, 1.0).is_err());
    }

    #[test]
    fn objective_matches_hand_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(1..10);
            let mut losses = Vec::new();
            for _ in 0..n {
                let p1: f64 = rng.gen_range(0.0..1.0);
                let y = rng.gen_range(0..2u8);
                let w = rng.gen_range(0.1..3.0);
                let py = if y == 1 { p1 } else { 1.0 - p1 };
                assert!((example_loss([1.0 - p1, p1], y, w) - w * -py.max(1e-12).ln()).abs() < 1e-12);
                losses.push(example_loss([1.0 - p1, p1], y, w));
            }
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = store(&[&a, &b]);
            let l2 = rng.gen_range(0.0..0.1);
            let mut hand = 0.0;
            for l in &losses {
                hand += l;
            }
            hand /= n as f64;
            let mut sq = 0.0;
            for x in a.iter().chain(&b) {
                sq += x * x;
            }
            hand += l2 / 2.0 * sq;
            assert!((objective(&losses, &s, l2).unwrap() - hand).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_objective_agrees_and_differentiates() {
        let s = store(&[&[0.3, -0.8, 1.1], &[0.2, 0.5]]);
        let build = |g: &mut Graph, st: &ParamStore| {
            let a = g.param(st, st.id("p0").unwrap())?;
            let b = g.param(st, st.id("p1").unwrap())?;
            let mut losses = Vec::new();
            for (y, w) in [(0u8, 1.5), (1, 0.5), (1, 2.0)] {
                let m = g.constant(Tensor::from_vec(vec![2, 3], vec![1.0, 0.5, -0.2, 0.1, 0.3, 0.7]).unwrap())?;
                let logits = g.matmul(m, a)?;
                let z = g.add(logits, b)?;
                let p = g.softmax(z)?;
                losses.push(example_loss_graph(g, p, y, w)?);
            }
            objective_graph(g, &losses, &[a, b], 0.3)
        };
        let mut g = Graph::new();
        let obj = build(&mut g, &s).unwrap();
        let value = g.value(obj).item();
        // Same value through the scalar path.
        let mut g2 = Graph::new();
        let a = g2.param(&s, s.id("p0").unwrap()).unwrap();
        let b = g2.param(&s, s.id("p1").unwrap()).unwrap();
        let w = g2.constant(Tensor::from_vec(vec![2, 3], vec![1.0, 0.5, -0.2, 0.1, 0.3, 0.7]).unwrap()).unwrap();
        let logits = g2.matmul(w, a).unwrap();
        let z = g2.add(logits, b).unwrap();
        let p = g2.softmax(z).unwrap();
        let pv = g2.value(p).data();
        let losses: Vec<f64> = [(0u8, 1.5), (1, 0.5), (1, 2.0)]
            .iter()
            .map(|&(y, wt)| example_loss([pv[0], pv[1]], y, wt))
            .collect();
        assert!((objective(&losses, &s, 0.3).unwrap() - value).abs() < 1e-12);
        let report = grad_check(build, &s, 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-7, "{report:?}");
    }
}
