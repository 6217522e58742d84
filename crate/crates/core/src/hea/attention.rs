use super::{AttentionMode, Variant};
use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor, Var};

/// Attention parameters bound into a graph.
#[derive(Clone, Copy, Debug)]
pub struct BoundAttention {
    pub query: Var,
    /// `D_q x D_l`, additive mode only.
    pub projection: Option<Var>,
    pub mode: AttentionMode,
}

/// Normalized attention weights over the rows of a `T x D_l` state matrix.
pub fn attention_weights(g: &mut Graph, attn: &BoundAttention, states: Var) -> Result<Var> {
    let shape = g.value(states).shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::ShapeMismatch(format!("attention over {shape:?}")));
    }
    let scores = match attn.mode {
        AttentionMode::Additive => {
            let w = attn.projection.ok_or_else(|| {
                Error::InvalidConfig("additive attention needs a projection matrix".into())
            })?;
            let st = g.transpose(states)?;
            let projected = g.matmul(w, st)?;
            let activated = g.tanh(projected)?;
            let rows = g.transpose(activated)?;
            g.matmul(rows, attn.query)?
        }
        AttentionMode::ScaledDot => {
            let raw = g.matmul(states, attn.query)?;
            g.scale(raw, 1.0 / (shape[1] as f64).sqrt())?
        }
    };
    g.softmax(scores)
}

/// Document vector: attention-weighted sum (HEA) or mean (HE) of the state rows.
pub fn pool_document(g: &mut Graph, variant: Variant, states: Var, alpha: Option<Var>) -> Result<Var> {
    let rows = g.value(states).shape()[0];
    let weights = match (variant, alpha) {
        (Variant::Hea, Some(a)) => {
            if g.value(a).shape() != [rows] {
                return Err(Error::ShapeMismatch(format!(
                    "{:?} attention weights for {rows} states",
                    g.value(a).shape()
                )));
            }
            a
        }
        (Variant::Hea, None) => {
            return Err(Error::InvalidConfig("attention pooling needs weights".into()))
        }
        (Variant::He, _) => g.constant(Tensor::filled(&[rows], 1.0 / rows as f64))?,
    };
    let st = g.transpose(states)?;
    g.matmul(st, weights)
}

/// `softmax(W z + b)` over the two labels.
pub fn classify(g: &mut Graph, weight: Var, bias: Var, z: Var) -> Result<Var> {
    let lin = g.matmul(weight, z)?;
    let logits = g.add(lin, bias)?;
    g.softmax(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(g: &mut Graph, rows: &[Vec<f64>]) -> Var {
        g.constant(Tensor::from_vec(vec![rows.len(), rows[0].len()], rows.concat()).unwrap())
            .unwrap()
    }

    fn vector(g: &mut Graph, xs: &[f64]) -> Var {
        g.constant(Tensor::vector(xs.to_vec()).unwrap()).unwrap()
    }

    fn scaled(g: &mut Graph, q: &[f64]) -> BoundAttention {
        BoundAttention {
            query: vector(g, q),
            projection: None,
            mode: AttentionMode::ScaledDot,
        }
    }

    #[test]
    fn identical_states_give_uniform_weights() {
        let mut g = Graph::new();
        let states = matrix(&mut g, &vec![vec![0.3, -0.2, 0.9]; 4]);
        let attn = scaled(&mut g, &[1.0, 2.0, 3.0]);
        let a = attention_weights(&mut g, &attn, states).unwrap();
        for w in g.value(a).data() {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn scaled_dot_by_hand() {
        let mut g = Graph::new();
        let states = matrix(&mut g, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]);
        let attn = scaled(&mut g, &[2.0, 0.0, 0.0, 0.0]);
        let a = attention_weights(&mut g, &attn, states).unwrap();
        // scores (2/sqrt(4), 0) = (1, 0)
        let e = std::f64::consts::E;
        let w = g.value(a).data();
        assert!((w[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((w[0] - 0.7311).abs() < 1e-4);
        assert!((w[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn zero_projection_is_uniform() {
        let mut g = Graph::new();
        let states = matrix(&mut g, &[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 9.0]]);
        let attn = BoundAttention {
            query: vector(&mut g, &[1.0, -1.0, 0.5]),
            projection: Some(g.constant(Tensor::zeros(&[3, 2])).unwrap()),
            mode: AttentionMode::Additive,
        };
        let a = attention_weights(&mut g, &attn, states).unwrap();
        for w in g.value(a).data() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn additive_by_hand() {
        let mut g = Graph::new();
        let rows = [vec![0.5, -1.0], vec![2.0, 0.25]];
        let w = [[0.3, -0.7], [1.1, 0.2], [-0.4, 0.9]];
        let q = [0.6, -1.2, 0.8];
        let states = matrix(&mut g, &rows);
        let attn = BoundAttention {
            query: vector(&mut g, &q),
            projection: Some(matrix(&mut g, &w.iter().map(|r| r.to_vec()).collect::<Vec<_>>())),
            mode: AttentionMode::Additive,
        };
        let a = attention_weights(&mut g, &attn, states).unwrap();
        let scores: Vec<f64> = rows
            .iter()
            .map(|l| {
                (0..3)
                    .map(|i| q[i] * (w[i][0] * l[0] + w[i][1] * l[1]).tanh())
                    .sum()
            })
            .collect();
        let total: f64 = scores.iter().map(|s| s.exp()).sum();
        for (got, s) in g.value(a).data().iter().zip(&scores) {
            assert!((got - s.exp() / total).abs() < 1e-15);
        }
    }

    #[test]
    fn pooling_identities() {
        let mut g = Graph::new();
        let rows = vec![vec![1.0, 2.0], vec![3.0, -4.0], vec![0.5, 0.5]];
        let states = matrix(&mut g, &rows);
        let uniform = g.constant(Tensor::filled(&[3], 1.0 / 3.0)).unwrap();
        let hea = pool_document(&mut g, Variant::Hea, states, Some(uniform)).unwrap();
        let he = pool_document(&mut g, Variant::He, states, None).unwrap();
        assert_eq!(g.value(hea).data(), g.value(he).data());

        let one_hot = vector(&mut g, &[0.0, 1.0, 0.0]);
        let z = pool_document(&mut g, Variant::Hea, states, Some(one_hot)).unwrap();
        assert_eq!(g.value(z).data(), &[3.0, -4.0]);

        let short = vector(&mut g, &[0.5, 0.5]);
        assert!(pool_document(&mut g, Variant::Hea, states, Some(short)).is_err());
    }

    #[test]
    fn classifier_cases() {
        let mut g = Graph::new();
        let z = vector(&mut g, &[0.4, -1.0, 2.0]);
        let w = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = vector(&mut g, &[0.0, 0.0]);
        let p = classify(&mut g, w, b, z).unwrap();
        assert_eq!(g.value(p).data(), &[0.5, 0.5]);
        let b = vector(&mut g, &[0.0, 10.0]);
        let p = classify(&mut g, w, b, z).unwrap();
        assert!(g.value(p).data()[1] >= 0.9999);

        let wm = [[0.2, -0.1, 0.5], [-0.3, 0.8, 0.1]];
        let bm = [0.05, -0.2];
        let w = matrix(&mut g, &wm.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
        let b = vector(&mut g, &bm);
        let p = classify(&mut g, w, b, z).unwrap();
        let zs = [0.4, -1.0, 2.0];
        let logits: Vec<f64> = (0..2)
            .map(|c| bm[c] + (0..3).map(|j| wm[c][j] * zs[j]).sum::<f64>())
            .collect();
        let p1 = 1.0 / (1.0 + (logits[0] - logits[1]).exp());
        assert!((g.value(p).data()[1] - p1).abs() < 1e-15);

        let bad = g.constant(Tensor::zeros(&[2, 4])).unwrap();
        assert!(classify(&mut g, bad, b, z).is_err());
    }

    fn rows_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        (1usize..7, 1usize..5).prop_flat_map(|(t, d)| {
            (
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), t),
                prop::collection::vec(-2.0f64..2.0, d),
                prop::collection::vec(0.0f64..1.0, t),
            )
        })
    }

    proptest! {
        #[test]
        fn weights_form_a_distribution_and_permute_with_rows(
            (rows, q, raw_alpha) in rows_strategy(),
            shift in 0usize..7,
        ) {
            let mut g = Graph::new();
            let t = rows.len();
            let attn = scaled(&mut g, &q);
            let states = matrix(&mut g, &rows);
            let a = attention_weights(&mut g, &attn, states).unwrap();
            let w = g.value(a).data().to_vec();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(w.iter().all(|&x| x > 0.0));

            // rotate rows: weights rotate identically
            let perm: Vec<usize> = (0..t).map(|i| (i + shift) % t).collect();
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
            let ps = matrix(&mut g, &permuted);
            let pa = attention_weights(&mut g, &attn, ps).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!((g.value(pa).data()[k] - w[i]).abs() < 1e-12);
            }

            // weighted pooling equals direct summation
            let total: f64 = raw_alpha.iter().sum::<f64>() + 1e-3;
            let alpha: Vec<f64> = raw_alpha.iter().map(|x| (x + 1e-3 / t as f64) / total).collect();
            let av = vector(&mut g, &alpha);
            let z = pool_document(&mut g, Variant::Hea, states, Some(av)).unwrap();
            for (j, &got) in g.value(z).data().iter().enumerate() {
                let expected: f64 = (0..t).map(|i| alpha[i] * rows[i][j]).sum();
                prop_assert!((got - expected).abs() < 1e-12);
            }
        }

        #[test]
        fn additive_scores_permute_with_rows((rows, q, _) in rows_strategy(), seed in 0u64..1000) {
            let mut g = Graph::new();
            let d = q.len();
            let proj: Vec<f64> = (0..3 * d).map(|i| ((i as u64 * 31 + seed) % 17) as f64 / 8.0 - 1.0).collect();
            let attn = BoundAttention {
                query: vector(&mut g, &[0.3, -0.6, 1.0]),
                projection: Some(g.constant(Tensor::from_vec(vec![3, d], proj).unwrap()).unwrap()),
                mode: AttentionMode::Additive,
            };
            let t = rows.len();
            let states = matrix(&mut g, &rows);
            let a = attention_weights(&mut g, &attn, states).unwrap();
            let mut reversed = rows.clone();
            reversed.reverse();
            let rs = matrix(&mut g, &reversed);
            let ra = attention_weights(&mut g, &attn, rs).unwrap();
            for i in 0..t {
                prop_assert!((g.value(a).data()[i] - g.value(ra).data()[t - 1 - i]).abs() < 1e-12);
            }
        }
    }
}
