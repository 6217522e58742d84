use std::collections::BTreeSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::attention::{attention_weights, classify, pool_document, BoundAttention};
use super::encoder::{encode_document, encode_sentence, BoundEncoder, EncoderIds};
use super::{AttentionMode, ModelConfig, Prediction, Variant};
use crate::error::{Error, Result};
use crate::numerics::{dropout_mask, Graph, ParamId, ParamStore, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct AttentionIds {
    query: ParamId,
    projection: Option<ParamId>,
}

/// Every trainable weight of a model together with its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub store: ParamStore,
    sent: EncoderIds,
    doc: EncoderIds,
    attention: Option<AttentionIds>,
    classifier_weight: ParamId,
    classifier_bias: ParamId,
}

fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Result<Tensor> {
    let n = shape.iter().product();
    Tensor::from_vec(shape.to_vec(), (0..n).map(|_| rng.gen_range(-bound..bound)).collect())
}

impl ModelParams {
    /// Fresh parameters: recurrent and input matrices uniform in
    /// `±1/sqrt(D_h)`, zero biases, query and classifier weights in `±0.1`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let sent = EncoderIds::register(
            &mut store,
            "sent",
            config.embedding_dim,
            config.sent_hidden,
            config.depth,
            config.sent_join,
            &mut rng,
        )?;
        let doc = EncoderIds::register(
            &mut store,
            "doc",
            config.sentence_dim(),
            config.doc_hidden,
            config.depth,
            config.doc_join,
            &mut rng,
        )?;
        let state = config.state_dim();
        let attention = match config.variant {
            Variant::He => None,
            Variant::Hea => {
                let q = config.query_dim();
                let query = store.add("attn.query", uniform(&[q], 0.1, &mut rng)?)?;
                let projection = match config.attention {
                    AttentionMode::Additive => Some(store.add(
                        "attn.projection",
                        uniform(&[q, state], 1.0 / (state as f64).sqrt(), &mut rng)?,
                    )?),
                    AttentionMode::ScaledDot => None,
                };
                Some(AttentionIds { query, projection })
            }
        };
        let classifier_weight = store.add("clf.weight", uniform(&[2, state], 0.1, &mut rng)?)?;
        let classifier_bias = store.add("clf.bias", Tensor::zeros(&[2]))?;
        Ok(ModelParams {
            config: config.clone(),
            store,
            sent,
            doc,
            attention,
            classifier_weight,
            classifier_bias,
        })
    }

    /// Parameter names a model with this configuration must carry.
    pub fn expected_names(config: &ModelConfig) -> Result<Vec<String>> {
        Ok(ModelParams::init(config, 0)?.store.names().map(String::from).collect())
    }

    /// Rebuilds a model from named values, which must match the config exactly.
    pub fn from_values(config: &ModelConfig, values: Vec<(String, Tensor)>) -> Result<Self> {
        let mut model = ModelParams::init(config, 0)?;
        let expected: BTreeSet<&str> = model.store.names().collect();
        let given: BTreeSet<&str> = values.iter().map(|(n, _)| n.as_str()).collect();
        if expected != given || given.len() != values.len() {
            let missing: Vec<_> = expected.difference(&given).collect();
            let extra: Vec<_> = given.difference(&expected).collect();
            return Err(Error::ShapeMismatch(format!(
                "parameter names differ from the configuration: missing {missing:?}, unexpected {extra:?}"
            )));
        }
        for (name, value) in values {
            let id = model.store.id(&name).expect("name checked above");
            if model.store.value(id).shape() != value.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {:?}, got {:?}",
                    model.store.value(id).shape(),
                    value.shape()
                )));
            }
            if !value.is_finite() {
                return Err(Error::NonFinite(name));
            }
            *model.store.value_mut(id) = value;
        }
        Ok(model)
    }

    pub fn bind(&self, g: &mut Graph) -> Result<BoundModel> {
        self.bind_store(g, &self.store)
    }

    /// Binds parameter values from `store`, which must share this model's layout.
    pub fn bind_store(&self, g: &mut Graph, store: &ParamStore) -> Result<BoundModel> {
        let attention = match self.attention {
            Some(ids) => Some(BoundAttention {
                query: g.param(store, ids.query)?,
                projection: ids.projection.map(|p| g.param(store, p)).transpose()?,
                mode: self.config.attention,
            }),
            None => None,
        };
        Ok(BoundModel {
            sent: self.sent.bind(g, store)?,
            doc: self.doc.bind(g, store)?,
            attention,
            classifier_weight: g.param(store, self.classifier_weight)?,
            classifier_bias: g.param(store, self.classifier_bias)?,
        })
    }
}

/// A model's parameters bound into one graph; reuse it for every document
/// in a batch so gradients accumulate on shared nodes.
#[derive(Clone, Debug)]
pub struct BoundModel {
    pub sent: BoundEncoder,
    pub doc: BoundEncoder,
    pub attention: Option<BoundAttention>,
    pub classifier_weight: Var,
    pub classifier_bias: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardOutput {
    /// `[fail, pass]` probabilities.
    pub probs: Var,
    pub attention: Option<Var>,
}

/// Training-mode dropout: drop probability and the mask source.
pub struct Dropout<'a> {
    pub p: f64,
    pub rng: &'a mut dyn RngCore,
}

fn apply_dropout(g: &mut Graph, x: Var, dropout: &mut Option<Dropout<'_>>) -> Result<Var> {
    match dropout {
        Some(Dropout { p, rng }) if *p > 0.0 => {
            let p = *p;
            let mask = dropout_mask(g.value(x).shape(), p, rng)?;
            let m = g.constant(mask)?;
            g.hadamard(x, m)
        }
        _ => Ok(x),
    }
}

/// Builds the full forward pass for one embedded document.
///
/// `dropout` switches on training mode: masks are drawn for every sentence
/// vector and for the document vector.
pub fn forward_graph(
    g: &mut Graph,
    model: &ModelParams,
    bound: &BoundModel,
    sentences: &[Tensor],
    mut dropout: Option<Dropout<'_>>,
) -> Result<ForwardOutput> {
    if sentences.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let mut sentence_vectors = Vec::with_capacity(sentences.len());
    for tokens in sentences {
        if tokens.rank() != 2 || tokens.shape()[1] != model.config.embedding_dim {
            return Err(Error::ShapeMismatch(format!(
                "sentence matrix {:?} for embedding dim {}",
                tokens.shape(),
                model.config.embedding_dim
            )));
        }
        let m = g.constant(tokens.clone())?;
        let s = encode_sentence(g, &bound.sent, m)?;
        sentence_vectors.push(apply_dropout(g, s, &mut dropout)?);
    }
    let states = encode_document(g, &bound.doc, &sentence_vectors)?;
    let matrix = g.stack(&states)?;
    let (z, attention) = match (model.config.variant, &bound.attention) {
        (Variant::Hea, Some(attn)) => {
            let alpha = attention_weights(g, attn, matrix)?;
            (pool_document(g, Variant::Hea, matrix, Some(alpha))?, Some(alpha))
        }
        (Variant::Hea, None) => {
            return Err(Error::InvalidConfig("attention model without attention parameters".into()))
        }
        (Variant::He, _) => (pool_document(g, Variant::He, matrix, None)?, None),
    };
    let z = apply_dropout(g, z, &mut dropout)?;
    let probs = classify(g, bound.classifier_weight, bound.classifier_bias, z)?;
    Ok(ForwardOutput { probs, attention })
}

/// Evaluation-mode prediction for one embedded document.
pub fn forward(model: &ModelParams, sentences: &[Tensor]) -> Result<Prediction> {
    let mut g = Graph::new();
    let bound = model.bind(&mut g)?;
    let out = forward_graph(&mut g, model, &bound, sentences, None)?;
    let p = g.value(out.probs).data();
    let attention = out.attention.map(|a| g.value(a).data().to_vec());
    Ok(Prediction::from_probs([p[0], p[1]], attention))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hea::Join;
    use proptest::prelude::*;
    use rand::Rng;

    fn small(variant: Variant, attention: AttentionMode) -> ModelConfig {
        ModelConfig {
            variant,
            embedding_dim: 4,
            sent_hidden: 3,
            doc_hidden: 3,
            sent_join: Join::Concat,
            doc_join: Join::Concat,
            attention,
            query_dim: None,
            depth: 1,
        }
    }

    fn doc(lengths: &[usize], seed: u64) -> Vec<Tensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        lengths
            .iter()
            .map(|&n| uniform(&[n, 4], 1.0, &mut rng).unwrap())
            .collect()
    }

    #[test]
    fn parameter_names_by_variant() {
        let hea = ModelParams::expected_names(&small(Variant::Hea, AttentionMode::Additive)).unwrap();
        assert!(hea.contains(&"attn.projection".to_string()));
        assert!(hea.contains(&"sent.l0.fwd.w_input_update".to_string()));
        let dot = ModelParams::expected_names(&small(Variant::Hea, AttentionMode::ScaledDot)).unwrap();
        assert!(dot.contains(&"attn.query".to_string()));
        assert!(!dot.contains(&"attn.projection".to_string()));
        let he = ModelParams::expected_names(&small(Variant::He, AttentionMode::Additive)).unwrap();
        assert!(!he.iter().any(|n| n.starts_with("attn")));
        assert_eq!(hea.len(), 2 * 2 * 9 + 2 + 2);
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let model = ModelParams::init(&small(Variant::Hea, AttentionMode::Additive), 1).unwrap();
        let d = doc(&[3, 5, 2], 2);
        let a = forward(&model, &d).unwrap();
        let b = forward(&model, &d).unwrap();
        assert_eq!(a, b);
        assert!((a.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let att = a.attention.unwrap();
        assert_eq!(att.len(), 3);
        assert!((att.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_sentence_gets_full_attention() {
        let model = ModelParams::init(&small(Variant::Hea, AttentionMode::ScaledDot), 4).unwrap();
        let p = forward(&model, &doc(&[6], 3)).unwrap();
        assert_eq!(p.attention, Some(vec![1.0]));
    }

    #[test]
    fn mean_pooled_model_has_no_attention() {
        let model = ModelParams::init(&small(Variant::He, AttentionMode::Additive), 4).unwrap();
        let p = forward(&model, &doc(&[2, 2], 3)).unwrap();
        assert!(p.attention.is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = ModelParams::init(&small(Variant::Hea, AttentionMode::Additive), 4).unwrap();
        assert!(matches!(forward(&model, &[]), Err(Error::EmptyDocument)));
        let wrong = vec![Tensor::zeros(&[2, 5])];
        assert!(matches!(forward(&model, &wrong), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn composition_matches_stage_oracles() {
        // Rebuild the prediction from the individual stage functions.
        let model = ModelParams::init(&small(Variant::Hea, AttentionMode::Additive), 9).unwrap();
        let d = doc(&[2, 3, 1], 5);
        let pred = forward(&model, &d).unwrap();

        let mut g = Graph::new();
        let b = model.bind(&mut g).unwrap();
        let sents: Vec<Var> = d
            .iter()
            .map(|t| {
                let m = g.constant(t.clone()).unwrap();
                encode_sentence(&mut g, &b.sent, m).unwrap()
            })
            .collect();
        let states = encode_document(&mut g, &b.doc, &sents).unwrap();
        let o = g.stack(&states).unwrap();
        let alpha = attention_weights(&mut g, b.attention.as_ref().unwrap(), o).unwrap();
        let z = pool_document(&mut g, Variant::Hea, o, Some(alpha)).unwrap();
        let probs = classify(&mut g, b.classifier_weight, b.classifier_bias, z).unwrap();
        assert_eq!(g.value(probs).data(), &pred.probs);
        assert_eq!(Some(g.value(alpha).data().to_vec()), pred.attention);
    }

    #[test]
    fn dropout_only_in_training_mode() {
        let model = ModelParams::init(&small(Variant::Hea, AttentionMode::Additive), 1).unwrap();
        let d = doc(&[3, 2], 2);
        let eval = forward(&model, &d).unwrap();
        let run = |seed| {
            let mut g = Graph::new();
            let b = model.bind(&mut g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = forward_graph(&mut g, &model, &b, &d, Some(Dropout { p: 0.3, rng: &mut rng })).unwrap();
            g.value(out.probs).data().to_vec()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), eval.probs.to_vec());
    }

    #[test]
    fn from_values_checks_names_and_shapes() {
        let config = small(Variant::Hea, AttentionMode::Additive);
        let model = ModelParams::init(&config, 3).unwrap();
        let values: Vec<(String, Tensor)> = model
            .store
            .iter()
            .map(|(_, p)| (p.name.clone(), p.value.clone()))
            .collect();
        assert_eq!(ModelParams::from_values(&config, values.clone()).unwrap(), model);

        let mut missing = values.clone();
        missing.pop();
        assert!(ModelParams::from_values(&config, missing).is_err());

        let mut reshaped = values.clone();
        reshaped[0].1 = Tensor::zeros(&[1, 1]);
        assert!(ModelParams::from_values(&config, reshaped).is_err());

        let mut renamed = values;
        renamed[0].0 = "bogus".into();
        assert!(ModelParams::from_values(&config, renamed).is_err());
    }

    fn check_gradients(variant: Variant, attention: AttentionMode, join: Join) -> f64 {
        let config = ModelConfig {
            variant,
            embedding_dim: 8,
            sent_hidden: 6,
            doc_hidden: 6,
            sent_join: join,
            doc_join: join,
            attention,
            query_dim: None,
            depth: 1,
        };
        // Default init leaves some attention gradients near 1e-8, below what
        // central differences resolve at h = 1e-5; wider weights keep every
        // coordinate measurable.
        let mut model = ModelParams::init(&config, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for id in model.store.ids().collect::<Vec<_>>() {
            for v in model.store.value_mut(id).data_mut() {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
        let d: Vec<Tensor> = (0..3).map(|_| uniform(&[5, 8], 1.0, &mut rng).unwrap()).collect();
        let report = crate::numerics::grad_check(
            |g, store| {
                let b = model.bind_store(g, store)?;
                let out = forward_graph(g, &model, &b, &d, None)?;
                let p = g.pick(out.probs, 1)?;
                let lp = g.log_clamped(p, 1e-12)?;
                g.scale(lp, -1.7)
            },
            &model.store,
            1e-5,
        )
        .unwrap();
        report.max_relative_error
    }

    #[test]
    fn gradients_match_finite_differences() {
        for attention in [AttentionMode::Additive, AttentionMode::ScaledDot] {
            for join in [Join::Concat, Join::Sum] {
                let err = check_gradients(Variant::Hea, attention, join);
                assert!(err <= 1e-4, "{attention:?} {join:?}: {err}");
            }
        }
        assert!(check_gradients(Variant::He, AttentionMode::Additive, Join::Concat) <= 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn hidden_states_stay_bounded(seed in any::<u64>(), len in 1usize..12, scale in 0.5f64..20.0) {
            // Random (possibly huge) weights: the state is a convex combination
            // of the previous state and a tanh output, so |h| <= 1 throughout.
            let config = small(Variant::Hea, AttentionMode::Additive);
            let mut model = ModelParams::init(&config, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            for id in model.store.ids().collect::<Vec<_>>() {
                for v in model.store.value_mut(id).data_mut() {
                    *v = rng.gen_range(-scale..scale);
                }
            }
            let tokens = uniform(&[len, 4], 3.0, &mut rng).unwrap();
            let mut g = Graph::new();
            let b = model.bind(&mut g).unwrap();
            let m = g.constant(tokens).unwrap();
            let cell = b.sent.layers[0].0;
            let mut h = g.constant(Tensor::zeros(&[3])).unwrap();
            for t in 0..len {
                let x = g.row(m, t).unwrap();
                let trace = crate::hea::gru_step(&mut g, &cell, x, h).unwrap();
                for &v in [trace.update, trace.reset].iter() {
                    prop_assert!(g.value(v).data().iter().all(|&z| (0.0..=1.0).contains(&z)));
                }
                prop_assert!(g.value(trace.candidate).data().iter().all(|c| c.abs() <= 1.0));
                prop_assert!(g.value(trace.state).data().iter().all(|s| s.abs() <= 1.0));
                h = trace.state;
            }
        }
    }
}
