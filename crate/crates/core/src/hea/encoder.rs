use rand::Rng;

use super::gru::{BoundGru, GruIds};
use super::Join;
use crate::error::{Error, Result};
use crate::numerics::{Graph, ParamStore, Tensor, Var};

/// Parameter handles of a (possibly stacked) bidirectional GRU encoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderIds {
    pub layers: Vec<(GruIds, GruIds)>,
    pub join: Join,
    pub hidden: usize,
}

impl EncoderIds {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        depth: usize,
        join: Join,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(depth);
        let mut layer_input = input;
        for l in 0..depth {
            let fwd = GruIds::register(store, &format!("{prefix}.l{l}.fwd"), layer_input, hidden, rng)?;
            let bwd = GruIds::register(store, &format!("{prefix}.l{l}.bwd"), layer_input, hidden, rng)?;
            layers.push((fwd, bwd));
            layer_input = join.output_dim(hidden);
        }
        Ok(EncoderIds { layers, join, hidden })
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> Result<BoundEncoder> {
        let layers = self
            .layers
            .iter()
            .map(|(f, b)| Ok((f.bind(g, store)?, b.bind(g, store)?)))
            .collect::<Result<_>>()?;
        Ok(BoundEncoder {
            layers,
            join: self.join,
            hidden: self.hidden,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BoundEncoder {
    pub layers: Vec<(BoundGru, BoundGru)>,
    pub join: Join,
    pub hidden: usize,
}

impl BoundEncoder {
    fn join(&self, g: &mut Graph, a: Var, b: Var) -> Result<Var> {
        match self.join {
            Join::Concat => g.concat(a, b, 0),
            Join::Sum => g.add(a, b),
        }
    }

    /// Runs every layer over a `T x D_in` input; returns the top layer's
    /// forward and backward states, indexed by position.
    fn run(&self, g: &mut Graph, inputs: Var) -> Result<(Vec<Var>, Vec<Var>)> {
        let shape = g.value(inputs).shape().to_vec();
        if shape.len() != 2 {
            return Err(Error::ShapeMismatch(format!("encoder input of shape {shape:?}")));
        }
        let steps = shape[0];
        let mut layer_input = inputs;
        let mut result = (Vec::new(), Vec::new());
        for (l, (fwd_cell, bwd_cell)) in self.layers.iter().enumerate() {
            let zero = g.constant(Tensor::zeros(&[self.hidden]))?;
            let fwd_proj = fwd_cell.project_rows(g, layer_input)?;
            let bwd_proj = bwd_cell.project_rows(g, layer_input)?;

            let mut fwd = Vec::with_capacity(steps);
            let mut h = zero;
            for t in 0..steps {
                h = fwd_cell.step_rows(g, fwd_proj, t, h)?;
                fwd.push(h);
            }
            let mut bwd = vec![zero; steps];
            let mut h = zero;
            for t in (0..steps).rev() {
                h = bwd_cell.step_rows(g, bwd_proj, t, h)?;
                bwd[t] = h;
            }
            if l + 1 < self.layers.len() {
                let joined = (0..steps)
                    .map(|t| self.join(g, fwd[t], bwd[t]))
                    .collect::<Result<Vec<_>>>()?;
                layer_input = g.stack(&joined)?;
            }
            result = (fwd, bwd);
        }
        Ok(result)
    }
}

/// Sentence vector from a `T_S x D_w` token matrix: the forward state after
/// the last token joined with the backward state after the first token.
pub fn encode_sentence(g: &mut Graph, enc: &BoundEncoder, tokens: Var) -> Result<Var> {
    let (fwd, bwd) = enc.run(g, tokens)?;
    let last = *fwd.last().expect("encoder input has at least one row");
    enc.join(g, last, bwd[0])
}

/// Contextual state for every sentence vector: forward and backward states
/// joined position by position.
pub fn encode_document(g: &mut Graph, enc: &BoundEncoder, sentence_vectors: &[Var]) -> Result<Vec<Var>> {
    if sentence_vectors.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let inputs = g.stack(sentence_vectors)?;
    let (fwd, bwd) = enc.run(g, inputs)?;
    fwd.into_iter()
        .zip(bwd)
        .map(|(f, b)| enc.join(g, f, b))
        .collect()
}
