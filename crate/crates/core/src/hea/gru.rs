use rand::Rng;

use crate::error::Result;
use crate::numerics::{GruOperands, Graph, ParamId, ParamStore, Tensor, Var};

/// Parameter handles of one GRU cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GruIds {
    pub input_update: ParamId,
    pub input_reset: ParamId,
    pub input_candidate: ParamId,
    pub hidden_update: ParamId,
    pub hidden_reset: ParamId,
    pub hidden_candidate: ParamId,
    pub bias_update: ParamId,
    pub bias_reset: ParamId,
    pub bias_candidate: ParamId,
}

impl GruIds {
    /// Registers a cell under `prefix` with scaled-uniform weights and zero biases.
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut matrix = |name: &str, cols: usize, rng: &mut R| {
            let data = (0..hidden * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            store.add(format!("{prefix}.{name}"), Tensor::from_vec(vec![hidden, cols], data)?)
        };
        let input_update = matrix("w_input_update", input, rng)?;
        let input_reset = matrix("w_input_reset", input, rng)?;
        let input_candidate = matrix("w_input_candidate", input, rng)?;
        let hidden_update = matrix("w_hidden_update", hidden, rng)?;
        let hidden_reset = matrix("w_hidden_reset", hidden, rng)?;
        let hidden_candidate = matrix("w_hidden_candidate", hidden, rng)?;
        let mut bias = |name: &str| store.add(format!("{prefix}.{name}"), Tensor::zeros(&[hidden]));
        Ok(GruIds {
            input_update,
            input_reset,
            input_candidate,
            hidden_update,
            hidden_reset,
            hidden_candidate,
            bias_update: bias("b_update")?,
            bias_reset: bias("b_reset")?,
            bias_candidate: bias("b_candidate")?,
        })
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> Result<BoundGru> {
        Ok(BoundGru {
            input_update: g.param(store, self.input_update)?,
            input_reset: g.param(store, self.input_reset)?,
            input_candidate: g.param(store, self.input_candidate)?,
            hidden_update: g.param(store, self.hidden_update)?,
            hidden_reset: g.param(store, self.hidden_reset)?,
            hidden_candidate: g.param(store, self.hidden_candidate)?,
            bias_update: g.param(store, self.bias_update)?,
            bias_reset: g.param(store, self.bias_reset)?,
            bias_candidate: g.param(store, self.bias_candidate)?,
            hidden: store.value(self.bias_update).len(),
        })
    }
}

/// A GRU cell whose parameters live in a particular graph.
#[derive(Clone, Copy, Debug)]
pub struct BoundGru {
    pub input_update: Var,
    pub input_reset: Var,
    pub input_candidate: Var,
    pub hidden_update: Var,
    pub hidden_reset: Var,
    pub hidden_candidate: Var,
    pub bias_update: Var,
    pub bias_reset: Var,
    pub bias_candidate: Var,
    pub hidden: usize,
}

/// Gate activations of one step.
#[derive(Clone, Copy, Debug)]
pub struct GateTrace {
    pub update: Var,
    pub reset: Var,
    pub candidate: Var,
    pub state: Var,
}

/// Input-side projections `W x + b` for the three gates.
#[derive(Clone, Copy, Debug)]
pub(crate) struct InputProjection {
    pub update: Var,
    pub reset: Var,
    pub candidate: Var,
}

impl BoundGru {
    pub(crate) fn project(&self, g: &mut Graph, x: Var) -> Result<InputProjection> {
        let u = g.matmul(self.input_update, x)?;
        let r = g.matmul(self.input_reset, x)?;
        let c = g.matmul(self.input_candidate, x)?;
        Ok(InputProjection {
            update: g.add(u, self.bias_update)?,
            reset: g.add(r, self.bias_reset)?,
            candidate: g.add(c, self.bias_candidate)?,
        })
    }

    /// Input projections of every row of a `T x D_in` sequence, one
    /// `T x H` matrix per gate, bias not included.
    pub(crate) fn project_rows(&self, g: &mut Graph, xs: Var) -> Result<[Var; 3]> {
        let xt = g.transpose(xs)?;
        let mut out = [xt; 3];
        for (slot, w) in out.iter_mut().zip([self.input_update, self.input_reset, self.input_candidate]) {
            let all = g.matmul(w, xt)?;
            *slot = g.transpose(all)?;
        }
        Ok(out)
    }

    /// Fused transition on row `row` of [`BoundGru::project_rows`] output.
    pub(crate) fn step_rows(&self, g: &mut Graph, projections: [Var; 3], row: usize, prev: Var) -> Result<Var> {
        g.gru_cell(GruOperands {
            projections,
            row,
            biases: [self.bias_update, self.bias_reset, self.bias_candidate],
            recurrent: [self.hidden_update, self.hidden_reset, self.hidden_candidate],
            prev,
        })
    }

    pub(crate) fn step_projected(&self, g: &mut Graph, p: InputProjection, prev: Var) -> Result<GateTrace> {
        let hu = g.matmul(self.hidden_update, prev)?;
        let pre_update = g.add(p.update, hu)?;
        let update = g.sigmoid(pre_update)?;

        let hr = g.matmul(self.hidden_reset, prev)?;
        let pre_reset = g.add(p.reset, hr)?;
        let reset = g.sigmoid(pre_reset)?;

        let hc = g.matmul(self.hidden_candidate, prev)?;
        let gated = g.hadamard(reset, hc)?;
        let pre_candidate = g.add(p.candidate, gated)?;
        let candidate = g.tanh(pre_candidate)?;

        let keep_new = g.one_minus(update)?;
        let fresh = g.hadamard(keep_new, candidate)?;
        let carried = g.hadamard(update, prev)?;
        let state = g.add(fresh, carried)?;
        Ok(GateTrace {
            update,
            reset,
            candidate,
            state,
        })
    }
}

/// One GRU transition:
///
/// ```text
/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// c = tanh(W_c x + r * (U_c h) + b_c)
/// h' = (1 - z) * c + z * h
/// ```
pub fn gru_step(g: &mut Graph, cell: &BoundGru, input: Var, prev: Var) -> Result<GateTrace> {
    let p = cell.project(g, input)?;
    cell.step_projected(g, p, prev)
}
