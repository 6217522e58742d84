use super::{Graph, ParamStore, Var};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares backward-pass gradients against central differences.
///
/// `build` must construct a deterministic scalar loss from the parameters.
/// Every trainable coordinate is perturbed by `±h`; the relative error is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(build: F, params: &ParamStore, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut graph = Graph::new();
    let loss = build(&mut graph, params)?;
    graph.backward(loss)?;
    let analytic = graph.param_grads();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let l = build(&mut g, store)?;
        Ok(g.value(l).item())
    };

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let mut work = params.clone();
    for (id, p) in params.iter() {
        if !p.trainable {
            continue;
        }
        let grad = analytic.iter().find(|(pid, _)| *pid == id).map(|(_, g)| g);
        for j in 0..p.value.len() {
            let original = p.value.data()[j];
            work.value_mut(id).data_mut()[j] = original + h;
            let plus = eval(&work)?;
            work.value_mut(id).data_mut()[j] = original - h;
            let minus = eval(&work)?;
            work.value_mut(id).data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.map_or(0.0, |g| g.data()[j]);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let err = (a - numeric).abs() / denom;
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((p.name.clone(), j));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
