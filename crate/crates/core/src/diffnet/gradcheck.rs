use crate::error::Result;

use super::graph::{Graph, Var};
use super::params::NetworkParams;

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// `max |a - n| / max(|a|, |n|, 1e-8)` over every scalar parameter.
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compares analytic gradients of `objective` against central differences
/// `(f(p+eps) - f(p-eps)) / (2 eps)` for every parameter entry.
///
/// `objective` builds the forward pass on a fresh graph and returns the scalar loss.
/// A network without parameters reports an error of 0.
pub fn grad_check<F>(params: &NetworkParams, eps: f64, mut objective: F) -> Result<GradCheck>
where
    F: FnMut(&mut Graph, &NetworkParams) -> Result<Var>,
{
    let mut analytic = params.clone();
    analytic.zero_grads();
    let mut graph = Graph::new();
    let loss = objective(&mut graph, &analytic)?;
    graph.backward(loss)?;
    graph.accumulate_param_grads(&mut analytic)?;

    let mut eval = |p: &NetworkParams| -> Result<f64> {
        let mut g = Graph::new();
        let l = objective(&mut g, p)?;
        Ok(g.value(l).values()[0])
    };

    let mut probe = params.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let n = params.get(&name).map_or(0, |t| t.len());
        for i in 0..n {
            let orig = probe.get(&name).expect("present").values()[i];
            probe.get_mut(&name).expect("present").values_mut()[i] = orig + eps;
            let plus = eval(&probe)?;
            probe.get_mut(&name).expect("present").values_mut()[i] = orig - eps;
            let minus = eval(&probe)?;
            probe.get_mut(&name).expect("present").values_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(&name).and_then(|t| t.grad()).expect("grad buffer")[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), i));
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
