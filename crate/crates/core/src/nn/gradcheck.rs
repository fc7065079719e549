//! Central-difference verification of analytic gradients.

use super::graph::{Graph, ParamId, ParamStore, Var};
use crate::error::Result;
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

fn eval<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph) -> Result<Var>,
{
    let mut g = Graph::new(store);
    let loss = f(&mut g)?;
    Ok(g.value(loss).data()[0])
}

/// Compares `f`'s analytic gradient with `(f(θ+h) − f(θ−h)) / 2h` at every
/// coordinate of every trainable parameter.
pub fn grad_check<F>(store: &ParamStore, h: f64, exec: Exec, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var> + Sync,
{
    let analytic = {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        g.backward(loss)?
    };
    let coords: Vec<(ParamId, usize)> = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .flat_map(|(id, p)| (0..p.value.len()).map(move |i| (id, i)))
        .collect();

    let errors: Vec<Result<f64>> = exec.map(&coords, |&(id, i)| {
        let mut probe = store.clone();
        let x0 = probe.value(id).data()[i];
        probe.get_mut(id).value.data_mut()[i] = x0 + h;
        let up = eval(&probe, &f)?;
        probe.get_mut(id).value.data_mut()[i] = x0 - h;
        let down = eval(&probe, &f)?;
        let numeric = (up - down) / (2.0 * h);
        Ok(relative_error(analytic.get(id).data()[i], numeric))
    });

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: coords.len(),
    };
    for ((id, i), err) in coords.iter().zip(errors) {
        let err = err?;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((store.get(*id).name.clone(), *i));
        }
    }
    Ok(report)
}
