//! Gradient checks for every graph primitive on small seeded inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{grad_check, GradCheckReport};
use super::graph::{Graph, ParamId, ParamStore, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::exec::Exec;

/// Finite-difference step used by the suite.
pub const CHECK_STEP: f64 = 1e-5;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sized")
}

/// Reduce `x` to a scalar through fixed random weights so every output
/// coordinate contributes a distinct slope.
fn project(g: &mut Graph, x: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let r = random(g.shape(x), &mut rng);
    let r = g.input(r);
    let p = g.mul(x, r)?;
    Ok(g.sum(p))
}

struct Case {
    name: &'static str,
    store: ParamStore,
    ids: Vec<ParamId>,
}

fn case(name: &'static str, shapes: &[&[usize]], seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ids = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| store.add(format!("{name}.{i}"), random(s, &mut rng)))
        .collect();
    Case { name, store, ids }
}

/// Runs a central-difference check per primitive; returns `(name, report)` pairs.
pub fn primitive_checks(exec: Exec) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let mut out = Vec::new();
    let mut run = |c: Case, f: &(dyn Fn(&mut Graph, &[ParamId]) -> Result<Var> + Sync)| -> Result<()> {
        let ids = c.ids.clone();
        let r = grad_check(&c.store, CHECK_STEP, exec, |g| f(g, &ids))?;
        out.push((c.name, r));
        Ok(())
    };

    run(case("matmul", &[&[3, 4], &[4, 2]], 1), &|g, p| {
        let (a, b) = (g.param(p[0]), g.param(p[1]));
        let y = g.matmul(a, b)?;
        project(g, y, 1)
    })?;
    run(case("add", &[&[2, 3], &[2, 3]], 2), &|g, p| {
        let (a, b) = (g.param(p[0]), g.param(p[1]));
        let y = g.add(a, b)?;
        project(g, y, 2)
    })?;
    run(case("mul", &[&[2, 3], &[2, 3]], 3), &|g, p| {
        let (a, b) = (g.param(p[0]), g.param(p[1]));
        let y = g.mul(a, b)?;
        project(g, y, 3)
    })?;
    run(case("add_bias", &[&[3, 4], &[4]], 4), &|g, p| {
        let (a, b) = (g.param(p[0]), g.param(p[1]));
        let y = g.add_bias(a, b)?;
        project(g, y, 4)
    })?;
    run(case("sigmoid", &[&[2, 5]], 5), &|g, p| {
        let a = g.param(p[0]);
        let y = g.sigmoid(a);
        project(g, y, 5)
    })?;
    run(case("tanh", &[&[2, 5]], 6), &|g, p| {
        let a = g.param(p[0]);
        let y = g.tanh(a);
        project(g, y, 6)
    })?;
    run(case("relu", &[&[2, 5]], 7), &|g, p| {
        let a = g.param(p[0]);
        let y = g.relu(a);
        project(g, y, 7)
    })?;
    run(case("concat", &[&[2, 3], &[2, 2]], 8), &|g, p| {
        let (a, b) = (g.param(p[0]), g.param(p[1]));
        let y = g.concat(&[a, b, a])?;
        project(g, y, 8)
    })?;
    run(case("slice_cols", &[&[3, 5]], 9), &|g, p| {
        let a = g.param(p[0]);
        let y = g.slice_cols(a, 1, 3)?;
        project(g, y, 9)
    })?;
    run(case("slice_rows", &[&[5, 3]], 10), &|g, p| {
        let a = g.param(p[0]);
        let y = g.slice_rows(a, 2, 2)?;
        project(g, y, 10)
    })?;
    run(case("reshape", &[&[2, 6]], 11), &|g, p| {
        let a = g.param(p[0]);
        let y = g.reshape(a, &[3, 4])?;
        project(g, y, 11)
    })?;
    run(case("gather", &[&[6, 3]], 12), &|g, p| {
        let t = g.param(p[0]);
        // Row 0 is padding and must stay out of the indices to be checkable.
        let y = g.gather(t, &[1, 4, 4, 2, 5], Some(0))?;
        project(g, y, 12)
    })?;
    run(case("conv1d", &[&[2, 6, 3], &[3, 3, 4], &[4]], 13), &|g, p| {
        let (x, w, b) = (g.param(p[0]), g.param(p[1]), g.param(p[2]));
        let y = g.conv1d(x, w, b)?;
        project(g, y, 13)
    })?;
    run(case("max_pool", &[&[2, 7, 3]], 14), &|g, p| {
        let x = g.param(p[0]);
        let y = g.max_pool(x, 3)?;
        project(g, y, 14)
    })?;
    run(case("global_max_pool", &[&[2, 5, 3]], 15), &|g, p| {
        let x = g.param(p[0]);
        let y = g.global_max_pool(x)?;
        project(g, y, 15)
    })?;
    run(case("mse", &[&[4, 1]], 16), &|g, p| {
        let x = g.param(p[0]);
        g.mse(x, &[0.1, 0.9, -0.3, 0.5])
    })?;
    run(case("sum", &[&[3, 3]], 17), &|g, p| {
        let x = g.param(p[0]);
        let s = g.sum(x);
        let sq = g.mul(s, s)?;
        Ok(g.sum(sq))
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_primitive_passes() {
        let reports = primitive_checks(Exec::Sequential).unwrap();
        assert_eq!(reports.len(), 17);
        for (name, r) in reports {
            assert!(r.checked > 0, "{name}");
            assert!(r.max_rel_error < 1e-4, "{name}: {r:?}");
        }
    }
}
