//! AdaBoost.R2 over depth-1 regression stumps.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const DEFAULT_ESTIMATORS: usize = 50;

/// Relative slack when comparing split gains; near-ties go to the earlier
/// feature, then the lower threshold.
const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Linear,
    Square,
    Exponential,
}

impl Loss {
    /// Loss of an error already scaled to [0, 1].
    pub fn apply(self, scaled: f64) -> f64 {
        match self {
            Loss::Linear => scaled,
            Loss::Square => scaled * scaled,
            Loss::Exponential => 1.0 - (-scaled).exp(),
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Loss::Linear),
            "square" => Ok(Loss::Square),
            "exponential" => Ok(Loss::Exponential),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

/// `x[feature] <= threshold ? left : right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: u32,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn constant(value: f64) -> Self {
        Stump {
            feature: 0,
            threshold: 0.0,
            left: value,
            right: value,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.threshold {
            self.left
        } else {
            self.right
        }
    }

    pub fn predict(&self, row: &SparseVector) -> f64 {
        self.eval(row.get(self.feature))
    }
}

/// Column-major view of a feature matrix with implicit zeros.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    n_rows: usize,
    /// Per column: explicit (row, value) entries sorted by value, then row.
    columns: Vec<Vec<(u32, f64)>>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[SparseVector], n_cols: usize) -> Result<Self> {
        let mut columns = vec![Vec::new(); n_cols];
        for (r, row) in rows.iter().enumerate() {
            for (&c, &v) in row.indices.iter().zip(&row.values) {
                if !v.is_finite() {
                    return Err(Error::Invalid(format!("non-finite feature at row {r}")));
                }
                let col = columns
                    .get_mut(c as usize)
                    .ok_or_else(|| Error::Shape(format!("column {c} outside {n_cols} features")))?;
                if v != 0.0 {
                    col.push((r as u32, v));
                }
            }
        }
        for col in &mut columns {
            col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        Ok(FeatureMatrix {
            n_rows: rows.len(),
            columns,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged dense rows".into()));
        }
        let sparse: Vec<SparseVector> = rows.iter().map(|r| SparseVector::from_dense(r)).collect();
        Self::from_rows(&sparse, n_cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Dense copy of one column.
    pub fn column(&self, c: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for &(r, v) in &self.columns[c] {
            out[r as usize] = v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Group {
    value: f64,
    count: f64,
    sum: f64,
}

/// Best split of one column under integer sample counts: (gain, threshold, left, right).
fn best_split_in_column(
    entries: &[(u32, f64)],
    counts: &[u32],
    y: &[f64],
    total_count: f64,
    total_sum: f64,
) -> Option<(f64, f64, f64, f64)> {
    // Collapse the sampled entries into (value, count, sum) groups in value
    // order, inserting the implicit-zero group at its place.
    let mut groups: Vec<Group> = Vec::new();
    let mut nz_count = 0.0;
    let mut nz_sum = 0.0;
    let push = |groups: &mut Vec<Group>, value: f64, c: f64, s: f64| match groups.last_mut() {
        Some(g) if g.value == value => {
            g.count += c;
            g.sum += s;
        }
        _ => groups.push(Group { value, count: c, sum: s }),
    };
    let mut zero_done = false;
    let mut sampled = Vec::with_capacity(entries.len());
    for &(r, v) in entries {
        let c = counts[r as usize];
        if c > 0 {
            nz_count += c as f64;
            nz_sum += c as f64 * y[r as usize];
            sampled.push((v, c as f64, c as f64 * y[r as usize]));
        }
    }
    let zero_count = total_count - nz_count;
    let zero_sum = total_sum - nz_sum;
    for (v, c, s) in sampled {
        if !zero_done && v > 0.0 {
            if zero_count > 0.0 {
                push(&mut groups, 0.0, zero_count, zero_sum);
            }
            zero_done = true;
        }
        push(&mut groups, v, c, s);
    }
    if !zero_done && zero_count > 0.0 {
        push(&mut groups, 0.0, zero_count, zero_sum);
    }

    let mut best: Option<(f64, f64, f64, f64)> = None;
    let mut lc = 0.0;
    let mut ls = 0.0;
    for w in groups.windows(2) {
        lc += w[0].count;
        ls += w[0].sum;
        let rc = total_count - lc;
        let rs = total_sum - ls;
        let gain = ls * ls / lc + rs * rs / rc;
        if best.is_none_or(|b| gain > b.0 + GAIN_TOLERANCE * b.0.abs().max(1.0)) {
            let threshold = w[0].value + (w[1].value - w[0].value) / 2.0;
            best = Some((gain, threshold, ls / lc, rs / rc));
        }
    }
    best
}

/// Least-squares stump for targets `y` replicated by `counts`.
pub fn fit_stump(x: &FeatureMatrix, y: &[f64], counts: &[u32], exec: Exec) -> Stump {
    let total_count: f64 = counts.iter().map(|&c| c as f64).sum();
    let total_sum: f64 = counts.iter().zip(y).map(|(&c, &t)| c as f64 * t).sum();
    let per_col = exec.map_range(x.n_cols(), |c| {
        best_split_in_column(&x.columns[c], counts, y, total_count, total_sum)
    });
    let mut best: Option<(f64, Stump)> = None;
    for (c, found) in per_col.into_iter().enumerate() {
        let Some((gain, threshold, left, right)) = found else {
            continue;
        };
        if best.is_none_or(|(b, _)| gain > b + GAIN_TOLERANCE * b.abs().max(1.0)) {
            best = Some((
                gain,
                Stump {
                    feature: c as u32,
                    threshold,
                    left,
                    right,
                },
            ));
        }
    }
    match best {
        Some((_, s)) => s,
        None => Stump::constant(if total_count > 0.0 { total_sum / total_count } else { 0.0 }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpEnsemble {
    pub loss: Loss,
    pub stumps: Vec<Stump>,
    pub weights: Vec<f64>,
}

impl StumpEnsemble {
    pub fn validate(&self) -> Result<()> {
        if self.stumps.is_empty() || self.stumps.len() != self.weights.len() {
            return Err(Error::Checkpoint("ensemble needs one positive weight per stump".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Checkpoint("stump weights must be finite and positive".into()));
        }
        Ok(())
    }

    /// Weighted median of stump outputs, before clamping.
    pub fn raw_predict(&self, row: &SparseVector) -> f64 {
        let outputs: Vec<f64> = self.stumps.iter().map(|s| s.predict(row)).collect();
        weighted_median(&outputs, &self.weights)
    }
}

/// Lower weighted median: the smallest output whose cumulative weight
/// reaches half the total. Ties keep estimator order.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut cdf = 0.0;
    for &i in &order {
        cdf += weights[i];
        if cdf >= 0.5 * total {
            return values[i];
        }
    }
    values[*order.last().expect("non-empty ensemble")]
}

pub fn ab_predict(ensemble: &StumpEnsemble, row: &SparseVector) -> f64 {
    ensemble.raw_predict(row).clamp(0.0, 1.0)
}

/// Everything one boosting round computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    /// How often each training row was drawn for this round's stump.
    pub sample_counts: Vec<u32>,
    pub stump: Stump,
    pub max_error: f64,
    pub avg_loss: f64,
    pub beta: Option<f64>,
    pub stump_weight: Option<f64>,
    /// Example weights after the update; equal to the incoming weights when
    /// the round stopped boosting.
    pub weights: Vec<f64>,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitTrace {
    pub initial_weights: Vec<f64>,
    pub rounds: Vec<Round>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbConfig {
    pub n_estimators: usize,
    pub loss: Loss,
    pub seed: u64,
}

impl Default for AbConfig {
    fn default() -> Self {
        AbConfig {
            n_estimators: DEFAULT_ESTIMATORS,
            loss: Loss::Linear,
            seed: 0,
        }
    }
}

fn resample(weights: &[f64], rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let mut counts = vec![0u32; weights.len()];
    for _ in 0..weights.len() {
        let u = rng.gen::<f64>() * acc;
        let i = cdf.partition_point(|&c| c <= u).min(weights.len() - 1);
        counts[i] += 1;
    }
    counts
}

pub fn ab_fit(x: &FeatureMatrix, y: &[f64], config: AbConfig, exec: Exec) -> Result<(StumpEnsemble, FitTrace)> {
    let n = x.n_rows();
    if n != y.len() {
        return Err(Error::Shape(format!("{n} rows but {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::Invalid("boosting needs at least two examples".into()));
    }
    if config.n_estimators == 0 {
        return Err(Error::Config("n_estimators must be at least 1".into()));
    }
    if let Some(bad) = y.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Invalid(format!("target {bad} outside [0, 1]")));
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let initial = vec![1.0 / n as f64; n];
    let mut trace = FitTrace {
        initial_weights: initial.clone(),
        rounds: Vec::new(),
    };
    let mut ens = StumpEnsemble {
        loss: config.loss,
        stumps: Vec::new(),
        weights: Vec::new(),
    };
    if lo == hi {
        ens.stumps.push(Stump::constant(lo));
        ens.weights.push(1.0);
        return Ok((ens, trace));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = initial;
    for _ in 0..config.n_estimators {
        let counts = resample(&w, &mut rng);
        let mut stump = fit_stump(x, y, &counts, exec);
        stump.left = stump.left.clamp(lo, hi);
        stump.right = stump.right.clamp(lo, hi);

        let col = x.column(stump.feature as usize);
        let err: Vec<f64> = col.iter().zip(y).map(|(&v, &t)| (stump.eval(v) - t).abs()).collect();
        let max_error = err.iter().copied().fold(0.0, f64::max);
        let mut round = Round {
            sample_counts: counts,
            stump,
            max_error,
            avg_loss: 0.0,
            beta: None,
            stump_weight: None,
            weights: w.clone(),
            kept: true,
        };
        if max_error == 0.0 {
            ens.stumps.push(stump);
            ens.weights.push(1.0);
            round.stump_weight = Some(1.0);
            trace.rounds.push(round);
            break;
        }
        let losses: Vec<f64> = err.iter().map(|e| config.loss.apply(e / max_error)).collect();
        let avg: f64 = losses.iter().zip(&w).map(|(l, wi)| l * wi).sum();
        round.avg_loss = avg;
        if avg >= 0.5 {
            if ens.stumps.is_empty() {
                ens.stumps.push(stump);
                ens.weights.push(1.0);
                round.stump_weight = Some(1.0);
            } else {
                round.kept = false;
            }
            trace.rounds.push(round);
            break;
        }
        let beta = avg / (1.0 - avg);
        let alpha = (1.0 / beta).ln();
        for (wi, l) in w.iter_mut().zip(&losses) {
            *wi *= beta.powf(1.0 - l);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|wi| *wi /= total);
        ens.stumps.push(stump);
        ens.weights.push(alpha);
        round.beta = Some(beta);
        round.stump_weight = Some(alpha);
        round.weights = w.clone();
        trace.rounds.push(round);
    }
    log::debug!("boosting kept {} stumps", ens.stumps.len());
    Ok((ens, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn rows(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_dense(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    fn predict_all(e: &StumpEnsemble, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| ab_predict(e, &SparseVector::from_dense(&[x]))).collect()
    }

    #[test]
    fn constant_target() {
        let (e, _) = ab_fit(&rows(&[0.0, 1.0, 2.0]), &[0.3; 3], AbConfig::default(), Exec::Sequential).unwrap();
        assert_eq!(e.stumps.len(), 1);
        assert_eq!(predict_all(&e, &[0.0, 5.0, -1.0]), vec![0.3; 3]);
    }

    #[test]
    fn separable_four_points() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let cfg = AbConfig {
            n_estimators: 10,
            ..AbConfig::default()
        };
        let (e, _) = ab_fit(&rows(&xs), &y, cfg, Exec::Sequential).unwrap();
        for (p, t) in predict_all(&e, &xs).iter().zip(&y) {
            assert!((p - t).abs() < 0.05);
        }
    }

    #[test]
    fn median_convention() {
        assert_eq!(weighted_median(&[0.8, 0.2], &[1.0, 1.0]), 0.2);
        assert_eq!(weighted_median(&[0.5], &[2.0]), 0.5);
        assert_eq!(weighted_median(&[0.1, 0.9, 0.4], &[1.0, 5.0, 1.0]), 0.9);
    }

    #[test]
    fn stump_search_handles_negative_and_zero_values() {
        let x = FeatureMatrix::from_dense(&[vec![-1.0], vec![0.0], vec![0.0], vec![2.0]]).unwrap();
        let y = [0.0, 1.0, 1.0, 0.0];
        let s = fit_stump(&x, &y, &[1, 1, 1, 1], Exec::Sequential);
        assert_eq!(s.threshold, -0.5);
        assert_eq!((s.left, s.right), (0.0, 2.0 / 3.0));
    }

    #[test]
    fn parallel_search_matches_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dense: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..40).map(|_| if rng.gen_bool(0.3) { rng.gen() } else { 0.0 }).collect())
            .collect();
        let y: Vec<f64> = (0..60).map(|_| rng.gen()).collect();
        let x = FeatureMatrix::from_dense(&dense).unwrap();
        let cfg = AbConfig::default();
        let a = ab_fit(&x, &y, cfg, Exec::Sequential).unwrap();
        let b = ab_fit(&x, &y, cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn weights_stay_a_distribution_and_predictions_in_range(
            data in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..=1.0), 2..30),
            seed in 0u64..1000,
            n_estimators in 1usize..12,
        ) {
            let x = FeatureMatrix::from_dense(&data.iter().map(|d| vec![d.0, d.1]).collect::<Vec<_>>()).unwrap();
            let y: Vec<f64> = data.iter().map(|d| d.2).collect();
            let (e, trace) = ab_fit(&x, &y, AbConfig { n_estimators, loss: Loss::Linear, seed }, Exec::Sequential).unwrap();
            prop_assert!(e.validate().is_ok());
            prop_assert!(e.stumps.len() <= n_estimators);
            for r in &trace.rounds {
                prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for d in &data {
                let p = e.raw_predict(&SparseVector::from_dense(&[d.0, d.1]));
                prop_assert!(p >= lo && p <= hi);
            }
        }

        #[test]
        fn single_estimator_is_a_plain_stump(
            data in proptest::collection::vec((0.0f64..1.0, 0.0f64..=1.0), 2..20),
            seed in 0u64..100,
        ) {
            let x = FeatureMatrix::from_dense(&data.iter().map(|d| vec![d.0]).collect::<Vec<_>>()).unwrap();
            let y: Vec<f64> = data.iter().map(|d| d.1).collect();
            let (e, trace) = ab_fit(&x, &y, AbConfig { n_estimators: 1, loss: Loss::Linear, seed }, Exec::Sequential).unwrap();
            prop_assert_eq!(e.stumps.len(), 1);
            if let Some(r) = trace.rounds.first() {
                let plain = fit_stump(&x, &y, &r.sample_counts, Exec::Sequential);
                for d in &data {
                    let row = SparseVector::from_dense(&[d.0]);
                    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert_eq!(e.raw_predict(&row), plain.predict(&row).clamp(lo, hi));
                }
            }
        }
    }
}
