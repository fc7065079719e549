//! Seeded synthetic corpora and media fixtures for tests and benchmarks.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Post, TruthAnnotation, TruthClass};
use crate::media::{CategoryMap, Detection, ObjectTagRecord};

/// Token carried by every positive post of [`separable_corpus`].
pub const MARKER: &str = "zinger";

const FILLER: &[&str] = &[
    "alder", "birch", "cedar", "dune", "ember", "fjord", "grove", "heath", "inlet", "jetty", "knoll", "larch",
    "marsh", "nook", "orchard", "pebble", "quarry", "ridge", "spruce", "tundra", "upland", "vale", "willow",
    "yarrow",
];

/// Lexicon words scattered over both classes so cue vectors vary without
/// carrying the label.
const CUE_NOISE: &[&str] = &["may", "claim", "suggests", "realize", "managed", "perhaps"];

fn sentence(rng: &mut ChaCha8Rng, marker: bool) -> String {
    let len = rng.gen_range(5..10);
    let mut words: Vec<&str> = (0..len).map(|_| *FILLER.choose(rng).expect("filler")).collect();
    if rng.gen_bool(0.5) {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, CUE_NOISE.choose(rng).expect("cue"));
    }
    if marker {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, MARKER);
    }
    words.join(" ")
}

/// `2 * per_class` posts; the positive half contains [`MARKER`] in its tweet
/// and has truth 1.0, the rest have truth 0.0. Posts are interleaved.
pub fn separable_corpus(per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut posts = Vec::with_capacity(2 * per_class);
    let mut truths = HashMap::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let positive = i % 2 == 0;
        let id = format!("s{i:04}");
        let mut p = Post::new(&id);
        p.post_text = vec![sentence(&mut rng, positive)];
        p.target_title = sentence(&mut rng, false);
        p.target_paragraphs = vec![sentence(&mut rng, false), sentence(&mut rng, false)];
        let score = if positive { 1.0 } else { 0.0 };
        let judgments = vec![score; 5];
        truths.insert(
            id.clone(),
            TruthAnnotation {
                id: id.clone(),
                judgments,
                truth_mean: score,
                truth_class: TruthClass::from_score(score),
                provenance: Default::default(),
            },
        );
        posts.push(p);
    }
    Dataset::new("synthetic", posts, Some(truths)).expect("unique ids")
}

/// Unlabelled posts drawn from the same generator, ids prefixed `u`.
pub fn unlabelled_corpus(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let posts = (0..n)
        .map(|i| {
            let mut p = Post::new(format!("u{i:05}"));
            let marker = rng.gen_bool(0.3);
            p.post_text = vec![sentence(&mut rng, marker)];
            p
        })
        .collect();
    Dataset::new("synthetic-unlabelled", posts, None).expect("unique ids")
}

fn labels_in<'a>(cmap: &'a CategoryMap, category: &str) -> Vec<&'a str> {
    cmap.labels().filter(|l| cmap.category(l) == Some(category)).collect()
}

/// Posts with scores spread over [0, 1] whose detections shift from
/// vehicles at low scores to food at high scores; other categories stay flat.
pub fn trend_fixture(n: usize, seed: u64, cmap: &CategoryMap) -> (Vec<ObjectTagRecord>, HashMap<String, f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vehicle = labels_in(cmap, "vehicle");
    let food = labels_in(cmap, "food");
    let other: Vec<&str> = cmap
        .labels()
        .filter(|l| !matches!(cmap.category(l), Some("vehicle") | Some("food")))
        .collect();
    let mut tags = Vec::with_capacity(n);
    let mut scores = HashMap::with_capacity(n);
    for i in 0..n {
        let id = format!("m{i:05}");
        let s = (i as f64 + 0.5) / n as f64;
        let n_food = (8.0 * s).round() as usize;
        let n_vehicle = 8 - n_food;
        let mut detections = Vec::with_capacity(12);
        let mut push = |pool: &[&str], k: usize, rng: &mut ChaCha8Rng| {
            for _ in 0..k {
                detections.push(Detection {
                    label: pool.choose(rng).expect("labels").to_string(),
                    score: rng.gen_range(0.5..1.0),
                });
            }
        };
        push(&vehicle, n_vehicle, &mut rng);
        push(&food, n_food, &mut rng);
        push(&other, 4, &mut rng);
        tags.push(ObjectTagRecord { id: id.clone(), detections });
        scores.insert(id, s);
    }
    (tags, scores)
}

/// Random detections over the full label inventory with random classes.
pub fn random_tags(
    n: usize,
    seed: u64,
    cmap: &CategoryMap,
) -> (Vec<ObjectTagRecord>, HashMap<String, TruthClass>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<&str> = cmap.labels().collect();
    let mut tags = Vec::with_capacity(n);
    let mut classes = HashMap::with_capacity(n);
    for i in 0..n {
        let id = format!("r{i:05}");
        let k = rng.gen_range(0..12);
        let detections = (0..k)
            .map(|_| Detection {
                label: labels.choose(&mut rng).expect("labels").to_string(),
                score: rng.gen(),
            })
            .collect();
        let class = if rng.gen_bool(0.3) {
            TruthClass::Clickbait
        } else {
            TruthClass::NoClickbait
        };
        classes.insert(id.clone(), class);
        tags.push(ObjectTagRecord { id, detections });
    }
    (tags, classes)
}
