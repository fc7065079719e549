//! Challenge-format instance and truth files.
//!
//! Instances and truth annotations are JSON Lines files using the public
//! corpus field names (`postText`, `targetTitle`, `truthJudgments`, ...).
//! Unknown fields are ignored and absent or `null` text fields become empty.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Scores at or above this value are clickbait.
pub const CLICKBAIT_THRESHOLD: f64 = 0.5;

/// Tolerance used when checking a file's `truthMean` against its judgments.
pub const MEAN_TOLERANCE: f64 = 1e-6;

fn null_default<'de, D, T>(d: D) -> std::result::Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: Default + Deserialize<'de>,
{
    Ok(Option::<T>::deserialize(d)?.unwrap_or_default())
}

/// One challenge instance: the social-media post and its linked article.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    #[serde(rename = "postText", default, deserialize_with = "null_default")]
    pub post_text: Vec<String>,
    #[serde(rename = "postMedia", default, deserialize_with = "null_default")]
    pub media_paths: Vec<String>,
    #[serde(rename = "postTimestamp", default, deserialize_with = "null_default")]
    pub timestamp: String,
    #[serde(rename = "targetTitle", default, deserialize_with = "null_default")]
    pub target_title: String,
    #[serde(rename = "targetDescription", default, deserialize_with = "null_default")]
    pub target_description: String,
    #[serde(rename = "targetKeywords", default, deserialize_with = "null_default")]
    pub target_keywords: String,
    #[serde(rename = "targetParagraphs", default, deserialize_with = "null_default")]
    pub target_paragraphs: Vec<String>,
    #[serde(rename = "targetCaptions", default, deserialize_with = "null_default")]
    pub target_captions: Vec<String>,
}

impl Post {
    pub fn new(id: impl Into<String>) -> Self {
        Post {
            id: id.into(),
            ..Default::default()
        }
    }

    /// The post text fragments joined by single spaces.
    pub fn tweet_text(&self) -> String {
        self.post_text.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TruthClass {
    #[serde(rename = "clickbait")]
    Clickbait,
    #[serde(rename = "no-clickbait")]
    NoClickbait,
}

impl TruthClass {
    pub fn from_score(score: f64) -> Self {
        if score >= CLICKBAIT_THRESHOLD {
            TruthClass::Clickbait
        } else {
            TruthClass::NoClickbait
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TruthClass::Clickbait => "clickbait",
            TruthClass::NoClickbait => "no-clickbait",
        }
    }
}

impl fmt::Display for TruthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a truth score came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Crowd judgments from the corpus.
    #[default]
    Annotated,
    /// Score predicted by a trained model (self-training).
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthAnnotation {
    pub id: String,
    #[serde(rename = "truthJudgments")]
    pub judgments: Vec<f64>,
    #[serde(rename = "truthMean")]
    pub truth_mean: f64,
    #[serde(rename = "truthClass")]
    pub truth_class: TruthClass,
    #[serde(default)]
    pub provenance: Provenance,
}

impl TruthAnnotation {
    /// A synthetic annotation carrying a model-predicted score.
    pub fn pseudo(id: impl Into<String>, score: f64) -> Self {
        TruthAnnotation {
            id: id.into(),
            judgments: Vec::new(),
            truth_mean: score,
            truth_class: TruthClass::from_score(score),
            provenance: Provenance::Pseudo,
        }
    }
}

/// The set of values a single annotator judgment may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JudgmentScale {
    /// {0.0, 0.3, 0.66, 1.0}
    #[default]
    Published,
    /// {0, 1/3, 2/3, 1}, as stored in some corpus releases.
    Thirds,
}

impl JudgmentScale {
    pub fn levels(self) -> [f64; 4] {
        match self {
            JudgmentScale::Published => [0.0, 0.3, 0.66, 1.0],
            JudgmentScale::Thirds => [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
        }
    }

    pub fn contains(self, value: f64) -> bool {
        self.levels()
            .iter()
            .any(|l| (l - value).abs() <= MEAN_TOLERANCE)
    }
}

/// Arithmetic mean of annotator judgments.
pub fn mean_judgment(judgments: &[f64]) -> Result<f64> {
    if judgments.is_empty() {
        return Err(Error::Invalid("mean of an empty judgment list".into()));
    }
    Ok(judgments.iter().sum::<f64>() / judgments.len() as f64)
}

/// A named collection of posts with optional truth annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub name: String,
    posts: Vec<Post>,
    truths: Option<HashMap<String, TruthAnnotation>>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate post ids and truths without a post.
    pub fn new(
        name: impl Into<String>,
        posts: Vec<Post>,
        truths: Option<HashMap<String, TruthAnnotation>>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(posts.len());
        for p in &posts {
            if p.id.is_empty() {
                return Err(Error::Invalid("post with empty id".into()));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        if let Some(t) = &truths {
            if let Some(orphan) = t.keys().find(|id| !seen.contains(id.as_str())) {
                return Err(Error::Truth {
                    id: orphan.clone(),
                    message: "no matching post".into(),
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            posts,
            truths,
        })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn truths(&self) -> Option<&HashMap<String, TruthAnnotation>> {
        self.truths.as_ref()
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn truth(&self, id: &str) -> Option<&TruthAnnotation> {
        self.truths.as_ref().and_then(|t| t.get(id))
    }

    /// Attaches truths, validating the join.
    pub fn with_truths(self, truths: HashMap<String, TruthAnnotation>) -> Result<Self> {
        Dataset::new(self.name, self.posts, Some(truths))
    }

    /// Truth scores aligned with `posts()`; errors if any post lacks a truth.
    pub fn targets(&self) -> Result<Vec<f64>> {
        self.posts
            .iter()
            .map(|p| {
                self.truth(&p.id)
                    .map(|t| t.truth_mean)
                    .ok_or_else(|| Error::MissingTruth(p.id.clone()))
            })
            .collect()
    }

    /// Truth annotations aligned with `posts()`.
    pub fn aligned_truths(&self) -> Result<Vec<&TruthAnnotation>> {
        self.posts
            .iter()
            .map(|p| {
                self.truth(&p.id)
                    .ok_or_else(|| Error::MissingTruth(p.id.clone()))
            })
            .collect()
    }

    fn subset(&self, name: String, indices: &[usize]) -> Dataset {
        let posts: Vec<Post> = indices.iter().map(|&i| self.posts[i].clone()).collect();
        let truths = self.truths.as_ref().map(|t| {
            posts
                .iter()
                .filter_map(|p| t.get(&p.id).map(|a| (p.id.clone(), a.clone())))
                .collect()
        });
        Dataset {
            name,
            posts,
            truths,
        }
    }
}

fn parse_lines<T, R, F>(reader: R, mut f: F) -> Result<()>
where
    R: BufRead,
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<()>,
{
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        f(line_no, value)?;
    }
    Ok(())
}

/// Parses a JSON Lines instance stream into a posts-only dataset.
pub fn parse_instances<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    parse_lines(reader, |line, post: Post| {
        if post.id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "missing or empty id".into(),
            });
        }
        if !seen.insert(post.id.clone()) {
            return Err(Error::DuplicateId(post.id));
        }
        posts.push(post);
        Ok(())
    })?;
    Dataset::new("", posts, None)
}

#[derive(Deserialize)]
struct RawTruth {
    id: String,
    #[serde(rename = "truthJudgments", default, deserialize_with = "null_default")]
    judgments: Vec<f64>,
    #[serde(rename = "truthMean")]
    truth_mean: f64,
    #[serde(rename = "truthClass", default)]
    truth_class: Option<TruthClass>,
    #[serde(default)]
    provenance: Provenance,
}

/// Parses a JSON Lines truth stream, validating every annotation.
///
/// Annotated records need at least five judgments on `scale` whose mean agrees
/// with `truthMean` within [`MEAN_TOLERANCE`]. Pseudo-labelled records carry
/// no judgments and only need a score in [0, 1].
pub fn parse_truth<R: BufRead>(
    reader: R,
    scale: JudgmentScale,
) -> Result<HashMap<String, TruthAnnotation>> {
    let mut out = HashMap::new();
    parse_lines(reader, |line, raw: RawTruth| {
        if raw.id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "missing or empty id".into(),
            });
        }
        let bad = |message: String| Error::Truth {
            id: raw.id.clone(),
            message,
        };
        let mean = match raw.provenance {
            Provenance::Annotated => {
                if raw.judgments.len() < 5 {
                    return Err(bad(format!(
                        "{} judgments, at least 5 required",
                        raw.judgments.len()
                    )));
                }
                if let Some(v) = raw.judgments.iter().find(|v| !scale.contains(**v)) {
                    return Err(bad(format!("judgment {v} is not on the 4-point scale")));
                }
                let mean = mean_judgment(&raw.judgments)?;
                if (mean - raw.truth_mean).abs() > MEAN_TOLERANCE {
                    return Err(bad(format!(
                        "truthMean {} disagrees with judgment mean {mean}",
                        raw.truth_mean
                    )));
                }
                mean
            }
            Provenance::Pseudo => {
                if !(0.0..=1.0).contains(&raw.truth_mean) {
                    return Err(bad(format!("score {} outside [0, 1]", raw.truth_mean)));
                }
                raw.truth_mean
            }
        };
        let class = TruthClass::from_score(mean);
        if let Some(stated) = raw.truth_class {
            if stated != class {
                log::warn!("truth `{}`: file class {stated} differs from mean-derived {class}", raw.id);
            }
        }
        let ann = TruthAnnotation {
            id: raw.id.clone(),
            judgments: raw.judgments,
            truth_mean: mean,
            truth_class: class,
            provenance: raw.provenance,
        };
        if out.insert(raw.id.clone(), ann).is_some() {
            return Err(Error::DuplicateId(raw.id));
        }
        Ok(())
    })?;
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads an instances file and, optionally, its truth file.
pub fn load_dataset(
    instances: &Path,
    truth: Option<&Path>,
    scale: JudgmentScale,
) -> Result<Dataset> {
    let mut ds = parse_instances(open(instances)?)?;
    ds.name = instances
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match truth {
        Some(t) => ds.with_truths(parse_truth(open(t)?, scale)?),
        None => Ok(ds),
    }
}

/// Writes posts back out in the instance line format.
pub fn write_instances<W: Write>(posts: &[Post], mut w: W) -> Result<()> {
    for p in posts {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(|e| Error::io("<instances>", e))?;
    }
    Ok(())
}

/// Writes truth annotations for `posts`, in post order.
pub fn write_truths<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    for t in dataset.aligned_truths()? {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n").map_err(|e| Error::io("<truth>", e))?;
    }
    Ok(())
}

/// Clickbait versus non-clickbait counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioStat {
    pub n_posts: usize,
    pub n_clickbait: usize,
    pub n_not: usize,
    /// `None` when there are no clickbait posts.
    pub ratio_not_per_clickbait: Option<f64>,
}

impl RatioStat {
    pub fn from_scores<I: IntoIterator<Item = f64>>(scores: I) -> Self {
        let (mut n_clickbait, mut n_not) = (0, 0);
        for s in scores {
            match TruthClass::from_score(s) {
                TruthClass::Clickbait => n_clickbait += 1,
                TruthClass::NoClickbait => n_not += 1,
            }
        }
        RatioStat {
            n_posts: n_clickbait + n_not,
            n_clickbait,
            n_not,
            ratio_not_per_clickbait: (n_clickbait > 0).then(|| n_not as f64 / n_clickbait as f64),
        }
    }

    /// `1:2.23` style display string, or `1:undefined`.
    pub fn display_ratio(&self) -> String {
        match self.ratio_not_per_clickbait {
            Some(r) => format!("1:{r:.2}"),
            None => "1:undefined".to_string(),
        }
    }
}

/// Counts posts by the 0.5 clickbait threshold on their truth means.
pub fn class_ratio(dataset: &Dataset) -> Result<RatioStat> {
    let scores = dataset.targets()?;
    let stat = RatioStat::from_scores(scores);
    if stat.ratio_not_per_clickbait.is_none() {
        log::warn!("dataset `{}` has no clickbait posts; ratio undefined", dataset.name);
    }
    Ok(stat)
}

/// Seeded shuffle-then-partition into (train, validation).
///
/// The validation part holds `round(val_fraction * n)` posts; both parts keep
/// the input's relative order.
pub fn train_val_split(
    dataset: &Dataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "validation fraction {val_fraction} must lie in (0, 1)"
        )));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::Invalid(format!("cannot split {n} posts")));
    }
    let n_val = ((val_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val_idx = order[..n_val].to_vec();
    let mut train_idx = order[n_val..].to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((
        dataset.subset(format!("{}-train", dataset.name), &train_idx),
        dataset.subset(format!("{}-val", dataset.name), &val_idx),
    ))
}
