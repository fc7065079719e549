//! Precomputed image vectors and object-tag analysis.
//!
//! Image vectors and object tags are produced offline by a separate
//! extractor; this module validates and consumes its files:
//!
//! * image vectors: `{"id": "...", "vector": [2048 reals]}` per line
//! * object tags: `{"id": "...", "detections": [{"label": "...", "score": r}]}` per line
//! * category map: `label<TAB>category` lines
//! * trend output: CSV `bin_center,category,proportion`

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::TruthClass;
use crate::error::{Error, Result};

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;
/// Number of labels in the detector's training inventory.
pub const N_OBJECT_LABELS: usize = 80;
pub const N_CATEGORIES: usize = 11;

const BUNDLED_CATEGORY_MAP: &str = include_str!("../data/coco_categories.tsv");

#[derive(Serialize, Deserialize)]
struct VectorRecord {
    id: String,
    vector: Vec<f64>,
}

/// Post id → fixed-width image feature vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageVectorStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl ImageVectorStore {
    pub fn new(dim: usize) -> Self {
        ImageVectorStore {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                id,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite value in image vector `{id}`")));
        }
        if self.vectors.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn read<R: BufRead>(reader: R, dim: usize) -> Result<Self> {
        let mut store = ImageVectorStore::new(dim);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<image vectors>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: VectorRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            store.insert(rec.id, rec.vector)?;
        }
        log::info!("loaded {} image vectors of width {dim}", store.len());
        Ok(store)
    }

    pub fn load(path: &Path, dim: usize) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(f), dim)
    }

    /// Writes records sorted by id.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut ids: Vec<&String> = self.vectors.keys().collect();
        ids.sort();
        for id in ids {
            let rec = VectorRecord {
                id: id.clone(),
                vector: self.vectors[id].clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io("<image vectors>", e))?;
        }
        Ok(())
    }
}

/// Seeded stand-in vectors (uniform in [0, 1), like pooled rectified
/// activations) for tests and pipelines run without the extractor.
pub fn synthetic_image_vectors<S: AsRef<str>>(ids: &[S], dim: usize, seed: u64) -> ImageVectorStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ImageVectorStore::new(dim);
    for id in ids {
        let v = (0..dim).map(|_| rng.gen::<f64>()).collect();
        store.insert(id.as_ref(), v).expect("fresh id of the right width");
    }
    store
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTagRecord {
    pub id: String,
    #[serde(default)]
    pub detections: Vec<Detection>,
}

pub fn read_tags<R: BufRead>(reader: R) -> Result<Vec<ObjectTagRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<object tags>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ObjectTagRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(d) = rec.detections.iter().find(|d| !(0.0..=1.0).contains(&d.score)) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("confidence {} outside [0, 1]", d.score),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_tags(path: &Path) -> Result<Vec<ObjectTagRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tags(BufReader::new(f))
}

pub fn write_tags<W: Write>(tags: &[ObjectTagRecord], mut w: W) -> Result<()> {
    for t in tags {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n").map_err(|e| Error::io("<object tags>", e))?;
    }
    Ok(())
}

/// Total map from the 80 object labels onto eleven categories.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMap {
    map: BTreeMap<String, String>,
    categories: Vec<String>,
}

impl CategoryMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, cat) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected label<TAB>category".into(),
            })?;
            if map.insert(label.trim().to_string(), cat.trim().to_string()).is_some() {
                return Err(Error::DuplicateId(label.to_string()));
            }
        }
        let categories: Vec<String> = map.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if map.len() != N_OBJECT_LABELS || categories.len() != N_CATEGORIES {
            return Err(Error::Invalid(format!(
                "category map must cover {N_OBJECT_LABELS} labels with {N_CATEGORIES} categories, \
                 found {} labels and {} categories",
                map.len(),
                categories.len()
            )));
        }
        Ok(CategoryMap { map, categories })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CATEGORY_MAP).expect("bundled category map is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn category(&self, label: &str) -> Option<&str> {
        self.map.get(label).map(String::as_str)
    }

    /// Category names in sorted order; this is the column order of tables.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    fn column(&self, label: &str) -> Result<usize> {
        let cat = self
            .category(label)
            .ok_or_else(|| Error::Invalid(format!("unknown object label `{label}`")))?;
        Ok(self.categories.binary_search_by(|c| c.as_str().cmp(cat)).expect("category listed"))
    }
}

/// Detection counts and proportions for one group (a class or a score bin).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProportionRow {
    pub group: String,
    pub counts: Vec<usize>,
    pub total: usize,
    pub proportions: Vec<f64>,
    /// No detections fell in this group; proportions are all zero.
    pub empty: bool,
}

impl ProportionRow {
    fn from_counts(group: String, counts: Vec<usize>) -> Self {
        let total: usize = counts.iter().sum();
        let proportions = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        ProportionRow {
            group,
            counts,
            total,
            proportions,
            empty: total == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProportionTable {
    pub categories: Vec<String>,
    pub rows: Vec<ProportionRow>,
}

impl ProportionTable {
    pub fn row(&self, group: &str) -> Option<&ProportionRow> {
        self.rows.iter().find(|r| r.group == group)
    }

    pub fn proportion(&self, group: &str, category: &str) -> Option<f64> {
        let col = self.categories.iter().position(|c| c == category)?;
        self.row(group).map(|r| r.proportions[col])
    }

    /// CSV `group,category,count,proportion`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<proportions>", e);
        writeln!(w, "group,category,count,proportion").map_err(io)?;
        for r in &self.rows {
            for (k, cat) in self.categories.iter().enumerate() {
                writeln!(w, "{},{},{},{}", r.group, cat, r.counts[k], r.proportions[k]).map_err(io)?;
            }
        }
        Ok(())
    }
}

fn count_detections(
    rec: &ObjectTagRecord,
    cmap: &CategoryMap,
    min_confidence: f64,
    counts: &mut [usize],
) -> Result<()> {
    for d in &rec.detections {
        let col = cmap.column(&d.label)?;
        if d.score >= min_confidence {
            counts[col] += 1;
        }
    }
    Ok(())
}

/// Per-class category proportions of detections at or above `min_confidence`.
pub fn category_proportions(
    tags: &[ObjectTagRecord],
    classes: &HashMap<String, TruthClass>,
    cmap: &CategoryMap,
    min_confidence: f64,
) -> Result<ProportionTable> {
    let k = cmap.categories().len();
    let mut cb = vec![0usize; k];
    let mut not = vec![0usize; k];
    for rec in tags {
        let class = classes
            .get(&rec.id)
            .ok_or_else(|| Error::MissingTruth(rec.id.clone()))?;
        let counts = match class {
            TruthClass::Clickbait => &mut cb,
            TruthClass::NoClickbait => &mut not,
        };
        count_detections(rec, cmap, min_confidence, counts)?;
    }
    let rows = vec![
        ProportionRow::from_counts(TruthClass::NoClickbait.to_string(), not),
        ProportionRow::from_counts(TruthClass::Clickbait.to_string(), cb),
    ];
    for r in rows.iter().filter(|r| r.empty) {
        log::warn!("class {} has no detections", r.group);
    }
    Ok(ProportionTable {
        categories: cmap.categories().to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendBin {
    pub index: usize,
    pub center: f64,
    pub row: ProportionRow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendTable {
    pub categories: Vec<String>,
    /// Populated bins only, in score order.
    pub bins: Vec<TrendBin>,
    /// Indices of bins without detections.
    pub omitted: Vec<usize>,
}

impl TrendTable {
    pub fn series(&self, category: &str) -> Option<Vec<(f64, f64)>> {
        let col = self.categories.iter().position(|c| c == category)?;
        Some(self.bins.iter().map(|b| (b.center, b.row.proportions[col])).collect())
    }

    /// CSV `bin_center,category,proportion`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<trend>", e);
        writeln!(w, "bin_center,category,proportion").map_err(io)?;
        for b in &self.bins {
            for (k, cat) in self.categories.iter().enumerate() {
                writeln!(w, "{},{},{}", b.center, cat, b.row.proportions[k]).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Category proportions per equal-width score bin over [0, 1].
pub fn proportion_trend(
    tags: &[ObjectTagRecord],
    scores: &HashMap<String, f64>,
    cmap: &CategoryMap,
    bins: usize,
    min_confidence: f64,
) -> Result<TrendTable> {
    if bins < 2 {
        return Err(Error::Invalid(format!("need at least 2 bins, got {bins}")));
    }
    let k = cmap.categories().len();
    let mut counts = vec![vec![0usize; k]; bins];
    for rec in tags {
        let s = *scores
            .get(&rec.id)
            .ok_or_else(|| Error::MissingTruth(rec.id.clone()))?;
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Invalid(format!("score {s} for `{}` outside [0, 1]", rec.id)));
        }
        let bin = ((s * bins as f64).floor() as usize).min(bins - 1);
        count_detections(rec, cmap, min_confidence, &mut counts[bin])?;
    }
    let mut out = TrendTable {
        categories: cmap.categories().to_vec(),
        bins: Vec::new(),
        omitted: Vec::new(),
    };
    for (i, c) in counts.into_iter().enumerate() {
        let center = (i as f64 + 0.5) / bins as f64;
        let row = ProportionRow::from_counts(format!("{center}"), c);
        if row.empty {
            out.omitted.push(i);
        } else {
            out.bins.push(TrendBin { index: i, center, row });
        }
    }
    Ok(out)
}
