//! Unigram tf-idf with smoothed idf and L2-normalized rows.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing column indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVector {
    pub fn from_dense(values: &[f64]) -> Self {
        let mut v = SparseVector::default();
        for (i, &x) in values.iter().enumerate() {
            if x != 0.0 {
                v.indices.push(i as u32);
                v.values.push(x);
            }
        }
        v
    }

    pub fn get(&self, col: u32) -> f64 {
        match self.indices.binary_search(&col) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Append `dense` after column `offset`, keeping zeros implicit.
    pub fn extend_dense(&mut self, offset: u32, dense: &[f64]) {
        for (k, &x) in dense.iter().enumerate() {
            if x != 0.0 {
                self.indices.push(offset + k as u32);
                self.values.push(x);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    /// Terms in column order (alphabetical).
    terms: Vec<String>,
    idf: Vec<f64>,
    n_docs: usize,
    #[serde(skip)]
    columns: HashMap<String, u32>,
}

impl TfidfModel {
    pub fn fit<S: AsRef<str>>(corpus: &[Vec<S>]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Invalid("tf-idf needs at least one document".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in corpus {
            let uniq: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for t in uniq {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
        let idf = df
            .values()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(Self::from_parts(terms, idf, corpus.len()))
    }

    fn from_parts(terms: Vec<String>, idf: Vec<f64>, n_docs: usize) -> Self {
        let columns = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        TfidfModel {
            terms,
            idf,
            n_docs,
            columns,
        }
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(self) -> Result<Self> {
        if self.terms.len() != self.idf.len() {
            return Err(Error::Checkpoint("tf-idf terms and idf differ in length".into()));
        }
        if self.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Checkpoint("tf-idf terms not sorted and unique".into()));
        }
        Ok(Self::from_parts(self.terms, self.idf, self.n_docs))
    }

    pub fn n_features(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn column(&self, term: &str) -> Option<u32> {
        self.columns.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.column(term).map(|c| self.idf[c as usize])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Raw counts times idf, scaled to unit L2 norm. Unknown terms are ignored.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector {
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        for t in doc {
            if let Some(c) = self.column(t.as_ref()) {
                *counts.entry(c).or_default() += 1.0;
            }
        }
        let mut v = SparseVector {
            indices: Vec::with_capacity(counts.len()),
            values: Vec::with_capacity(counts.len()),
        };
        for (c, tf) in counts {
            v.indices.push(c);
            v.values.push(tf * self.idf[c as usize]);
        }
        let norm = v.norm();
        if norm > 0.0 {
            v.values.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn docs(d: &[&[&str]]) -> Vec<Vec<String>> {
        d.iter().map(|x| x.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn smoothed_idf() {
        let m = TfidfModel::fit(&docs(&[&["a"], &["a", "b"]])).unwrap();
        assert_eq!(m.idf("a"), Some(1.0));
        assert_abs_diff_eq!(m.idf("b").unwrap(), 1.405_465_108_108_164_4, epsilon = 1e-12);
        assert_eq!(m.terms(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn transform_cases() {
        let m = TfidfModel::fit(&docs(&[&["a"], &["a", "b"]])).unwrap();
        let one = m.transform(&["b"]);
        assert_eq!((one.indices.as_slice(), one.values.as_slice()), (&[1u32][..], &[1.0][..]));
        assert_eq!(m.transform(&["zzz"]).nnz(), 0);
        assert_eq!(m.transform::<&str>(&[]).nnz(), 0);
        assert!(TfidfModel::fit::<String>(&[]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let m = TfidfModel::fit(&docs(&[&["x", "y"], &["y"]])).unwrap();
        let back: TfidfModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        let back = back.reindex().unwrap();
        assert_eq!(back.transform(&["x", "y"]), m.transform(&["x", "y"]));
    }

    proptest! {
        #[test]
        fn unit_or_zero_norm(
            corpus in proptest::collection::vec(proptest::collection::vec("[a-e]", 0..6), 1..6),
            doc in proptest::collection::vec("[a-g]", 0..10),
        ) {
            let m = TfidfModel::fit(&corpus).unwrap();
            let n = m.transform(&doc).norm();
            prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-12);
            for t in m.terms() {
                prop_assert!(m.idf(t).unwrap() >= 1.0);
            }
        }
    }
}
