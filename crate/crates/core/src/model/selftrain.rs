//! Pseudo-label self-training bookkeeping.

use std::collections::HashMap;

use serde::Serialize;

use crate::cues::CueLexicons;
use crate::data::{Dataset, Provenance, RatioStat, TruthAnnotation};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::media::ImageVectorStore;

use super::train::TrainedModel;

/// Record counts reported for the published unlabelled and combined sets.
pub const PUBLISHED_UNLABELLED: usize = 80_012;
pub const PUBLISHED_LABELLED: usize = 19_538;
pub const PUBLISHED_MERGED: usize = 99_551;

/// Scores every unlabelled post and attaches the score as a synthetic truth.
pub fn pseudo_label(
    model: &TrainedModel,
    unlabelled: &Dataset,
    lexicons: &CueLexicons,
    images: Option<&ImageVectorStore>,
    exec: Exec,
) -> Result<Dataset> {
    if unlabelled.truths().is_some_and(|t| !t.is_empty()) {
        return Err(Error::Invalid(format!(
            "dataset `{}` already has truth annotations",
            unlabelled.name
        )));
    }
    let preds = model.predict(unlabelled, lexicons, images, exec)?;
    let truths: HashMap<String, TruthAnnotation> = preds
        .into_iter()
        .map(|p| (p.id.clone(), TruthAnnotation::pseudo(p.id, p.clickbait_score)))
        .collect();
    Dataset::new(
        format!("{}-pseudo", unlabelled.name),
        unlabelled.posts().to_vec(),
        Some(truths),
    )
}

/// Concatenates labelled and pseudo-labelled posts, keeping each record's
/// provenance. Ids must be disjoint.
pub fn merge_noisy(labelled: &Dataset, noisy: &Dataset) -> Result<Dataset> {
    let mut posts = Vec::with_capacity(labelled.len() + noisy.len());
    let mut truths = HashMap::with_capacity(labelled.len() + noisy.len());
    for ds in [labelled, noisy] {
        for (post, truth) in ds.posts().iter().zip(ds.aligned_truths()?) {
            if truths.insert(post.id.clone(), truth.clone()).is_some() {
                return Err(Error::DuplicateId(post.id.clone()));
            }
            posts.push(post.clone());
        }
    }
    Dataset::new("noisy-labelled", posts, Some(truths))
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfTrainReport {
    pub n_labelled: usize,
    pub n_pseudo: usize,
    pub n_merged: usize,
    pub pseudo_ratio: String,
    pub merged_ratio: String,
    pub pseudo_stat: RatioStat,
    pub merged_stat: RatioStat,
    pub labels_preserved: bool,
    /// Set when the merged count differs from the published combined count
    /// even though the inputs match the published sizes.
    pub published_count_note: Option<String>,
}

/// Summarises a merge and checks that every labelled record survived intact.
pub fn self_train_report(labelled: &Dataset, pseudo: &Dataset, merged: &Dataset) -> Result<SelfTrainReport> {
    let pseudo_stat = RatioStat::from_scores(pseudo.targets()?);
    let merged_stat = RatioStat::from_scores(merged.targets()?);
    let merged_posts: HashMap<&str, &crate::data::Post> =
        merged.posts().iter().map(|p| (p.id.as_str(), p)).collect();
    let labels_preserved = labelled.posts().iter().all(|p| {
        let (Some(orig), Some(kept)) = (labelled.truth(&p.id), merged.truth(&p.id)) else {
            return false;
        };
        orig == kept
            && orig.truth_mean.to_bits() == kept.truth_mean.to_bits()
            && kept.provenance == orig.provenance
            && merged_posts.get(p.id.as_str()) == Some(&p)
    });
    let published_count_note = (labelled.len() == PUBLISHED_LABELLED
        && pseudo.len() == PUBLISHED_UNLABELLED
        && merged.len() != PUBLISHED_MERGED)
        .then(|| {
            format!(
                "merged {} records = {} labelled + {} pseudo-labelled; the published combined count is {}",
                merged.len(),
                labelled.len(),
                pseudo.len(),
                PUBLISHED_MERGED
            )
        });
    debug_assert!(pseudo
        .truths()
        .is_none_or(|t| t.values().all(|a| a.provenance == Provenance::Pseudo)));
    Ok(SelfTrainReport {
        n_labelled: labelled.len(),
        n_pseudo: pseudo.len(),
        n_merged: merged.len(),
        pseudo_ratio: pseudo_stat.display_ratio(),
        merged_ratio: merged_stat.display_ratio(),
        pseudo_stat,
        merged_stat,
        labels_preserved,
        published_count_note,
    })
}
