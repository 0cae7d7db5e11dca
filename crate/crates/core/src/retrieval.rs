//! Top-k retrieval over a query × database similarity matrix and the
//! label-overlap metrics used to score the rank-1 neighbour.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;

/// Instance count per class; absent classes count as zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceCounts(pub BTreeMap<String, u64>);

impl InstanceCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, class: &str) -> u64 {
        self.0.get(class).copied().unwrap_or(0)
    }

    /// Classes with at least one instance.
    pub fn present(&self) -> BTreeSet<String> {
        self.0.iter().filter(|(_, &n)| n > 0).map(|(c, _)| c.clone()).collect()
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for InstanceCounts {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        InstanceCounts(iter.into_iter().map(|(c, n)| (c.into(), n)).collect())
    }
}

/// `F1 = 2·TP / (2·TP + FP + FN)` with `TP = Σ min(Q_c, D_c)`,
/// `FN = Σ max(0, Q_c − D_c)`, `FP = Σ max(0, D_c − Q_c)`. Two empty label
/// sets score 1.
pub fn f1_instance_overlap(query: &InstanceCounts, retrieved: &InstanceCounts) -> f64 {
    let classes: BTreeSet<&String> = query.0.keys().chain(retrieved.0.keys()).collect();
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for class in classes {
        let q = query.count(class);
        let d = retrieved.count(class);
        tp += q.min(d);
        fn_ += q.saturating_sub(d);
        fp += d.saturating_sub(q);
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return 1.0;
    }
    (2 * tp) as f64 / denom as f64
}

/// `|q ∩ d| / |q ∪ d|`, 1 for two empty sets.
pub fn iou_class_presence(query: &BTreeSet<String>, retrieved: &BTreeSet<String>) -> f64 {
    let union = query.union(retrieved).count();
    if union == 0 {
        return 1.0;
    }
    query.intersection(retrieved).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub query_id: String,
    pub indices: Vec<usize>,
    pub ranked_ids: Vec<String>,
    pub scores: Vec<f64>,
    /// Fewer than `k` eligible database entries existed.
    pub short: bool,
}

/// Database columns whose group equals the query's group are skipped.
#[derive(Debug, Clone, Copy)]
pub struct GroupExclusion<'a> {
    pub query_group: &'a str,
    pub database_groups: &'a [String],
}

/// The `k` highest-scoring database columns of row `query_index`, ties by
/// lowest column index.
pub fn retrieve_topk(
    sim: &SimilarityMatrix,
    query_index: usize,
    k: usize,
    exclude: Option<GroupExclusion<'_>>,
) -> Result<RetrievalResult> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if query_index >= sim.rows() {
        return Err(Error::InvalidParameter(alloc::format!(
            "query index {query_index} out of range for {} rows",
            sim.rows()
        )));
    }
    if let Some(ex) = exclude {
        crate::error::check_len(sim.cols(), ex.database_groups.len())?;
    }
    let row = sim.values.row(query_index);
    let mut eligible: Vec<usize> = (0..sim.cols())
        .filter(|&c| exclude.is_none_or(|ex| ex.database_groups[c] != ex.query_group))
        .collect();
    eligible.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    let short = eligible.len() < k;
    eligible.truncate(k);
    Ok(RetrievalResult {
        query_id: sim.row_id(query_index),
        ranked_ids: eligible.iter().map(|&c| sim.col_id(c)).collect(),
        scores: eligible.iter().map(|&c| row[c]).collect(),
        indices: eligible,
        short,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMetric {
    F1,
    Iou,
}

impl RetrievalMetric {
    pub fn name(self) -> &'static str {
        match self {
            RetrievalMetric::F1 => "f1",
            RetrievalMetric::Iou => "iou",
        }
    }

    pub fn score(self, query: &InstanceCounts, retrieved: &InstanceCounts) -> f64 {
        match self {
            RetrievalMetric::F1 => f1_instance_overlap(query, retrieved),
            RetrievalMetric::Iou => iou_class_presence(&query.present(), &retrieved.present()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryEvaluation {
    pub retrieval: RetrievalResult,
    /// Metric between the query and its rank-1 neighbour; 0 if nothing was eligible.
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub metric: RetrievalMetric,
    pub k: usize,
    pub mean: f64,
    pub queries: Vec<QueryEvaluation>,
}

/// Rank-1 metric for every query (in row order) and its mean. Labels are
/// keyed by the matrix row/column ids.
pub fn evaluate_retrieval(
    sim: &SimilarityMatrix,
    labels: &BTreeMap<String, InstanceCounts>,
    k: usize,
    metric: RetrievalMetric,
    groups: Option<(&[String], &[String])>,
) -> Result<RetrievalReport> {
    if let Some((q, d)) = groups {
        crate::error::check_len(sim.rows(), q.len())?;
        crate::error::check_len(sim.cols(), d.len())?;
    }
    let lookup = |id: &str| labels.get(id).ok_or_else(|| Error::MissingLabel(id.into()));
    for c in 0..sim.cols() {
        lookup(&sim.col_id(c))?;
    }
    let mut queries = Vec::with_capacity(sim.rows());
    for r in 0..sim.rows() {
        let exclude = groups.map(|(q, d)| GroupExclusion {
            query_group: &q[r],
            database_groups: d,
        });
        let retrieval = retrieve_topk(sim, r, k, exclude)?;
        let query_labels = lookup(&retrieval.query_id)?;
        let value = match retrieval.ranked_ids.first() {
            Some(top) => metric.score(query_labels, lookup(top)?),
            None => 0.0,
        };
        queries.push(QueryEvaluation {
            retrieval,
            metric: value,
        });
    }
    let mean = if queries.is_empty() {
        0.0
    } else {
        queries.iter().map(|q| q.metric).sum::<f64>() / queries.len() as f64
    };
    Ok(RetrievalReport {
        metric,
        k,
        mean,
        queries,
    })
}
