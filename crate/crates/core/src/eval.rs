//! Reference-voting classification, metrics, and emoji cluster reduction.
//!
//! Classification works by comparison, not by a softmax head: a fixed
//! number of labeled *reference* tweets per label is embedded once, and an
//! input is assigned the label whose references it matches most often,
//! where a match means cosine similarity at or above a threshold `τ`.
//! Ties fall back to the higher mean cosine, then to the more frequent
//! label (which, by label-set construction, also settles codepoint order).
//!
//! [`Metrics`] reports per-label precision/recall/F1, their unweighted
//! macro averages, and the full confusion matrix.  [`cluster_label`] and
//! friends collapse near-synonymous emojis (hearts, smiles, smirks) onto
//! one representative each for coarser-grained evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::{LabelSet, TweetRecord};
use crate::emoji;
use crate::encoder::{encode, Embedding, ModelParams};
use crate::error::{Error, Result};
use crate::features::{TrigramSequence, TrigramVocab};
use crate::loss::cosine;

/// A label that could not supply the requested number of references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shortfall {
    pub label: String,
    pub available: usize,
    pub requested: usize,
}

/// Embedded reference tweets, grouped per label in frequency-rank order.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    labels: Vec<String>,
    embeddings: Vec<Vec<Embedding>>,
    /// Labels that had fewer references available than requested.
    pub shortfalls: Vec<Shortfall>,
}

impl ReferenceSet {
    /// Assemble a reference set from precomputed embeddings.  `labels`
    /// must already be in frequency-rank order and every label needs at
    /// least one embedding.
    pub fn from_embeddings(labels: Vec<String>, embeddings: Vec<Vec<Embedding>>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyReferenceSet);
        }
        if labels.len() != embeddings.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels but {} embedding groups",
                labels.len(),
                embeddings.len()
            )));
        }
        for (l, e) in labels.iter().zip(&embeddings) {
            if e.is_empty() {
                return Err(Error::NoReferencesForLabel { label: l.clone() });
            }
        }
        Ok(ReferenceSet {
            labels,
            embeddings,
            shortfalls: Vec::new(),
        })
    }

    /// Labels in frequency-rank order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Reference embeddings of the label at rank `i`.
    pub fn embeddings_of(&self, i: usize) -> &[Embedding] {
        &self.embeddings[i]
    }

    /// Total number of stored references.
    pub fn n_total(&self) -> usize {
        self.embeddings.iter().map(|e| e.len()).sum()
    }

    fn rank_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

fn embed_record(
    record: &TweetRecord,
    params: &ModelParams,
    vocab: &TrigramVocab,
) -> Result<Embedding> {
    let seq = TrigramSequence::from_record(record, vocab)?;
    Ok(encode(&seq, params)?.0)
}

/// Sample and embed `n_per_label` reference tweets per active label from
/// `rich`.  Sampling is without replacement and deterministic in `seed`;
/// labels with fewer tweets than requested contribute everything they have
/// and are recorded as shortfalls.  Records outside the active label set
/// are ignored.
pub fn sample_references(
    rich: &[TweetRecord],
    params: &ModelParams,
    vocab: &TrigramVocab,
    label_set: &LabelSet,
    n_per_label: usize,
    seed: u64,
) -> Result<ReferenceSet> {
    if n_per_label == 0 {
        return Err(Error::BadConfig("n_per_label must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(label_set.len());
    let mut embeddings = Vec::with_capacity(label_set.len());
    let mut shortfalls = Vec::new();
    for label in label_set.labels() {
        let mut candidates: Vec<&TweetRecord> = rich.iter().filter(|r| &r.label == label).collect();
        if candidates.is_empty() {
            return Err(Error::NoReferencesForLabel {
                label: label.clone(),
            });
        }
        candidates.shuffle(&mut rng);
        if candidates.len() < n_per_label {
            shortfalls.push(Shortfall {
                label: label.clone(),
                available: candidates.len(),
                requested: n_per_label,
            });
        }
        let take = candidates.len().min(n_per_label);
        let embs: Vec<Embedding> = candidates[..take]
            .iter()
            .map(|r| embed_record(r, params, vocab))
            .collect::<Result<_>>()?;
        labels.push(label.clone());
        embeddings.push(embs);
    }
    let mut set = ReferenceSet::from_embeddings(labels, embeddings)?;
    set.shortfalls = shortfalls;
    Ok(set)
}

/// Per-label voting evidence behind one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictDiagnostics {
    /// Labels in frequency-rank order (parallel to the other fields).
    pub labels: Vec<String>,
    /// References of each label with cosine ≥ τ.
    pub match_counts: Vec<usize>,
    /// Mean cosine against each label's references.
    pub mean_cosine: Vec<f64>,
}

fn check_threshold(tau: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::ThresholdOutOfRange(tau));
    }
    Ok(())
}

/// Vote an already-computed embedding against the references.  Returns the
/// winning label's rank plus the full diagnostics.
pub fn predict_embedding(
    v: &[f64],
    refs: &ReferenceSet,
    tau: f64,
) -> Result<(usize, PredictDiagnostics)> {
    check_threshold(tau)?;
    let n = refs.labels.len();
    let mut match_counts = Vec::with_capacity(n);
    let mut mean_cosine = Vec::with_capacity(n);
    for group in &refs.embeddings {
        let mut matches = 0usize;
        let mut sum = 0.0f64;
        for r in group {
            let c = cosine(v, &r.v);
            sum += c;
            if c >= tau {
                matches += 1;
            }
        }
        match_counts.push(matches);
        mean_cosine.push(sum / group.len() as f64);
    }
    // Most matches wins; ties prefer the higher mean cosine, then the
    // earlier rank (more frequent label, which also encodes the codepoint
    // tie-break used when the label set was built).
    let mut best = 0usize;
    for i in 1..n {
        let better = match_counts[i] > match_counts[best]
            || (match_counts[i] == match_counts[best] && mean_cosine[i] > mean_cosine[best]);
        if better {
            best = i;
        }
    }
    Ok((
        best,
        PredictDiagnostics {
            labels: refs.labels.clone(),
            match_counts,
            mean_cosine,
        },
    ))
}

/// Embed `text` and vote it against the references.
pub fn predict(
    text: &str,
    params: &ModelParams,
    vocab: &TrigramVocab,
    refs: &ReferenceSet,
    tau: f64,
) -> Result<(String, PredictDiagnostics)> {
    let seq = crate::features::encode(text, vocab)?;
    let (emb, _) = crate::encoder::encode_indices(&seq, 0, params)?;
    let (rank, diag) = predict_embedding(&emb.v, refs, tau)?;
    Ok((refs.labels[rank].clone(), diag))
}

/// Precision/recall/F1 of one label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of test records truly carrying this label.
    pub support: u64,
    /// True when the label was never predicted (precision defined as 0).
    pub never_predicted: bool,
}

/// Unweighted averages across labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full evaluation result: per-label scores, macro averages, and the
/// confusion matrix (`confusion[true][predicted]`, labels in rank order).
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub labels: Vec<String>,
    pub per_label: Vec<LabelScore>,
    pub macro_avg: MacroScores,
    pub confusion: Vec<Vec<u64>>,
}

impl Metrics {
    /// Derive all scores from a confusion matrix whose rows are true
    /// labels and columns are predictions, both in `labels` order.
    pub fn from_confusion(labels: Vec<String>, confusion: Vec<Vec<u64>>) -> Result<Self> {
        let n = labels.len();
        if confusion.len() != n || confusion.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "confusion matrix must be {n}×{n} to match {n} labels"
            )));
        }
        let mut per_label = Vec::with_capacity(n);
        for i in 0..n {
            let tp = confusion[i][i];
            let support: u64 = confusion[i].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[i]).sum();
            let fp = predicted - tp;
            let fn_ = support - tp;
            let precision = if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let recall = if tp + fn_ == 0 {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            per_label.push(LabelScore {
                label: labels[i].clone(),
                precision,
                recall,
                f1,
                support,
                never_predicted: predicted == 0,
            });
        }
        let nf = n as f64;
        let macro_avg = MacroScores {
            precision: per_label.iter().map(|s| s.precision).sum::<f64>() / nf,
            recall: per_label.iter().map(|s| s.recall).sum::<f64>() / nf,
            f1: per_label.iter().map(|s| s.f1).sum::<f64>() / nf,
        };
        Ok(Metrics {
            labels,
            per_label,
            macro_avg,
            confusion,
        })
    }

    /// JSON form: `{"per_label": {label: {"p", "r", "f1"}}, "macro":
    /// {"p", "r", "f1"}, "confusion": [[...]]}`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut per_label = serde_json::Map::new();
        for s in &self.per_label {
            per_label.insert(
                s.label.clone(),
                json!({"p": s.precision, "r": s.recall, "f1": s.f1}),
            );
        }
        json!({
            "per_label": per_label,
            "macro": {
                "p": self.macro_avg.precision,
                "r": self.macro_avg.recall,
                "f1": self.macro_avg.f1,
            },
            "confusion": self.confusion,
        })
    }

    /// Aligned plain-text table with P/R/F1 columns, one row per label
    /// plus the macro row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>6} {:>6} {:>6} {:>8}\n",
            "label", "P", "R", "F1", "support"
        ));
        for s in &self.per_label {
            out.push_str(&format!(
                "{:<10} {:>6.2} {:>6.2} {:>6.2} {:>8}{}\n",
                s.label,
                s.precision,
                s.recall,
                s.f1,
                s.support,
                if s.never_predicted {
                    "  (never predicted)"
                } else {
                    ""
                },
            ));
        }
        out.push_str(&format!(
            "{:<10} {:>6.2} {:>6.2} {:>6.2} {:>8}\n",
            "macro",
            self.macro_avg.precision,
            self.macro_avg.recall,
            self.macro_avg.f1,
            self.per_label.iter().map(|s| s.support).sum::<u64>(),
        ));
        out
    }
}

/// Classify every test record by reference voting and score the results.
/// Test labels must all belong to the reference set's label set.
pub fn evaluate(
    test: &[TweetRecord],
    params: &ModelParams,
    vocab: &TrigramVocab,
    refs: &ReferenceSet,
    tau: f64,
) -> Result<Metrics> {
    check_threshold(tau)?;
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let n = refs.labels.len();
    let mut confusion = vec![vec![0u64; n]; n];
    for record in test {
        let true_rank = refs
            .rank_of(&record.label)
            .ok_or_else(|| Error::LabelMissingInReferences(record.label.clone()))?;
        let emb = embed_record(record, params, vocab)?;
        let (pred_rank, _) = predict_embedding(&emb.v, refs, tau)?;
        confusion[true_rank][pred_rank] += 1;
    }
    Metrics::from_confusion(refs.labels.clone(), confusion)
}

/// Map an emoji label onto its cluster representative (hearts → ❤️,
/// smiles → 😊, smirk/negative faces → 😬, everything else → itself).
/// Total and idempotent.
pub fn cluster_label(label: &str) -> &str {
    emoji::cluster_representative(label)
}

/// Relabel records through [`cluster_label`], leaving text untouched.
pub fn apply_cluster(records: &[TweetRecord]) -> Vec<TweetRecord> {
    records
        .iter()
        .map(|r| TweetRecord {
            id: r.id,
            text: r.text.clone(),
            label: cluster_label(&r.label).to_string(),
            language: r.language.clone(),
        })
        .collect()
}

/// Collapse a label set through [`cluster_label`], summing the counts of
/// merged labels and restoring frequency-rank order.
pub fn cluster_label_set(label_set: &LabelSet) -> Result<LabelSet> {
    let mut merged: Vec<(String, u64)> = Vec::new();
    for (label, &count) in label_set.labels().iter().zip(label_set.counts()) {
        let rep = cluster_label(label).to_string();
        match merged.iter_mut().find(|(l, _)| *l == rep) {
            Some((_, c)) => *c += count,
            None => merged.push((rep, count)),
        }
    }
    LabelSet::new(merged)
}
