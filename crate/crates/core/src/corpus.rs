//! Corpus ingestion, cleaning, labeling, pairing, and synthesis.
//!
//! A raw tweet becomes a [`TweetRecord`] by extracting exactly one label
//! emoji from its text, stripping every occurrence of that emoji, and
//! normalizing whitespace.  Records then feed label selection
//! ([`top_k_labels`]), stratified splitting ([`split`]), and contrastive
//! pair construction ([`make_pairs`]).  A deterministic synthetic generator
//! ([`synth_generate`]) produces separable toy corpora for tests and demos.
//!
//! Every sampling operation takes an explicit seed and is fully
//! reproducible: the same inputs and seed yield identical output on every
//! run.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::emoji;
use crate::error::{Error, Result};

/// One cleaned, labeled tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetRecord {
    /// 1-based input line number (or running index for synthetic data).
    pub id: u64,
    /// Cleaned text: no active-label emojis, single-spaced, trimmed,
    /// at least 3 codepoints.
    pub text: String,
    /// The emoji extracted from the raw text.
    pub label: String,
    /// Language tag carried through from the input.
    pub language: String,
}

/// Ordered set of active labels, most frequent first.
///
/// Ordering is by descending count with ties broken by codepoint order, so
/// a label's position doubles as its frequency rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    counts: Vec<u64>,
}

impl LabelSet {
    /// Build a label set from explicit (label, count) pairs, enforcing the
    /// canonical order.
    pub fn new(mut pairs: Vec<(String, u64)>) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::LabelSetTooSmall(pairs.len()));
        }
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let (labels, counts) = pairs.into_iter().unzip();
        Ok(LabelSet { labels, counts })
    }

    /// Label set in which every label has the same count (e.g. the output
    /// of the balanced synthetic generator).  Ties order by codepoint.
    pub fn balanced<I: IntoIterator<Item = String>>(labels: I, per_label: u64) -> Result<Self> {
        Self::new(labels.into_iter().map(|l| (l, per_label)).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in frequency-rank order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Occurrence count backing each label's rank.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Frequency rank of `label` (0 = most frequent), if present.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .labels
            .iter()
            .zip(&self.counts)
            .map(|(l, c)| format!("{l}:{c}"))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Input corpus serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line: `{"text": ..., "lang": ...}`.
    Jsonl,
    /// One `text<TAB>lang` pair per line (the tab separating the language
    /// tag is the last one on the line).
    Tsv,
}

/// Counters for every record that survived or failed cleaning.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub usable: u64,
    pub multi_emoji_rejects: u64,
    pub too_short_rejects: u64,
    pub no_label_rejects: u64,
}

#[derive(Serialize, Deserialize)]
struct RawTweet {
    text: String,
    lang: String,
}

/// Outcome of cleaning one raw line.
enum CleanOutcome {
    Usable { text: String, label: String },
    NoLabel,
    MultiEmoji,
    TooShort,
}

/// Extract the label from `raw`, strip its occurrences, and normalize
/// whitespace.  `alphabet` lists the emoji sequences that count as labels;
/// longer sequences are matched first so that no entry shadows a prefix of
/// another.
fn clean_text(raw: &str, alphabet: &[&str]) -> CleanOutcome {
    // Claim non-overlapping byte spans for each alphabet emoji.
    let mut order: Vec<&str> = alphabet.to_vec();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut claimed: Vec<(usize, usize)> = Vec::new();
    let mut found: HashSet<&str> = HashSet::new();
    for e in order {
        let mut from = 0;
        while let Some(pos) = raw[from..].find(e) {
            let start = from + pos;
            let end = start + e.len();
            let overlaps = claimed.iter().any(|&(s, t)| start < t && s < end);
            if !overlaps {
                claimed.push((start, end));
                found.insert(e);
            }
            from = end;
        }
    }
    match found.len() {
        0 => return CleanOutcome::NoLabel,
        1 => {}
        _ => return CleanOutcome::MultiEmoji,
    }
    let label = (*found.iter().next().expect("one label")).to_string();

    claimed.sort_unstable();
    let mut stripped = String::with_capacity(raw.len());
    let mut cursor = 0;
    for (s, t) in claimed {
        stripped.push_str(&raw[cursor..s]);
        cursor = t;
    }
    stripped.push_str(&raw[cursor..]);

    let text = normalize_whitespace(&stripped);
    if text.chars().count() < 3 {
        return CleanOutcome::TooShort;
    }
    CleanOutcome::Usable { text, label }
}

/// Collapse runs of whitespace into single spaces and trim the ends.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Load and clean a corpus file.
///
/// When `label_set` is `None` the built-in 18-emoji universe is used to
/// detect labels.  Lines whose text contains no label emoji, more than one
/// *distinct* label emoji, or fewer than 3 codepoints after stripping are
/// rejected and counted.  Repeated occurrences of a single emoji are fine:
/// the record keeps that one label and every occurrence is stripped.
///
/// Errors on unreadable files, malformed lines (reported with their line
/// number), and corpora with zero usable records.
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    label_set: Option<&LabelSet>,
) -> Result<(Vec<TweetRecord>, CleaningReport)> {
    let file = File::open(path)?;
    load_corpus_from_reader(BufReader::new(file), format, label_set)
}

/// [`load_corpus`] over any buffered reader (handy for tests and stdin).
pub fn load_corpus_from_reader<R: BufRead>(
    reader: R,
    format: CorpusFormat,
    label_set: Option<&LabelSet>,
) -> Result<(Vec<TweetRecord>, CleaningReport)> {
    let owned_alphabet: Vec<&str> = match label_set {
        Some(ls) => ls.labels().iter().map(|s| s.as_str()).collect(),
        None => emoji::EMOJI_18.to_vec(),
    };

    let mut records = Vec::new();
    let mut report = CleaningReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let (raw_text, lang) = match format {
            CorpusFormat::Jsonl => {
                let raw: RawTweet =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                        line: line_no,
                        reason: e.to_string(),
                    })?;
                (raw.text, raw.lang)
            }
            CorpusFormat::Tsv => {
                let mut it = line.rsplitn(2, '\t');
                let lang = it.next().unwrap_or_default();
                let text = it.next().ok_or_else(|| Error::MalformedLine {
                    line: line_no,
                    reason: "expected text<TAB>lang".to_string(),
                })?;
                (text.to_string(), lang.to_string())
            }
        };
        match clean_text(&raw_text, &owned_alphabet) {
            CleanOutcome::Usable { text, label } => {
                report.usable += 1;
                records.push(TweetRecord {
                    id: line_no as u64,
                    text,
                    label,
                    language: lang,
                });
            }
            CleanOutcome::NoLabel => report.no_label_rejects += 1,
            CleanOutcome::MultiEmoji => report.multi_emoji_rejects += 1,
            CleanOutcome::TooShort => report.too_short_rejects += 1,
        }
    }
    if records.is_empty() {
        return Err(Error::NoUsableRecords);
    }
    Ok((records, report))
}

/// Drop records whose text exactly matches an earlier record's text.
/// Returns the survivors (input order preserved) and the number removed.
pub fn dedup_exact(records: Vec<TweetRecord>) -> (Vec<TweetRecord>, usize) {
    let mut seen: HashSet<String> = HashSet::with_capacity(records.len());
    let before = records.len();
    let kept: Vec<TweetRecord> = records
        .into_iter()
        .filter(|r| seen.insert(r.text.clone()))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// Serialize a record back to the raw JSONL input format, re-attaching the
/// label emoji at the end of the text so that loading the line again
/// reproduces the record exactly.
pub fn to_raw_jsonl_line(record: &TweetRecord) -> String {
    let raw = RawTweet {
        text: format!("{} {}", record.text, record.label),
        lang: record.language.clone(),
    };
    serde_json::to_string(&raw).expect("plain strings always serialize")
}

/// Write records to `path` in the raw JSONL input format.
pub fn write_raw_jsonl(records: &[TweetRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(out, "{}", to_raw_jsonl_line(r))?;
    }
    Ok(())
}

/// The `k` most frequent labels among `records`, ties broken by codepoint
/// order.  The result for `k` is always a prefix of the result for `k+1`.
pub fn top_k_labels(records: &[TweetRecord], k: usize) -> Result<LabelSet> {
    if k < 2 {
        return Err(Error::LabelSetTooSmall(k));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for r in records {
        *counts.entry(r.label.as_str()).or_insert(0) += 1;
    }
    if counts.len() < k {
        return Err(Error::NotEnoughLabels {
            k,
            distinct: counts.len(),
        });
    }
    let mut pairs: Vec<(&str, u64)> = counts.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    pairs.truncate(k);
    LabelSet::new(pairs.into_iter().map(|(l, c)| (l.to_string(), c)).collect())
}

/// Keep only records whose label belongs to `label_set`.
pub fn filter_to_label_set(records: &[TweetRecord], label_set: &LabelSet) -> Vec<TweetRecord> {
    records
        .iter()
        .filter(|r| label_set.contains(&r.label))
        .cloned()
        .collect()
}

/// Whether a contrastive pair joins same-label or different-label tweets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairLabel {
    /// Same label on both sides (`y = 1`).
    Same,
    /// Different labels (`y = -1`).
    Different,
}

impl PairLabel {
    /// The signed target used by the loss: `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            PairLabel::Same => 1.0,
            PairLabel::Different => -1.0,
        }
    }
}

/// One anchor/reference pairing, stored as indices into the anchor-side and
/// reference-side corpora it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairExample {
    /// Index into the anchor-side (resource-poor) corpus.
    pub anchor: usize,
    /// Index into the reference-side (resource-rich) corpus.
    pub reference: usize,
    pub y: PairLabel,
}

/// The positive set C and negative set C′ for one sampling pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairBatch {
    /// Same-label pairs (`y = 1`).
    pub positives: Vec<PairExample>,
    /// Different-label pairs (`y = -1`); always the same length as
    /// `positives`.
    pub negatives: Vec<PairExample>,
    /// How many positive draws had to reuse a reference because an anchor's
    /// label had fewer same-label reference tweets than requested.
    pub replacement_positive_draws: u64,
}

impl PairBatch {
    /// Total number of pairs, positives plus negatives.
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }
}

/// Build contrastive pairs: for every anchor, `positives_per_anchor`
/// same-label reference tweets (sampled without replacement, falling back
/// to replacement when the label is short on references) and exactly as
/// many different-label tweets, drawn by first picking one of the other
/// labels uniformly and then one of its tweets uniformly.
///
/// The output is fully determined by the inputs and `seed`.
pub fn make_pairs(
    poor: &[TweetRecord],
    rich: &[TweetRecord],
    positives_per_anchor: usize,
    seed: u64,
) -> Result<PairBatch> {
    if positives_per_anchor == 0 {
        return Err(Error::BadConfig(
            "positives_per_anchor must be at least 1".into(),
        ));
    }
    // BTreeMap keeps label iteration in codepoint order so that negative
    // label draws are reproducible.
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (j, r) in rich.iter().enumerate() {
        by_label.entry(r.label.as_str()).or_default().push(j);
    }
    let labels: Vec<&str> = by_label.keys().copied().collect();
    for r in poor {
        if !by_label.contains_key(r.label.as_str()) {
            return Err(Error::LabelMissingInReferences(r.label.clone()));
        }
    }
    if !poor.is_empty() && labels.len() < 2 {
        return Err(Error::NoNegativeSource(labels.len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batch = PairBatch {
        positives: Vec::with_capacity(poor.len() * positives_per_anchor),
        negatives: Vec::with_capacity(poor.len() * positives_per_anchor),
        replacement_positive_draws: 0,
    };
    for (i, anchor) in poor.iter().enumerate() {
        let same = &by_label[anchor.label.as_str()];
        let mut shuffled = same.clone();
        shuffled.shuffle(&mut rng);
        for k in 0..positives_per_anchor {
            let j = if k < shuffled.len() {
                shuffled[k]
            } else {
                batch.replacement_positive_draws += 1;
                same[rng.random_range(0..same.len())]
            };
            batch.positives.push(PairExample {
                anchor: i,
                reference: j,
                y: PairLabel::Same,
            });
        }
        let others: Vec<&str> = labels
            .iter()
            .copied()
            .filter(|l| *l != anchor.label.as_str())
            .collect();
        for _ in 0..positives_per_anchor {
            let label = others[rng.random_range(0..others.len())];
            let group = &by_label[label];
            let j = group[rng.random_range(0..group.len())];
            batch.negatives.push(PairExample {
                anchor: i,
                reference: j,
                y: PairLabel::Different,
            });
        }
    }
    Ok(batch)
}

/// A stratified three-way partition of a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<TweetRecord>,
    pub dev: Vec<TweetRecord>,
    pub test: Vec<TweetRecord>,
}

/// Stratified train/dev/test split.
///
/// Each label's records are shuffled with the seeded generator and
/// apportioned by largest remainder; every part with a positive ratio is
/// then guaranteed at least one record per label, which is why each label
/// needs at least 3 records.  Splits are disjoint and their union is the
/// input.
pub fn split(records: &[TweetRecord], ratios: [f64; 3], seed: u64) -> Result<CorpusSplit> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadSplitRatios(ratios));
    }
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_label.entry(r.label.as_str()).or_default().push(i);
    }
    for (label, group) in &by_label {
        if group.len() < 3 {
            return Err(Error::LabelTooRare {
                label: label.to_string(),
                count: group.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CorpusSplit {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
    };
    for group in by_label.values() {
        let mut idx = group.clone();
        idx.shuffle(&mut rng);
        let alloc = apportion(idx.len(), ratios);
        let (a, b) = (alloc[0], alloc[0] + alloc[1]);
        out.train
            .extend(idx[..a].iter().map(|&i| records[i].clone()));
        out.dev
            .extend(idx[a..b].iter().map(|&i| records[i].clone()));
        out.test
            .extend(idx[b..].iter().map(|&i| records[i].clone()));
    }
    Ok(out)
}

/// Largest-remainder apportionment of `n` items over three ratios, with a
/// minimum of one item for every part whose ratio is positive.
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut alloc: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut rem: Vec<(f64, usize)> = raw
        .iter()
        .enumerate()
        .map(|(i, x)| (x - x.floor(), i))
        .collect();
    // Highest remainder first; ties favor the earlier part (train, dev, test).
    rem.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
    let assigned: usize = alloc.iter().sum();
    for k in 0..n.saturating_sub(assigned) {
        alloc[rem[k % 3].1] += 1;
    }
    // Guarantee one record for every part that was asked for.
    for i in 0..3 {
        if ratios[i] > 0.0 && alloc[i] == 0 {
            let donor = (0..3)
                .max_by_key(|&j| (alloc[j], usize::MAX - j))
                .expect("three parts");
            alloc[donor] -= 1;
            alloc[i] += 1;
        }
    }
    [alloc[0], alloc[1], alloc[2]]
}

const VOWELS: [char; 5] = ['a', 'e', 'i', 'o', 'u'];
const THEME_CONSONANTS: [char; 7] = ['b', 'd', 'g', 'k', 'm', 'p', 's'];

/// The word-template pool backing `label`.
///
/// Labels that share a sentiment cluster share a pool, so a generated
/// corpus is only separable *down to clusters*; pools of different clusters
/// have disjoint words (and disjoint character trigrams, since each pool
/// uses a single, unique consonant).  Only the built-in 18-emoji universe
/// has pools; other labels error.
pub fn template_pool(label: &str) -> Result<Vec<String>> {
    let rep = emoji::cluster_representative(label);
    let theme_idx = emoji::EMOJI_18
        .iter()
        .map(|e| emoji::cluster_representative(e))
        .collect::<Vec<_>>()
        .iter()
        .fold((Vec::new(), None), |(mut seen, found), r| {
            if !seen.contains(r) {
                seen.push(*r);
            }
            let found = found.or_else(|| {
                if *r == rep {
                    Some(seen.len() - 1)
                } else {
                    None
                }
            });
            (seen, found)
        })
        .1
        .ok_or_else(|| Error::EmptyTemplatePool(label.to_string()))?;
    let c = THEME_CONSONANTS[theme_idx];
    let mut words = Vec::with_capacity(10);
    for j in 0..10 {
        let v1 = VOWELS[j % 5];
        let v2 = VOWELS[j / 5];
        words.push(format!("{c}{v1}{c}{v2}"));
    }
    Ok(words)
}

/// Generate a balanced synthetic corpus: `n_per_label` records for every
/// label in `label_set`, each a short sentence of words from the label's
/// template pool.  With probability `template_noise` a word is replaced by
/// one drawn from a different pool.  Fully determined by `seed`.
pub fn synth_generate(
    n_per_label: usize,
    label_set: &LabelSet,
    template_noise: f64,
    seed: u64,
) -> Result<Vec<TweetRecord>> {
    if !(0.0..=1.0).contains(&template_noise) {
        return Err(Error::BadConfig(format!(
            "template_noise must lie in [0, 1], got {template_noise}"
        )));
    }
    if n_per_label == 0 {
        return Err(Error::BadConfig("n_per_label must be at least 1".into()));
    }
    let pools: Vec<Vec<String>> = label_set
        .labels()
        .iter()
        .map(|l| template_pool(l))
        .collect::<Result<_>>()?;
    // Distinct pools, in label order, for cross-pool noise draws.
    let mut distinct: Vec<usize> = Vec::new(); // indices of first label using each pool
    for (i, p) in pools.iter().enumerate() {
        if !distinct.iter().any(|&d| pools[d] == *p) {
            distinct.push(i);
        }
    }
    if template_noise > 0.0 && distinct.len() < 2 {
        return Err(Error::BadConfig(
            "template_noise > 0 needs at least two distinct template pools".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_per_label * label_set.len());
    let mut id = 0u64;
    for (li, label) in label_set.labels().iter().enumerate() {
        let own = &pools[li];
        let foreign: Vec<usize> = distinct
            .iter()
            .copied()
            .filter(|&d| pools[d] != *own)
            .collect();
        for _ in 0..n_per_label {
            let n_words = rng.random_range(3..=6);
            let mut words = Vec::with_capacity(n_words);
            for _ in 0..n_words {
                let cross = template_noise > 0.0 && rng.random_bool(template_noise);
                let pool = if cross {
                    &pools[foreign[rng.random_range(0..foreign.len())]]
                } else {
                    own
                };
                words.push(pool[rng.random_range(0..pool.len())].clone());
            }
            id += 1;
            records.push(TweetRecord {
                id,
                text: words.join(" "),
                label: label.clone(),
                language: "syn".to_string(),
            });
        }
    }
    Ok(records)
}

/// Parse a cleaning report back from its JSON form.
pub fn report_from_json<R: Read>(reader: R) -> Result<CleaningReport> {
    serde_json::from_reader(reader).map_err(|e| Error::MalformedLine {
        line: 0,
        reason: e.to_string(),
    })
}
