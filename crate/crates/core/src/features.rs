//! Character-trigram features and the trigram vocabulary.
//!
//! Texts are broken into overlapping windows of 3 Unicode codepoints
//! (stride 1, no padding, case preserved), so a text of `n ≥ 3` codepoints
//! yields `n - 2` trigrams.  The vocabulary maps each retained trigram to a
//! dense index in `[1, V]`; index `0` is reserved for unknown trigrams.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};

/// Reserved index for trigrams outside the vocabulary.
pub const UNK: u32 = 0;

/// Iterate the character trigrams of `text` (codepoint windows of 3).
pub fn trigrams(text: &str) -> impl Iterator<Item = String> + '_ {
    let chars: Vec<char> = text.chars().collect();
    (0..chars.len().saturating_sub(2)).map(move |i| chars[i..i + 3].iter().collect())
}

/// Trigram-to-index table with a reserved unknown slot.
///
/// Indices are dense in `[1, V]` and assigned in descending frequency
/// order (ties broken by codepoint order), so the table is identical for
/// identical input corpora.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrigramVocab {
    /// Trigram for index `i + 1`.
    entries: Vec<String>,
    index: HashMap<String, u32>,
    min_count: u32,
}

impl TrigramVocab {
    /// Number of known trigrams (the embedding table has `V + 1` rows).
    pub fn v(&self) -> u32 {
        self.entries.len() as u32
    }

    /// The frequency threshold the vocabulary was built with.
    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    /// Index of `trigram`, or [`UNK`] if it was never seen (or was pruned).
    pub fn lookup(&self, trigram: &str) -> u32 {
        self.index.get(trigram).copied().unwrap_or(UNK)
    }

    /// Trigram assigned to `idx`, if `idx` is a known index.
    pub fn trigram(&self, idx: u32) -> Option<&str> {
        if idx == UNK {
            return None;
        }
        self.entries.get(idx as usize - 1).map(|s| s.as_str())
    }

    /// Serialize to the vocabulary file format: a `V=<int> min_count=<int>`
    /// header line followed by one `trigram<TAB>index` line per entry, in
    /// index order.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("V={} min_count={}\n", self.v(), self.min_count);
        for (i, t) in self.entries.iter().enumerate() {
            out.push_str(t);
            out.push('\t');
            out.push_str(&(i as u32 + 1).to_string());
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the serialized table, hex-encoded.  Checkpoints store
    /// this to refuse mismatched vocabularies at load time.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_file_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Write the table to `path` in the vocabulary file format.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string())?;
        Ok(())
    }

    /// Load a table previously written by [`TrigramVocab::save`].
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file_string(&fs::read_to_string(path)?)
    }

    /// Parse the vocabulary file format.
    pub fn from_file_string(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::VocabParse {
            line: 1,
            reason: "empty file".to_string(),
        })?;
        let parse_field = |field: &str, prefix: &str| -> Result<u32> {
            field
                .strip_prefix(prefix)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::VocabParse {
                    line: 1,
                    reason: format!("expected `{prefix}<int>`, got {field:?}"),
                })
        };
        let mut fields = header.split(' ');
        let v: u32 = parse_field(fields.next().unwrap_or(""), "V=")?;
        let min_count: u32 = parse_field(fields.next().unwrap_or(""), "min_count=")?;

        let mut entries = Vec::with_capacity(v as usize);
        let mut index = HashMap::with_capacity(v as usize);
        for (i, line) in lines {
            let line_no = i + 1;
            let (trigram, idx) = line.rsplit_once('\t').ok_or_else(|| Error::VocabParse {
                line: line_no,
                reason: "expected trigram<TAB>index".to_string(),
            })?;
            let idx: u32 = idx.parse().map_err(|_| Error::VocabParse {
                line: line_no,
                reason: format!("bad index {idx:?}"),
            })?;
            if idx as usize != entries.len() + 1 {
                return Err(Error::VocabParse {
                    line: line_no,
                    reason: format!("indices must be dense and ordered; got {idx}"),
                });
            }
            entries.push(trigram.to_string());
            index.insert(trigram.to_string(), idx);
        }
        if entries.len() != v as usize {
            return Err(Error::VocabParse {
                line: 1,
                reason: format!("header claims V={v} but file has {} entries", entries.len()),
            });
        }
        Ok(TrigramVocab {
            entries,
            index,
            min_count,
        })
    }
}

/// Build a vocabulary from the texts of `records`, keeping trigrams whose
/// total occurrence count is at least `min_count` (0 behaves like 1).
///
/// Call this on training-split records only, so that dev/test text cannot
/// influence the index space.
pub fn build_vocab(records: &[TweetRecord], min_count: u32) -> Result<TrigramVocab> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for r in records {
        for t in trigrams(&r.text) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let threshold = min_count.max(1) as u64;
    let mut kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= threshold)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocab { min_count });
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let entries: Vec<String> = kept.into_iter().map(|(t, _)| t).collect();
    let index: HashMap<String, u32> = entries
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32 + 1))
        .collect();
    Ok(TrigramVocab {
        entries,
        index,
        min_count,
    })
}

/// Encode `text` as the ordered sequence of its trigram indices, mapping
/// out-of-vocabulary trigrams to [`UNK`].  Errors when the text is shorter
/// than 3 codepoints.
pub fn encode(text: &str, vocab: &TrigramVocab) -> Result<Vec<u32>> {
    let n = text.chars().count();
    if n < 3 {
        return Err(Error::TextTooShort { got: n });
    }
    Ok(trigrams(text).map(|t| vocab.lookup(&t)).collect())
}

/// An encoded record: its trigram index sequence plus provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrigramSequence {
    pub indices: Vec<u32>,
    /// Id of the record the sequence came from.
    pub source_id: u64,
}

impl TrigramSequence {
    pub fn from_record(record: &TweetRecord, vocab: &TrigramVocab) -> Result<Self> {
        Ok(TrigramSequence {
            indices: encode(&record.text, vocab)?,
            source_id: record.id,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Sparse bag-of-trigrams count vector over the `V + 1` index space.
///
/// This is a diagnostic view of a text (the encoder itself consumes the
/// ordered sequence from [`encode`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermVector {
    counts: BTreeMap<u32, u32>,
    dim: u32,
}

impl TermVector {
    /// Count of index `idx`.
    pub fn get(&self, idx: u32) -> u32 {
        self.counts.get(&idx).copied().unwrap_or(0)
    }

    /// Total trigram occurrences, equal to the encoded sequence length.
    pub fn total(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    /// Dimension of the dense equivalent (`V + 1`).
    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Non-zero entries in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }
}

/// Sparse trigram counts of `text` over the vocabulary's index space.
pub fn term_vector(text: &str, vocab: &TrigramVocab) -> Result<TermVector> {
    let indices = encode(text, vocab)?;
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    for i in indices {
        *counts.entry(i).or_insert(0) += 1;
    }
    Ok(TermVector {
        counts,
        dim: vocab.v() + 1,
    })
}
