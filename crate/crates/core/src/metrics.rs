//! Edit-distance evaluation: Levenshtein distance, WER, CER, and corpus
//! aggregation.
//!
//! WER and CER are pooled over a corpus (total edits divided by total
//! reference tokens), while the mean Levenshtein distance is a per-sentence
//! mean. The two disagree on corpora with unequal sentence lengths; both are
//! reported.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    /// The reference side has no tokens, so the rate is undefined.
    #[error("empty reference: {0} is undefined")]
    EmptyReference(&'static str),
    #[error("empty evaluation set")]
    EmptyCorpus,
}

/// A (reference, hypothesis) sentence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub reference: String,
    pub hypothesis: String,
}

impl EvalPair {
    pub fn new(reference: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Self {
            reference: reference.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

/// Which token granularity `corpus_report` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    WordCorpus,
    CharCorpus,
    Both,
}

/// Per-sentence edit counts, kept so callers can re-aggregate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceEval {
    pub word_edits: usize,
    pub ref_words: usize,
    pub char_edits: usize,
    pub ref_chars: usize,
}

/// Aggregated corpus metrics.
///
/// `wer`/`cer` are `None` when the requested granularity excluded them.
/// Rates may exceed 1 when the hypothesis is much longer than the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub wer: Option<f64>,
    pub cer: Option<f64>,
    pub mean_levenshtein: f64,
    pub total_ref_words: usize,
    pub total_ref_chars: usize,
    pub total_word_edits: usize,
    pub total_char_edits: usize,
    pub per_sentence: Option<Vec<SentenceEval>>,
}

/// Minimum number of single-token insertions, deletions, and substitutions
/// transforming `a` into `b`. Two-row DP, O(|a|*|b|) time, O(min(|a|,|b|))
/// memory.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    // Keep the shorter sequence as the DP row.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, x) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let up = row[j + 1];
            let cost = if x == y { 0 } else { 1 };
            row[j + 1] = (up + 1).min(row[j] + 1).min(diag + cost);
            diag = up;
        }
    }
    row[short.len()]
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

/// Word error rate: word-level Levenshtein distance divided by the number of
/// words in the reference.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64, MetricsError> {
    let r = words(reference);
    if r.is_empty() {
        return Err(MetricsError::EmptyReference("WER"));
    }
    let h = words(hypothesis);
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}

/// Character error rate: character-level Levenshtein distance divided by the
/// number of characters in the reference. Characters are Unicode scalar
/// values; spaces count.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, MetricsError> {
    let r = chars(reference);
    if r.is_empty() {
        return Err(MetricsError::EmptyReference("CER"));
    }
    let h = chars(hypothesis);
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}

/// Pooled corpus metrics over `pairs`.
///
/// WER is the sum of word edits over the sum of reference words (and CER the
/// character analogue), not a mean of per-sentence rates. The mean
/// Levenshtein distance is the per-sentence character distance averaged over
/// the pair count.
pub fn corpus_report(
    pairs: &[EvalPair],
    granularity: Granularity,
) -> Result<EvalReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let want_word = matches!(granularity, Granularity::WordCorpus | Granularity::Both);
    let want_char = matches!(granularity, Granularity::CharCorpus | Granularity::Both);

    let mut per_sentence = Vec::with_capacity(pairs.len());
    for p in pairs {
        let rw = words(&p.reference);
        let rc = chars(&p.reference);
        if want_word && rw.is_empty() {
            return Err(MetricsError::EmptyReference("WER"));
        }
        if want_char && rc.is_empty() {
            return Err(MetricsError::EmptyReference("CER"));
        }
        let hw = words(&p.hypothesis);
        let hc = chars(&p.hypothesis);
        per_sentence.push(SentenceEval {
            word_edits: levenshtein(&rw, &hw),
            ref_words: rw.len(),
            char_edits: levenshtein(&rc, &hc),
            ref_chars: rc.len(),
        });
    }

    let total_ref_words: usize = per_sentence.iter().map(|s| s.ref_words).sum();
    let total_ref_chars: usize = per_sentence.iter().map(|s| s.ref_chars).sum();
    let total_word_edits: usize = per_sentence.iter().map(|s| s.word_edits).sum();
    let total_char_edits: usize = per_sentence.iter().map(|s| s.char_edits).sum();
    let mean_levenshtein = total_char_edits as f64 / pairs.len() as f64;

    Ok(EvalReport {
        wer: want_word.then(|| total_word_edits as f64 / total_ref_words as f64),
        cer: want_char.then(|| total_char_edits as f64 / total_ref_chars as f64),
        mean_levenshtein,
        total_ref_words,
        total_ref_chars,
        total_word_edits,
        total_char_edits,
        per_sentence: Some(per_sentence),
    })
}
