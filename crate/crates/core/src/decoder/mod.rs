//! CTC decoding: frame-level logits to text.
//!
//! Two paths: [`greedy_decode`] takes the per-frame argmax and collapses it;
//! [`beam_decode`] runs prefix beam search, tracking blank-terminal and
//! non-blank-terminal probabilities per collapsed prefix so all alignments
//! of a labeling are summed, optionally fusing an n-gram model at word
//! boundaries with weight alpha and a per-word bonus beta:
//!
//! ```text
//! fused = ln P_acoustic + alpha * ln P_LM + beta * word_count
//! ```
//!
//! LM scores are stored in log10 and converted to natural log at fusion
//! time. The trailing partial word is scored at end of utterance unless
//! configured off. [`ctc_labeling_logprob`] computes the exact marginal of a
//! labeling by forward dynamic programming and serves as the beam search
//! oracle in tests.

pub mod io;

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::lm::{NGramModel, WordId, BOS_ID};
use crate::text::TokenInventory;

const LN_10: f64 = std::f64::consts::LN_10;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("logit width {got} does not match inventory size {expected}")]
    VocabMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// T x V frame-level logits (pre-softmax) tied to a token inventory.
#[derive(Debug, Clone)]
pub struct LogitMatrix {
    data: Vec<f32>,
    num_frames: usize,
    inventory: Arc<TokenInventory>,
    pub frame_duration_s: Option<f64>,
}

impl LogitMatrix {
    /// `data` is row-major, `num_frames` rows of `inventory.len()` columns.
    pub fn new(
        data: Vec<f32>,
        num_frames: usize,
        inventory: Arc<TokenInventory>,
    ) -> Result<Self, DecodeError> {
        let v = inventory.len();
        if num_frames == 0 {
            return Err(DecodeError::Format("logit matrix needs at least one frame".into()));
        }
        if data.len() != num_frames * v {
            return Err(DecodeError::VocabMismatch {
                expected: v,
                got: if num_frames > 0 { data.len() / num_frames } else { 0 },
            });
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(DecodeError::Format(format!("non-finite logit {bad}")));
        }
        Ok(Self {
            data,
            num_frames,
            inventory,
            frame_duration_s: None,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_tokens(&self) -> usize {
        self.inventory.len()
    }

    pub fn inventory(&self) -> &TokenInventory {
        &self.inventory
    }

    pub fn inventory_arc(&self) -> Arc<TokenInventory> {
        Arc::clone(&self.inventory)
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let v = self.num_tokens();
        &self.data[t * v..(t + 1) * v]
    }

    /// Per-frame natural-log softmax, in f64.
    fn log_softmax_rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_frames)
            .map(|t| {
                let row = self.frame(t);
                let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
                let lse = max
                    + row
                        .iter()
                        .map(|&x| (x as f64 - max).exp())
                        .sum::<f64>()
                        .ln();
                row.iter().map(|&x| x as f64 - lse).collect()
            })
            .collect()
    }
}

/// Beam search configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Language-model weight; requires a model when positive.
    pub alpha: f64,
    /// Per-word insertion bonus; negative values prefer shorter outputs.
    pub beta: f64,
    /// Per-frame floor on candidate token log-probabilities (natural log).
    pub token_min_logprob: f64,
    /// Per-frame cap on candidate tokens (the blank transition is always
    /// available regardless).
    pub top_k_tokens: usize,
    /// Score the unfinished final word at end of utterance.
    pub score_partial_final: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: 100,
            alpha: 0.7,
            beta: 0.5,
            token_min_logprob: -9.21, // ~ln 1e-4
            top_k_tokens: 16,
            score_partial_final: true,
        }
    }
}

impl DecodeConfig {
    /// A configuration for oracle comparisons: no pruning, no fusion.
    pub fn exhaustive(beam_width: usize) -> Self {
        Self {
            beam_width,
            alpha: 0.0,
            beta: 0.0,
            token_min_logprob: f64::NEG_INFINITY,
            top_k_tokens: usize::MAX,
            score_partial_final: true,
        }
    }

    fn validate(&self, has_model: bool) -> Result<(), DecodeError> {
        if self.beam_width == 0 {
            return Err(DecodeError::Config("beam width must be >= 1".into()));
        }
        if self.top_k_tokens == 0 {
            return Err(DecodeError::Config("top_k_tokens must be >= 1".into()));
        }
        if self.alpha < 0.0 {
            return Err(DecodeError::Config("alpha must be >= 0".into()));
        }
        if self.alpha > 0.0 && !has_model {
            return Err(DecodeError::Config(
                "alpha > 0 requires a language model".into(),
            ));
        }
        Ok(())
    }
}

/// One ranked decode hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub text: String,
    /// ln of the summed path probability of the collapsed labeling.
    pub acoustic_log_prob: f64,
    /// Accumulated log10 LM score of completed words; 0 without a model.
    pub lm_log10_prob: f64,
    pub fused_score: f64,
}

/// Decode output: the winning hypothesis plus the ranked n-best list.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub text: String,
    pub acoustic_log_prob: f64,
    pub lm_log10_prob: f64,
    pub fused_score: f64,
    pub n_best: Vec<Hypothesis>,
}

impl DecodeResult {
    fn from_ranked(n_best: Vec<Hypothesis>) -> Self {
        let top = n_best.first().expect("at least one hypothesis");
        Self {
            text: top.text.clone(),
            acoustic_log_prob: top.acoustic_log_prob,
            lm_log10_prob: top.lm_log10_prob,
            fused_score: top.fused_score,
            n_best,
        }
    }
}

/// Maps a collapsed token-index sequence to text: the delimiter becomes a
/// single space, other specials are dropped, characters concatenate.
pub fn detokenize(prefix: &[usize], inventory: &TokenInventory) -> String {
    let mut out = String::new();
    for &idx in prefix {
        if idx == inventory.delimiter_index() {
            out.push(' ');
        } else if !inventory.is_special(idx) {
            out.push_str(&inventory.tokens()[idx]);
        }
    }
    out
}

/// Per-frame argmax, collapse repeats, drop blanks. Ties break toward the
/// lowest token index.
pub fn greedy_decode(logits: &LogitMatrix) -> DecodeResult {
    let rows = logits.log_softmax_rows();
    let blank = logits.inventory().blank_index();
    let mut prefix: Vec<usize> = Vec::new();
    let mut path_logprob = 0.0;
    let mut prev = blank;
    for row in &rows {
        let mut best = 0usize;
        for (i, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = i;
            }
        }
        path_logprob += row[best];
        if best != blank && best != prev {
            prefix.push(best);
        }
        prev = best;
    }
    let hyp = Hypothesis {
        text: detokenize(&prefix, logits.inventory()),
        acoustic_log_prob: path_logprob,
        lm_log10_prob: 0.0,
        fused_score: path_logprob,
    };
    DecodeResult::from_ranked(vec![hyp])
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Exact ln probability that the CTC-collapsed output equals `labeling`,
/// summed over all frame alignments. `labeling` holds non-blank token
/// indices. Returns negative infinity when the labeling cannot be aligned
/// in the available frames.
pub fn ctc_labeling_logprob(logits: &LogitMatrix, labeling: &[usize]) -> f64 {
    let blank = logits.inventory().blank_index();
    assert!(
        labeling.iter().all(|&c| c != blank),
        "labeling must not contain the blank"
    );
    let rows = logits.log_softmax_rows();
    let len = labeling.len();
    let states = 2 * len + 1;
    // Extended labeling: blank, l1, blank, l2, ..., blank.
    let label_at = |s: usize| -> usize {
        if s % 2 == 0 {
            blank
        } else {
            labeling[s / 2]
        }
    };
    let mut alpha = vec![f64::NEG_INFINITY; states];
    alpha[0] = rows[0][blank];
    if states > 1 {
        alpha[1] = rows[0][label_at(1)];
    }
    for row in rows.iter().skip(1) {
        let mut next = vec![f64::NEG_INFINITY; states];
        for (s, slot) in next.iter_mut().enumerate() {
            let tok = label_at(s);
            let mut acc = alpha[s];
            if s >= 1 {
                acc = logaddexp(acc, alpha[s - 1]);
            }
            if s >= 2 && tok != blank && tok != label_at(s - 2) {
                acc = logaddexp(acc, alpha[s - 2]);
            }
            *slot = acc + row[tok];
        }
        alpha = next;
    }
    let mut total = alpha[states - 1];
    if states > 1 {
        total = logaddexp(total, alpha[states - 2]);
    }
    total
}

// Search state per collapsed prefix. The LM fields are functions of the
// prefix, so hypotheses merging on the same prefix always agree on them.
struct BeamHyp {
    prefix: Vec<usize>,
    log_p_blank: f64,
    log_p_nonblank: f64,
    lm_context: Vec<WordId>,
    lm_log10: f64,
    completed_words: u32,
}

/// Public view of one search state, exposed for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub prefix: Vec<usize>,
    pub log_p_blank: f64,
    pub log_p_nonblank: f64,
    pub lm_context: Vec<WordId>,
    pub completed_words: u32,
    pub fused_score: f64,
}

impl BeamHyp {
    fn acoustic(&self) -> f64 {
        logaddexp(self.log_p_blank, self.log_p_nonblank)
    }

    fn fused(&self, alpha: f64, beta: f64) -> f64 {
        self.acoustic() + alpha * LN_10 * self.lm_log10 + beta * f64::from(self.completed_words)
    }
}

/// Word formed by the prefix tail after the last delimiter.
fn trailing_word(prefix: &[usize], inventory: &TokenInventory) -> Option<String> {
    let delim = inventory.delimiter_index();
    let start = prefix
        .iter()
        .rposition(|&c| c == delim)
        .map_or(0, |p| p + 1);
    let tail = &prefix[start..];
    if tail.is_empty() {
        return None;
    }
    let mut word = String::new();
    for &c in tail {
        if !inventory.is_special(c) {
            word.push_str(&inventory.tokens()[c]);
        }
    }
    if word.is_empty() {
        None
    } else {
        Some(word)
    }
}

fn push_context(ctx: &mut Vec<WordId>, id: WordId, order: usize) {
    ctx.push(id);
    let keep = order.saturating_sub(1);
    while ctx.len() > keep {
        ctx.remove(0);
    }
}

/// Prefix beam search over the logits, with optional shallow fusion.
///
/// Per frame, candidate tokens are those above `token_min_logprob`, capped
/// at `top_k_tokens`; the blank transition is always applied, so the beam
/// can never empty. When an appended delimiter completes a non-empty word,
/// the model scores it in context and the word bonus is added. Hypotheses
/// are ranked by fused score with deterministic tie-breaking (higher
/// acoustic score, then lexicographically smaller prefix).
pub fn beam_decode(
    logits: &LogitMatrix,
    cfg: &DecodeConfig,
    model: Option<&NGramModel>,
) -> Result<DecodeResult, DecodeError> {
    cfg.validate(model.is_some())?;
    let inventory = logits.inventory();
    let blank = inventory.blank_index();
    let delim = inventory.delimiter_index();
    let rows = logits.log_softmax_rows();

    let init_ctx = match model {
        Some(m) if m.order() > 1 => vec![BOS_ID],
        _ => Vec::new(),
    };
    let mut beam: Vec<BeamHyp> = vec![BeamHyp {
        prefix: Vec::new(),
        log_p_blank: 0.0,
        log_p_nonblank: f64::NEG_INFINITY,
        lm_context: init_ctx,
        lm_log10: 0.0,
        completed_words: 0,
    }];

    for row in &rows {
        // Candidate emission tokens for this frame.
        let mut candidates: Vec<usize> = (0..row.len())
            .filter(|&i| i != blank && row[i] >= cfg.token_min_logprob)
            .collect();
        candidates.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        candidates.truncate(cfg.top_k_tokens);
        let allowed: Vec<bool> = {
            let mut v = vec![false; row.len()];
            for &c in &candidates {
                v[c] = true;
            }
            v
        };

        let mut next: HashMap<Vec<usize>, BeamHyp> = HashMap::with_capacity(beam.len() * 2);
        for hyp in &beam {
            let total = hyp.acoustic();

            // Blank keeps the prefix and is never pruned away.
            {
                let e = next.entry(hyp.prefix.clone()).or_insert_with(|| BeamHyp {
                    prefix: hyp.prefix.clone(),
                    log_p_blank: f64::NEG_INFINITY,
                    log_p_nonblank: f64::NEG_INFINITY,
                    lm_context: hyp.lm_context.clone(),
                    lm_log10: hyp.lm_log10,
                    completed_words: hyp.completed_words,
                });
                e.log_p_blank = logaddexp(e.log_p_blank, total + row[blank]);
            }

            // Repeating the final character extends its emission run.
            if let Some(&last) = hyp.prefix.last() {
                if allowed[last] && hyp.log_p_nonblank != f64::NEG_INFINITY {
                    let e = next.entry(hyp.prefix.clone()).or_insert_with(|| BeamHyp {
                        prefix: hyp.prefix.clone(),
                        log_p_blank: f64::NEG_INFINITY,
                        log_p_nonblank: f64::NEG_INFINITY,
                        lm_context: hyp.lm_context.clone(),
                        lm_log10: hyp.lm_log10,
                        completed_words: hyp.completed_words,
                    });
                    e.log_p_nonblank = logaddexp(e.log_p_nonblank, hyp.log_p_nonblank + row[last]);
                }
            }

            for &c in &candidates {
                // A repeated character needs a blank between emissions.
                let base = if hyp.prefix.last() == Some(&c) {
                    hyp.log_p_blank
                } else {
                    total
                };
                if base == f64::NEG_INFINITY {
                    continue;
                }
                let mut prefix = Vec::with_capacity(hyp.prefix.len() + 1);
                prefix.extend_from_slice(&hyp.prefix);
                prefix.push(c);
                let e = next.entry(prefix).or_insert_with_key(|key| {
                    let mut lm_context = hyp.lm_context.clone();
                    let mut lm_log10 = hyp.lm_log10;
                    let mut completed_words = hyp.completed_words;
                    if c == delim {
                        completed_words += 1;
                        if let (Some(m), Some(word)) =
                            (model, trailing_word(&hyp.prefix, inventory))
                        {
                            let id = m.vocab().id_or_unk(&word);
                            lm_log10 += m.score_ids(&lm_context, id);
                            push_context(&mut lm_context, id, m.order());
                        }
                    }
                    BeamHyp {
                        prefix: key.clone(),
                        log_p_blank: f64::NEG_INFINITY,
                        log_p_nonblank: f64::NEG_INFINITY,
                        lm_context,
                        lm_log10,
                        completed_words,
                    }
                });
                e.log_p_nonblank = logaddexp(e.log_p_nonblank, base + row[c]);
            }
        }

        let mut merged: Vec<BeamHyp> = next.into_values().collect();
        for h in &merged {
            debug_assert!(
                h.acoustic() <= 1e-9,
                "probability bookkeeping violated: {}",
                h.acoustic()
            );
        }
        merged.sort_by(|a, b| {
            b.fused(cfg.alpha, cfg.beta)
                .partial_cmp(&a.fused(cfg.alpha, cfg.beta))
                .unwrap()
                .then_with(|| b.acoustic().partial_cmp(&a.acoustic()).unwrap())
                .then_with(|| a.prefix.cmp(&b.prefix))
        });
        merged.truncate(cfg.beam_width);
        beam = merged;
    }

    // End of utterance: optionally score the unfinished final word.
    let mut finals: Vec<Hypothesis> = beam
        .iter()
        .map(|hyp| {
            let mut lm_log10 = hyp.lm_log10;
            let mut words = hyp.completed_words;
            if cfg.score_partial_final {
                if let Some(word) = trailing_word(&hyp.prefix, inventory) {
                    words += 1;
                    if let Some(m) = model {
                        let id = m.vocab().id_or_unk(&word);
                        lm_log10 += m.score_ids(&hyp.lm_context, id);
                    }
                }
            }
            let fused =
                hyp.acoustic() + cfg.alpha * LN_10 * lm_log10 + cfg.beta * f64::from(words);
            Hypothesis {
                text: detokenize(&hyp.prefix, inventory),
                acoustic_log_prob: hyp.acoustic(),
                lm_log10_prob: if model.is_some() { lm_log10 } else { 0.0 },
                fused_score: fused,
            }
        })
        .collect();
    finals.sort_by(|a, b| {
        b.fused_score
            .partial_cmp(&a.fused_score)
            .unwrap()
            .then_with(|| b.acoustic_log_prob.partial_cmp(&a.acoustic_log_prob).unwrap())
            .then_with(|| a.text.cmp(&b.text))
    });
    finals.truncate(cfg.beam_width);
    Ok(DecodeResult::from_ranked(finals))
}
