//! ARPA text format reader and writer.
//!
//! Layout written (and accepted):
//!
//! ```text
//! \data\
//! ngram 1=4
//! ngram 2=6
//!
//! \1-grams:
//! -0.5228787	</s>
//! -99.0000000	<s>	-0.4259687
//! ...
//!
//! \2-grams:
//! -0.3010300	<s> a
//! ...
//!
//! \end\
//! ```
//!
//! Fields are tab-separated: log10 probability, the space-joined n-gram,
//! and the log10 backoff weight when the sequence is a context (never on
//! the highest order). Probabilities carry seven fractional digits. Entries
//! are sorted by token strings, so serialization is byte-stable.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use super::{NGramModel, ProbBackoff, UnkPolicy, Vocab, WordId, UNK, UNK_ID};

#[derive(Debug, Error)]
pub enum ArpaError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("section {section}: declared {declared} entries, found {found}")]
    SectionMismatch {
        section: String,
        declared: usize,
        found: usize,
    },
    #[error("missing {0} section")]
    MissingSection(String),
}

fn fmt_log10(x: f64) -> String {
    // Normalize negative zero so output bytes are stable.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.7}")
}

/// Writes `model` in ARPA form. Deterministic: two writes of the same model
/// are byte-identical.
pub fn write_arpa(model: &NGramModel, sink: &mut impl Write) -> Result<(), ArpaError> {
    let order = model.order();
    writeln!(sink, "\\data\\")?;
    for k in 1..=order {
        writeln!(sink, "ngram {k}={}", model.entry_count(k))?;
    }
    for k in 1..=order {
        writeln!(sink)?;
        writeln!(sink, "\\{k}-grams:")?;
        let mut entries: Vec<(Vec<&str>, ProbBackoff)> = model.tables[k - 1]
            .iter()
            .map(|(ids, pb)| {
                let words: Vec<&str> = ids.iter().map(|&id| model.vocab().word(id)).collect();
                (words, *pb)
            })
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (words, pb) in entries {
            write!(sink, "{}\t{}", fmt_log10(pb.log10_prob), words.join(" "))?;
            match pb.log10_backoff {
                Some(b) => writeln!(sink, "\t{}", fmt_log10(b))?,
                None => writeln!(sink)?,
            }
        }
    }
    writeln!(sink)?;
    writeln!(sink, "\\end\\")?;
    Ok(())
}

pub fn to_arpa_string(model: &NGramModel) -> String {
    let mut buf = Vec::new();
    write_arpa(model, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("ARPA output is UTF-8")
}

/// Reads an ARPA file back into a model.
///
/// Declared per-order counts must match the body; parse failures name the
/// 1-based line. A file without an `<unk>` unigram gets one synthesized at
/// the default floor.
pub fn read_arpa(source: impl BufRead) -> Result<NGramModel, ArpaError> {
    let err = |line: usize, msg: String| ArpaError::Parse { line, msg };

    let mut lines = Vec::new();
    for l in source.lines() {
        lines.push(l?);
    }
    let mut it = lines.iter().enumerate();

    // Header.
    let mut declared: Vec<usize> = Vec::new();
    let mut in_data = false;
    let mut next_section: Option<(usize, usize)> = None; // (order, line)
    for (idx, raw) in it.by_ref() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "\\data\\" {
            in_data = true;
            continue;
        }
        if !in_data {
            return Err(err(idx + 1, format!("expected \\data\\, got {line:?}")));
        }
        if let Some(rest) = line.strip_prefix("ngram ") {
            let (k, c) = rest
                .split_once('=')
                .ok_or_else(|| err(idx + 1, "expected 'ngram K=COUNT'".into()))?;
            let k: usize = k
                .trim()
                .parse()
                .map_err(|_| err(idx + 1, format!("bad order {k:?}")))?;
            let c: usize = c
                .trim()
                .parse()
                .map_err(|_| err(idx + 1, format!("bad count {c:?}")))?;
            if k != declared.len() + 1 {
                return Err(err(idx + 1, format!("orders must be contiguous, got {k}")));
            }
            declared.push(c);
            continue;
        }
        if let Some(k) = parse_section_header(line) {
            next_section = Some((k, idx + 1));
            break;
        }
        return Err(err(idx + 1, format!("unexpected line {line:?} in header")));
    }
    if declared.is_empty() {
        return Err(ArpaError::MissingSection("\\data\\".into()));
    }
    let order = declared.len();
    let Some((mut section, section_line)) = next_section else {
        return Err(ArpaError::MissingSection("\\1-grams:".into()));
    };
    if section != 1 {
        return Err(err(
            section_line,
            format!("expected \\1-grams:, got \\{section}-grams:"),
        ));
    }

    let mut vocab = Vocab::new();
    let mut tables: Vec<HashMap<Vec<WordId>, ProbBackoff>> = vec![HashMap::new(); order];
    let mut saw_end = false;
    for (idx, raw) in it {
        let line_no = idx + 1;
        let line = raw.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        if line.trim() == "\\end\\" {
            saw_end = true;
            break;
        }
        if let Some(k) = parse_section_header(line.trim()) {
            if k != section + 1 || k > order {
                return Err(err(line_no, format!("unexpected section \\{k}-grams:")));
            }
            section = k;
            continue;
        }
        let mut fields = line.split_whitespace();
        let prob_s = fields
            .next()
            .ok_or_else(|| err(line_no, "empty entry".into()))?;
        let prob: f64 = prob_s
            .parse()
            .map_err(|_| err(line_no, format!("bad probability {prob_s:?}")))?;
        let rest: Vec<&str> = fields.collect();
        let (tokens, backoff) = if rest.len() == section {
            (&rest[..], None)
        } else if rest.len() == section + 1 && section < order {
            let b: f64 = rest[section]
                .parse()
                .map_err(|_| err(line_no, format!("bad backoff {:?}", rest[section])))?;
            (&rest[..section], Some(b))
        } else {
            return Err(err(
                line_no,
                format!(
                    "expected {section} tokens{} after the probability, got {}",
                    if section < order {
                        " and an optional backoff"
                    } else {
                        ""
                    },
                    rest.len()
                ),
            ));
        };
        let ids: Vec<WordId> = if section == 1 {
            vec![vocab.intern(tokens[0])]
        } else {
            tokens
                .iter()
                .map(|t| {
                    vocab
                        .id(t)
                        .ok_or_else(|| err(line_no, format!("token {t:?} not in unigrams")))
                })
                .collect::<Result<_, _>>()?
        };
        if tables[section - 1]
            .insert(
                ids,
                ProbBackoff {
                    log10_prob: prob,
                    log10_backoff: backoff,
                },
            )
            .is_some()
        {
            return Err(err(line_no, format!("duplicate {section}-gram")));
        }
    }
    if !saw_end {
        return Err(ArpaError::MissingSection("\\end\\".into()));
    }
    for k in 1..=order {
        if tables[k - 1].len() != declared[k - 1] {
            return Err(ArpaError::SectionMismatch {
                section: format!("ngram {k}"),
                declared: declared[k - 1],
                found: tables[k - 1].len(),
            });
        }
    }
    let mut unk_floor = None;
    if !tables[0].contains_key(&vec![UNK_ID]) {
        debug_assert_eq!(vocab.id(UNK), Some(UNK_ID));
        tables[0].insert(
            vec![UNK_ID],
            ProbBackoff {
                log10_prob: -7.0,
                log10_backoff: None,
            },
        );
        unk_floor = Some(-7.0);
    }
    Ok(NGramModel {
        order,
        vocab,
        tables,
        unk_policy: UnkPolicy::Floor(unk_floor.unwrap_or(-7.0)),
        discount_fallback_orders: Vec::new(),
    })
}

pub fn read_arpa_str(text: &str) -> Result<NGramModel, ArpaError> {
    read_arpa(text.as_bytes())
}

fn parse_section_header(line: &str) -> Option<usize> {
    line.strip_prefix('\\')?
        .strip_suffix("-grams:")?
        .parse()
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{train_model, UnkPolicy, BOS, EOS};

    fn toy_model() -> NGramModel {
        train_model(
            ["a b", "a b", "a c", "b a", "c a b"],
            2,
            UnkPolicy::default(),
        )
        .unwrap()
    }

    #[test]
    fn skeleton_has_all_sections() {
        let text = to_arpa_string(&toy_model());
        for needle in ["\\data\\", "ngram 1=", "ngram 2=", "\\1-grams:", "\\2-grams:", "\\end\\"] {
            assert!(text.contains(needle), "missing {needle}");
        }
    }

    #[test]
    fn writer_is_byte_stable() {
        let m = toy_model();
        assert_eq!(to_arpa_string(&m), to_arpa_string(&m));
    }

    #[test]
    fn round_trip_preserves_scores() {
        let m = toy_model();
        let back = read_arpa_str(&to_arpa_string(&m)).unwrap();
        let vocab = ["a", "b", "c", "zebra", EOS];
        for ctx in [vec![], vec![BOS], vec!["a"], vec!["b"], vec!["zebra"]] {
            for w in vocab {
                let lhs = m.score_word(&ctx, w);
                let rhs = back.score_word(&ctx, w);
                assert!(
                    (lhs - rhs).abs() <= 5e-5,
                    "score diverged for {ctx:?} {w}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn declared_count_mismatch_names_the_section() {
        let text = "\\data\\\nngram 1=3\n\n\\1-grams:\n-0.5\ta\n-0.5\tb\n\n\\end\\\n";
        match read_arpa_str(text) {
            Err(ArpaError::SectionMismatch {
                section,
                declared,
                found,
            }) => {
                assert_eq!(section, "ngram 1");
                assert_eq!(declared, 3);
                assert_eq!(found, 2);
            }
            other => panic!("expected section mismatch, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_names_the_line() {
        let text = "\\data\\\nngram 1=1\n\n\\1-grams:\nNaP\ta\n\n\\end\\\n";
        match read_arpa_str(text) {
            Err(ArpaError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn backoff_on_highest_order_is_rejected() {
        let text = "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\t-0.3\n\n\\end\\\n";
        assert!(read_arpa_str(text).is_err());
    }

    #[test]
    fn missing_end_is_rejected() {
        let text = "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n";
        match read_arpa_str(text) {
            Err(ArpaError::MissingSection(s)) => assert_eq!(s, "\\end\\"),
            other => panic!("expected missing section, got {other:?}"),
        }
    }

    #[test]
    fn unknown_token_in_higher_order_is_rejected() {
        let text = "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.1\ta\t0.0\n\n\\2-grams:\n-0.2\ta b\n\n\\end\\\n";
        match read_arpa_str(text) {
            Err(ArpaError::Parse { line, msg }) => {
                assert_eq!(line, 9);
                assert!(msg.contains("\"b\""));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn foreign_file_without_unk_gets_a_floor() {
        let text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.3010300\ta\n-0.3010300\t</s>\n\n\\end\\\n";
        let m = read_arpa_str(text).unwrap();
        let s = m.score_word(&[], "never-seen");
        assert_eq!(s, -7.0);
    }
}
