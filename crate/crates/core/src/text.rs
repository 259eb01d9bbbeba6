//! Transcript normalization and character token inventories.
//!
//! Normalization is rule-driven: a [`NormalizationRules`] value carries a
//! codepoint-sequence canonicalization map, a punctuation replacement table,
//! the retained codepoint ranges, and the whitespace policy. Rules are data,
//! not code, so the pipeline stays script-agnostic; a default rule set for
//! Bengali ships with the crate (see [`NormalizationRules::default_bengali`]).
//!
//! Stages run in a fixed order: codepoint map, punctuation map, range filter,
//! whitespace policy. The range filter keeps codepoints inside the allowed
//! ranges plus anything the punctuation table emits, so retained punctuation
//! is configured by mapping it to itself.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RulesError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("codepoint map is not loop-free: output {output:?} maps to {remapped:?}")]
    MapNotLoopFree { output: String, remapped: String },
    #[error("punctuation output {output:?} is not stable under the rules")]
    UnstablePunctuation { output: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum InventoryError {
    #[error("no decodable alphabet: corpus and extra tokens are both empty")]
    EmptyAlphabet,
    #[error("token {0:?} is not a single Unicode scalar value")]
    NotSingle(String),
    #[error("duplicate token {0:?}")]
    Duplicate(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// The CTC blank label.
pub const BLANK_TOKEN: &str = "<blank>";
/// The word-delimiter label; maps to a space when detokenizing.
pub const DELIMITER_TOKEN: &str = "|";
/// Unknown-character label.
pub const UNK_TOKEN: &str = "<unk>";

const MAX_FIXPOINT_PASSES: usize = 32;

/// Rule set for [`normalize_transcript`].
#[derive(Debug, Clone, Default)]
pub struct NormalizationRules {
    codepoint_map: Vec<(String, String)>,
    punctuation_map: HashMap<char, String>,
    allowed_ranges: Vec<(u32, u32)>,
    collapse_whitespace: bool,
    trim: bool,
    // Derived: every char the punctuation map can emit survives the filter.
    punctuation_outputs: BTreeSet<char>,
    // Derived: longest codepoint_map key, in chars.
    max_key_len: usize,
}

impl NormalizationRules {
    /// Builds and validates a rule set.
    ///
    /// Ranges are sorted and merged. Validation rejects rule sets whose
    /// outputs are not single-pass stable: every codepoint-map output must be
    /// a fixpoint of the codepoint map, and every punctuation output must
    /// survive both maps unchanged. Those conditions are what make
    /// normalization idempotent.
    pub fn new(
        codepoint_map: Vec<(String, String)>,
        punctuation_map: HashMap<char, String>,
        allowed_ranges: Vec<(u32, u32)>,
        collapse_whitespace: bool,
        trim: bool,
    ) -> Result<Self, RulesError> {
        let mut ranges: Vec<(u32, u32)> = allowed_ranges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        ranges.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(ranges.len());
        for (lo, hi) in ranges {
            match merged.last_mut() {
                Some((_, last_hi)) if lo <= last_hi.saturating_add(1) => {
                    *last_hi = (*last_hi).max(hi);
                }
                _ => merged.push((lo, hi)),
            }
        }

        let punctuation_outputs: BTreeSet<char> =
            punctuation_map.values().flat_map(|v| v.chars()).collect();
        let max_key_len = codepoint_map
            .iter()
            .map(|(k, _)| k.chars().count())
            .max()
            .unwrap_or(0);

        let rules = Self {
            codepoint_map,
            punctuation_map,
            allowed_ranges: merged,
            collapse_whitespace,
            trim,
            punctuation_outputs,
            max_key_len,
        };

        for (_, v) in &rules.codepoint_map {
            let remapped = rules.apply_codepoint_map(v);
            if remapped != *v {
                return Err(RulesError::MapNotLoopFree {
                    output: v.clone(),
                    remapped,
                });
            }
        }
        for v in rules.punctuation_map.values() {
            let stable = rules.apply_codepoint_map(v) == *v
                && v.chars().all(|c| {
                    rules
                        .punctuation_map
                        .get(&c)
                        .map_or(true, |r| r.chars().eq(std::iter::once(c)))
                });
            if !stable {
                return Err(RulesError::UnstablePunctuation { output: v.clone() });
            }
        }
        Ok(rules)
    }

    pub fn allowed_ranges(&self) -> &[(u32, u32)] {
        &self.allowed_ranges
    }

    fn in_ranges(&self, c: char) -> bool {
        let cp = c as u32;
        self.allowed_ranges
            .binary_search_by(|&(lo, hi)| {
                if cp < lo {
                    std::cmp::Ordering::Greater
                } else if cp > hi {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .is_ok()
    }

    /// One left-to-right longest-match pass of the codepoint map.
    fn apply_codepoint_map(&self, s: &str) -> String {
        if self.codepoint_map.is_empty() {
            return s.to_string();
        }
        let chars: Vec<char> = s.chars().collect();
        let mut out = String::with_capacity(s.len());
        let mut i = 0;
        while i < chars.len() {
            let mut matched = None;
            let window = self.max_key_len.min(chars.len() - i);
            for len in (1..=window).rev() {
                let slice: String = chars[i..i + len].iter().collect();
                if let Some((_, v)) = self.codepoint_map.iter().find(|(k, _)| *k == slice) {
                    matched = Some((len, v));
                    break;
                }
            }
            match matched {
                Some((len, v)) => {
                    out.push_str(v);
                    i += len;
                }
                None => {
                    out.push(chars[i]);
                    i += 1;
                }
            }
        }
        out
    }

    fn apply_once(&self, s: &str) -> String {
        let mapped = self.apply_codepoint_map(s);

        let mut punct = String::with_capacity(mapped.len());
        for c in mapped.chars() {
            match self.punctuation_map.get(&c) {
                Some(rep) => punct.push_str(rep),
                None => punct.push(c),
            }
        }

        let filtered: String = punct
            .chars()
            .filter(|&c| {
                c.is_whitespace() || self.in_ranges(c) || self.punctuation_outputs.contains(&c)
            })
            .collect();

        // Whitespace is always canonicalized to the plain space character;
        // the flags control run collapsing and trimming.
        let mut out = String::with_capacity(filtered.len());
        let mut prev_space = false;
        for c in filtered.chars() {
            if c.is_whitespace() {
                if !(self.collapse_whitespace && prev_space) {
                    out.push(' ');
                }
                prev_space = true;
            } else {
                out.push(c);
                prev_space = false;
            }
        }
        if self.trim {
            out.trim_matches(' ').to_string()
        } else {
            out
        }
    }

    /// Parses the rules file format.
    ///
    /// ```text
    /// [codepoint_map]
    /// 09A1 09BC -> 09DC
    /// [punctuation_map]
    /// 2019 -> 0027
    /// 0021 ->
    /// [allowed_ranges]
    /// 0980 09FF
    /// [whitespace]
    /// collapse = true
    /// trim = true
    /// ```
    ///
    /// `#` starts a comment; codepoints are hex scalar values.
    pub fn parse(text: &str) -> Result<Self, RulesError> {
        #[derive(PartialEq, Clone, Copy)]
        enum Section {
            None,
            CodepointMap,
            PunctuationMap,
            AllowedRanges,
            Whitespace,
        }
        let err = |line: usize, msg: String| RulesError::Parse { line, msg };
        let parse_seq = |line: usize, s: &str| -> Result<String, RulesError> {
            let mut out = String::new();
            for part in s.split_whitespace() {
                let cp = u32::from_str_radix(part, 16)
                    .map_err(|_| err(line, format!("bad hex codepoint {part:?}")))?;
                out.push(
                    char::from_u32(cp)
                        .ok_or_else(|| err(line, format!("U+{cp:04X} is not a scalar value")))?,
                );
            }
            Ok(out)
        };

        let mut section = Section::None;
        let mut codepoint_map = Vec::new();
        let mut punctuation_map = HashMap::new();
        let mut ranges = Vec::new();
        let mut collapse = true;
        let mut trim = true;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[codepoint_map]" => section = Section::CodepointMap,
                "[punctuation_map]" => section = Section::PunctuationMap,
                "[allowed_ranges]" => section = Section::AllowedRanges,
                "[whitespace]" => section = Section::Whitespace,
                _ if line.starts_with('[') => {
                    return Err(err(line_no, format!("unknown section {line:?}")));
                }
                _ => match section {
                    Section::None => {
                        return Err(err(line_no, "content before any section".into()));
                    }
                    Section::CodepointMap | Section::PunctuationMap => {
                        let (lhs, rhs) = line
                            .split_once("->")
                            .ok_or_else(|| err(line_no, "expected 'SRC -> DST'".into()))?;
                        let key = parse_seq(line_no, lhs)?;
                        let val = parse_seq(line_no, rhs)?;
                        if key.is_empty() {
                            return Err(err(line_no, "empty source sequence".into()));
                        }
                        if section == Section::CodepointMap {
                            codepoint_map.push((key, val));
                        } else {
                            let mut kc = key.chars();
                            let c = kc.next().unwrap();
                            if kc.next().is_some() {
                                return Err(err(
                                    line_no,
                                    "punctuation keys are single codepoints".into(),
                                ));
                            }
                            punctuation_map.insert(c, val);
                        }
                    }
                    Section::AllowedRanges => {
                        let parts: Vec<&str> = line.split_whitespace().collect();
                        if parts.len() != 2 {
                            return Err(err(line_no, "expected 'LO HI'".into()));
                        }
                        let lo = u32::from_str_radix(parts[0], 16)
                            .map_err(|_| err(line_no, format!("bad hex {:?}", parts[0])))?;
                        let hi = u32::from_str_radix(parts[1], 16)
                            .map_err(|_| err(line_no, format!("bad hex {:?}", parts[1])))?;
                        ranges.push((lo, hi));
                    }
                    Section::Whitespace => {
                        let (k, v) = line
                            .split_once('=')
                            .ok_or_else(|| err(line_no, "expected 'key = bool'".into()))?;
                        let b = match v.trim() {
                            "true" => true,
                            "false" => false,
                            other => {
                                return Err(err(line_no, format!("bad bool {other:?}")));
                            }
                        };
                        match k.trim() {
                            "collapse" => collapse = b,
                            "trim" => trim = b,
                            other => {
                                return Err(err(line_no, format!("unknown flag {other:?}")));
                            }
                        }
                    }
                },
            }
        }
        Self::new(codepoint_map, punctuation_map, ranges, collapse, trim)
    }

    /// Serializes back to the rules file format.
    pub fn to_file_string(&self) -> String {
        let seq = |s: &str| {
            s.chars()
                .map(|c| format!("{:04X}", c as u32))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        out.push_str("[codepoint_map]\n");
        for (k, v) in &self.codepoint_map {
            let _ = writeln!(out, "{} -> {}", seq(k), seq(v));
        }
        out.push_str("\n[punctuation_map]\n");
        let mut punct: Vec<(&char, &String)> = self.punctuation_map.iter().collect();
        punct.sort_by_key(|(c, _)| **c);
        for (k, v) in punct {
            let _ = writeln!(out, "{:04X} -> {}", *k as u32, seq(v));
        }
        out.push_str("\n[allowed_ranges]\n");
        for (lo, hi) in &self.allowed_ranges {
            let _ = writeln!(out, "{lo:04X} {hi:04X}");
        }
        let _ = write!(
            out,
            "\n[whitespace]\ncollapse = {}\ntrim = {}\n",
            self.collapse_whitespace, self.trim
        );
        out
    }

    /// The bundled Bengali rule set: nukta and vowel-sign recompositions,
    /// quote/dash canonicalization, danda retained, Bengali block plus the
    /// danda pair as the allowed ranges.
    pub fn default_bengali() -> Self {
        Self::parse(DEFAULT_BENGALI_RULES).expect("bundled rules are valid")
    }
}

/// Bundled Bengali rules, also written by `normalize --print-default-rules`.
pub const DEFAULT_BENGALI_RULES: &str = include_str!("../data/bengali.rules");

/// Applies `rules` to `raw`.
///
/// The stage order is codepoint map, punctuation map, range filter,
/// whitespace policy; the pipeline is repeated until the output stops
/// changing, so the result is always a fixpoint and normalization is
/// idempotent.
pub fn normalize_transcript(raw: &str, rules: &NormalizationRules) -> String {
    let mut cur = rules.apply_once(raw);
    for _ in 1..MAX_FIXPOINT_PASSES {
        let next = rules.apply_once(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Ordered character token classes shared between logit columns and text.
///
/// Non-special tokens are single Unicode scalar values sorted by codepoint;
/// the specials (blank, word delimiter, unknown) follow in that fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenInventory {
    tokens: Vec<String>,
    blank_index: usize,
    delimiter_index: usize,
    unk_index: Option<usize>,
}

impl TokenInventory {
    pub fn new(
        tokens: Vec<String>,
        blank_index: usize,
        delimiter_index: usize,
        unk_index: Option<usize>,
    ) -> Result<Self, InventoryError> {
        let mut seen = BTreeSet::new();
        for t in &tokens {
            if !seen.insert(t.clone()) {
                return Err(InventoryError::Duplicate(t.clone()));
            }
        }
        if tokens.is_empty() {
            return Err(InventoryError::EmptyAlphabet);
        }
        let specials = [blank_index, delimiter_index];
        for &i in &specials {
            if i >= tokens.len() {
                return Err(InventoryError::Parse {
                    line: 0,
                    msg: format!("special index {i} out of range"),
                });
            }
        }
        if blank_index == delimiter_index {
            return Err(InventoryError::Parse {
                line: 0,
                msg: "blank and delimiter must be distinct".into(),
            });
        }
        if let Some(u) = unk_index {
            if u >= tokens.len() {
                return Err(InventoryError::Parse {
                    line: 0,
                    msg: format!("unk index {u} out of range"),
                });
            }
        }
        for (i, t) in tokens.iter().enumerate() {
            let special = i == blank_index || i == delimiter_index || Some(i) == unk_index;
            if !special && t.chars().count() != 1 {
                return Err(InventoryError::NotSingle(t.clone()));
            }
        }
        Ok(Self {
            tokens,
            blank_index,
            delimiter_index,
            unk_index,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    pub fn delimiter_index(&self) -> usize {
        self.delimiter_index
    }

    pub fn unk_index(&self) -> Option<usize> {
        self.unk_index
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn is_special(&self, index: usize) -> bool {
        index == self.blank_index || index == self.delimiter_index || Some(index) == self.unk_index
    }

    /// Serializes to the inventory file format: `index<TAB>token` lines in
    /// index order followed by the special-index fields.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{t}");
        }
        let _ = writeln!(out, "blank_index={}", self.blank_index);
        let _ = writeln!(out, "delimiter_index={}", self.delimiter_index);
        match self.unk_index {
            Some(u) => {
                let _ = writeln!(out, "unk_index={u}");
            }
            None => {
                let _ = writeln!(out, "unk_index=none");
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, InventoryError> {
        let err = |line: usize, msg: String| InventoryError::Parse { line, msg };
        let mut tokens = Vec::new();
        let mut blank = None;
        let mut delim = None;
        let mut unk = None;
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                if !line.contains('\t') {
                    let field = match k {
                        "blank_index" => &mut blank,
                        "delimiter_index" => &mut delim,
                        "unk_index" => &mut unk,
                        other => {
                            return Err(err(line_no, format!("unknown field {other:?}")));
                        }
                    };
                    if k == "unk_index" && v == "none" {
                        continue;
                    }
                    let n: usize = v
                        .parse()
                        .map_err(|_| err(line_no, format!("bad index {v:?}")))?;
                    *field = Some(n);
                    continue;
                }
            }
            let (i, tok) = line
                .split_once('\t')
                .ok_or_else(|| err(line_no, "expected 'index<TAB>token'".into()))?;
            let i: usize = i
                .parse()
                .map_err(|_| err(line_no, format!("bad index {i:?}")))?;
            if i != tokens.len() {
                return Err(err(line_no, format!("expected index {}, got {i}", tokens.len())));
            }
            tokens.push(tok.to_string());
        }
        let blank = blank.ok_or_else(|| err(0, "missing blank_index".into()))?;
        let delim = delim.ok_or_else(|| err(0, "missing delimiter_index".into()))?;
        Self::new(tokens, blank, delim, unk)
    }
}

/// Builds a [`TokenInventory`] from normalized corpus lines.
///
/// The character set is the distinct non-whitespace characters across all
/// lines plus `extra_tokens` (each a single scalar value); spaces delimit
/// words and are represented by the delimiter special. Characters are sorted
/// by codepoint, then blank, delimiter, and unknown are appended, so the same
/// character multiset always yields a byte-identical inventory.
pub fn build_token_inventory(
    corpus: impl IntoIterator<Item = impl AsRef<str>>,
    extra_tokens: &[String],
) -> Result<TokenInventory, InventoryError> {
    let mut chars: BTreeSet<char> = BTreeSet::new();
    for line in corpus {
        chars.extend(line.as_ref().chars().filter(|c| !c.is_whitespace()));
    }
    for t in extra_tokens {
        let mut it = t.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => {
                chars.insert(c);
            }
            _ => return Err(InventoryError::NotSingle(t.clone())),
        }
    }
    if chars.is_empty() {
        return Err(InventoryError::EmptyAlphabet);
    }
    let mut tokens: Vec<String> = chars.into_iter().map(String::from).collect();
    let blank_index = tokens.len();
    tokens.push(BLANK_TOKEN.to_string());
    let delimiter_index = tokens.len();
    tokens.push(DELIMITER_TOKEN.to_string());
    let unk_index = tokens.len();
    tokens.push(UNK_TOKEN.to_string());
    TokenInventory::new(tokens, blank_index, delimiter_index, Some(unk_index))
}
