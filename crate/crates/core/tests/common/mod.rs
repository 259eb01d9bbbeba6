//! Test support: an independent modified Kneser-Ney evaluator, written
//! directly from the estimator's equations over string-keyed count maps. It
//! shares no code or data structures with the library's trainer and computes
//! every probability on demand, so agreement between the two is meaningful.

use std::collections::HashMap;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Copy)]
pub enum OracleUnk {
    Floor(f64),
    FromSingletons,
}

struct CtxStats {
    denom: u64,
    n1: u64,
    n2: u64,
    n3plus: u64,
}

pub struct KnOracle {
    order: usize,
    /// Raw k-gram counts over the padded corpus, k = 1..=order.
    raw: Vec<HashMap<Vec<String>, u64>>,
    /// Adjusted counts: raw at the top order, continuation counts below.
    adjusted: Vec<HashMap<Vec<String>, u64>>,
    /// Per-context denominator and count-bin sizes at each order >= 2,
    /// keyed by the order-(k-1) context.
    ctx_stats: Vec<HashMap<Vec<String>, CtxStats>>,
    /// (D1, D2, D3+) for k = 2..=order.
    discounts: Vec<(f64, f64, f64)>,
    unigram_denom: u64,
    unk: OracleUnk,
    unk_extra: u64,
}

impl KnOracle {
    pub fn from_corpus<S: AsRef<str>>(lines: &[S], order: usize, unk: OracleUnk) -> Self {
        assert!(order >= 1);
        let mut raw: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); order];
        for line in lines {
            let words: Vec<&str> = line.as_ref().split_whitespace().collect();
            if words.is_empty() {
                continue;
            }
            let mut padded: Vec<String> = vec![BOS.to_string(); order - 1];
            padded.extend(words.iter().map(|w| w.to_string()));
            padded.push(EOS.to_string());
            for k in 1..=order {
                for w in padded.windows(k) {
                    *raw[k - 1].entry(w.to_vec()).or_insert(0) += 1;
                }
            }
        }

        // Adjusted counts: the top order keeps raw counts; below that, the
        // count of a sequence is the number of distinct tokens observed
        // immediately before it.
        let mut adjusted: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); order];
        adjusted[order - 1] = raw[order - 1].clone();
        for k in (1..order).rev() {
            let mut cont: HashMap<Vec<String>, u64> = HashMap::new();
            for gram in raw[k].keys() {
                *cont.entry(gram[1..].to_vec()).or_insert(0) += 1;
            }
            adjusted[k - 1] = cont;
        }

        // Discounts per order from raw counts-of-counts:
        // Y = n1/(n1+2n2); D1 = 1-2Yn2/n1; D2 = 2-3Yn3/n2; D3+ = 3-4Yn4/n3.
        let mut discounts = Vec::new();
        for k in 2..=order {
            let mut n = [0u64; 4];
            for &c in raw[k - 1].values() {
                if (1..=4).contains(&c) {
                    n[c as usize - 1] += 1;
                }
            }
            let d = if n[0] == 0 || n[1] == 0 || n[2] == 0 {
                (0.5, 0.5, 0.5)
            } else {
                let (n1, n2, n3, n4) = (n[0] as f64, n[1] as f64, n[2] as f64, n[3] as f64);
                let y = n1 / (n1 + 2.0 * n2);
                (
                    (1.0 - 2.0 * y * n2 / n1).clamp(0.0, 1.0),
                    (2.0 - 3.0 * y * n3 / n2).clamp(0.0, 2.0),
                    (3.0 - 4.0 * y * n4 / n3).clamp(0.0, 3.0),
                )
            };
            discounts.push(d);
        }

        // Context aggregates per order, over predicted extensions only
        // (sequences ending in the start marker are never predicted).
        let mut ctx_stats: Vec<HashMap<Vec<String>, CtxStats>> = Vec::new();
        for k in 2..=order {
            let mut stats: HashMap<Vec<String>, CtxStats> = HashMap::new();
            for (gram, &a) in &adjusted[k - 1] {
                if gram.last().map(String::as_str) == Some(BOS) {
                    continue;
                }
                let s = stats.entry(gram[..k - 1].to_vec()).or_insert(CtxStats {
                    denom: 0,
                    n1: 0,
                    n2: 0,
                    n3plus: 0,
                });
                s.denom += a;
                match a {
                    1 => s.n1 += 1,
                    2 => s.n2 += 1,
                    _ => s.n3plus += 1,
                }
            }
            ctx_stats.push(stats);
        }

        let mut unigram_denom = 0u64;
        let mut singletons = 0u64;
        for (gram, &a) in &adjusted[0] {
            if gram[0] == BOS {
                continue;
            }
            unigram_denom += a;
            if a == 1 {
                singletons += 1;
            }
        }
        let unk_extra = match unk {
            OracleUnk::FromSingletons => singletons,
            OracleUnk::Floor(_) => 0,
        };

        Self {
            order,
            raw,
            adjusted,
            ctx_stats,
            discounts,
            unigram_denom: unigram_denom + unk_extra,
            unk,
            unk_extra,
        }
    }

    pub fn in_vocab(&self, w: &str) -> bool {
        w == UNK || w == EOS || self.raw[0].contains_key(&vec![w.to_string()])
    }

    fn unigram(&self, w: &str) -> f64 {
        if w == UNK {
            return match self.unk {
                OracleUnk::Floor(floor) => 10f64.powf(floor),
                OracleUnk::FromSingletons if self.unk_extra > 0 => {
                    self.unk_extra as f64 / self.unigram_denom as f64
                }
                OracleUnk::FromSingletons => 1e-7,
            };
        }
        let a = self
            .adjusted[0]
            .get(&vec![w.to_string()])
            .copied()
            .unwrap_or(0);
        a as f64 / self.unigram_denom as f64
    }

    fn p_order(&self, ctx: &[String], w: &str) -> f64 {
        let k = ctx.len() + 1;
        if k == 1 {
            return self.unigram(w);
        }
        let Some(stats) = self.ctx_stats[k - 2].get(ctx) else {
            // Context never observed with a predicted extension: no mass is
            // withheld at this level.
            return self.p_order(&ctx[1..], w);
        };
        let (d1, d2, d3) = self.discounts[k - 2];
        let gamma = ((d1 * stats.n1 as f64 + d2 * stats.n2 as f64 + d3 * stats.n3plus as f64)
            / stats.denom as f64)
            .max(1e-10);
        let mut gram: Vec<String> = ctx.to_vec();
        gram.push(w.to_string());
        let a = self.adjusted[k - 1].get(&gram).copied().unwrap_or(0);
        let head = if a > 0 {
            let d = match a {
                1 => d1,
                2 => d2,
                _ => d3,
            };
            (a as f64 - d).max(0.0) / stats.denom as f64
        } else {
            0.0
        };
        head + gamma * self.p_order(&ctx[1..], w)
    }

    /// P(w | context), with unknown words mapped to the unknown token and
    /// the context truncated to the last order-1 words.
    pub fn prob(&self, context: &[&str], w: &str) -> f64 {
        let w = if self.in_vocab(w) { w } else { UNK };
        let start = context.len().saturating_sub(self.order - 1);
        let ctx: Vec<String> = context[start..]
            .iter()
            .map(|c| {
                if self.in_vocab(c) || *c == BOS {
                    c.to_string()
                } else {
                    UNK.to_string()
                }
            })
            .collect();
        self.p_order(&ctx, w)
    }
}

/// Naive full-table Levenshtein, the metrics oracle.
pub fn levenshtein_full_table<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        dp[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = (dp[i - 1][j] + 1)
                .min(dp[i][j - 1] + 1)
                .min(dp[i - 1][j - 1] + cost);
        }
    }
    dp[a.len()][b.len()]
}
