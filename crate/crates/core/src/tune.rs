//! Grid search over the decoder's (alpha, beta) against a development set.

use rayon::prelude::*;
use thiserror::Error;

use crate::decoder::{beam_decode, DecodeConfig, LogitMatrix};
use crate::lm::NGramModel;
use crate::metrics::{corpus_report, EvalPair, Granularity};

#[derive(Debug, Error, PartialEq)]
pub enum TuneError {
    #[error("empty development set")]
    EmptyDevSet,
    #[error("grid axis {0} is empty")]
    EmptyAxis(&'static str),
    #[error("grid axis {axis} has duplicate value {value}")]
    DuplicateValue { axis: &'static str, value: f64 },
    #[error("alpha must be >= 0, got {0}")]
    NegativeAlpha(f64),
    #[error("every grid cell failed; first error: {0}")]
    AllCellsFailed(String),
}

/// The (alpha, beta) grid. Axes are sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl GridSpec {
    pub fn new(mut alphas: Vec<f64>, mut betas: Vec<f64>) -> Result<Self, TuneError> {
        if alphas.is_empty() {
            return Err(TuneError::EmptyAxis("alphas"));
        }
        if betas.is_empty() {
            return Err(TuneError::EmptyAxis("betas"));
        }
        if let Some(&a) = alphas.iter().find(|&&a| a < 0.0) {
            return Err(TuneError::NegativeAlpha(a));
        }
        alphas.sort_by(|x, y| x.partial_cmp(y).unwrap());
        betas.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (axis, vals) in [("alphas", &alphas), ("betas", &betas)] {
            if let Some(w) = vals.windows(2).find(|w| w[0] == w[1]) {
                return Err(TuneError::DuplicateValue {
                    axis,
                    value: w[0],
                });
            }
        }
        Ok(Self { alphas, betas })
    }

    /// The paper-bracketing defaults: alpha 0.0..=1.5 by 0.1, beta
    /// -1.0..=1.5 by 0.5.
    pub fn default_grid() -> Self {
        let alphas = (0..=15).map(|i| f64::from(i) / 10.0).collect();
        let betas = (-2..=3).map(|i| f64::from(i) / 2.0).collect();
        Self::new(alphas, betas).expect("default grid is valid")
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }
}

/// One evaluated grid cell. `wer`/`cer` are present unless the cell failed,
/// in which case `error` records why and the cell is excluded from argmin.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneCell {
    pub alpha: f64,
    pub beta: f64,
    pub wer: Option<f64>,
    pub cer: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best_alpha: f64,
    pub best_beta: f64,
    pub best_wer: f64,
    /// All cells, alphas-major, in grid order.
    pub table: Vec<TuneCell>,
}

/// Decodes the development set at every grid cell and selects the pooled-WER
/// argmin, ties broken by lower alpha then lower beta. All other decoder
/// settings come from `base_cfg` unchanged. Cells run in parallel; the
/// result is independent of scheduling.
pub fn grid_search(
    dev: &[(LogitMatrix, String)],
    model: &NGramModel,
    grid: &GridSpec,
    base_cfg: &DecodeConfig,
) -> Result<TuneResult, TuneError> {
    if dev.is_empty() {
        return Err(TuneError::EmptyDevSet);
    }
    let cells: Vec<(f64, f64)> = grid
        .alphas
        .iter()
        .flat_map(|&a| grid.betas.iter().map(move |&b| (a, b)))
        .collect();

    let table: Vec<TuneCell> = cells
        .par_iter()
        .map(|&(alpha, beta)| {
            let cfg = DecodeConfig {
                alpha,
                beta,
                ..base_cfg.clone()
            };
            let decoded: Result<Vec<EvalPair>, String> = dev
                .iter()
                .map(|(logits, reference)| {
                    beam_decode(logits, &cfg, Some(model))
                        .map(|r| EvalPair::new(reference.clone(), r.text))
                        .map_err(|e| e.to_string())
                })
                .collect();
            let outcome = decoded.and_then(|pairs| {
                corpus_report(&pairs, Granularity::Both).map_err(|e| e.to_string())
            });
            match outcome {
                Ok(report) => TuneCell {
                    alpha,
                    beta,
                    wer: report.wer,
                    cer: report.cer,
                    error: None,
                },
                Err(e) => TuneCell {
                    alpha,
                    beta,
                    wer: None,
                    cer: None,
                    error: Some(e),
                },
            }
        })
        .collect();

    let best = table
        .iter()
        .filter_map(|c| c.wer.map(|w| (c.alpha, c.beta, w)))
        .min_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap()
                .then_with(|| a.0.partial_cmp(&b.0).unwrap())
                .then_with(|| a.1.partial_cmp(&b.1).unwrap())
        });
    match best {
        Some((best_alpha, best_beta, best_wer)) => Ok(TuneResult {
            best_alpha,
            best_beta,
            best_wer,
            table,
        }),
        None => {
            let first = table
                .iter()
                .find_map(|c| c.error.clone())
                .unwrap_or_else(|| "no cells".into());
            Err(TuneError::AllCellsFailed(first))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::LogitMatrix;
    use crate::lm::{train_model, UnkPolicy};
    use crate::text::{build_token_inventory, TokenInventory};
    use std::sync::Arc;

    fn inventory() -> Arc<TokenInventory> {
        Arc::new(build_token_inventory(["a b x q r"], &[]).unwrap())
    }

    fn spell(inv: &Arc<TokenInventory>, tokens: &[usize], nudge: &[(usize, usize, f32)]) -> LogitMatrix {
        let v = inv.len();
        let mut data = vec![0.0f32; tokens.len() * v];
        for (t, &tok) in tokens.iter().enumerate() {
            data[t * v + tok] = 8.0;
        }
        for &(t, tok, val) in nudge {
            data[t * v + tok] = val;
        }
        LogitMatrix::new(data, tokens.len(), Arc::clone(inv)).unwrap()
    }

    /// Dev set where acoustics slightly prefer "xb" but the model knows only
    /// "xa"; alpha fixes half the utterances.
    fn homophone_dev(inv: &Arc<TokenInventory>) -> (Vec<(LogitMatrix, String)>, NGramModel) {
        let a = inv.index_of("a").unwrap();
        let b = inv.index_of("b").unwrap();
        let x = inv.index_of("x").unwrap();
        let d = inv.delimiter_index();
        let model = train_model(
            ["q xa", "q xa", "r xa", "xa q", "q", "r"],
            2,
            UnkPolicy::default(),
        )
        .unwrap();
        let q = inv.index_of("q").unwrap();
        let mut dev = Vec::new();
        for _ in 0..5 {
            // "q xa" with the second word's vowel leaning wrong.
            dev.push((
                spell(inv, &[q, d, x, a], &[(3, b, 8.4)]),
                "q xa".to_string(),
            ));
            // Unambiguous "q xa".
            dev.push((spell(inv, &[q, d, x, a], &[]), "q xa".to_string()));
        }
        (dev, model)
    }

    #[test]
    fn singleton_grid_echoes_its_cell() {
        let inv = inventory();
        let (dev, model) = homophone_dev(&inv);
        let grid = GridSpec::new(vec![0.7], vec![0.5]).unwrap();
        let r = grid_search(&dev, &model, &grid, &DecodeConfig::default()).unwrap();
        assert_eq!((r.best_alpha, r.best_beta), (0.7, 0.5));
        assert_eq!(r.table.len(), 1);
    }

    #[test]
    fn lm_weight_wins_on_the_homophone_fixture() {
        let inv = inventory();
        let (dev, model) = homophone_dev(&inv);
        let grid = GridSpec::new(vec![0.0, 0.7], vec![0.5]).unwrap();
        let r = grid_search(&dev, &model, &grid, &DecodeConfig::default()).unwrap();
        let wer_at = |alpha: f64| {
            r.table
                .iter()
                .find(|c| c.alpha == alpha)
                .and_then(|c| c.wer)
                .unwrap()
        };
        assert!(wer_at(0.7) < wer_at(0.0), "{} !< {}", wer_at(0.7), wer_at(0.0));
        assert_eq!(r.best_alpha, 0.7);
    }

    #[test]
    fn equal_cells_tie_break_low() {
        let inv = inventory();
        let (dev, model) = homophone_dev(&inv);
        // Both alphas decode identically on an unambiguous dev set.
        let easy: Vec<(LogitMatrix, String)> = dev
            .into_iter()
            .filter(|(m, _)| {
                let r = beam_decode(m, &DecodeConfig::exhaustive(64), None).unwrap();
                r.text == "q xa"
            })
            .collect();
        let grid = GridSpec::new(vec![0.3, 0.9], vec![-0.5, 0.5]).unwrap();
        let r = grid_search(&easy, &model, &grid, &DecodeConfig::default()).unwrap();
        assert_eq!((r.best_alpha, r.best_beta), (0.3, -0.5));
    }

    #[test]
    fn table_is_enumeration_order_invariant() {
        let inv = inventory();
        let (dev, model) = homophone_dev(&inv);
        let g1 = GridSpec::new(vec![0.0, 0.7], vec![0.0, 0.5]).unwrap();
        let g2 = GridSpec::new(vec![0.7, 0.0], vec![0.5, 0.0]).unwrap();
        assert_eq!(g1, g2);
        let r1 = grid_search(&dev, &model, &g1, &DecodeConfig::default()).unwrap();
        let r2 = grid_search(&dev, &model, &g2, &DecodeConfig::default()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn single_row_reduces_to_a_sweep() {
        let inv = inventory();
        let (dev, model) = homophone_dev(&inv);
        let row = GridSpec::new(vec![0.0, 0.7], vec![0.5]).unwrap();
        let full = GridSpec::new(vec![0.0, 0.7], vec![0.0, 0.5]).unwrap();
        let r_row = grid_search(&dev, &model, &row, &DecodeConfig::default()).unwrap();
        let r_full = grid_search(&dev, &model, &full, &DecodeConfig::default()).unwrap();
        for cell in &r_row.table {
            let same = r_full
                .table
                .iter()
                .find(|c| c.alpha == cell.alpha && c.beta == cell.beta)
                .unwrap();
            assert_eq!(cell, same);
        }
    }

    #[test]
    fn best_wer_matches_an_independent_rerun() {
        let inv = inventory();
        let (dev, model) = homophone_dev(&inv);
        let grid = GridSpec::new(vec![0.0, 0.7], vec![0.0, 0.5]).unwrap();
        let base = DecodeConfig::default();
        let r = grid_search(&dev, &model, &grid, &base).unwrap();
        let cfg = DecodeConfig {
            alpha: r.best_alpha,
            beta: r.best_beta,
            ..base
        };
        let pairs: Vec<EvalPair> = dev
            .iter()
            .map(|(m, reference)| {
                let out = beam_decode(m, &cfg, Some(&model)).unwrap();
                EvalPair::new(reference.clone(), out.text)
            })
            .collect();
        let report = corpus_report(&pairs, Granularity::Both).unwrap();
        assert_eq!(report.wer.unwrap(), r.best_wer);
    }

    #[test]
    fn empty_reference_marks_the_cell_failed() {
        let inv = inventory();
        let (mut dev, model) = homophone_dev(&inv);
        dev[0].1 = String::new();
        let grid = GridSpec::new(vec![0.0], vec![0.0]).unwrap();
        match grid_search(&dev, &model, &grid, &DecodeConfig::default()) {
            Err(TuneError::AllCellsFailed(_)) => {}
            other => panic!("expected all cells failed, got {other:?}"),
        }
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            GridSpec::new(vec![], vec![0.0]),
            Err(TuneError::EmptyAxis("alphas"))
        ));
        assert!(matches!(
            GridSpec::new(vec![0.1, 0.1], vec![0.0]),
            Err(TuneError::DuplicateValue { .. })
        ));
        assert!(matches!(
            GridSpec::new(vec![-0.1], vec![0.0]),
            Err(TuneError::NegativeAlpha(_))
        ));
        let g = GridSpec::default_grid();
        assert_eq!(g.alphas().len(), 16);
        assert_eq!(g.betas().len(), 6);
        assert!(g.alphas().contains(&0.7));
        assert!(g.betas().contains(&0.5));
    }

    #[test]
    fn empty_dev_set_errors() {
        let (_, model) = homophone_dev(&inventory());
        let grid = GridSpec::new(vec![0.0], vec![0.0]).unwrap();
        assert_eq!(
            grid_search(&[], &model, &grid, &DecodeConfig::default()).unwrap_err(),
            TuneError::EmptyDevSet
        );
    }
}
