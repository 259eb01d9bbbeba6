//! Subcommand implementations.

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use asrpost::corpus::{parse_metadata_row, sample_passes, METADATA_HEADER};
use asrpost::decoder::{
    beam_decode, greedy_decode, io as logit_io, DecodeConfig, DecodeResult, LogitMatrix,
};
use asrpost::lm::{arpa, train_model, NGramModel, UnkPolicy};
use asrpost::metrics::{corpus_report, EvalPair, Granularity};
use asrpost::text::{build_token_inventory, normalize_transcript, TokenInventory};
use asrpost::tune::{grid_search, GridSpec};

use crate::util::{
    atomic_write, file_stem, load_rules, logit_files, parse_float_list, parse_id_tsv, read_input,
    read_input_bytes,
};
use crate::{
    DecodeArgs, EvaluateArgs, Failure, FilterArgs, InventoryArgs, LmStatsArgs, NormalizeArgs,
    TrainLmArgs, TuneArgs,
};

pub fn normalize(args: NormalizeArgs) -> Result<(), Failure> {
    if args.print_default_rules {
        print!("{}", asrpost::text::DEFAULT_BENGALI_RULES);
        return Ok(());
    }
    let rules = load_rules(args.rules.as_deref())?;
    let input = args.input.expect("clap requires --input");
    let output = args.output.expect("clap requires --output");
    let text = read_input(&input)?;
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        out.push_str(&normalize_transcript(line, &rules));
        out.push('\n');
    }
    atomic_write(&output, out.as_bytes())?;
    eprintln!("normalized {} lines", text.lines().count());
    Ok(())
}

pub fn filter(args: FilterArgs) -> Result<(), Failure> {
    let text = read_input(&args.metadata)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METADATA_HEADER => {}
        Some((_, h)) => {
            return Err(Failure::usage(format!(
                "line 1: bad header {h:?}, expected {METADATA_HEADER:?}"
            )));
        }
        None => return Err(Failure::usage("empty metadata file")),
    }
    // Rows are copied through verbatim so the output is byte-faithful.
    let mut out = String::from(METADATA_HEADER);
    out.push('\n');
    let mut kept = 0usize;
    let mut total = 0usize;
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let sample = parse_metadata_row(line, idx + 1).map_err(Failure::usage)?;
        total += 1;
        if sample_passes(&sample, args.min_dur, args.max_dur) {
            out.push_str(line);
            out.push('\n');
            kept += 1;
        }
    }
    atomic_write(&args.output, out.as_bytes())?;
    eprintln!("kept {kept} of {total} samples");
    Ok(())
}

pub fn inventory(args: InventoryArgs) -> Result<(), Failure> {
    let text = read_input(&args.corpus)?;
    let lines: Vec<String> = match &args.rules {
        Some(_) => {
            let rules = load_rules(args.rules.as_deref())?;
            text.lines()
                .map(|l| normalize_transcript(l, &rules))
                .collect()
        }
        None => text.lines().map(str::to_string).collect(),
    };
    let extra: Vec<String> = args
        .extra_tokens
        .as_deref()
        .map(|s| {
            s.split(',')
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    let inv = build_token_inventory(lines.iter(), &extra).map_err(Failure::usage)?;
    atomic_write(&args.output, inv.to_file_string().as_bytes())?;
    eprintln!("{} tokens", inv.len());
    Ok(())
}

pub fn train_lm(args: TrainLmArgs) -> Result<(), Failure> {
    let text = read_input(&args.corpus)?;
    let lines: Vec<String> = match &args.rules {
        Some(_) => {
            let rules = load_rules(args.rules.as_deref())?;
            text.lines()
                .map(|l| normalize_transcript(l, &rules))
                .collect()
        }
        None => text.lines().map(str::to_string).collect(),
    };
    let policy = if args.unk_from_singletons {
        UnkPolicy::FromSingletons
    } else {
        UnkPolicy::Floor(args.unk_floor)
    };
    let model =
        train_model(lines.iter(), args.order as usize, policy).map_err(Failure::usage)?;
    if !model.discount_fallback_orders().is_empty() {
        eprintln!(
            "note: flat discount fallback at orders {:?} (degenerate counts-of-counts)",
            model.discount_fallback_orders()
        );
    }
    atomic_write(&args.output, arpa::to_arpa_string(&model).as_bytes())?;
    let sizes: Vec<String> = (1..=model.order())
        .map(|k| format!("{k}:{}", model.entry_count(k)))
        .collect();
    eprintln!("order {} model, entries {}", model.order(), sizes.join(" "));
    Ok(())
}

fn load_inventory(path: &Path) -> Result<Arc<TokenInventory>, Failure> {
    let text = read_input(path)?;
    TokenInventory::parse(&text)
        .map(Arc::new)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_logits(
    path: &Path,
    format: &str,
    inventory: &Arc<TokenInventory>,
) -> Result<LogitMatrix, Failure> {
    let map = |e: asrpost::decoder::DecodeError| Failure::usage(format!("{}: {e}", path.display()));
    match format {
        "binary" => {
            let bytes = read_input_bytes(path)?;
            logit_io::read_ctcl1(&mut bytes.as_slice(), Arc::clone(inventory)).map_err(map)
        }
        _ => {
            let text = read_input(path)?;
            logit_io::read_text_logits(BufReader::new(text.as_bytes()), Arc::clone(inventory))
                .map_err(map)
        }
    }
}

pub fn decode(args: DecodeArgs) -> Result<(), Failure> {
    let inventory = load_inventory(&args.inventory)?;
    let model = args
        .lm
        .as_deref()
        .map(|p| -> Result<NGramModel, Failure> {
            let bytes = read_input_bytes(p)?;
            arpa::read_arpa(BufReader::new(bytes.as_slice()))
                .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
        })
        .transpose()?;

    if args.greedy && (model.is_some() || args.alpha.is_some() || args.beta.is_some()) {
        return Err(Failure::usage(
            "--greedy is pure acoustic decoding; it takes no --lm, --alpha, or --beta",
        ));
    }
    if model.is_none() && args.alpha.map_or(false, |a| a > 0.0) {
        return Err(Failure::usage("--alpha > 0 requires --lm"));
    }
    let with_lm = model.is_some();
    let cfg = DecodeConfig {
        beam_width: args.beam_width,
        alpha: args.alpha.unwrap_or(if with_lm { 0.7 } else { 0.0 }),
        beta: args.beta.unwrap_or(if with_lm { 0.5 } else { 0.0 }),
        token_min_logprob: args.token_min_logprob,
        top_k_tokens: args.top_k,
        score_partial_final: args.score_partial_final == "on",
    };

    let ext = if args.logits_format == "binary" { "ctcl" } else { "txt" };
    let files = if args.logits.is_dir() {
        logit_files(&args.logits, ext)?
    } else {
        vec![args.logits.clone()]
    };
    let inputs: Vec<(String, LogitMatrix)> = files
        .iter()
        .map(|p| Ok((file_stem(p), load_logits(p, &args.logits_format, &inventory)?)))
        .collect::<Result<_, Failure>>()?;

    let decoded: Vec<(String, Result<DecodeResult, String>)> = inputs
        .par_iter()
        .map(|(id, logits)| {
            let r = if args.greedy {
                Ok(greedy_decode(logits))
            } else {
                beam_decode(logits, &cfg, model.as_ref()).map_err(|e| e.to_string())
            };
            (id.clone(), r)
        })
        .collect();

    let mut out = String::new();
    for (id, r) in decoded {
        match r {
            Ok(result) => {
                let _ = writeln!(out, "{id}\t{}", result.text);
            }
            Err(e) => return Err(Failure::runtime(format!("{id}: {e}"))),
        }
    }
    atomic_write(&args.output, out.as_bytes())?;
    eprintln!("decoded {} utterances", inputs.len());
    Ok(())
}

fn paired_inputs(args: &EvaluateArgs) -> Result<Vec<EvalPair>, Failure> {
    let refs = read_input(&args.refs)?;
    let hyps = read_input(&args.hyps)?;
    if args.format == "lines" {
        let r: Vec<&str> = refs.lines().collect();
        let h: Vec<&str> = hyps.lines().collect();
        if r.len() != h.len() {
            return Err(Failure::usage(format!(
                "length mismatch: {} references vs {} hypotheses",
                r.len(),
                h.len()
            )));
        }
        Ok(r.iter()
            .zip(&h)
            .map(|(a, b)| EvalPair::new(*a, *b))
            .collect())
    } else {
        let r = parse_id_tsv(&refs, &args.refs)?;
        let mut h: std::collections::HashMap<String, String> =
            parse_id_tsv(&hyps, &args.hyps)?.into_iter().collect();
        let mut pairs = Vec::with_capacity(r.len());
        for (id, reference) in r {
            let hyp = h
                .remove(&id)
                .ok_or_else(|| Failure::usage(format!("no hypothesis for id {id:?}")))?;
            pairs.push(EvalPair::new(reference, hyp));
        }
        if let Some(extra) = h.keys().next() {
            return Err(Failure::usage(format!(
                "hypothesis id {extra:?} has no reference"
            )));
        }
        Ok(pairs)
    }
}

pub fn evaluate(args: EvaluateArgs, seed: Option<u64>) -> Result<(), Failure> {
    let mut pairs = paired_inputs(&args)?;
    if args.rules.is_some() {
        let rules = load_rules(args.rules.as_deref())?;
        for p in &mut pairs {
            p.reference = normalize_transcript(&p.reference, &rules);
            p.hypothesis = normalize_transcript(&p.hypothesis, &rules);
        }
    }
    let report = corpus_report(&pairs, Granularity::Both).map_err(Failure::usage)?;
    let per = report.per_sentence.as_ref().expect("per-sentence populated");
    let mean_lev = if args.lev_unit == "word" {
        per.iter().map(|s| s.word_edits).sum::<usize>() as f64 / per.len() as f64
    } else {
        report.mean_levenshtein
    };

    let mut out = String::new();
    let _ = writeln!(out, "pairs={}", pairs.len());
    let _ = writeln!(out, "wer={:.6}", report.wer.unwrap());
    let _ = writeln!(out, "cer={:.6}", report.cer.unwrap());
    let _ = writeln!(out, "mean_levenshtein={mean_lev:.6}");
    let _ = writeln!(out, "total_ref_words={}", report.total_ref_words);
    let _ = writeln!(out, "total_word_edits={}", report.total_word_edits);
    let _ = writeln!(out, "total_ref_chars={}", report.total_ref_chars);
    let _ = writeln!(out, "total_char_edits={}", report.total_char_edits);
    if let Some(seed) = seed {
        let _ = writeln!(out, "seed={seed}");
    }
    if args.per_sentence {
        for (i, s) in per.iter().enumerate() {
            let _ = writeln!(
                out,
                "sentence\t{i}\t{}\t{}\t{}\t{}",
                s.word_edits, s.ref_words, s.char_edits, s.ref_chars
            );
        }
    }
    print!("{out}");
    Ok(())
}

pub fn tune(args: TuneArgs, seed: Option<u64>) -> Result<(), Failure> {
    let bytes = read_input_bytes(&args.lm)?;
    let model = arpa::read_arpa(BufReader::new(bytes.as_slice()))
        .map_err(|e| Failure::usage(format!("{}: {e}", args.lm.display())))?;
    let grid = match (&args.alphas, &args.betas) {
        (None, None) => GridSpec::default_grid(),
        (a, b) => {
            let alphas = match a {
                Some(s) => parse_float_list(s, "alpha")?,
                None => GridSpec::default_grid().alphas().to_vec(),
            };
            let betas = match b {
                Some(s) => parse_float_list(s, "beta")?,
                None => GridSpec::default_grid().betas().to_vec(),
            };
            GridSpec::new(alphas, betas).map_err(Failure::usage)?
        }
    };
    let base_cfg = DecodeConfig {
        beam_width: args.beam_width,
        ..DecodeConfig::default()
    };

    let inv_path = args
        .inventory
        .clone()
        .unwrap_or_else(|| args.logits_dir.join("inventory.txt"));
    let inventory = load_inventory(&inv_path)?;
    let dev = load_dev_set(&args.logits_dir, &args.refs, &args.logits_format, &inventory)?;
    if let (Some(el), Some(_)) = (&args.eval_logits_dir, &args.eval_refs) {
        if same_file(el, &args.logits_dir) {
            eprintln!(
                "warning: tuning and evaluation use the same logits; the reported \
                 best WER is an in-sample number"
            );
        }
    }

    let result = grid_search(&dev, &model, &grid, &base_cfg).map_err(Failure::runtime)?;

    let mut out = String::from("alpha\tbeta\twer\tcer\terror\n");
    for cell in &result.table {
        let wer = cell.wer.map_or(String::new(), |w| format!("{w:.6}"));
        let cer = cell.cer.map_or(String::new(), |c| format!("{c:.6}"));
        let err = cell.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ");
        let _ = writeln!(out, "{}\t{}\t{wer}\t{cer}\t{err}", cell.alpha, cell.beta);
    }
    let _ = writeln!(out, "best_alpha={}", result.best_alpha);
    let _ = writeln!(out, "best_beta={}", result.best_beta);
    let _ = writeln!(out, "best_wer={:.6}", result.best_wer);
    if let Some(seed) = seed {
        let _ = writeln!(out, "seed={seed}");
    }

    if let (Some(eval_dir), Some(eval_refs)) = (&args.eval_logits_dir, &args.eval_refs) {
        let eval_set = load_dev_set(eval_dir, eval_refs, &args.logits_format, &inventory)?;
        let cfg = DecodeConfig {
            alpha: result.best_alpha,
            beta: result.best_beta,
            ..base_cfg
        };
        let pairs: Vec<EvalPair> = eval_set
            .par_iter()
            .map(|(logits, reference)| {
                beam_decode(logits, &cfg, Some(&model))
                    .map(|r| EvalPair::new(reference.clone(), r.text))
                    .map_err(|e| Failure::runtime(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        let report = corpus_report(&pairs, Granularity::Both).map_err(Failure::usage)?;
        let _ = writeln!(out, "eval_wer={:.6}", report.wer.unwrap());
        let _ = writeln!(out, "eval_cer={:.6}", report.cer.unwrap());
    }
    print!("{out}");
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn load_dev_set(
    dir: &Path,
    refs_path: &Path,
    format: &str,
    inventory: &Arc<TokenInventory>,
) -> Result<Vec<(LogitMatrix, String)>, Failure> {
    let refs_text = read_input(refs_path)?;
    let refs: std::collections::HashMap<String, String> =
        parse_id_tsv(&refs_text, refs_path)?.into_iter().collect();
    let ext = if format == "binary" { "ctcl" } else { "txt" };
    let files = logit_files(dir, ext)?;
    files
        .iter()
        .map(|p| {
            let id = file_stem(p);
            let reference = refs.get(&id).cloned().ok_or_else(|| {
                Failure::usage(format!("{}: no reference for id {id:?}", refs_path.display()))
            })?;
            Ok((load_logits(p, format, inventory)?, reference))
        })
        .collect()
}

pub fn lm_stats(args: LmStatsArgs) -> Result<(), Failure> {
    let bytes = read_input_bytes(&args.lm)?;
    let model = arpa::read_arpa(BufReader::new(bytes.as_slice()))
        .map_err(|e| Failure::usage(format!("{}: {e}", args.lm.display())))?;
    let mut out = String::new();
    let _ = writeln!(out, "order={}", model.order());
    let _ = writeln!(out, "vocab={}", model.entry_count(1));
    for k in 1..=model.order() {
        let _ = writeln!(out, "ngram_{k}={}", model.entry_count(k));
    }
    let _ = writeln!(out, "file_bytes={}", bytes.len());
    print!("{out}");
    Ok(())
}
