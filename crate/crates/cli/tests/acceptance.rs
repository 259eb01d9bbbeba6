//! End-to-end acceptance: the full file pipeline is deterministic.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use asrpost::decoder::io::write_ctcl1;
use asrpost::decoder::LogitMatrix;
use asrpost::text::build_token_inventory;

fn run_ok(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_asrpost"))
        .args(args)
        .output()
        .expect("spawn asrpost");
    assert!(
        out.status.success(),
        "asrpost {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Immutable fixture tree: metadata with junk rows, a rules file, and logit
/// files spelling two of the corpus words.
fn build_fixture(root: &Path) -> Fixture {
    let rules = root.join("rules.txt");
    fs::write(
        &rules,
        "[codepoint_map]\n\n[punctuation_map]\n\n[allowed_ranges]\n0061 007A\n\n[whitespace]\ncollapse = true\ntrim = true\n",
    )
    .unwrap();

    let meta = root.join("meta.tsv");
    fs::write(
        &meta,
        "id\tpath\ttranscript\tupvotes\tdownvotes\tduration_s\n\
         u1\tu1.wav\tHE cat sat\t3\t0\t2.0\n\
         u2\tu2.wav\tcat ran FAR\t1\t1\t3.5\n\
         u3\tu3.wav\ttoo long anyway\t9\t0\t25.0\n\
         u4\tu4.wav\tdownvoted line\t0\t4\t3.0\n\
         u5\tu5.wav\tthe dog sat\t2\t0\t4.0\n",
    )
    .unwrap();

    // Logits over the normalized corpus alphabet spelling "cat sat" and
    // "cat ran" with a mild lean toward the wrong vowel in one utterance.
    let inventory = Arc::new(
        build_token_inventory(["he cat sat", "cat ran far", "the dog sat"], &[]).unwrap(),
    );
    let logits_dir = root.join("logits");
    fs::create_dir(&logits_dir).unwrap();
    let idx = |s: &str| inventory.index_of(s).unwrap();
    let d = inventory.delimiter_index();
    let spell = |tokens: &[usize]| -> LogitMatrix {
        let v = inventory.len();
        let mut data = vec![0.0f32; tokens.len() * v];
        for (t, &tok) in tokens.iter().enumerate() {
            data[t * v + tok] = 8.0;
        }
        LogitMatrix::new(data, tokens.len(), Arc::clone(&inventory)).unwrap()
    };
    for (name, tokens) in [
        ("d1", vec![idx("c"), idx("a"), idx("t"), d, idx("s"), idx("a"), idx("t")]),
        ("d2", vec![idx("c"), idx("a"), idx("t"), d, idx("r"), idx("a"), idx("n")]),
    ] {
        let m = spell(&tokens);
        let mut buf = Vec::new();
        write_ctcl1(&m, &mut buf).unwrap();
        fs::write(logits_dir.join(format!("{name}.ctcl")), buf).unwrap();
    }
    let refs = root.join("refs.tsv");
    fs::write(&refs, "d1\tcat sat\nd2\tcat ran\n").unwrap();
    let inv_file = root.join("inventory.txt");
    fs::write(&inv_file, inventory.to_file_string()).unwrap();

    Fixture {
        rules,
        meta,
        logits_dir,
        refs,
        inv_file,
    }
}

struct Fixture {
    rules: PathBuf,
    meta: PathBuf,
    logits_dir: PathBuf,
    refs: PathBuf,
    inv_file: PathBuf,
}

/// filter -> normalize -> train-lm -> decode -> evaluate, into `out`.
/// Returns evaluate's stdout.
fn run_pipeline(fx: &Fixture, out: &Path) -> String {
    fs::create_dir_all(out).unwrap();
    let filtered = out.join("filtered.tsv");
    run_ok(&[
        "filter",
        "--metadata",
        p(&fx.meta),
        "--output",
        p(&filtered),
    ]);

    // Transcript column of the surviving rows feeds normalization.
    let transcripts = out.join("transcripts.txt");
    let text: String = fs::read_to_string(&filtered)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(2).unwrap().to_string() + "\n")
        .collect();
    fs::write(&transcripts, text).unwrap();

    let normalized = out.join("normalized.txt");
    run_ok(&[
        "normalize",
        "--input",
        p(&transcripts),
        "--output",
        p(&normalized),
        "--rules",
        p(&fx.rules),
    ]);

    let model = out.join("model.arpa");
    run_ok(&[
        "train-lm",
        "--corpus",
        p(&normalized),
        "--order",
        "2",
        "--output",
        p(&model),
    ]);

    let hyps = out.join("hyps.tsv");
    run_ok(&[
        "decode",
        "--logits",
        p(&fx.logits_dir),
        "--inventory",
        p(&fx.inv_file),
        "--lm",
        p(&model),
        "--alpha",
        "0.7",
        "--beta",
        "0.5",
        "--output",
        p(&hyps),
    ]);

    let report = run_ok(&[
        "evaluate",
        "--refs",
        p(&fx.refs),
        "--hyps",
        p(&hyps),
        "--format",
        "tsv",
    ]);
    fs::write(out.join("report.txt"), &report).unwrap();
    report
}

#[test]
fn a11_end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let fx = build_fixture(dir.path());
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    let report1 = run_pipeline(&fx, &out1);
    let report2 = run_pipeline(&fx, &out2);
    assert_eq!(report1, report2, "evaluate output differs between runs");

    for name in [
        "filtered.tsv",
        "transcripts.txt",
        "normalized.txt",
        "model.arpa",
        "hyps.tsv",
        "report.txt",
    ] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs between runs");
    }
    // The decode stage actually transcribed the fixture.
    let hyps = fs::read_to_string(out1.join("hyps.tsv")).unwrap();
    assert_eq!(hyps, "d1\tcat sat\nd2\tcat ran\n");
    println!("ACCEPT a11 end-to-end-determinism: PASS");
}
