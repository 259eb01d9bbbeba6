//! Small I/O helpers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use crate::Failure;
use asrpost::text::NormalizationRules;

/// Reads a whole input file; missing or unreadable inputs are usage errors.
pub fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn read_input_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Writes atomically: temp file in the target directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::runtime(format!("creating {}: {e}", dir.display())))?;
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Failure::runtime(format!("writing {}: {e}", path.display()))
    })
}

/// Loads a rules file, or the bundled default when no path is given.
pub fn load_rules(path: Option<&Path>) -> Result<NormalizationRules, Failure> {
    match path {
        Some(p) => {
            let text = read_input(p)?;
            NormalizationRules::parse(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))
        }
        None => Ok(NormalizationRules::default_bengali()),
    }
}

/// Logit files in a directory with the given extension, sorted by file name
/// for deterministic output order. `inventory.txt` is reserved for the token
/// inventory and never treated as logits.
pub fn logit_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().map_or(false, |x| x == extension)
                && p.file_name().map_or(true, |n| n != "inventory.txt")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::usage(format!(
            "{}: no *.{extension} files",
            dir.display()
        )));
    }
    Ok(files)
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Parses an `id<TAB>text` file into ordered pairs.
pub fn parse_id_tsv(text: &str, path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, t) = line.split_once('\t').ok_or_else(|| {
            Failure::usage(format!(
                "{}: line {}: expected 'id<TAB>text'",
                path.display(),
                idx + 1
            ))
        })?;
        out.push((id.to_string(), t.to_string()));
    }
    Ok(out)
}

pub fn parse_float_list(s: &str, name: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("bad {name} value {p:?}")))
        })
        .collect()
}
