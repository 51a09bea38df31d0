use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nmc_core::NmcError;

/// Exit code 2 for usage and configuration errors, 1 for failures at run time.
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<NmcError> for Failure {
    fn from(e: NmcError) -> Self {
        match e {
            NmcError::NonFinite { .. }
            | NmcError::Integration { .. }
            | NmcError::TooManyFailures { .. }
            | NmcError::LinearityViolation { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

pub fn join(counts: &[u64]) -> String {
    counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// 17 significant digits, as in the sweep CSV.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// 12 significant digits in positional notation where that stays readable.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor();
    if !(-5.0..15.0).contains(&mag) {
        return format!("{x:.11e}");
    }
    let decimals = (11.0 - mag).max(0.0) as usize;
    format!("{x:.decimals$}")
}

fn shell_word(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:,=+".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// `dir/name.csv` gets `dir/name.manifest.txt`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.manifest.txt"))
}

/// Write every file, then a manifest next to the first one.
pub fn write_outputs(files: &[(PathBuf, Vec<u8>)], seed: u64) -> Result<(), Failure> {
    for (path, bytes) in files {
        fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    let manifest = manifest_path(&files[0].0);
    let command: Vec<String> = std::env::args().map(|a| shell_word(&a)).collect();
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut text = format!(
        "command={}\nversion={}\nbase_seed={seed}\ntimestamp={timestamp}\n",
        command.join(" "),
        env!("CARGO_PKG_VERSION")
    );
    for (path, _) in files {
        text.push_str(&format!("output={}\n", path.display()));
    }
    text.push_str(&format!("output={}\n", manifest.display()));
    fs::write(&manifest, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", manifest.display())))
}
