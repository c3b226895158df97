//! Run manifests and curve output.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Everything that determines the output of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub scenario: Option<PathBuf>,
    /// Parsed arguments of the subcommand, in declaration order.
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl RunManifest {
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("manifest serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn header_line(&self) -> String {
        format!("# manifest {}", self.hash())
    }
}

/// One row of a curve file.
pub struct CurveRow {
    pub snr_db: f64,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
    pub method: String,
}

pub const CURVE_HEADER: &str = "snr_db,value,ci_low,ci_high,method";

pub fn curve_csv(manifest: &RunManifest, comments: &[String], rows: &[CurveRow]) -> String {
    let mut out = String::new();
    out.push_str(&manifest.header_line());
    out.push('\n');
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        let (lo, hi) = match r.ci {
            Some((lo, hi)) => (format!("{lo:e}"), format!("{hi:e}")),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{:e},{},{},{}\n",
            r.snr_db, r.value, lo, hi, r.method
        ));
    }
    out
}

/// A CSV with an arbitrary header, preceded by the manifest line.
pub fn table_csv(manifest: &RunManifest, header: &str, rows: &[String]) -> String {
    let mut out = manifest.header_line();
    out.push('\n');
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

/// Writes to `path`, or to stdout when `None`.
pub fn emit(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

/// `dir/stem_user2.csv` from `dir/stem.csv`.
pub fn per_user_path(base: &Path, user: usize) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_user{}.{ext}", user + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(seed: u64) -> RunManifest {
        RunManifest {
            tool: "lisnoma",
            version: "0",
            subcommand: "pep".into(),
            scenario: None,
            parameters: serde_json::json!({"M": 3}),
            seed,
            output: None,
        }
    }

    #[test]
    fn hash_tracks_contents() {
        assert_eq!(manifest(1).hash(), manifest(1).hash());
        assert_ne!(manifest(1).hash(), manifest(2).hash());
        assert_eq!(manifest(1).hash().len(), 64);
    }

    #[test]
    fn curve_layout() {
        let rows = [CurveRow {
            snr_db: 10.0,
            value: 0.25,
            ci: None,
            method: "general".into(),
        }];
        let text = curve_csv(&manifest(1), &["tau 4".into()], &rows);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# manifest "));
        assert_eq!(lines[1], "# tau 4");
        assert_eq!(lines[2], CURVE_HEADER);
        assert_eq!(lines[3], "10,2.5e-1,,,general");
    }

    #[test]
    fn user_paths() {
        let p = per_user_path(Path::new("/tmp/ber.csv"), 1);
        assert_eq!(p, PathBuf::from("/tmp/ber_user2.csv"));
    }
}
