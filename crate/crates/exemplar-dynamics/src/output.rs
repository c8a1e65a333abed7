//! Result serialization: CSV series, snapshot tables, field grid dumps,
//! and a digest-carrying run manifest.
//!
//! All numbers are written with 17 significant digits so that every `f64`
//! round-trips bit-exactly; reruns of the same scenario and seed must be
//! byte-identical, and the manifest's SHA-256 digests make any post-hoc
//! file modification detectable.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exemplar::SnapshotRow;
use crate::field::{FieldSnapshot, Grid};
use crate::stats::DiagnosticsRow;

/// A float with 17 significant digits: enough to reproduce the exact bits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header of the diagnostics series CSV; the mean column count follows
/// the model dimension.
pub fn series_header(dim: usize) -> String {
    match dim {
        1 => "t,word,mean_x,dispersion,total_weight,live_count,discard_count".into(),
        _ => "t,word,mean_x,mean_y,dispersion,total_weight,live_count,discard_count".into(),
    }
}

/// Serialize a diagnostics series. Word ids become names; the two count
/// columns stay empty for field runs.
pub fn series_csv(series: &[DiagnosticsRow], word_names: &[String], dim: usize) -> String {
    let mut out = series_header(dim);
    out.push('\n');
    for row in series {
        let counts = match (row.live_count, row.discard_count) {
            (Some(l), Some(d)) => format!("{l},{d}"),
            (Some(l), None) => format!("{l},"),
            (None, Some(d)) => format!(",{d}"),
            (None, None) => ",".into(),
        };
        let mean: Vec<String> = row.mean.coords().iter().copied().map(fmt_num).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(row.t),
            word_names[row.word],
            mean.join(","),
            fmt_num(row.dispersion),
            fmt_num(row.total_weight),
            counts,
        );
    }
    out
}

pub fn snapshot_header(dim: usize) -> String {
    match dim {
        1 => "word,x,weight".into(),
        _ => "word,x,y,weight".into(),
    }
}

/// Serialize one exemplar-engine snapshot (every live exemplar).
pub fn exemplar_snapshot_csv(rows: &[SnapshotRow], word_names: &[String], dim: usize) -> String {
    let mut out = snapshot_header(dim);
    out.push('\n');
    for row in rows {
        let coords: Vec<String> = row.position.coords().iter().copied().map(fmt_num).collect();
        let _ = writeln!(
            out,
            "{},{},{}",
            word_names[row.word],
            coords.join(","),
            fmt_num(row.weight),
        );
    }
    out
}

/// Serialize one field snapshot: a self-describing `#` header, then one
/// block per word with one text row per grid line (in one dimension each
/// grid line is a single node, so one value per row).
pub fn field_snapshot_text(
    snapshot: &FieldSnapshot,
    grid: &Grid,
    word_names: &[String],
) -> String {
    let [nx, ny] = grid.shape();
    let mut out = String::new();
    let _ = writeln!(out, "# field snapshot, density values by grid node");
    let _ = writeln!(out, "# t = {}", fmt_num(snapshot.t));
    let _ = writeln!(out, "# words = {}", word_names.join(","));
    for a in 0..grid.dim() {
        let ax = grid.axis(a);
        let _ = writeln!(
            out,
            "# axis{} = {} {} {}",
            a,
            fmt_num(ax.min),
            fmt_num(ax.max),
            ax.n
        );
    }
    for (w, values) in snapshot.values.iter().enumerate() {
        let _ = writeln!(out, "# word = {}", word_names[w]);
        for ix in 0..nx {
            let row: Vec<String> = (0..ny)
                .map(|iy| fmt_num(values[ix * ny + iy]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to reproduce and verify one run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// The fully resolved scenario as a configuration document;
    /// re-running it with the same seed reproduces every output byte.
    pub config: String,
    pub engine: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::config(MANIFEST_NAME, e.to_string()))
    }

    /// Check every listed file against its recorded digest. Returns the
    /// names of files that are missing or modified.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            match std::fs::read(dir.join(&f.name)) {
                Ok(bytes) => {
                    if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                        bad.push(f.name.clone());
                    }
                }
                Err(_) => bad.push(f.name.clone()),
            }
        }
        Ok(bad)
    }
}

/// Write `content` under `dir` and record it in `files`.
pub fn write_recorded(
    dir: &Path,
    name: &str,
    content: &str,
    files: &mut Vec<FileEntry>,
) -> Result<()> {
    std::fs::write(dir.join(name), content)?;
    files.push(FileEntry {
        name: name.to_string(),
        bytes: content.len() as u64,
        sha256: sha256_hex(content.as_bytes()),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point;

    fn row(t: f64, word: usize) -> DiagnosticsRow {
        DiagnosticsRow {
            t,
            word,
            mean: Point::d1(1.0 / 3.0),
            dispersion: 2.2942,
            total_weight: 1.0,
            live_count: Some(42),
            discard_count: Some(7),
        }
    }

    #[test]
    fn series_header_is_stable() {
        assert_eq!(
            series_header(1),
            "t,word,mean_x,dispersion,total_weight,live_count,discard_count"
        );
        assert_eq!(
            series_header(2),
            "t,word,mean_x,mean_y,dispersion,total_weight,live_count,discard_count"
        );
    }

    #[test]
    fn numbers_round_trip_bit_exactly() {
        for x in [1.0 / 3.0, 2.2942, 1e-300, -0.0, 123456.789, f64::MIN_POSITIVE] {
            let back: f64 = fmt_num(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn series_csv_shape_and_empty_counts() {
        let names = vec!["A".to_string()];
        let text = series_csv(&[row(0.5, 0)], &names, 1);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), series_header(1));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[1], "A");
        assert_eq!(fields[5], "42");

        let mut r = row(0.5, 0);
        r.live_count = None;
        r.discard_count = None;
        let text = series_csv(&[r], &names, 1);
        let line = text.lines().nth(1).unwrap();
        assert!(line.ends_with(",,"), "{line}");
    }

    #[test]
    fn field_snapshot_text_is_self_describing() {
        let grid = Grid::d1(0.0, 1.0, 16).unwrap();
        let snap = FieldSnapshot {
            t: 2.0,
            values: vec![vec![0.5; 16]],
        };
        let text = field_snapshot_text(&snap, &grid, &["A".to_string()]);
        assert!(text.contains("# t = 2.0000000000000000e0"));
        assert!(text.contains("# axis0 = 0.0000000000000000e0 1.0000000000000000e0 16"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 16);
    }

    #[test]
    fn manifest_detects_file_modification() {
        let dir = tempfile::tempdir().unwrap();
        let mut files = Vec::new();
        write_recorded(dir.path(), "a.csv", "hello\n", &mut files).unwrap();
        let manifest = RunManifest {
            tool: "exdyn".into(),
            version: "0".into(),
            config: String::new(),
            engine: "field".into(),
            seed: 0,
            started_unix_ms: 0,
            finished_unix_ms: 0,
            files,
        };
        assert!(manifest.verify(dir.path()).unwrap().is_empty());
        std::fs::write(dir.path().join("a.csv"), "hellp\n").unwrap();
        assert_eq!(manifest.verify(dir.path()).unwrap(), vec!["a.csv".to_string()]);
    }

    #[test]
    fn manifest_json_round_trips() {
        let manifest = RunManifest {
            tool: "exdyn".into(),
            version: "0.1.0".into(),
            config: "t_max = 1.0".into(),
            engine: "exemplar".into(),
            seed: 7,
            started_unix_ms: 1,
            finished_unix_ms: 2,
            files: vec![FileEntry {
                name: "series.csv".into(),
                bytes: 3,
                sha256: "ab".into(),
            }],
        };
        let back = RunManifest::from_json(&manifest.to_json()).unwrap();
        assert_eq!(back.files, manifest.files);
        assert_eq!(back.seed, 7);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
