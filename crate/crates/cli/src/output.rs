//! CSV and JSON writers. Every file is written to a temporary sibling and renamed into place,
//! so a failed command never leaves a partial file behind.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

pub const SKELETON_SCHEMA: &str = "bhs-skeleton/1";
pub const SAMPLES_SCHEMA: &str = "bhs-samples/1";
pub const MSE_SCHEMA: &str = "bhs-mse/1";
pub const SUMMARY_SCHEMA: &str = "bhs-summary/1";
pub const HISTOGRAM_SCHEMA: &str = "bhs-histogram/1";
pub const GENTEST_SCHEMA: &str = "bhs-gentest/1";
pub const BENCHMARK_SCHEMA: &str = "bhs-benchmark/1";
pub const TRUTH_SCHEMA: &str = "bhs-truth/1";

/// Float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot move output into {}", path.display()))?;
    Ok(())
}

/// CSV text: a `# schema: …` line, a header row, then one line per record.
pub struct CsvTable {
    text: String,
}

impl CsvTable {
    pub fn new(schema: &str, header: &[String]) -> Self {
        let mut text = format!("# schema: {schema}\n");
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let line: Vec<String> = cells.into_iter().collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        write_atomic(path, self.text.as_bytes())
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
