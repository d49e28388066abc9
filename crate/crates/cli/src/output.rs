// Copyright 2026 The coulomb-gas authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.


//! Output directory, run manifest, reports and plot data.

use crate::CliError;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOT_INDEX_FILE: &str = "plot/index.json";

#[derive(Clone, Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub kind: String,
    pub description: String,
}

#[derive(Clone, Debug, Serialize)]
struct PlotEntry {
    file: String,
    description: String,
    columns: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    status: &'a str,
    config: &'a Map<String, Value>,
    convention: &'a Value,
    threads: usize,
    started_unix_seconds: u64,
    wall_clock_seconds: Option<f64>,
    outputs: &'a [OutputEntry],
    error: Option<&'a str>,
}

/// Files of one run. Every file goes through this type so the manifest
/// lists exactly what is on disk.
pub struct Output {
    dir: PathBuf,
    command: String,
    config: Map<String, Value>,
    convention: Value,
    threads: usize,
    started_unix: u64,
    clock: Instant,
    files: Vec<OutputEntry>,
    plots: Vec<PlotEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Output {
    /// Creates the directory and writes the initial manifest.
    pub fn create(
        dir: &Path,
        command: &str,
        config: Map<String, Value>,
        convention: Value,
        threads: usize,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let out = Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            convention,
            threads,
            started_unix,
            clock: Instant::now(),
            files: Vec::new(),
            plots: Vec::new(),
        };
        out.write_manifest("running", None, None)?;
        Ok(out)
    }

    fn write_manifest(&self, status: &str, wall: Option<f64>, error: Option<&str>) -> Result<(), CliError> {
        let manifest = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            status,
            config: &self.config,
            convention: &self.convention,
            threads: self.threads,
            started_unix_seconds: self.started_unix,
            wall_clock_seconds: wall,
            outputs: &self.files,
            error,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
    }

    /// Writes `name` (relative to the output directory) through a buffered writer.
    pub fn write_file(
        &mut self,
        name: &str,
        kind: &str,
        description: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(OutputEntry { path: name.to_string(), kind: kind.into(), description: description.into() });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, description: &str, value: &Value) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.write_file(name, "json", description, |w| writeln!(w, "{text}"))
    }

    /// Whitespace-separated data for gnuplot. A `None` row becomes a blank
    /// line (block separator).
    pub fn plot(
        &mut self,
        name: &str,
        description: &str,
        columns: &[&str],
        rows: impl IntoIterator<Item = Option<Vec<f64>>>,
    ) -> Result<(), CliError> {
        let file = format!("plot/{name}");
        self.write_file(&file, "plot", description, |w| {
            writeln!(w, "# {description}")?;
            writeln!(w, "# {}", columns.join(" "))?;
            for row in rows {
                match row {
                    Some(r) => {
                        let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
                        writeln!(w, "{}", cells.join(" "))?;
                    }
                    None => writeln!(w)?,
                }
            }
            Ok(())
        })?;
        self.plots.push(PlotEntry {
            file,
            description: description.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        });
        Ok(())
    }

    /// Writes the report, the plot index and the final manifest.
    pub fn finish(mut self, results: Value) -> Result<(), CliError> {
        let report = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "convention": self.convention,
            "results": results,
        });
        if !self.plots.is_empty() {
            let index = json!({ "command": self.command, "report": REPORT_FILE, "plots": self.plots });
            self.write_json(PLOT_INDEX_FILE, "index of plot data files", &index)?;
        }
        self.write_json(REPORT_FILE, "numerical results and run configuration", &report)?;
        self.write_manifest("complete", Some(self.clock.elapsed().as_secs_f64()), None)
    }

    /// Finalises the manifest of a failed run; files written so far stay listed.
    pub fn fail(self, error: &CliError) {
        let _ = self.write_manifest("failed", Some(self.clock.elapsed().as_secs_f64()), Some(&error.to_string()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::create(dir.path(), "demo", Map::new(), json!({}), 1).unwrap();
        let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(m["status"], "running");
        out.write_file("a.csv", "csv", "a", |w| writeln!(w, "x")).unwrap();
        out.plot("p.dat", "p", &["x", "y"], vec![Some(vec![1.0, 2.0]), None, Some(vec![3.0, 4.0])]).unwrap();
        out.finish(json!({"ok": true})).unwrap();
        let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(m["status"], "complete");
        let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
        assert_eq!(listed, ["a.csv", "plot/p.dat", PLOT_INDEX_FILE, REPORT_FILE]);
        for p in listed {
            assert!(dir.path().join(p).exists());
        }
        let data = fs::read_to_string(dir.path().join("plot/p.dat")).unwrap();
        assert_eq!(data.lines().filter(|l| l.is_empty()).count(), 1);
    }
}
