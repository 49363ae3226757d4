use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cqed_core::io::write_json;
use cqed_core::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Record of one invocation: everything needed to rerun it and every file it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub arguments: Vec<String>,
    pub parameters: Value,
    pub input_files: Vec<PathBuf>,
    pub output_files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub tool_version: String,
    pub wall_time: f64,
}

/// Collects outputs while a subcommand runs, then writes the manifest.
pub struct Run {
    started: Instant,
    out_dir: PathBuf,
    prefix: String,
    manifest: RunManifest,
}

impl Run {
    pub fn new(subcommand: &str, out_dir: &Path, prefix: Option<&str>) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
            prefix: prefix.unwrap_or(subcommand).to_string(),
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                arguments: std::env::args().skip(1).collect(),
                parameters: Value::Null,
                input_files: Vec::new(),
                output_files: Vec::new(),
                warnings: Vec::new(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                wall_time: 0.0,
            },
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.input_files.push(path.to_path_buf());
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.manifest.warnings.push(msg);
    }

    pub fn warnings(&mut self, msgs: impl IntoIterator<Item = String>) {
        for m in msgs {
            self.warn(m);
        }
    }

    pub fn parameters<T: Serialize>(&mut self, p: &T) -> Result<()> {
        self.manifest.parameters = serde_json::to_value(p)?;
        Ok(())
    }

    /// Writes `<prefix><suffix>` in the output directory and records it.
    pub fn emit<F>(&mut self, suffix: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.out_dir.join(format!("{}{suffix}", self.prefix));
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w)?;
        w.flush()?;
        self.manifest.output_files.push(path);
        Ok(())
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.wall_time = self.started.elapsed().as_secs_f64();
        let path = self.out_dir.join(format!("{}.manifest.json", self.prefix));
        let mut w = BufWriter::new(File::create(&path)?);
        write_json(&mut w, &self.manifest)?;
        w.flush()?;
        for f in &self.manifest.output_files {
            println!("{}", f.display());
        }
        println!("{}", path.display());
        Ok(self.manifest)
    }
}
