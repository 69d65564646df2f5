use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Full-precision scientific notation used for every floating-point cell.
pub fn sci(v: f64) -> String {
    // Adding zero folds -0.0 into 0.0.
    format!("{:.16e}", v + 0.0)
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects the files written by one run so the manifest can hash them.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push((name.to_string(), hex_sha256(bytes)));
        Ok(())
    }

    /// Writes a header row and records with LF line endings.
    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let path = self.dir.join(name);
        let to_err = |e: csv::Error| CliError::io(&path, std::io::Error::other(e));
        w.write_record(header).map_err(to_err)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&path, e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn written(&self) -> &[(String, String)] {
        &self.written
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Run metadata. Contains nothing that varies between identical runs.
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config_sha256: String,
    pub seed: u64,
    pub n_trunc: usize,
    pub n_check: usize,
    pub notes: Vec<String>,
}

impl Manifest<'_> {
    pub fn write(&self, out: &mut OutputDir) -> CliResult<()> {
        let mut text = String::new();
        let mut line = |k: &str, v: &str| {
            text.push_str(k);
            text.push_str(" = ");
            text.push_str(v);
            text.push('\n');
        };
        line("tool", concat!("posterior-lab-cli ", env!("CARGO_PKG_VERSION")));
        line("core", &format!("posterior-lab {}", posterior_lab::VERSION));
        line("command", self.command);
        line("config_sha256", &self.config_sha256);
        line("seed", &self.seed.to_string());
        line("n_trunc", &self.n_trunc.to_string());
        line("n_check", &self.n_check.to_string());
        for note in &self.notes {
            line("note", note);
        }
        for (name, hash) in out.written().to_vec() {
            line(&format!("output {name}"), &hash);
        }
        out.write_bytes("manifest.txt", text.as_bytes())
    }
}
