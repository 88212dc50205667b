use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::digest::sha256_hex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Collects what a subcommand read and wrote, then writes
/// `run_manifest.json` into the output directory.
#[derive(Debug)]
pub struct RunRecorder {
    out_dir: PathBuf,
    subcommand: String,
    argv: Vec<String>,
    config_echo: String,
    seed: u64,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    argv: &'a [String],
    seed: u64,
    config_digest: String,
    config: &'a str,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
}

impl RunRecorder {
    pub fn new(out_dir: &Path, subcommand: &str, argv: Vec<String>, config_echo: String, seed: u64) -> Result<Self> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            argv,
            config_echo,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn config_echo(&self) -> &str {
        &self.config_echo
    }

    /// `rel` joined onto the output directory, with parent directories
    /// created. Absolute paths and `..` are rejected.
    pub fn output_path(&self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let rel = rel.as_ref();
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(Error::invalid(format!("output `{}` escapes the output directory", rel.display())));
        }
        let path = self.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(path)
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    /// Writes `bytes` to `rel` under the output directory and records it.
    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.output_path(&rel)?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record_output(&path)?;
        Ok(path)
    }

    /// Records a file some library call already wrote under the output directory.
    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let rel = path.strip_prefix(&self.out_dir).unwrap_or(path);
        self.outputs.push(FileDigest {
            path: rel.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn outputs(&self) -> &[FileDigest] {
        &self.outputs
    }

    /// Writes the resolved config echo and the run manifest.
    pub fn finish(mut self) -> Result<PathBuf> {
        let echo = self.config_echo.clone();
        self.write("config.resolved.toml", echo.as_bytes())?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: &self.subcommand,
            argv: &self.argv,
            seed: self.seed,
            config_digest: sha256_hex(self.config_echo.as_bytes()),
            config: &self.config_echo,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let json = serde_json::to_vec_pretty(&manifest).expect("run manifest serializes");
        let path = self.out_dir.join("run_manifest.json");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// `# `-prefixed copy of the config echo and seed, for CSV headers.
pub fn comment_header(config_echo: &str, seed: u64) -> String {
    let mut s = String::new();
    for line in config_echo.lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(&format!("# seed = {seed}\n"));
    s
}
