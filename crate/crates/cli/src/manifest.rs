//! Output directories and the `manifest.json` written next to every result.
//!
//! A manifest records the effective configuration, every seed, and SHA-256
//! digests of inputs and outputs. It carries no timestamps, so repeating a
//! command gives a byte-identical manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{self, Config};

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Config,
    config_sha256: String,
    seeds: &'a BTreeMap<String, u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// One command's output directory.
pub struct Run {
    command: &'static str,
    dir: PathBuf,
    force: bool,
    config: Config,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new<A: Serialize>(
        command: &'static str,
        dir: &Path,
        force: bool,
        args: &A,
    ) -> Result<Self> {
        let config = config::from_args(args)?;
        if dir.exists() && !dir.is_dir() {
            bail!("{} exists and is not a directory", dir.display());
        }
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            command,
            dir: dir.to_owned(),
            force,
            config,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_owned(), value);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        if !path.is_file() {
            bail!("input {} does not exist", path.display());
        }
        self.inputs.push(path.to_owned());
        Ok(())
    }

    /// Writes one output file, refusing to clobber inputs or (without
    /// `--force`) existing files.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if path.exists() {
            let canon = fs::canonicalize(&path)?;
            for i in &self.inputs {
                if fs::canonicalize(i)? == canon {
                    bail!("refusing to overwrite input {}", path.display());
                }
            }
            if !self.force {
                bail!("{} exists; pass --force to overwrite", path.display());
            }
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_owned());
        Ok(path)
    }

    /// Writes `run.conf` and `manifest.json`; returns the directory.
    pub fn finish(mut self) -> Result<PathBuf> {
        let conf = config::render(&self.config);
        self.write("run.conf", &conf)?;
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|n| {
                Ok(FileDigest {
                    path: n.clone(),
                    sha256: sha256_file(&self.dir.join(n))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = Manifest {
            tool: "gesture",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: &self.config,
            config_sha256: hex::encode(Sha256::digest(conf.as_bytes())),
            seeds: &self.seeds,
            inputs,
            outputs,
        };
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        self.write("manifest.json", s)?;
        Ok(self.dir)
    }
}
