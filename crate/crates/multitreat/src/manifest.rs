//! Plain-text run manifest. Metadata lines use `meta.*` keys, so the file
//! doubles as a config file that reproduces the run.

use std::path::Path;

use anyhow::Result;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const FILE: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Manifest {
    meta: Vec<(String, String)>,
    config: String,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let text = config.canonical();
        let meta = vec![
            ("command".into(), command.into()),
            ("multitreat_version".into(), env!("CARGO_PKG_VERSION").into()),
            ("config_sha256".into(), sha256_hex(text.as_bytes())),
        ];
        Self { meta, config: text }
    }

    pub fn add(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("meta.{k} = {v}\n"));
        }
        out.push_str(&self.config);
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(FILE), self.render())?;
        Ok(())
    }
}
