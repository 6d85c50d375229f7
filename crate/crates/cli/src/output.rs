use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use starsim::Result;
use tempfile::NamedTempFile;

/// Writes result files atomically into one directory, each CSV preceded by
/// a provenance comment.
pub struct Output {
    dir: PathBuf,
    provenance: String,
}

impl Output {
    pub fn new(dir: &Path, command: &str, canonical_config: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let hash = Sha256::digest(canonical_config.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        Ok(Output {
            dir: dir.to_path_buf(),
            provenance: format!("# starsim {} {command} config_sha256={hex}\n", env!("CARGO_PKG_VERSION")),
        })
    }

    fn persist(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut tmp = NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(path)
    }

    pub fn csv(&self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let mut buf = self.provenance.clone().into_bytes();
        fill(&mut buf)?;
        self.persist(name, &buf)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<PathBuf> {
        self.persist(name, text.as_bytes())
    }
}
