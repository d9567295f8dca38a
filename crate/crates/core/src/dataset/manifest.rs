use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_TOP_T: usize = 25;

/// JSON description of a collection on disk. Relative paths resolve against
/// the manifest's own directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionManifest {
    #[serde(default = "manifest_version")]
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub n: usize,
    pub abstract_dim: usize,
    pub concept_dim: usize,
    #[serde(default = "default_top_t")]
    pub top_t: usize,
    pub abstract_path: PathBuf,
    pub concept_path: PathBuf,
    /// One display URI per line. Absent means `image://<id>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uris_path: Option<PathBuf>,
    /// JSON lines, each a string or `null`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata_path: Option<PathBuf>,
    /// `sha256:<hex>` over the abstract file followed by the concept file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksum: Option<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn manifest_version() -> u32 {
    MANIFEST_VERSION
}

fn default_top_t() -> usize {
    DEFAULT_TOP_T
}

impl CollectionManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: CollectionManifest = serde_json::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::Version {
                what: "collection manifest",
                found: self.version,
            });
        }
        if self.n == 0 {
            return Err(Error::Manifest("n must be at least 1".into()));
        }
        if self.top_t == 0 {
            return Err(Error::Manifest("top_t must be at least 1".into()));
        }
        if self.abstract_dim == 0 || self.concept_dim == 0 {
            return Err(Error::Manifest("dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn compute_checksum(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 20];
        for p in [&self.abstract_path, &self.concept_path] {
            let path = self.resolve(p);
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            let mut r = BufReader::new(file);
            loop {
                let got = r.read(&mut buf).map_err(|e| Error::io(&path, e))?;
                if got == 0 {
                    break;
                }
                hasher.update(&buf[..got]);
            }
        }
        Ok(format!("sha256:{}", hex::encode(hasher.finalize())))
    }

    pub fn verify_checksum(&self) -> Result<()> {
        if let Some(expected) = &self.checksum {
            let actual = self.compute_checksum()?;
            if &actual != expected {
                return Err(Error::Checksum {
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}
