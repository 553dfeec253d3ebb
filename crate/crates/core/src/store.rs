//! On-disk model bundle: one directory holding a manifest, binary matrices,
//! and JSON/TSV artifacts, each checksummed.
//!
//! Binary matrix layout, little endian:
//! `b"TLMX"`, format version (u32), rows (u64), cols (u64), `rows·cols`
//! f64 values row-major, then the SHA-256 of everything before it.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";
const MAGIC: &[u8; 4] = b"TLMX";
const MATRIX_VERSION: u32 = 1;

/// Pipeline stages in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Hierarchy,
    Propmatrix,
    Fit,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Hierarchy => "hierarchy",
            Stage::Propmatrix => "propmatrix",
            Stage::Fit => "fit",
            Stage::Evaluate => "evaluate",
        }
    }
}

/// Artifact names, their files, and the stage that writes them.
pub mod artifact {
    use super::Stage;

    pub const CORPUS: &str = "corpus";
    pub const VOCABULARY: &str = "vocabulary";
    pub const TFIDF: &str = "tfidf";
    pub const TREE: &str = "tree";
    pub const PROPERTY: &str = "property";
    pub const PROPERTY_TSV: &str = "property_tsv";
    pub const ENSEMBLE: &str = "ensemble";
    pub const SCORES: &str = "scores";
    pub const EVAL: &str = "eval";
    pub const HIT_TSV: &str = "hit_tsv";
    pub const VIOLIN_TSV: &str = "violin_tsv";

    pub(crate) const ALL: [(&str, &str, Stage); 11] = [
        (CORPUS, "corpus.jsonl", Stage::Ingest),
        (VOCABULARY, "vocabulary.json", Stage::Ingest),
        (TFIDF, "tfidf.bin", Stage::Ingest),
        (TREE, "tree.json", Stage::Hierarchy),
        (PROPERTY, "property.json", Stage::Propmatrix),
        (PROPERTY_TSV, "property.tsv", Stage::Propmatrix),
        (ENSEMBLE, "ensemble.json", Stage::Fit),
        (SCORES, "scores.bin", Stage::Fit),
        (EVAL, "eval.json", Stage::Evaluate),
        (HIT_TSV, "hit_at_k.tsv", Stage::Evaluate),
        (VIOLIN_TSV, "violin.tsv", Stage::Evaluate),
    ];

    pub fn file(name: &str) -> Option<&'static str> {
        ALL.iter().find(|a| a.0 == name).map(|a| a.1)
    }

    pub fn stage(name: &str) -> Option<Stage> {
        ALL.iter().find(|a| a.0 == name).map(|a| a.2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub stage: Stage,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Seconds since the Unix epoch of the last write. Not checksummed.
    pub updated_unix: u64,
    /// The fully resolved configuration of the last stage run.
    pub config: RunConfig,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
    /// SHA-256 over the config fingerprint and every artifact digest.
    pub checksum: String,
}

impl Manifest {
    fn compute_checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.schema_version.to_le_bytes());
        h.update(self.config.fingerprint().as_bytes());
        for (name, entry) in &self.artifacts {
            h.update(name.as_bytes());
            h.update([0]);
            h.update(entry.sha256.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

/// A bundle directory with a verified manifest.
#[derive(Debug)]
pub struct Bundle {
    dir: PathBuf,
    manifest: Manifest,
}

impl Bundle {
    /// Opens an existing bundle and verifies every artifact's digest.
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let bytes = fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::NotFound(format!("bundle manifest {}", path.display()))
            } else {
                Error::io(format!("reading {}", path.display()), e)
            }
        })?;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|_| Error::Checksum { path: path.clone() })?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Checksum { path: path.clone() })? as u32;
        if found != SCHEMA_VERSION {
            return Err(Error::Schema {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let manifest: Manifest = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: path.clone(),
            line: 0,
            message: e.to_string(),
        })?;
        if manifest.compute_checksum() != manifest.checksum {
            return Err(Error::Checksum { path });
        }
        let bundle = Bundle {
            dir: dir.to_path_buf(),
            manifest,
        };
        for name in bundle.manifest.artifacts.keys() {
            bundle.read_bytes(name)?;
        }
        Ok(bundle)
    }

    /// Opens the bundle if a manifest exists, otherwise starts an empty one.
    pub fn open_or_create(dir: &Path, config: &RunConfig) -> Result<Self> {
        if dir.join(MANIFEST).exists() {
            return Self::open(dir);
        }
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let mut manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            updated_unix: 0,
            config: config.clone(),
            artifacts: BTreeMap::new(),
            checksum: String::new(),
        };
        manifest.checksum = manifest.compute_checksum();
        Ok(Bundle {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn checksum(&self) -> &str {
        &self.manifest.checksum
    }

    pub fn has(&self, name: &str) -> bool {
        self.manifest.artifacts.contains_key(name)
    }

    /// Fails with a dependency error naming the first missing artifact.
    pub fn require(&self, names: &[&str]) -> Result<()> {
        match names.iter().find(|n| !self.has(n)) {
            None => Ok(()),
            Some(name) => Err(Error::Dependency {
                artifact: name.to_string(),
                stage: artifact::stage(name).map_or("?", Stage::name).to_string(),
            }),
        }
    }

    pub fn lock(&self) -> Result<BundleLock> {
        BundleLock::acquire(&self.dir)
    }

    /// Drops every artifact written by `stage` or any later stage.
    pub fn invalidate_from(&mut self, stage: Stage) -> Result<()> {
        let stale: Vec<String> = self
            .manifest
            .artifacts
            .iter()
            .filter(|(_, e)| e.stage >= stage)
            .map(|(n, _)| n.clone())
            .collect();
        for name in stale {
            let entry = self.manifest.artifacts.remove(&name).expect("listed above");
            let path = self.dir.join(&entry.file);
            if let Err(e) = fs::remove_file(&path) {
                if e.kind() != std::io::ErrorKind::NotFound {
                    return Err(Error::io(format!("removing {}", path.display()), e));
                }
            }
        }
        Ok(())
    }

    pub fn put_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let (file, stage) = artifact::file(name)
            .zip(artifact::stage(name))
            .ok_or_else(|| Error::argument(format!("unknown artifact `{name}`")))?;
        write_atomic(&self.dir.join(file), bytes)?;
        self.manifest.artifacts.insert(
            name.to_string(),
            ArtifactEntry {
                file: file.to_string(),
                stage,
                sha256: hex::encode(Sha256::digest(bytes)),
                bytes: bytes.len() as u64,
            },
        );
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put_bytes(name, &bytes)
    }

    pub fn put_matrix(&mut self, name: &str, m: &DenseMatrix) -> Result<()> {
        self.put_bytes(name, &encode_matrix(m))
    }

    /// Reads an artifact and checks it against the manifest digest.
    pub fn read_bytes(&self, name: &str) -> Result<Vec<u8>> {
        let entry = self.manifest.artifacts.get(name).ok_or_else(|| Error::Dependency {
            artifact: name.to_string(),
            stage: artifact::stage(name).map_or("?", Stage::name).to_string(),
        })?;
        let path = self.dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if hex::encode(Sha256::digest(&bytes)) != entry.sha256 {
            return Err(Error::Checksum { path });
        }
        Ok(bytes)
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let bytes = self.read_bytes(name)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
            path: self.dir.join(artifact::file(name).unwrap_or(name)),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn read_matrix(&self, name: &str) -> Result<DenseMatrix> {
        let bytes = self.read_bytes(name)?;
        decode_matrix(&bytes, &self.dir.join(artifact::file(name).unwrap_or(name)))
    }

    /// Records `config`, recomputes the checksum, and writes the manifest.
    pub fn commit(&mut self, config: &RunConfig) -> Result<()> {
        self.manifest.config = config.clone();
        self.manifest.updated_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        self.manifest.checksum = self.manifest.compute_checksum();
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST), &bytes)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let ctx = || format!("writing {}", path.display());
    let mut f = File::create(&tmp).map_err(|e| Error::io(ctx(), e))?;
    f.write_all(bytes).map_err(|e| Error::io(ctx(), e))?;
    f.sync_all().map_err(|e| Error::io(ctx(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(ctx(), e))
}

pub fn encode_matrix(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * m.rows() * m.cols() + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.view().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    let corrupt = || Error::Checksum {
        path: path.to_path_buf(),
    };
    if bytes.len() < 24 + 32 {
        return Err(corrupt());
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt());
    }
    if &body[..4] != MAGIC {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "not a matrix file".into(),
        });
    }
    let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
    if version != MATRIX_VERSION {
        return Err(Error::Schema {
            found: version,
            expected: MATRIX_VERSION,
        });
    }
    let rows = u64::from_le_bytes(body[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(body[16..24].try_into().unwrap()) as usize;
    let payload = &body[24..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(payload.len()) {
        return Err(corrupt());
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_row_major(rows, cols, values)
}

/// Advisory lock held while a stage writes the bundle. Removed on drop.
#[derive(Debug)]
pub struct BundleLock {
    path: PathBuf,
}

impl BundleLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(BundleLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(format!("creating {}", path.display()), e)),
        }
    }
}

impl Drop for BundleLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::from_row_major(2, 3, vec![0.0, 1.5, -2.0, 3.25, 1e-300, 7.0]).unwrap()
    }

    #[test]
    fn matrix_round_trip_and_corruption() {
        let m = sample();
        let bytes = encode_matrix(&m);
        let p = Path::new("m.bin");
        assert_eq!(decode_matrix(&bytes, p).unwrap(), m);
        assert!(matches!(
            decode_matrix(&bytes[..bytes.len() - 5], p),
            Err(Error::Checksum { .. })
        ));
        let mut flipped = bytes.clone();
        flipped[30] ^= 1;
        assert!(matches!(decode_matrix(&flipped, p), Err(Error::Checksum { .. })));
        assert!(matches!(decode_matrix(&[], p), Err(Error::Checksum { .. })));
    }

    #[test]
    fn bundle_round_trip_invalidation_and_lock() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::default();
        let mut b = Bundle::open_or_create(dir.path(), &config).unwrap();
        {
            let _lock = b.lock().unwrap();
            assert!(matches!(b.lock(), Err(Error::Locked(_))));
            b.put_matrix(artifact::TFIDF, &sample()).unwrap();
            b.put_json(artifact::TREE, &vec![1, 2, 3]).unwrap();
            b.put_bytes(artifact::HIT_TSV, b"k\tmean\n").unwrap();
            b.commit(&config).unwrap();
        }
        assert!(!dir.path().join(LOCK).exists());

        let b = Bundle::open(dir.path()).unwrap();
        assert_eq!(b.read_matrix(artifact::TFIDF).unwrap(), sample());
        assert_eq!(b.read_json::<Vec<i32>>(artifact::TREE).unwrap(), [1, 2, 3]);
        assert!(matches!(b.require(&[artifact::TREE, artifact::PROPERTY]),
            Err(Error::Dependency { artifact, stage }) if artifact == "property" && stage == "propmatrix"));

        let mut b = b;
        b.invalidate_from(Stage::Hierarchy).unwrap();
        assert!(b.has(artifact::TFIDF));
        assert!(!b.has(artifact::TREE) && !b.has(artifact::HIT_TSV));
        assert!(!dir.path().join("tree.json").exists());
    }

    #[test]
    fn checksum_ignores_timestamp_and_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::default();
        let mut b = Bundle::open_or_create(dir.path(), &config).unwrap();
        b.put_json(artifact::TREE, &"x").unwrap();
        b.commit(&config).unwrap();
        let first = b.checksum().to_string();
        b.manifest.updated_unix += 100;
        b.commit(&config).unwrap();
        assert_eq!(b.checksum(), first);

        fs::write(dir.path().join("tree.json"), "\"y\"\n").unwrap();
        assert!(matches!(Bundle::open(dir.path()), Err(Error::Checksum { .. })));
    }

    #[test]
    fn schema_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::default();
        let mut b = Bundle::open_or_create(dir.path(), &config).unwrap();
        b.commit(&config).unwrap();
        let path = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace("\"schema_version\": 1", "\"schema_version\": 9")).unwrap();
        assert!(matches!(
            Bundle::open(dir.path()),
            Err(Error::Schema { found: 9, expected: 1 })
        ));
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(Bundle::open(dir.path()), Err(Error::Checksum { .. })));
    }
}
