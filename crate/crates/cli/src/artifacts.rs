//! Output directory bookkeeping: every file written through [`RunDir`] is
//! hashed into `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use proxwarm_core::multiagent::SCENARIO_SCHEMA_VERSION;
use proxwarm_core::problem::PROBLEM_SCHEMA_VERSION;
use proxwarm_core::Trajectory;
use serde::{Deserialize, Serialize};

use crate::config::hex_digest;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub proxwarm: String,
    pub manifest_schema: u32,
    pub scenario_schema: u32,
    pub problem_schema: u32,
    pub trajectory_schema: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            proxwarm: env!("CARGO_PKG_VERSION").to_string(),
            manifest_schema: MANIFEST_SCHEMA_VERSION,
            scenario_schema: SCENARIO_SCHEMA_VERSION,
            problem_schema: PROBLEM_SCHEMA_VERSION,
            trajectory_schema: TRAJECTORY_SCHEMA_VERSION,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub versions: Versions,
    /// Commands that wrote into this directory, oldest first.
    pub commands: Vec<String>,
    pub seed: u64,
    pub config_hash: String,
    /// Wall-clock seconds per stage; informational only.
    pub timings: BTreeMap<String, f64>,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<String>,
    pub notes: Vec<String>,
    /// Relative path to SHA-256 of every emitted file.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

/// An output directory plus the manifest being accumulated for it. An
/// existing manifest is extended, so stage commands can be chained in one
/// directory.
pub struct RunDir {
    root: PathBuf,
    pub manifest: Manifest,
}

impl RunDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::stage("output", format!("{}: {e}", root.display())))?;
        let manifest = Manifest::load(root).unwrap_or_default();
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::stage("output", format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&path, bytes.as_ref()).map_err(|e| CliError::stage("output", format!("{}: {e}", path.display())))?;
        self.manifest.files.insert(rel.to_string(), hex_digest(bytes.as_ref()));
        Ok(path)
    }

    /// Hashes a file some other writer already produced under the root.
    pub fn record_existing(&mut self, rel: &str) -> CliResult<()> {
        let bytes = std::fs::read(self.path(rel)).map_err(|e| CliError::stage("output", format!("{rel}: {e}")))?;
        self.manifest.files.insert(rel.to_string(), hex_digest(&bytes));
        Ok(())
    }

    /// Writes the manifest itself, which is not listed in its own file map.
    pub fn finish(&mut self) -> CliResult<()> {
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        let path = self.path(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::stage("output", format!("{}: {e}", path.display())))
    }
}

/// Versioned trajectory file used for warm starts and final solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub version: u32,
    #[serde(flatten)]
    pub trajectory: Trajectory,
}

pub fn trajectory_json(traj: &Trajectory) -> String {
    let doc = TrajectoryDocument {
        version: TRAJECTORY_SCHEMA_VERSION,
        trajectory: traj.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("trajectory serializes")
}

pub fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read trajectory {}: {e}", path.display())))?;
    let doc: TrajectoryDocument =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("trajectory {}: {e}", path.display())))?;
    if doc.version != TRAJECTORY_SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "trajectory {}: unsupported version {}",
            path.display(),
            doc.version
        )));
    }
    Ok(doc.trajectory)
}

/// Every regular file under `dir`, as `/`-separated paths relative to it.
pub fn list_files(dir: &Path) -> std::io::Result<Vec<String>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else {
                let rel = path.strip_prefix(base).expect("walk stays under base");
                out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}
