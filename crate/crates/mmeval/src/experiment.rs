//! Config-driven experiment runs: channel generation or ingestion, analysis
//! pipelines, and a report bundle on disk with a checksummed manifest.
//!
//! A bundle directory holds the generated CTF1 file (when the channel was
//! synthesized), one JSON report plus one CDF CSV per ensemble analysis,
//! per-user fingerprint CSVs, and `manifest.json` recording every seed,
//! parameter, and artifact checksum. Everything except the manifest's
//! `metadata` field is a deterministic function of the config and master
//! seed, independent of thread count and output location.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{
    read_channel_file, write_channel_stream, ArrayKind, ChannelTensor, EvalParams, NormState,
    Normalization,
};
use crate::ensemble::{run_capacity_ensemble, run_spread_ensemble};
use crate::error::{Error, Result};
use crate::fingerprint::{build_fingerprint, SageConfig};
use crate::models::{gen_geometric, gen_rayleigh, ArrayGeometry, Mpc, Scenario, ScenarioConfig};
use crate::norm::{normalize1, normalize2};

/// Where the channel under analysis comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSource {
    /// Read an existing CTF1 file.
    File { path: PathBuf },
    /// Generate an i.i.d. Rayleigh tensor.
    Rayleigh {
        users: usize,
        ports: usize,
        subcarriers: usize,
        seed: u64,
    },
    /// Generate a geometric scenario preset.
    Scenario {
        scenario: Scenario,
        users: usize,
        subcarriers: usize,
        seed: u64,
        array: ArrayKind,
    },
}

/// One analysis stage of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Spread,
    Capacity,
    Fingerprint,
}

/// Estimator knobs for the fingerprint stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FingerprintParams {
    pub window_len: usize,
    pub num_mpcs: usize,
    pub energy_fraction: f64,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        Self {
            window_len: 10,
            num_mpcs: 200,
            energy_fraction: 0.9,
        }
    }
}

/// Declarative experiment description; JSON-serializable for `run --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: ChannelSource,
    pub analyses: Vec<Analysis>,
    pub params: EvalParams,
    #[serde(default)]
    pub fingerprint: FingerprintParams,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestMetadata {
    /// Wall-clock creation time (unix seconds). The only
    /// non-deterministic field in a bundle.
    pub created_at: u64,
}

/// Bundle inventory: config echo, artifact checksums, completion state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub complete: bool,
    /// The config that produced the bundle, with `output_dir` normalized to
    /// "." so bundles are location-independent.
    pub config: ExperimentConfig,
    pub artifacts: Vec<ArtifactRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metadata: ManifestMetadata,
}

pub const MANIFEST_NAME: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Generates or loads the channel described by a source, along with the
/// ground-truth component lists when the source is a geometric scenario.
pub fn generate_channel(source: &ChannelSource) -> Result<(ChannelTensor, Option<Vec<Vec<Mpc>>>)> {
    match source {
        ChannelSource::File { path } => Ok((read_channel_file(path)?, None)),
        ChannelSource::Rayleigh {
            users,
            ports,
            subcarriers,
            seed,
        } => Ok((gen_rayleigh(*users, *ports, *subcarriers, *seed)?, None)),
        ChannelSource::Scenario {
            scenario,
            users,
            subcarriers,
            seed,
            array,
        } => {
            let geometry = match array {
                ArrayKind::Ula => ArrayGeometry::default_ula(),
                ArrayKind::Uca => ArrayGeometry::default_uca(),
                ArrayKind::Generic => {
                    return Err(Error::InvalidParam(
                        "scenario generation needs a ULA or UCA array".into(),
                    ))
                }
            };
            let cfg = ScenarioConfig::preset(*scenario, *users, *seed);
            let (tensor, truth) = gen_geometric(&geometry, &cfg, *subcarriers, cfg.seed)?;
            Ok((tensor, Some(truth)))
        }
    }
}

struct BundleWriter {
    dir: PathBuf,
    artifacts: Vec<ArtifactRecord>,
}

impl BundleWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(ArtifactRecord {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn remove_partials(&self) {
        for a in &self.artifacts {
            let _ = fs::remove_file(self.dir.join(&a.name));
        }
    }
}

/// Runs every analysis in the config and writes the report bundle. On any
/// stage failure the partial outputs are removed and a manifest with
/// `complete = false` and the error message is left behind.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Manifest> {
    if config.analyses.is_empty() {
        return Err(Error::InvalidParam(
            "config must request at least one analysis".into(),
        ));
    }
    let mut writer = BundleWriter::new(&config.output_dir)?;
    match run_stages(config, &mut writer) {
        Ok(()) => {
            let manifest = build_manifest(config, writer.artifacts, true, None);
            write_manifest(&config.output_dir, &manifest)?;
            Ok(manifest)
        }
        Err(e) => {
            writer.remove_partials();
            let manifest = build_manifest(config, Vec::new(), false, Some(e.to_string()));
            write_manifest(&config.output_dir, &manifest)?;
            Err(e)
        }
    }
}

fn run_stages(config: &ExperimentConfig, writer: &mut BundleWriter) -> Result<()> {
    let (tensor, truth) =
        generate_channel(&config.source).map_err(|e| e.in_stage("generate"))?;

    // persist generated channels so a bundle is self-contained
    if !matches!(config.source, ChannelSource::File { .. }) {
        let mut bytes = Vec::new();
        write_channel_stream(&tensor, &mut bytes).map_err(|e| e.in_stage("generate"))?;
        writer.emit("channel.ctf", &bytes)?;
    }
    if let Some(truth) = &truth {
        let bytes =
            serde_json::to_vec_pretty(truth).map_err(|e| Error::from(e).in_stage("generate"))?;
        writer.emit("ground_truth.json", &bytes)?;
    }

    for analysis in &config.analyses {
        match analysis {
            Analysis::Spread => {
                let norm1 = match tensor.norm_state() {
                    NormState::Raw => normalize1(&tensor).map_err(|e| e.in_stage("spread"))?,
                    NormState::Norm1 => tensor.clone(),
                    NormState::Norm2 => {
                        return Err(Error::InvalidParam(
                            "spread analysis needs NORM1 but the input is already NORM2".into(),
                        )
                        .in_stage("spread"))
                    }
                };
                let report = run_spread_ensemble(&norm1, &config.params)
                    .map_err(|e| e.in_stage("spread"))?;
                let json = serde_json::to_vec_pretty(&report)
                    .map_err(|e| Error::from(e).in_stage("spread"))?;
                writer.emit("spread_report.json", &json)?;
                let mut csv = Vec::new();
                report
                    .write_cdf_csv(&mut csv)
                    .map_err(|e| e.in_stage("spread"))?;
                writer.emit("spread_cdf.csv", &csv)?;
            }
            Analysis::Capacity => {
                let normalized = match tensor.norm_state() {
                    NormState::Raw => match config.params.normalization {
                        Normalization::Norm1 => {
                            normalize1(&tensor).map_err(|e| e.in_stage("capacity"))?
                        }
                        Normalization::Norm2 => {
                            normalize2(&tensor).map_err(|e| e.in_stage("capacity"))?
                        }
                    },
                    _ => tensor.clone(),
                };
                let report = run_capacity_ensemble(&normalized, &config.params)
                    .map_err(|e| e.in_stage("capacity"))?;
                let json = serde_json::to_vec_pretty(&report)
                    .map_err(|e| Error::from(e).in_stage("capacity"))?;
                writer.emit("capacity_report.json", &json)?;
                let mut csv = Vec::new();
                report
                    .write_cdf_csv(&mut csv)
                    .map_err(|e| e.in_stage("capacity"))?;
                writer.emit("capacity_cdf.csv", &csv)?;
            }
            Analysis::Fingerprint => {
                let sage = SageConfig {
                    window_len: config.fingerprint.window_len,
                    num_mpcs: config.fingerprint.num_mpcs,
                    ..SageConfig::default()
                };
                for user in 0..tensor.users() {
                    let map =
                        build_fingerprint(&tensor, user, &sage, config.fingerprint.energy_fraction)
                            .map_err(|e| e.in_stage("fingerprint"))?;
                    let mut csv = Vec::new();
                    map.write_csv(&mut csv).map_err(|e| e.in_stage("fingerprint"))?;
                    writer.emit(&format!("fingerprint_user{user}.csv"), &csv)?;
                }
            }
        }
    }
    Ok(())
}

fn build_manifest(
    config: &ExperimentConfig,
    artifacts: Vec<ArtifactRecord>,
    complete: bool,
    error: Option<String>,
) -> Manifest {
    let mut echo = config.clone();
    echo.output_dir = PathBuf::from(".");
    let created_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Manifest {
        version: 1,
        complete,
        config: echo,
        artifacts,
        error,
        metadata: ManifestMetadata { created_at },
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(manifest)?;
    fs::write(dir.join(MANIFEST_NAME), bytes)?;
    Ok(())
}

/// Reads a bundle's manifest and recomputes every artifact checksum,
/// confirming the bundle still reproduces what the manifest recorded.
pub fn verify_bundle(dir: &Path) -> Result<Manifest> {
    let bytes = fs::read(dir.join(MANIFEST_NAME))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    if !manifest.complete {
        return Err(Error::InvalidParam(format!(
            "bundle is marked incomplete: {}",
            manifest.error.as_deref().unwrap_or("unknown error")
        )));
    }
    for artifact in &manifest.artifacts {
        let path = dir.join(&artifact.name);
        let data = fs::read(&path)?;
        let actual = sha256_hex(&data);
        if data.len() as u64 != artifact.bytes || actual != artifact.sha256 {
            return Err(Error::ChecksumMismatch {
                path,
                expected: artifact.sha256.clone(),
                actual,
            });
        }
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Normalization;

    fn rayleigh_config(dir: &Path, analyses: Vec<Analysis>, counts: Vec<usize>) -> ExperimentConfig {
        ExperimentConfig {
            source: ChannelSource::Rayleigh {
                users: 2,
                ports: 16,
                subcarriers: 4,
                seed: 7,
            },
            analyses,
            params: EvalParams {
                rho: 10.0,
                num_users: 2,
                antenna_counts: counts,
                num_subsets: 8,
                master_seed: 21,
                normalization: Normalization::Norm2,
            },
            fingerprint: FingerprintParams::default(),
            output_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn bundle_inventory_matches_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = rayleigh_config(
            dir.path(),
            vec![Analysis::Spread, Analysis::Capacity],
            vec![4, 16],
        );
        let manifest = run_experiment(&cfg).unwrap();
        assert!(manifest.complete);
        let names: Vec<&str> = manifest.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "channel.ctf",
                "spread_report.json",
                "spread_cdf.csv",
                "capacity_report.json",
                "capacity_cdf.csv"
            ]
        );
        for a in &manifest.artifacts {
            assert!(dir.path().join(&a.name).exists());
        }
        verify_bundle(dir.path()).unwrap();
    }

    #[test]
    fn oversized_antenna_count_fails_with_subset_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = rayleigh_config(dir.path(), vec![Analysis::Spread], vec![32]);
        let err = run_experiment(&cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("spread"), "{msg}");
        assert!(msg.contains("32"), "{msg}");
        // failed bundles leave an incomplete manifest and no artifacts
        let manifest: Manifest =
            serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
        assert!(!manifest.complete);
        assert!(manifest.error.is_some());
        assert!(manifest.artifacts.is_empty());
        assert!(!dir.path().join("channel.ctf").exists());
        assert!(verify_bundle(dir.path()).is_err());
    }

    #[test]
    fn verify_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = rayleigh_config(dir.path(), vec![Analysis::Spread], vec![4]);
        run_experiment(&cfg).unwrap();
        let target = dir.path().join("spread_cdf.csv");
        let mut data = fs::read(&target).unwrap();
        let last = data.len() - 2;
        data[last] = b'9';
        fs::write(&target, data).unwrap();
        assert!(matches!(
            verify_bundle(dir.path()),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn scenario_source_writes_ground_truth_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            source: ChannelSource::Scenario {
                scenario: Scenario::FarApart,
                users: 2,
                subcarriers: 3,
                seed: 5,
                array: ArrayKind::Ula,
            },
            analyses: vec![Analysis::Spread],
            params: EvalParams {
                rho: 10.0,
                num_users: 2,
                antenna_counts: vec![8],
                num_subsets: 4,
                master_seed: 1,
                normalization: Normalization::Norm1,
            },
            fingerprint: FingerprintParams::default(),
            output_dir: dir.path().to_path_buf(),
        };
        let manifest = run_experiment(&cfg).unwrap();
        assert!(manifest.artifacts.iter().any(|a| a.name == "ground_truth.json"));
        let truth: Vec<Vec<Mpc>> = serde_json::from_slice(
            &fs::read(dir.path().join("ground_truth.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(truth.len(), 2);
        assert!(!truth[0].is_empty());
    }

    #[test]
    fn config_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = rayleigh_config(dir.path(), vec![Analysis::Capacity], vec![4]);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&cfg).unwrap());
    }
}
