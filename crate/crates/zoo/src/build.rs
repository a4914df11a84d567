//! Zoo assembly: draw tasks, train models in parallel, persist
//! checkpoints and rollouts, and maintain the manifest. Builds are
//! idempotent per model id; a partial build resumes from the manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use formal_lang::{DatasetLanguageSpec, LanguageSpec, Rollout};
use numkit::container;
use numkit::RngStream;
use rayon::prelude::*;
use rnn_core::{LstmDims, LstmWeights};
use serde::{Deserialize, Serialize};

use crate::config::ZooConfig;
use crate::files::{read_rollouts, sha256_file, write_rollouts};
use crate::split::{assign_split, Split};
use crate::train::{train_model, ZooError};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: u64,
    pub accuracy: f64,
    pub weights: String,
    pub weights_sha256: String,
    pub rollouts: String,
    pub rollouts_sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZooRecord {
    pub model_id: usize,
    pub task: DatasetLanguageSpec,
    pub split: Split,
    pub checkpoints: Vec<CheckpointMeta>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZooManifest {
    pub config: ZooConfig,
    pub records: Vec<ZooRecord>,
}

fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

fn write_manifest(dir: &Path, manifest: &ZooManifest) -> Result<(), ZooError> {
    let tmp = dir.join("manifest.json.tmp");
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| ZooError::Manifest(e.to_string()))?;
    fs::write(&tmp, json)?;
    fs::rename(&tmp, manifest_path(dir))?;
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<Option<ZooManifest>, ZooError> {
    let path = manifest_path(dir);
    if !path.exists() {
        return Ok(None);
    }
    let data = fs::read_to_string(&path)?;
    let manifest =
        serde_json::from_str(&data).map_err(|e| ZooError::Manifest(e.to_string()))?;
    Ok(Some(manifest))
}

/// A record is reusable when all its files exist with matching hashes.
fn record_intact(dir: &Path, record: &ZooRecord) -> bool {
    record.checkpoints.iter().all(|c| {
        let ok = |rel: &str, want: &str| {
            let p = dir.join(rel);
            p.exists() && sha256_file(&p).map(|h| h == want).unwrap_or(false)
        };
        ok(&c.weights, &c.weights_sha256) && ok(&c.rollouts, &c.rollouts_sha256)
    })
}

/// Task of model `i`: uniform with replacement from the pool, as a pure
/// function of (seed, i).
pub fn task_for_model(config: &ZooConfig, model_id: usize) -> DatasetLanguageSpec {
    let pool = config.pool();
    let mut rng = RngStream::from_seed(config.seed).child(0xA5).child(model_id as u64);
    pool[rng.index(pool.len())]
}

fn train_and_persist(
    dir: &Path,
    config: &ZooConfig,
    model_id: usize,
) -> Result<ZooRecord, ZooError> {
    let task = task_for_model(config, model_id);
    let rng = RngStream::from_seed(config.seed).child(0x7E).child(model_id as u64);
    let checkpoints = train_model(&task, config, &rng)?;

    let mut metas = Vec::with_capacity(checkpoints.len());
    for ckpt in checkpoints {
        let weights_rel = format!("weights/model_{model_id}_step{}.rnz", ckpt.step);
        let rollouts_rel = format!("rollouts/model_{model_id}_step{}.rol", ckpt.step);
        let weights_path = dir.join(&weights_rel);
        let rollouts_path = dir.join(&rollouts_rel);

        let named: Vec<(String, numkit::Tensor<f32>)> = ckpt
            .weights
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        let named_refs: Vec<(String, &numkit::Tensor<f32>)> =
            named.iter().map(|(n, t)| (n.clone(), t)).collect();
        let meta = serde_json::json!({
            "model_id": model_id,
            "step": ckpt.step,
            "task": task.offsets(),
            "accuracy": ckpt.accuracy,
            "dims": {
                "layers": ckpt.weights.dims.layers,
                "hidden": ckpt.weights.dims.hidden,
                "input": ckpt.weights.dims.input,
                "output": ckpt.weights.dims.output,
            },
        });
        container::write_container(&weights_path, &named_refs, &meta)?;
        write_rollouts(&rollouts_path, task.alphabet().size(), &ckpt.rollouts)?;

        metas.push(CheckpointMeta {
            step: ckpt.step,
            accuracy: ckpt.accuracy,
            weights_sha256: sha256_file(&weights_path)?,
            weights: weights_rel,
            rollouts_sha256: sha256_file(&rollouts_path)?,
            rollouts: rollouts_rel,
        });
    }

    Ok(ZooRecord {
        model_id,
        task,
        split: assign_split(&task),
        checkpoints: metas,
    })
}

/// Build (or resume) a zoo under `dir` using up to `workers` threads.
pub fn build_zoo(config: &ZooConfig, dir: &Path, workers: usize) -> Result<ZooManifest, ZooError> {
    config.validate().map_err(ZooError::Manifest)?;
    fs::create_dir_all(dir.join("weights"))?;
    fs::create_dir_all(dir.join("rollouts"))?;

    let mut existing: Vec<ZooRecord> = match read_manifest(dir)? {
        Some(m) if m.config == *config => m
            .records
            .into_iter()
            .filter(|r| r.model_id < config.num_models && record_intact(dir, r))
            .collect(),
        _ => Vec::new(),
    };
    existing.sort_by_key(|r| r.model_id);
    let done: Vec<usize> = existing.iter().map(|r| r.model_id).collect();
    let todo: Vec<usize> = (0..config.num_models)
        .filter(|id| !done.contains(id))
        .collect();

    let collected = Mutex::new(existing);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ZooError::Manifest(e.to_string()))?;

    let progress = Mutex::new(());
    pool.install(|| {
        todo.par_iter()
            .map(|&model_id| {
                let record = train_and_persist(dir, config, model_id)?;
                let mut guard = collected.lock().unwrap();
                guard.push(record);
                // Serialize incremental manifest writes through one writer.
                let mut sorted = guard.clone();
                sorted.sort_by_key(|r| r.model_id);
                let _io = progress.lock().unwrap();
                write_manifest(
                    dir,
                    &ZooManifest {
                        config: config.clone(),
                        records: sorted,
                    },
                )
            })
            .collect::<Result<Vec<()>, ZooError>>()
    })?;

    let mut records = collected.into_inner().unwrap();
    records.sort_by_key(|r| r.model_id);
    let manifest = ZooManifest {
        config: config.clone(),
        records,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Zoo handle with checksum-verified lazy loading.
pub struct LoadedZoo {
    pub dir: PathBuf,
    pub manifest: ZooManifest,
}

pub fn load_zoo(dir: &Path) -> Result<LoadedZoo, ZooError> {
    let manifest = read_manifest(dir)?
        .ok_or_else(|| ZooError::Manifest(format!("no manifest in {}", dir.display())))?;
    Ok(LoadedZoo {
        dir: dir.to_path_buf(),
        manifest,
    })
}

impl LoadedZoo {
    pub fn records(&self) -> &[ZooRecord] {
        &self.manifest.records
    }

    pub fn load_weights(&self, meta: &CheckpointMeta) -> Result<LstmWeights<f32>, ZooError> {
        let path = self.dir.join(&meta.weights);
        if sha256_file(&path)? != meta.weights_sha256 {
            return Err(ZooError::ChecksumMismatch {
                path: meta.weights.clone(),
            });
        }
        let (tensors, meta_json) = container::read_container(&path)?;
        let dims = &meta_json["dims"];
        let dims = LstmDims::new(
            dims["layers"].as_u64().unwrap_or(0) as usize,
            dims["hidden"].as_u64().unwrap_or(0) as usize,
            dims["input"].as_u64().unwrap_or(0) as usize,
            dims["output"].as_u64().unwrap_or(0) as usize,
        );
        Ok(LstmWeights::from_named(dims, &tensors)?)
    }

    pub fn load_rollouts(&self, meta: &CheckpointMeta) -> Result<Vec<Rollout>, ZooError> {
        let path = self.dir.join(&meta.rollouts);
        if sha256_file(&path)? != meta.rollouts_sha256 {
            return Err(ZooError::ChecksumMismatch {
                path: meta.rollouts.clone(),
            });
        }
        let (_, rollouts) = read_rollouts(&path)?;
        Ok(rollouts)
    }
}
