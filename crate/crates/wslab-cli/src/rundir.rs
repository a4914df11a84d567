//! Self-describing run directories: the resolved config echo, content
//! hashes of the inputs, and a machine-readable summary. A run exits
//! nonzero when any of its scheduled checks fails, and the summary
//! names the failed check.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::RunConfig;

pub struct RunDir {
    pub dir: PathBuf,
    checks: Vec<(String, bool, String)>,
    inputs: Vec<(String, String)>,
}

impl RunDir {
    pub fn create(dir: &Path, config: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating run directory {}", dir.display()))?;
        for w in &config.warnings {
            log::warn!("{w}");
        }
        std::fs::write(dir.join("config.txt"), config.echo()?)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            checks: Vec::new(),
            inputs: Vec::new(),
        })
    }

    /// Record a content hash of an input file (config, manifest, ...).
    pub fn record_input(&mut self, label: &str, path: &Path) {
        let hash = zoo::files::sha256_file(path).unwrap_or_else(|_| "unreadable".into());
        self.inputs.push((label.to_string(), hash));
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        if passed {
            log::info!("check {name}: ok ({detail})");
        } else {
            log::error!("check {name}: FAILED ({detail})");
        }
        self.checks.push((name.to_string(), passed, detail));
    }

    /// Write `summary.json` and fail if any scheduled check failed.
    pub fn finish(self, extra: serde_json::Value) -> Result<()> {
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|(_, ok, _)| !ok)
            .map(|(name, _, _)| name.as_str())
            .collect();
        let summary = serde_json::json!({
            "checks": self.checks.iter().map(|(name, ok, detail)| {
                serde_json::json!({"name": name, "passed": ok, "detail": detail})
            }).collect::<Vec<_>>(),
            "failed_checks": failed,
            "inputs": self.inputs.iter().map(|(label, hash)| {
                serde_json::json!({"input": label, "sha256": hash})
            }).collect::<Vec<_>>(),
            "results": extra,
        });
        std::fs::write(
            self.dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
        if !failed.is_empty() {
            bail!("failed checks: {}", failed.join(", "));
        }
        Ok(())
    }
}
