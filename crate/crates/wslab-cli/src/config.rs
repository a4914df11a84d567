//! Run configuration: line-oriented `key = value` files with bracketed
//! section headers, flag overrides, and the `WSLAB_SEED` environment
//! override. Unknown keys and malformed values are rejected with their
//! line number; duplicates warn and keep the last value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use encoders::EncoderArch;
use ssl::SslConfig;
use zoo::ZooConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ValueKind {
    U64,
    F64,
    Str,
}

/// Every accepted key with its type. Typos die here.
const REGISTRY: &[(&str, &str, ValueKind)] = &[
    ("run", "seed", ValueKind::U64),
    ("run", "preset", ValueKind::Str),
    ("zoo", "num_models", ValueKind::U64),
    ("zoo", "steps", ValueKind::U64),
    ("zoo", "batch_size", ValueKind::U64),
    ("zoo", "weight_decay", ValueKind::F64),
    ("zoo", "rollouts_per_checkpoint", ValueKind::U64),
    ("zoo", "accuracy_samples", ValueKind::U64),
    ("zoo", "hidden", ValueKind::U64),
    ("zoo", "layers", ValueKind::U64),
    ("zoo", "pool", ValueKind::Str),
    ("ssl", "batch_size", ValueKind::U64),
    ("ssl", "max_steps", ValueKind::U64),
    ("ssl", "eval_interval", ValueKind::U64),
    ("ssl", "val_pairs", ValueKind::U64),
    ("ssl", "lr", ValueKind::F64),
    ("ssl", "weight_decay", ValueKind::F64),
    ("ssl", "clip_norm", ValueKind::F64),
    ("ssl", "em_hidden", ValueKind::U64),
    ("ssl", "em_layers", ValueKind::U64),
    ("encoder", "z_dim", ValueKind::U64),
    ("encoder", "stats_hidden", ValueKind::U64),
    ("encoder", "stats_layers", ValueKind::U64),
    ("encoder", "flat_hidden", ValueKind::U64),
    ("encoder", "flat_layers", ValueKind::U64),
    ("encoder", "tr_width", ValueKind::U64),
    ("encoder", "tr_layers", ValueKind::U64),
    ("encoder", "tr_heads", ValueKind::U64),
    ("encoder", "tr_ff", ValueKind::U64),
    ("encoder", "dws_channels", ValueKind::U64),
    ("encoder", "dws_layers", ValueKind::U64),
    ("encoder", "dws_head_hidden", ValueKind::U64),
    ("encoder", "probe_len", ValueKind::U64),
    ("encoder", "probe_parallel", ValueKind::U64),
    ("encoder", "probe_s_dim", ValueKind::U64),
    ("encoder", "probe_io_hidden", ValueKind::U64),
    ("encoder", "probe_o_dim", ValueKind::U64),
    ("encoder", "er_hidden", ValueKind::U64),
    ("encoder", "er_layers", ValueKind::U64),
    ("downstream", "steps", ValueKind::U64),
    ("downstream", "batch_size", ValueKind::U64),
    ("downstream", "lr", ValueKind::F64),
    ("downstream", "weight_decay", ValueKind::F64),
    ("downstream", "hidden", ValueKind::U64),
    ("downstream", "hidden_layers", ValueKind::U64),
    ("eval", "num_levels", ValueKind::U64),
    ("eval", "per_level", ValueKind::U64),
    ("eval", "samples_per_model", ValueKind::U64),
];

fn lookup(section: &str, key: &str) -> Option<ValueKind> {
    REGISTRY
        .iter()
        .find(|(s, k, _)| *s == section && *k == key)
        .map(|(_, _, kind)| *kind)
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    values: BTreeMap<(String, String), String>,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut warnings = Vec::new();

        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let mut section = String::from("run");
            for (idx, raw) in text.lines().enumerate() {
                let line_no = idx + 1;
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                    continue;
                }
                if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                    section = name.trim().to_string();
                    continue;
                }
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| anyhow!("line {line_no}: expected `key = value`"))?;
                insert(
                    &mut values,
                    &mut warnings,
                    &section,
                    key.trim(),
                    value.trim(),
                    &format!("line {line_no}"),
                )?;
            }
        }

        for (i, entry) in overrides.iter().enumerate() {
            let label = format!("override {}", i + 1);
            let (path, value) = entry
                .split_once('=')
                .ok_or_else(|| anyhow!("{label}: expected `section.key=value`"))?;
            let (section, key) = path
                .trim()
                .split_once('.')
                .ok_or_else(|| anyhow!("{label}: expected `section.key=value`"))?;
            insert(&mut values, &mut warnings, section, key, value.trim(), &label)?;
        }

        if let Ok(env_seed) = std::env::var("WSLAB_SEED") {
            let seed: u64 = env_seed
                .parse()
                .map_err(|_| anyhow!("WSLAB_SEED must be an unsigned integer"))?;
            values.insert(("run".into(), "seed".into()), seed.to_string());
        }

        Ok(Self { values, warnings })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_string(), key.to_string()))
            .map(|s| s.as_str())
    }

    fn get_u64(&self, section: &str, key: &str, default: u64) -> u64 {
        self.get(section, key)
            .map(|v| v.parse().expect("validated at parse time"))
            .unwrap_or(default)
    }

    fn get_f64(&self, section: &str, key: &str, default: f64) -> f64 {
        self.get(section, key)
            .map(|v| v.parse().expect("validated at parse time"))
            .unwrap_or(default)
    }

    pub fn seed(&self) -> u64 {
        self.get_u64("run", "seed", 7)
    }

    pub fn preset(&self) -> Result<Preset> {
        match self.get("run", "preset").unwrap_or("desk") {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => bail!("unknown preset `{other}` (expected desk or paper)"),
        }
    }

    pub fn zoo_config(&self) -> Result<ZooConfig> {
        let mut c = match self.preset()? {
            Preset::Desk => ZooConfig::desk(self.seed()),
            Preset::Paper => ZooConfig::paper(self.seed()),
        };
        c.num_models = self.get_u64("zoo", "num_models", c.num_models as u64) as usize;
        let steps = self.get_u64("zoo", "steps", c.steps);
        if steps != c.steps {
            // Rescale the schedule and checkpoint list proportionally.
            let scale = steps as f64 / c.steps as f64;
            c.lr_knots = c
                .lr_knots
                .iter()
                .map(|(s, v)| ((*s as f64 * scale).round() as u64, *v))
                .collect();
            c.checkpoint_steps = c
                .checkpoint_steps
                .iter()
                .map(|s| (*s as f64 * scale).round() as u64)
                .collect();
            c.checkpoint_steps.dedup();
            c.steps = steps;
            if let Some(last) = c.checkpoint_steps.last_mut() {
                *last = steps;
            }
        }
        c.batch_size = self.get_u64("zoo", "batch_size", c.batch_size as u64) as usize;
        c.weight_decay = self.get_f64("zoo", "weight_decay", c.weight_decay);
        c.rollouts_per_checkpoint =
            self.get_u64("zoo", "rollouts_per_checkpoint", c.rollouts_per_checkpoint as u64)
                as usize;
        c.accuracy_samples =
            self.get_u64("zoo", "accuracy_samples", c.accuracy_samples as u64) as usize;
        c.hidden = self.get_u64("zoo", "hidden", c.hidden as u64) as usize;
        c.layers = self.get_u64("zoo", "layers", c.layers as u64) as usize;
        match self.get("zoo", "pool") {
            Some("full") => c.language_pool = None,
            Some("desk12") => c.language_pool = Some(zoo::desk_language_pool()),
            Some(other) => bail!("unknown zoo pool `{other}` (expected desk12 or full)"),
            None => {}
        }
        c.validate().map_err(|e| anyhow!(e))?;
        Ok(c)
    }

    pub fn ssl_config(&self) -> Result<SslConfig> {
        let mut c = match self.preset()? {
            Preset::Desk => SslConfig::desk(self.seed()),
            Preset::Paper => SslConfig::paper(self.seed()),
        };
        c.batch_size = self.get_u64("ssl", "batch_size", c.batch_size as u64) as usize;
        c.max_steps = self.get_u64("ssl", "max_steps", c.max_steps);
        c.eval_interval = self.get_u64("ssl", "eval_interval", c.eval_interval).max(1);
        c.val_pairs = self.get_u64("ssl", "val_pairs", c.val_pairs as u64) as usize;
        c.lr = self.get_f64("ssl", "lr", c.lr);
        c.weight_decay = self.get_f64("ssl", "weight_decay", c.weight_decay);
        c.clip_norm = self.get_f64("ssl", "clip_norm", c.clip_norm);
        c.em_hidden = self.get_u64("ssl", "em_hidden", c.em_hidden as u64) as usize;
        c.em_layers = self.get_u64("ssl", "em_layers", c.em_layers as u64) as usize;
        Ok(c)
    }

    pub fn encoder_arch(&self) -> Result<EncoderArch> {
        let mut a = match self.preset()? {
            Preset::Desk => EncoderArch::desk(),
            Preset::Paper => EncoderArch::paper(),
        };
        let mut set = |field: &mut usize, key: &str| {
            *field = self.get_u64("encoder", key, *field as u64) as usize;
        };
        set(&mut a.z_dim, "z_dim");
        set(&mut a.stats_hidden, "stats_hidden");
        set(&mut a.stats_layers, "stats_layers");
        set(&mut a.flat_hidden, "flat_hidden");
        set(&mut a.flat_layers, "flat_layers");
        set(&mut a.tr_width, "tr_width");
        set(&mut a.tr_layers, "tr_layers");
        set(&mut a.tr_heads, "tr_heads");
        set(&mut a.tr_ff, "tr_ff");
        set(&mut a.dws_channels, "dws_channels");
        set(&mut a.dws_layers, "dws_layers");
        set(&mut a.dws_head_hidden, "dws_head_hidden");
        set(&mut a.probe_len, "probe_len");
        set(&mut a.probe_parallel, "probe_parallel");
        set(&mut a.probe_s_dim, "probe_s_dim");
        set(&mut a.probe_io_hidden, "probe_io_hidden");
        set(&mut a.probe_o_dim, "probe_o_dim");
        set(&mut a.er_hidden, "er_hidden");
        set(&mut a.er_layers, "er_layers");
        Ok(a)
    }

    pub fn predictor_config(&self) -> Result<downstream::PredictorConfig> {
        let mut c = downstream::PredictorConfig {
            seed: self.seed(),
            ..Default::default()
        };
        c.steps = self.get_u64("downstream", "steps", c.steps);
        c.batch_size = self.get_u64("downstream", "batch_size", c.batch_size as u64) as usize;
        c.lr = self.get_f64("downstream", "lr", c.lr);
        c.weight_decay = self.get_f64("downstream", "weight_decay", c.weight_decay);
        c.hidden = self.get_u64("downstream", "hidden", c.hidden as u64) as usize;
        c.hidden_layers = self.get_u64("downstream", "hidden_layers", c.hidden_layers as u64) as usize;
        Ok(c)
    }

    /// `(num_levels, per_level, samples_per_model)` for emulation eval.
    pub fn eval_params(&self) -> (usize, usize, usize) {
        (
            self.get_u64("eval", "num_levels", 16) as usize,
            self.get_u64("eval", "per_level", 15) as usize,
            self.get_u64("eval", "samples_per_model", 32) as usize,
        )
    }

    /// Fully resolved configuration, echoed into every run directory.
    pub fn echo(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "[run]").ok();
        writeln!(out, "seed = {}", self.seed()).ok();
        writeln!(
            out,
            "preset = {}",
            match self.preset()? {
                Preset::Desk => "desk",
                Preset::Paper => "paper",
            }
        )
        .ok();

        let zoo = self.zoo_config()?;
        writeln!(out, "\n[zoo]").ok();
        writeln!(out, "num_models = {}", zoo.num_models).ok();
        writeln!(out, "steps = {}", zoo.steps).ok();
        writeln!(out, "batch_size = {}", zoo.batch_size).ok();
        writeln!(out, "weight_decay = {}", zoo.weight_decay).ok();
        writeln!(out, "lr_knots = {:?}", zoo.lr_knots).ok();
        writeln!(out, "checkpoint_steps = {:?}", zoo.checkpoint_steps).ok();
        writeln!(out, "rollouts_per_checkpoint = {}", zoo.rollouts_per_checkpoint).ok();
        writeln!(out, "accuracy_samples = {}", zoo.accuracy_samples).ok();
        writeln!(out, "hidden = {}", zoo.hidden).ok();
        writeln!(out, "layers = {}", zoo.layers).ok();
        writeln!(
            out,
            "pool = {}",
            match &zoo.language_pool {
                None => "full".to_string(),
                Some(p) => format!("{} languages", p.len()),
            }
        )
        .ok();

        let ssl = self.ssl_config()?;
        writeln!(out, "\n[ssl]").ok();
        writeln!(out, "batch_size = {}", ssl.batch_size).ok();
        writeln!(out, "max_steps = {}", ssl.max_steps).ok();
        writeln!(out, "eval_interval = {}", ssl.eval_interval).ok();
        writeln!(out, "val_pairs = {}", ssl.val_pairs).ok();
        writeln!(out, "lr = {}", ssl.lr).ok();
        writeln!(out, "weight_decay = {}", ssl.weight_decay).ok();
        writeln!(out, "clip_norm = {}", ssl.clip_norm).ok();
        writeln!(out, "em_hidden = {}", ssl.em_hidden).ok();
        writeln!(out, "em_layers = {}", ssl.em_layers).ok();

        let arch = self.encoder_arch()?;
        writeln!(out, "\n[encoder]").ok();
        writeln!(out, "z_dim = {}", arch.z_dim).ok();
        writeln!(out, "stats_hidden = {}", arch.stats_hidden).ok();
        writeln!(out, "stats_layers = {}", arch.stats_layers).ok();
        writeln!(out, "flat_hidden = {}", arch.flat_hidden).ok();
        writeln!(out, "flat_layers = {}", arch.flat_layers).ok();
        writeln!(out, "tr_width = {}", arch.tr_width).ok();
        writeln!(out, "tr_layers = {}", arch.tr_layers).ok();
        writeln!(out, "tr_heads = {}", arch.tr_heads).ok();
        writeln!(out, "tr_ff = {}", arch.tr_ff).ok();
        writeln!(out, "dws_channels = {}", arch.dws_channels).ok();
        writeln!(out, "dws_layers = {}", arch.dws_layers).ok();
        writeln!(out, "dws_head_hidden = {}", arch.dws_head_hidden).ok();
        writeln!(out, "probe_len = {}", arch.probe_len).ok();
        writeln!(out, "probe_parallel = {}", arch.probe_parallel).ok();
        writeln!(out, "probe_s_dim = {}", arch.probe_s_dim).ok();
        writeln!(out, "probe_io_hidden = {}", arch.probe_io_hidden).ok();
        writeln!(out, "probe_o_dim = {}", arch.probe_o_dim).ok();
        writeln!(out, "er_hidden = {}", arch.er_hidden).ok();
        writeln!(out, "er_layers = {}", arch.er_layers).ok();

        let pred = self.predictor_config()?;
        writeln!(out, "\n[downstream]").ok();
        writeln!(out, "steps = {}", pred.steps).ok();
        writeln!(out, "batch_size = {}", pred.batch_size).ok();
        writeln!(out, "lr = {}", pred.lr).ok();
        writeln!(out, "weight_decay = {}", pred.weight_decay).ok();
        writeln!(out, "hidden = {}", pred.hidden).ok();
        writeln!(out, "hidden_layers = {}", pred.hidden_layers).ok();

        let (levels, per_level, samples) = self.eval_params();
        writeln!(out, "\n[eval]").ok();
        writeln!(out, "num_levels = {levels}").ok();
        writeln!(out, "per_level = {per_level}").ok();
        writeln!(out, "samples_per_model = {samples}").ok();
        Ok(out)
    }
}

fn insert(
    values: &mut BTreeMap<(String, String), String>,
    warnings: &mut Vec<String>,
    section: &str,
    key: &str,
    value: &str,
    label: &str,
) -> Result<()> {
    let kind = lookup(section, key)
        .ok_or_else(|| anyhow!("{label}: unknown key `{section}.{key}`"))?;
    match kind {
        ValueKind::U64 => {
            value
                .parse::<u64>()
                .map_err(|_| anyhow!("{label}: `{section}.{key}` needs an unsigned integer, got `{value}`"))?;
        }
        ValueKind::F64 => {
            value
                .parse::<f64>()
                .map_err(|_| anyhow!("{label}: `{section}.{key}` needs a number, got `{value}`"))?;
        }
        ValueKind::Str => {}
    }
    if values
        .insert((section.to_string(), key.to_string()), value.to_string())
        .is_some()
    {
        warnings.push(format!("{label}: duplicate key `{section}.{key}` (last value wins)"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_gives_desk_defaults() {
        let f = write_config("");
        let c = RunConfig::load(Some(f.path()), &[]).unwrap();
        assert_eq!(c.preset().unwrap(), Preset::Desk);
        let zoo = c.zoo_config().unwrap();
        assert_eq!(zoo.num_models, 64);
        assert_eq!(zoo.steps, 2000);
    }

    #[test]
    fn override_is_visible_in_echo() {
        let c = RunConfig::load(None, &["ssl.lr=0.0001".into()]).unwrap();
        assert!((c.ssl_config().unwrap().lr - 1e-4).abs() < 1e-12);
        assert!(c.echo().unwrap().contains("lr = 0.0001"));
    }

    #[test]
    fn duplicate_key_warns_and_last_wins() {
        let f = write_config("[zoo]\nnum_models = 4\nnum_models = 9\n");
        let c = RunConfig::load(Some(f.path()), &[]).unwrap();
        assert_eq!(c.zoo_config().unwrap().num_models, 9);
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains("duplicate"));
    }

    #[test]
    fn unknown_key_rejected_with_line_number() {
        let f = write_config("[zoo]\nnum_modles = 4\n");
        let err = RunConfig::load(Some(f.path()), &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn malformed_value_rejected_with_line_number() {
        let f = write_config("[ssl]\nlr = fast\n");
        let err = RunConfig::load(Some(f.path()), &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
