//! The six RNN-weight encoders: layer-wise statistics, flattened
//! weights, parameter transformer, the permutation-equivariant
//! weight-space network, and the two probing encoders (non-interactive
//! and interactive). Each maps a subject's weights to a fixed-size
//! representation vector.

pub mod dws;
pub mod flat;
pub mod mlp;
pub mod params;
pub mod probing;
pub mod stats;
pub mod transformer;

use std::path::Path;

use numkit::{NumError, Real, RngStream, Tape, TensorId};
use rnn_core::{LstmDims, LstmWeights};

pub use dws::{dws_layer, lift_subject, permute_positions, DwsFeatureMap};
pub use params::{ParamIds, ParamSet};
pub use probing::ProbeTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    Stats,
    Flat,
    Transformer,
    Dws,
    Probe,
    IProbe,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 6] = [
        EncoderKind::Stats,
        EncoderKind::Flat,
        EncoderKind::Transformer,
        EncoderKind::Dws,
        EncoderKind::Probe,
        EncoderKind::IProbe,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            EncoderKind::Stats => "stats",
            EncoderKind::Flat => "flat",
            EncoderKind::Transformer => "transformer",
            EncoderKind::Dws => "dws",
            EncoderKind::Probe => "probe",
            EncoderKind::IProbe => "iprobe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == s)
    }

    /// Mechanistic encoders read weight values; functionalist ones only
    /// drive the subject through inputs.
    pub fn is_functionalist(&self) -> bool {
        matches!(self, EncoderKind::Probe | EncoderKind::IProbe)
    }

    /// Non-invariant encoders train with random complete-permutation
    /// augmentation.
    pub fn wants_permutation_augmentation(&self) -> bool {
        matches!(self, EncoderKind::Flat | EncoderKind::Transformer)
    }
}

/// Architecture knobs for every encoder family.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderArch {
    pub z_dim: usize,
    pub stats_hidden: usize,
    pub stats_layers: usize,
    pub flat_hidden: usize,
    pub flat_layers: usize,
    pub tr_width: usize,
    pub tr_layers: usize,
    pub tr_heads: usize,
    pub tr_ff: usize,
    pub dws_channels: usize,
    pub dws_layers: usize,
    pub dws_head_hidden: usize,
    pub probe_len: usize,
    pub probe_parallel: usize,
    pub probe_s_dim: usize,
    pub probe_io_hidden: usize,
    pub probe_o_dim: usize,
    pub er_hidden: usize,
    pub er_layers: usize,
}

impl EncoderArch {
    pub fn desk() -> Self {
        Self {
            z_dim: 16,
            stats_hidden: 128,
            stats_layers: 3,
            flat_hidden: 128,
            flat_layers: 3,
            tr_width: 64,
            tr_layers: 2,
            tr_heads: 2,
            tr_ff: 128,
            dws_channels: 48,
            dws_layers: 4,
            dws_head_hidden: 64,
            probe_len: 22,
            probe_parallel: 8,
            probe_s_dim: 16,
            probe_io_hidden: 64,
            probe_o_dim: 32,
            er_hidden: 64,
            er_layers: 2,
        }
    }

    pub fn paper() -> Self {
        Self {
            z_dim: 16,
            stats_hidden: 768,
            stats_layers: 3,
            flat_hidden: 128,
            flat_layers: 3,
            tr_width: 128,
            tr_layers: 6,
            tr_heads: 2,
            tr_ff: 512,
            dws_channels: 48,
            dws_layers: 4,
            dws_head_hidden: 128,
            probe_len: 22,
            probe_parallel: 8,
            probe_s_dim: 32,
            probe_io_hidden: 128,
            probe_o_dim: 64,
            er_hidden: 256,
            er_layers: 2,
        }
    }

    /// Tiny instantiation for finite-difference verification.
    pub fn tiny() -> Self {
        Self {
            z_dim: 4,
            stats_hidden: 8,
            stats_layers: 2,
            flat_hidden: 8,
            flat_layers: 2,
            tr_width: 8,
            tr_layers: 1,
            tr_heads: 2,
            tr_ff: 8,
            dws_channels: 6,
            dws_layers: 2,
            dws_head_hidden: 8,
            probe_len: 3,
            probe_parallel: 2,
            probe_s_dim: 4,
            probe_io_hidden: 6,
            probe_o_dim: 5,
            er_hidden: 6,
            er_layers: 2,
        }
    }
}

/// An encoder: a kind, the subject dims it expects, architecture knobs,
/// and its learnable parameters.
pub struct Encoder<T: Real> {
    pub kind: EncoderKind,
    pub dims: LstmDims,
    pub arch: EncoderArch,
    pub params: ParamSet<T>,
}

impl<T: Real> Encoder<T> {
    pub fn new(kind: EncoderKind, dims: LstmDims, arch: &EncoderArch, rng: &mut RngStream) -> Self {
        let mut params = ParamSet::new();
        match kind {
            EncoderKind::Stats => stats::init(dims, arch, &mut params, rng),
            EncoderKind::Flat => flat::init(dims, arch, &mut params, rng),
            EncoderKind::Transformer => transformer::init(dims, arch, &mut params, rng),
            EncoderKind::Dws => dws::init(dims, arch, &mut params, rng),
            EncoderKind::Probe => probing::init(dims, arch, &mut params, rng, false),
            EncoderKind::IProbe => probing::init(dims, arch, &mut params, rng, true),
        }
        Self {
            kind,
            dims,
            arch: arch.clone(),
            params,
        }
    }

    /// Build the `[1, Z]` representation node for one subject. Subject
    /// weights enter the tape as constants; gradients flow only to the
    /// encoder parameters (and through the subject for probing kinds).
    pub fn encode_on_tape(
        &self,
        tape: &mut Tape<T>,
        ids: &ParamIds,
        subject: &LstmWeights<T>,
    ) -> Result<TensorId, NumError> {
        match self.kind {
            EncoderKind::Stats => stats::encode(tape, ids, subject, &self.arch),
            EncoderKind::Flat => flat::encode(tape, ids, subject, &self.arch),
            EncoderKind::Transformer => transformer::encode(tape, ids, subject, &self.arch),
            EncoderKind::Dws => dws::encode(tape, ids, subject, &self.arch),
            EncoderKind::Probe => {
                probing::encode(tape, ids, subject, &self.arch, false).map(|(z, _)| z)
            }
            EncoderKind::IProbe => {
                probing::encode(tape, ids, subject, &self.arch, true).map(|(z, _)| z)
            }
        }
    }

    /// Convenience: run on a fresh tape and return the plain vector.
    pub fn encode(&self, subject: &LstmWeights<T>) -> Result<Vec<T>, NumError> {
        let mut tape = Tape::new();
        let ids = self.params.load_on_tape(&mut tape, false);
        let z = self.encode_on_tape(&mut tape, &ids, subject)?;
        Ok(tape.value(z).data().to_vec())
    }

    /// Probing kinds only: encode and capture the probing inputs fed to
    /// the subject at each step.
    pub fn encode_traced(
        &self,
        subject: &LstmWeights<T>,
    ) -> Result<(Vec<T>, ProbeTrace<T>), NumError> {
        assert!(self.kind.is_functionalist(), "trace is a probing concept");
        let mut tape = Tape::new();
        let ids = self.params.load_on_tape(&mut tape, false);
        let interactive = self.kind == EncoderKind::IProbe;
        let (z, trace) = probing::encode(&mut tape, &ids, subject, &self.arch, interactive)?;
        Ok((tape.value(z).data().to_vec(), trace.resolve(&tape)))
    }
}

impl Encoder<f32> {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let meta = serde_json::json!({
            "kind": self.kind.label(),
            "z_dim": self.arch.z_dim,
            "dims": {
                "layers": self.dims.layers,
                "hidden": self.dims.hidden,
                "input": self.dims.input,
                "output": self.dims.output,
            },
            "arch": arch_json(&self.arch),
        });
        self.params.save(path, &meta)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let (params, meta) = ParamSet::load(path)?;
        let kind = meta["kind"]
            .as_str()
            .and_then(EncoderKind::parse)
            .ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, "unknown encoder kind")
            })?;
        let d = &meta["dims"];
        let dims = LstmDims::new(
            d["layers"].as_u64().unwrap_or(0) as usize,
            d["hidden"].as_u64().unwrap_or(0) as usize,
            d["input"].as_u64().unwrap_or(0) as usize,
            d["output"].as_u64().unwrap_or(0) as usize,
        );
        let arch = arch_from_json(&meta["arch"]).ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, "bad arch metadata")
        })?;
        Ok(Self {
            kind,
            dims,
            arch,
            params,
        })
    }
}

fn arch_json(a: &EncoderArch) -> serde_json::Value {
    serde_json::json!({
        "z_dim": a.z_dim,
        "stats_hidden": a.stats_hidden, "stats_layers": a.stats_layers,
        "flat_hidden": a.flat_hidden, "flat_layers": a.flat_layers,
        "tr_width": a.tr_width, "tr_layers": a.tr_layers,
        "tr_heads": a.tr_heads, "tr_ff": a.tr_ff,
        "dws_channels": a.dws_channels, "dws_layers": a.dws_layers,
        "dws_head_hidden": a.dws_head_hidden,
        "probe_len": a.probe_len, "probe_parallel": a.probe_parallel,
        "probe_s_dim": a.probe_s_dim, "probe_io_hidden": a.probe_io_hidden,
        "probe_o_dim": a.probe_o_dim,
        "er_hidden": a.er_hidden, "er_layers": a.er_layers,
    })
}

fn arch_from_json(v: &serde_json::Value) -> Option<EncoderArch> {
    let g = |k: &str| v[k].as_u64().map(|x| x as usize);
    Some(EncoderArch {
        z_dim: g("z_dim")?,
        stats_hidden: g("stats_hidden")?,
        stats_layers: g("stats_layers")?,
        flat_hidden: g("flat_hidden")?,
        flat_layers: g("flat_layers")?,
        tr_width: g("tr_width")?,
        tr_layers: g("tr_layers")?,
        tr_heads: g("tr_heads")?,
        tr_ff: g("tr_ff")?,
        dws_channels: g("dws_channels")?,
        dws_layers: g("dws_layers")?,
        dws_head_hidden: g("dws_head_hidden")?,
        probe_len: g("probe_len")?,
        probe_parallel: g("probe_parallel")?,
        probe_s_dim: g("probe_s_dim")?,
        probe_io_hidden: g("probe_io_hidden")?,
        probe_o_dim: g("probe_o_dim")?,
        er_hidden: g("er_hidden")?,
        er_layers: g("er_layers")?,
    })
}

/// Stack a batch of `[1, W]` rows into one `[B, W]` node.
pub(crate) fn vstack<T: Real>(
    tape: &mut Tape<T>,
    rows: &[TensorId],
) -> Result<TensorId, NumError> {
    assert!(!rows.is_empty());
    if rows.len() == 1 {
        return Ok(rows[0]);
    }
    let cols: Vec<TensorId> = rows
        .iter()
        .map(|&r| tape.transpose(r))
        .collect::<Result<_, _>>()?;
    let wide = tape.concat_last_dim(&cols)?;
    tape.transpose(wide)
}

/// Flatten a `[R, C]` node into `[1, R*C]` row-major.
pub(crate) fn flatten_rows<T: Real>(
    tape: &mut Tape<T>,
    x: TensorId,
) -> Result<TensorId, NumError> {
    let rows = tape.value(x).shape()[0];
    if rows == 1 {
        return Ok(x);
    }
    let xt = tape.transpose(x)?;
    let parts: Vec<TensorId> = (0..rows)
        .map(|r| {
            let col = tape.slice_last_dim(xt, r, 1)?;
            tape.transpose(col)
        })
        .collect::<Result<_, _>>()?;
    tape.concat_last_dim(&parts)
}
