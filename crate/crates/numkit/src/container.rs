//! Binary tensor container: magic `RNZ1`, a version word, a JSON header
//! describing named tensors (name, dtype, shape, byte offset), then the
//! raw little-endian `f32` payloads. Language-neutral and bit-exact.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"RNZ1";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dtype: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    tensors: Vec<TensorEntry>,
    #[serde(default)]
    meta: serde_json::Value,
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn write_container(
    path: &Path,
    tensors: &[(String, &Tensor<f32>)],
    meta: &serde_json::Value,
) -> io::Result<()> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, t) in tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            dtype: "f32".into(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += (t.len() * 4) as u64;
    }
    let header = serde_json::to_vec(&Header {
        tensors: entries,
        meta: meta.clone(),
    })?;

    let mut f = io::BufWriter::new(File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&VERSION.to_le_bytes())?;
    f.write_all(&(header.len() as u64).to_le_bytes())?;
    f.write_all(&header)?;
    for (_, t) in tensors {
        for v in t.data() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()
}

pub fn read_container(path: &Path) -> io::Result<(Vec<(String, Tensor<f32>)>, serde_json::Value)> {
    let mut f = io::BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid(format!("bad magic {magic:?} in {}", path.display())));
    }
    let mut word = [0u8; 4];
    f.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(invalid(format!("unsupported container version {version}")));
    }
    let mut len = [0u8; 8];
    f.read_exact(&mut len)?;
    let header_len = u64::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; header_len];
    f.read_exact(&mut header_bytes)?;
    let header: Header =
        serde_json::from_slice(&header_bytes).map_err(|e| invalid(format!("bad header: {e}")))?;

    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;

    let mut out = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        if entry.dtype != "f32" {
            return Err(invalid(format!("unsupported dtype {}", entry.dtype)));
        }
        let numel: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + numel * 4;
        if end > payload.len() {
            return Err(invalid(format!(
                "tensor `{}` extends past payload ({} > {})",
                entry.name,
                end,
                payload.len()
            )));
        }
        let mut data = Vec::with_capacity(numel);
        for chunk in payload[start..end].chunks_exact(4) {
            data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
        }
        let t = Tensor::new(entry.shape, data).map_err(|e| invalid(e.to_string()))?;
        out.push((entry.name, t));
    }
    Ok((out, header.meta))
}
