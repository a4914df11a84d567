//! On-disk formats: weights go in the shared tensor container, rollouts
//! in a compact binary record (token ids as u8, output distributions as
//! a little-endian f32 matrix).

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use formal_lang::Rollout;
use sha2::{Digest, Sha256};

const ROL_MAGIC: &[u8; 4] = b"ROL1";

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn write_rollouts(path: &Path, alphabet_size: usize, rollouts: &[Rollout]) -> io::Result<()> {
    let mut f = io::BufWriter::new(File::create(path)?);
    f.write_all(ROL_MAGIC)?;
    f.write_all(&1u32.to_le_bytes())?;
    f.write_all(&(alphabet_size as u32).to_le_bytes())?;
    f.write_all(&(rollouts.len() as u32).to_le_bytes())?;
    for r in rollouts {
        f.write_all(&(r.inputs.len() as u32).to_le_bytes())?;
        f.write_all(&[u8::from(r.terminated)])?;
        f.write_all(&r.inputs)?;
        for dist in &r.outputs {
            if dist.len() != alphabet_size {
                return Err(invalid("distribution width mismatch"));
            }
            for v in dist {
                f.write_all(&v.to_le_bytes())?;
            }
        }
    }
    f.flush()
}

pub fn read_rollouts(path: &Path) -> io::Result<(usize, Vec<Rollout>)> {
    let mut f = io::BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != ROL_MAGIC {
        return Err(invalid(format!("bad rollout magic in {}", path.display())));
    }
    let mut w32 = [0u8; 4];
    f.read_exact(&mut w32)?;
    if u32::from_le_bytes(w32) != 1 {
        return Err(invalid("unsupported rollout version"));
    }
    f.read_exact(&mut w32)?;
    let alphabet_size = u32::from_le_bytes(w32) as usize;
    f.read_exact(&mut w32)?;
    let count = u32::from_le_bytes(w32) as usize;

    let mut rollouts = Vec::with_capacity(count);
    for _ in 0..count {
        f.read_exact(&mut w32)?;
        let len = u32::from_le_bytes(w32) as usize;
        let mut flag = [0u8; 1];
        f.read_exact(&mut flag)?;
        let mut inputs = vec![0u8; len];
        f.read_exact(&mut inputs)?;
        let mut outputs = Vec::with_capacity(len);
        let mut row = vec![0u8; alphabet_size * 4];
        for _ in 0..len {
            f.read_exact(&mut row)?;
            outputs.push(
                row.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            );
        }
        rollouts.push(Rollout {
            inputs,
            outputs,
            terminated: flag[0] != 0,
        });
    }
    Ok((alphabet_size, rollouts))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex_string(&hasher.finalize()))
}

pub fn sha256_bytes(data: &[u8]) -> String {
    hex_string(&Sha256::digest(data))
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rollout_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.rol");
        let rollouts = vec![
            Rollout {
                inputs: vec![0, 1, 2],
                outputs: vec![vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0]; 3],
                terminated: true,
            },
            Rollout {
                inputs: vec![0],
                outputs: vec![vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]],
                terminated: false,
            },
        ];
        write_rollouts(&path, 6, &rollouts).unwrap();
        let (a, back) = read_rollouts(&path).unwrap();
        assert_eq!(a, 6);
        assert_eq!(back, rollouts);
    }

    #[test]
    fn sha256_is_stable() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
