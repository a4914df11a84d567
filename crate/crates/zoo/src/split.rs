//! Split policy: a pure function of the task, never of the model.
//!
//! OOD holds out the structurally smallest languages (offset magnitude
//! sum <= 1, 7 of 216); the rest are hashed into roughly 10% validation
//! and 90% training.

use formal_lang::DatasetLanguageSpec;
use numkit::RngStream;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Ood,
}

/// FNV-1a over the offset triple; stable across platforms.
fn task_hash(task: &DatasetLanguageSpec) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in task.offsets() {
        h ^= (v as i64 as u64) & 0xff;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn assign_split(task: &DatasetLanguageSpec) -> Split {
    if task.abs_sum() <= 1 {
        Split::Ood
    } else if task_hash(task) % 10 == 0 {
        Split::Val
    } else {
        Split::Train
    }
}

/// Deterministic half split of the OOD languages: half A joins the
/// downstream predictor's training data, half B stays held out.
pub fn ood_half_a(task: &DatasetLanguageSpec) -> bool {
    (task_hash(task) >> 8) % 2 == 0
}

/// Fixed 12-language desk pool: 2 OOD + 2 val + 8 train languages,
/// drawn from a seeded shuffle of the 216-language grid so all three
/// splits are represented.
pub fn desk_language_pool() -> Vec<DatasetLanguageSpec> {
    let mut grid = DatasetLanguageSpec::grid();
    let mut rng = RngStream::from_seed(0xD00D);
    rng.shuffle(&mut grid);

    let mut ood = Vec::new();
    let mut val = Vec::new();
    let mut train = Vec::new();
    for spec in grid {
        match assign_split(&spec) {
            Split::Ood if ood.len() < 2 => ood.push(spec),
            Split::Val if val.len() < 2 => val.push(spec),
            Split::Train if train.len() < 8 => train.push(spec),
            _ => {}
        }
        if ood.len() == 2 && val.len() == 2 && train.len() == 8 {
            break;
        }
    }
    let mut pool = Vec::with_capacity(12);
    pool.extend(ood);
    pool.extend(val);
    pool.extend(train);
    pool
}
