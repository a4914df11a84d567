//! The permutation-invariance grid: encoder rows (plus the subject LSTM
//! itself) against permutation columns (complete, then each single
//! weight group), each cell the mean deviation ratio
//! `|E(permuted) - E(w)| / |E(other) - E(w)|`.

use encoders::Encoder;
use numkit::RngStream;
use rnn_core::{
    corrupt_permutation, lstm_forward, LstmWeights, PermGroup, PermutationSpec, ALL_GROUPS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridColumn {
    Complete,
    Single(PermGroup),
}

impl GridColumn {
    pub fn all() -> Vec<GridColumn> {
        let mut v = vec![GridColumn::Complete];
        v.extend(ALL_GROUPS.into_iter().map(GridColumn::Single));
        v
    }

    pub fn label(&self) -> String {
        match self {
            GridColumn::Complete => "complete".into(),
            GridColumn::Single(g) => g.label().into(),
        }
    }

    fn groups(&self) -> Vec<PermGroup> {
        match self {
            GridColumn::Complete => ALL_GROUPS.to_vec(),
            GridColumn::Single(g) => vec![*g],
        }
    }
}

#[derive(Clone, Debug)]
pub struct InvarianceGrid {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<f64>>,
}

impl InvarianceGrid {
    pub fn cell(&self, row: &str, column: &str) -> f64 {
        let r = self.rows.iter().position(|n| n == row).expect("row");
        let c = self.columns.iter().position(|n| n == column).expect("column");
        self.cells[r][c]
    }
}

fn l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn subject_outputs(w: &LstmWeights<f32>, seqs: &[Vec<Vec<f32>>]) -> Vec<f32> {
    let mut out = Vec::new();
    for seq in seqs {
        for row in lstm_forward(w, seq).expect("dims fixed") {
            out.extend(row);
        }
    }
    out
}

/// Compute the grid over sampled `(subject, other, permutation)`
/// triples. The first row is the subject LSTM itself, judged on its
/// outputs over ten random token sequences.
pub fn invariance_grid(
    encoders: &[&Encoder<f32>],
    subjects: &[LstmWeights<f32>],
    num_samples: usize,
    seed: u64,
) -> InvarianceGrid {
    assert!(subjects.len() >= 2, "need at least two subjects");
    let dims = subjects[0].dims;
    let columns = GridColumn::all();

    let mut rows = vec!["input_lstm".to_string()];
    rows.extend(encoders.iter().map(|e| e.kind.label().to_string()));
    let mut cells = vec![vec![0.0f64; columns.len()]; rows.len()];

    let root = RngStream::from_seed(seed);
    for sample in 0..num_samples {
        let mut rng = root.child(sample as u64);
        let si = rng.index(subjects.len());
        let mut oi = rng.index(subjects.len());
        if oi == si {
            oi = (oi + 1) % subjects.len();
        }
        let subject = &subjects[si];
        let other = &subjects[oi];
        let perm = PermutationSpec::random(dims.layers, dims.hidden, &mut rng);

        // Ten random one-hot sequences for the function-output row.
        let seqs: Vec<Vec<Vec<f32>>> = (0..10)
            .map(|_| {
                (0..10)
                    .map(|_| {
                        let mut x = vec![0.0f32; dims.input];
                        x[rng.index(dims.input)] = 1.0;
                        x
                    })
                    .collect()
            })
            .collect();
        let base_out = subject_outputs(subject, &seqs);
        let other_out = subject_outputs(other, &seqs);
        let out_denom = l2(&other_out, &base_out);

        let base_z: Vec<Vec<f32>> = encoders
            .iter()
            .map(|e| e.encode(subject).expect("encode"))
            .collect();
        let other_z: Vec<Vec<f32>> = encoders
            .iter()
            .map(|e| e.encode(other).expect("encode"))
            .collect();

        for (c, column) in columns.iter().enumerate() {
            let permuted = corrupt_permutation(subject, &perm, &column.groups()).expect("perm");
            let perm_out = subject_outputs(&permuted, &seqs);
            cells[0][c] += l2(&perm_out, &base_out) / out_denom;
            for (e, encoder) in encoders.iter().enumerate() {
                let z = encoder.encode(&permuted).expect("encode");
                let denom = l2(&other_z[e], &base_z[e]);
                cells[1 + e][c] += l2(&z, &base_z[e]) / denom;
            }
        }
    }

    for row in cells.iter_mut() {
        for v in row.iter_mut() {
            *v /= num_samples as f64;
        }
    }

    InvarianceGrid {
        rows,
        columns: columns.iter().map(|c| c.label()).collect(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use encoders::{EncoderArch, EncoderKind};
    use rnn_core::LstmDims;

    #[test]
    fn grid_is_reproducible_and_detects_the_expected_pattern() {
        let dims = LstmDims::new(2, 8, 6, 6);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(1);
        let stats = Encoder::<f32>::new(EncoderKind::Stats, dims, &arch, &mut rng);
        let flat = Encoder::<f32>::new(EncoderKind::Flat, dims, &arch, &mut rng);
        let subjects: Vec<LstmWeights<f32>> = (0..4)
            .map(|_| LstmWeights::init_uniform(dims, &mut rng))
            .collect();

        let grid = invariance_grid(&[&stats, &flat], &subjects, 4, 99);
        let grid2 = invariance_grid(&[&stats, &flat], &subjects, 4, 99);
        for (a, b) in grid.cells.iter().flatten().zip(grid2.cells.iter().flatten()) {
            assert!((a - b).abs() < 1e-6);
        }

        // Complete permutations: invisible to stats, glaring to flat.
        assert!(grid.cell("stats", "complete") <= 1e-4);
        assert!(grid.cell("flat", "complete") >= 0.1);
        assert!(grid.cell("input_lstm", "complete") <= 1e-4);
        // The subject itself is NOT invariant to at least one
        // single-group corruption.
        let worst = GridColumn::all()
            .iter()
            .skip(1)
            .map(|c| grid.cell("input_lstm", &c.label()))
            .fold(0.0f64, f64::max);
        assert!(worst >= 0.1, "worst single-group ratio {worst}");
    }
}
