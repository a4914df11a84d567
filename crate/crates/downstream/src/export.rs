//! Embedding-space export: one CSV row per zoo checkpoint with its
//! task, accuracy, representation, and 2-d PCA coordinates.

use std::io::Write;
use std::path::Path;

use encoders::Encoder;
use formal_lang::DatasetLanguageSpec;
use zoo::LoadedZoo;

use crate::pca::pca_project;
use crate::predictor::DownstreamError;

#[derive(Clone, Debug)]
pub struct EmbeddingRow {
    pub model_id: usize,
    pub step: u64,
    pub task: DatasetLanguageSpec,
    pub accuracy: f64,
    pub z: Vec<f32>,
    pub pc: (f64, f64),
}

/// Encode every checkpoint, project to the PCA plane, and write the
/// CSV. Returns the rows for further analysis.
pub fn export_embeddings(
    loaded: &LoadedZoo,
    encoder: &Encoder<f32>,
    out: &Path,
) -> Result<Vec<EmbeddingRow>, DownstreamError> {
    let mut rows: Vec<EmbeddingRow> = Vec::new();
    for record in loaded.records() {
        for ckpt in &record.checkpoints {
            let weights = loaded.load_weights(ckpt)?;
            let z = encoder.encode(&weights)?;
            rows.push(EmbeddingRow {
                model_id: record.model_id,
                step: ckpt.step,
                task: record.task,
                accuracy: ckpt.accuracy,
                z,
                pc: (0.0, 0.0),
            });
        }
    }
    if rows.is_empty() {
        return Err(DownstreamError::NoExamples);
    }

    let points: Vec<Vec<f32>> = rows.iter().map(|r| r.z.clone()).collect();
    let pca = pca_project(&points, 2);
    for (row, coords) in rows.iter_mut().zip(pca.coords.iter()) {
        row.pc = (coords[0], coords[1]);
    }

    let z_dim = rows[0].z.len();
    let mut f = std::io::BufWriter::new(std::fs::File::create(out).map_err(zoo_io)?);
    let mut header = String::from("model_id,step,m_b,m_c,m_d,accuracy");
    for i in 0..z_dim {
        header.push_str(&format!(",z_{i}"));
    }
    header.push_str(",pc1,pc2");
    writeln!(f, "{header}").map_err(zoo_io)?;
    for row in &rows {
        let [mb, mc, md] = row.task.offsets();
        let mut line = format!(
            "{},{},{},{},{},{}",
            row.model_id, row.step, mb, mc, md, row.accuracy
        );
        for v in &row.z {
            line.push_str(&format!(",{v}"));
        }
        line.push_str(&format!(",{},{}", row.pc.0, row.pc.1));
        writeln!(f, "{line}").map_err(zoo_io)?;
    }
    f.flush().map_err(zoo_io)?;
    Ok(rows)
}

fn zoo_io(e: std::io::Error) -> DownstreamError {
    DownstreamError::Zoo(zoo::ZooError::Io(e))
}

/// Cluster quality in the PCA plane: mean inter-language centroid
/// distance divided by mean intra-language spread.
pub fn cluster_separation(rows: &[EmbeddingRow]) -> f64 {
    use std::collections::BTreeMap;
    let mut by_lang: BTreeMap<[i8; 3], Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        by_lang.entry(row.task.offsets()).or_default().push(row.pc);
    }
    let centroids: Vec<(f64, f64)> = by_lang
        .values()
        .map(|pts| {
            let n = pts.len() as f64;
            (
                pts.iter().map(|p| p.0).sum::<f64>() / n,
                pts.iter().map(|p| p.1).sum::<f64>() / n,
            )
        })
        .collect();

    let mut inter = 0.0;
    let mut pairs = 0usize;
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            let dx = centroids[i].0 - centroids[j].0;
            let dy = centroids[i].1 - centroids[j].1;
            inter += (dx * dx + dy * dy).sqrt();
            pairs += 1;
        }
    }
    if pairs == 0 {
        return 0.0;
    }
    inter /= pairs as f64;

    let mut intra = 0.0;
    let mut count = 0usize;
    for (pts, centroid) in by_lang.values().zip(centroids.iter()) {
        for p in pts {
            let dx = p.0 - centroid.0;
            let dy = p.1 - centroid.1;
            intra += (dx * dx + dy * dy).sqrt();
            count += 1;
        }
    }
    intra /= count as f64;
    if intra == 0.0 {
        return f64::INFINITY;
    }
    inter / intra
}
