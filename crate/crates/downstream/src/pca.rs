//! Deterministic PCA on representation vectors: mean-centering, a
//! cyclic Jacobi eigensolver on the covariance, and a fixed sign
//! convention (the largest-magnitude loading of each component is
//! positive).

#[derive(Clone, Debug)]
pub struct PcaResult {
    /// Projected coordinates, one row per input point.
    pub coords: Vec<Vec<f64>>,
    /// Fraction of total variance per kept component.
    pub explained: Vec<f64>,
    /// True when the data rank was below the requested dims and zero
    /// components were padded in.
    pub rank_deficient: bool,
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi
/// rotations. Returns (eigenvalues, eigenvectors as columns), sorted by
/// descending eigenvalue.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap().then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// Project points onto the top principal components.
pub fn pca_project(points: &[Vec<f32>], dims: usize) -> PcaResult {
    let n = points.len();
    assert!(n >= dims + 1, "need at least dims + 1 points");
    let d = points[0].len();

    let mut mean = vec![0.0f64; d];
    for p in points {
        for (m, &x) in mean.iter_mut().zip(p.iter()) {
            *m += x as f64;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut cov = vec![vec![0.0f64; d]; d];
    for p in points {
        let centered: Vec<f64> = p.iter().zip(&mean).map(|(&x, m)| x as f64 - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i][j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= n as f64;
            cov[j][i] = cov[i][j];
        }
    }

    let (values, mut vectors) = symmetric_eigen(&cov);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let mut explained = Vec::with_capacity(dims);
    let mut rank_deficient = false;
    for comp in vectors.iter_mut().take(dims) {
        // Sign convention: largest-magnitude loading positive.
        let lead = comp
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            for v in comp.iter_mut() {
                *v = -*v;
            }
        }
    }
    for i in 0..dims {
        let var = values.get(i).copied().unwrap_or(0.0).max(0.0);
        if total > 0.0 && var / total > 1e-12 {
            explained.push(var / total);
        } else {
            explained.push(0.0);
            rank_deficient = true;
        }
    }

    let coords = points
        .iter()
        .map(|p| {
            let centered: Vec<f64> = p.iter().zip(&mean).map(|(&x, m)| x as f64 - m).collect();
            (0..dims)
                .map(|c| {
                    if explained[c] == 0.0 && rank_deficient {
                        // Padded component.
                        if values.get(c).copied().unwrap_or(0.0).max(0.0) <= 0.0 {
                            return 0.0;
                        }
                    }
                    centered.iter().zip(&vectors[c]).map(|(x, v)| x * v).sum()
                })
                .collect()
        })
        .collect();

    PcaResult {
        coords,
        explained,
        rank_deficient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use numkit::RngStream;

    #[test]
    fn jacobi_matches_hand_two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let (values, vectors) = symmetric_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((values[0] - 3.0).abs() < 1e-12);
        assert!((values[1] - 1.0).abs() < 1e-12);
        // Eigenvector for 3 is (1,1)/sqrt(2) up to sign.
        let v = &vectors[0];
        assert!((v[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((v[0] - v[1]).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_put_all_variance_on_pc1() {
        let mut rng = RngStream::from_seed(1);
        let dir: Vec<f32> = (0..16).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
        let points: Vec<Vec<f32>> = (0..40)
            .map(|i| dir.iter().map(|&v| v * i as f32 * 0.1).collect())
            .collect();
        let res = pca_project(&points, 2);
        assert!(res.explained[0] > 0.999, "{:?}", res.explained);
        assert!(res.explained[1] < 1e-6);
        assert!(res.rank_deficient);
    }

    #[test]
    fn isotropic_cloud_spreads_variance() {
        // Monte-Carlo: an isotropic 16-d Gaussian has ~1/16 of the
        // variance on each component.
        let mut rng = RngStream::from_seed(2);
        let points: Vec<Vec<f32>> = (0..4000)
            .map(|_| (0..16).map(|_| rng.normal() as f32).collect())
            .collect();
        let res = pca_project(&points, 2);
        for e in &res.explained {
            assert!((e - 1.0 / 16.0).abs() < 0.02, "{e}");
        }
        assert!(!res.rank_deficient);
    }

    #[test]
    fn projection_is_deterministic() {
        let mut rng = RngStream::from_seed(3);
        let points: Vec<Vec<f32>> = (0..50)
            .map(|_| (0..8).map(|_| rng.uniform(-1.0, 1.0) as f32).collect())
            .collect();
        let a = pca_project(&points, 2);
        let b = pca_project(&points, 2);
        assert_eq!(a.coords, b.coords);
        assert_eq!(a.explained, b.explained);
    }

    #[test]
    fn reconstruction_error_is_non_increasing_in_dims() {
        let mut rng = RngStream::from_seed(4);
        let points: Vec<Vec<f32>> = (0..60)
            .map(|_| (0..6).map(|_| rng.normal() as f32).collect())
            .collect();
        // Explained variance accumulates monotonically, so residual
        // variance shrinks as dims grow.
        let mut prev_explained = 0.0;
        for dims in 1..=4 {
            let res = pca_project(&points, dims);
            let total: f64 = res.explained.iter().sum();
            assert!(total >= prev_explained - 1e-12);
            prev_explained = total;
        }
    }
}
