use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LatentSequence;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and matching unit eigenvectors.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::dim("symmetric_eigen", &[n], &[a.first().map_or(0, |r| r.len())]));
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    let scale: f64 = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| v.iter().map(|row| row[i]).collect()).collect();
    Ok((values, vectors))
}

/// Top-2 principal axes of a point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Orthonormal rows.
    pub axes: [Vec<f64>; 2],
    /// Variance captured by each axis.
    pub variances: [f64; 2],
}

impl PcaModel {
    /// Fits on `points` (each of length `n ≥ 2`, at least 3 points). The sign of
    /// each axis makes its largest-magnitude component positive.
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Degenerate(format!("PCA needs at least 3 points, got {}", points.len())));
        }
        let n = points[0].len();
        if n < 2 {
            return Err(Error::Degenerate("PCA needs at least 2 dimensions".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::dim("pca_fit", &[p.len()], &[n]));
        }
        let count = points.len() as f64;
        let mean: Vec<f64> = (0..n).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / count).collect();
        let mut cov = vec![vec![0.0; n]; n];
        for p in points {
            for i in 0..n {
                let di = p[i] - mean[i];
                for j in i..n {
                    cov[i][j] += di * (p[j] - mean[j]);
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                cov[i][j] /= count;
                cov[j][i] = cov[i][j];
            }
        }
        let (values, vectors) = symmetric_eigen(&cov)?;
        if values[0] <= 0.0 {
            return Err(Error::Degenerate("all points coincide".into()));
        }
        let orient = |mut v: Vec<f64>| {
            let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        };
        let mut it = vectors.into_iter();
        let a0 = orient(it.next().expect("n >= 2"));
        let a1 = orient(it.next().expect("n >= 2"));
        Ok(PcaModel {
            mean,
            axes: [a0, a1],
            variances: [values[0], values[1].max(0.0)],
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.dim() {
            return Err(Error::dim("pca project", &[x.len()], &[self.dim()]));
        }
        let dot = |a: &[f64]| a.iter().zip(x).zip(&self.mean).map(|((w, v), m)| w * (v - m)).sum();
        Ok([dot(&self.axes[0]), dot(&self.axes[1])])
    }

    /// Maps 2-D coordinates back into the original space.
    pub fn reconstruct(&self, p: [f64; 2]) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.mean[k] + p[0] * self.axes[0][k] + p[1] * self.axes[1][k])
            .collect()
    }

    /// One 2-D point per latent column.
    pub fn project_trajectory(&self, h: &LatentSequence) -> Result<Vec<[f64; 2]>> {
        h.columns().iter().map(|c| self.project(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_points(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, 0);
        // Anisotropic so the top eigenvalues are well separated.
        (0..count)
            .map(|_| (0..dim).map(|k| r.random_range(-1.0..1.0) * (dim - k) as f64).collect())
            .collect()
    }

    fn covariance(points: &[Vec<f64>]) -> DMatrix<f64> {
        let n = points[0].len();
        let c = points.len() as f64;
        let mean: Vec<f64> = (0..n).map(|k| points.iter().map(|p| p[k]).sum::<f64>() / c).collect();
        let mut m = DMatrix::zeros(n, n);
        for p in points {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]) / c;
                }
            }
        }
        m
    }

    fn recon_error(points: &[Vec<f64>], project: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
        points
            .iter()
            .map(|p| p.iter().zip(project(p)).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum()
    }

    #[test]
    fn axis_aligned_points_give_standard_basis() {
        let pts = vec![vec![-3.0, 0.0], vec![3.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let pca = PcaModel::fit(&pts).unwrap();
        assert!((pca.axes[0][0] - 1.0).abs() < 1e-12 && pca.axes[0][1].abs() < 1e-12);
        assert!((pca.axes[1][1] - 1.0).abs() < 1e-12 && pca.axes[1][0].abs() < 1e-12);
        assert_eq!(pca.project(&pca.mean.clone()).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn reconstruction_error_matches_dense_eigensolver() {
        let pts = random_points(40, 5, 3);
        let pca = PcaModel::fit(&pts).unwrap();
        let ours = recon_error(&pts, |p| pca.reconstruct(pca.project(p).unwrap()));

        let eig = covariance(&pts).symmetric_eigen();
        let mut idx: Vec<usize> = (0..5).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top: Vec<Vec<f64>> = idx[..2].iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
        let mean = pca.mean.clone();
        let oracle = recon_error(&pts, |p| {
            let c: Vec<f64> = p.iter().zip(&mean).map(|(a, m)| a - m).collect();
            let coef: Vec<f64> = top.iter().map(|a| a.iter().zip(&c).map(|(x, y)| x * y).sum()).collect();
            (0..5).map(|k| mean[k] + coef[0] * top[0][k] + coef[1] * top[1][k]).collect()
        });
        assert!((ours - oracle).abs() < 1e-8, "{ours} vs {oracle}");
        for (i, &j) in idx[..2].iter().enumerate() {
            assert!((pca.variances[i] - eig.eigenvalues[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(PcaModel::fit(&vec![vec![1.0, 2.0]; 5]), Err(Error::Degenerate(_))));
        assert!(PcaModel::fit(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(PcaModel::fit(&[vec![1.0], vec![2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn trajectory_projection() {
        let pca = PcaModel::fit(&random_points(10, 4, 1)).unwrap();
        let constant = LatentSequence::from_codes(&vec![vec![0.3, -0.1, 0.2, 0.0]; 5]).unwrap();
        let pts = pca.project_trajectory(&constant).unwrap();
        assert!(pts.iter().all(|p| p == &pts[0]));
        assert!(pca.project(&[0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn axes_are_orthonormal_and_projection_is_affine(seed in 0u64..500, dim in 2usize..7) {
            let pts = random_points(12, dim, seed);
            let pca = PcaModel::fit(&pts).unwrap();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            prop_assert!((dot(&pca.axes[0], &pca.axes[0]) - 1.0).abs() < 1e-9);
            prop_assert!((dot(&pca.axes[1], &pca.axes[1]) - 1.0).abs() < 1e-9);
            prop_assert!(dot(&pca.axes[0], &pca.axes[1]).abs() < 1e-9);
            let (a, b) = (&pts[0], &pts[1]);
            let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            let zero = vec![0.0; dim];
            let lhs = pca.project(&sum).unwrap();
            let (pa, pb, p0) = (pca.project(a).unwrap(), pca.project(b).unwrap(), pca.project(&zero).unwrap());
            for k in 0..2 {
                prop_assert!((lhs[k] - (pa[k] + pb[k] - p0[k])).abs() < 1e-9);
            }
        }

        #[test]
        fn rank_two_projection_is_optimal(seed in 0u64..200) {
            // No random orthonormal pair reconstructs better than the fitted axes.
            let pts = random_points(15, 4, seed);
            let pca = PcaModel::fit(&pts).unwrap();
            let best = recon_error(&pts, |p| pca.reconstruct(pca.project(p).unwrap()));
            let mut r = rng::stream(seed, 9);
            let mut u: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let mut w: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let norm = |v: &mut Vec<f64>| { let n = v.iter().map(|x| x * x).sum::<f64>().sqrt(); v.iter_mut().for_each(|x| *x /= n); };
            norm(&mut u);
            let d: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(&u).for_each(|(x, a)| *x -= d * a);
            norm(&mut w);
            let other = PcaModel { mean: pca.mean.clone(), axes: [u, w], variances: [0.0, 0.0] };
            let alt = recon_error(&pts, |p| other.reconstruct(other.project(p).unwrap()));
            prop_assert!(best <= alt + 1e-9);
        }
    }
}
