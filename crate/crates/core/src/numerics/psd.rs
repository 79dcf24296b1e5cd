use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const DEFAULT_CLIP_TOL: f64 = 1e-12;

/// Spectral factor of a symmetric positive-semidefinite matrix.
///
/// Only the retained (unclipped) eigenpairs are stored, in descending
/// eigenvalue order.
#[derive(Debug, Clone)]
pub struct SpectralFactor {
    pub dimension: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub clipped_mass: f64,
}

impl SpectralFactor {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// L = V·diag(√λ), so that L·Lᵀ reconstructs the matrix.
    pub fn factor(&self) -> DMatrix<f64> {
        let mut l = self.eigenvectors.clone();
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            l.column_mut(j).scale_mut(lam.sqrt());
        }
        l
    }

    /// Map a standard-normal vector of length `rank()` to a sample.
    pub fn apply(&self, xi: &[f64]) -> DVector<f64> {
        assert_eq!(xi.len(), self.rank(), "white-noise length must equal the factor rank");
        let mut out = DVector::zeros(self.dimension);
        for (j, (lam, x)) in self.eigenvalues.iter().zip(xi).enumerate() {
            out.axpy(lam.sqrt() * x, &self.eigenvectors.column(j), 1.0);
        }
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let l = self.factor();
        &l * l.transpose()
    }
}

/// Spectral factorization with eigenvalues below `clip_tol·max|λ|` dropped.
pub fn psd_factor(c: &DMatrix<f64>, clip_tol: f64) -> Result<SpectralFactor> {
    psd_factor_with_floor(c, clip_tol, 0.0)
}

/// As [`psd_factor`], with an additional absolute floor below which
/// eigenvalues count as zero and negative eigenvalues are tolerated.
pub fn psd_factor_with_floor(c: &DMatrix<f64>, clip_tol: f64, floor: f64) -> Result<SpectralFactor> {
    factor(c, clip_tol, floor, true)
}

/// Factor of the nearest positive-semidefinite matrix: every eigenvalue at
/// or below the cut is dropped, negative ones included, and their
/// magnitudes are added to the clipped mass.
pub fn psd_project(c: &DMatrix<f64>, clip_tol: f64, floor: f64) -> Result<SpectralFactor> {
    factor(c, clip_tol, floor, false)
}

fn factor(c: &DMatrix<f64>, clip_tol: f64, floor: f64, strict: bool) -> Result<SpectralFactor> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::InvalidParameter(format!("matrix is {}x{}, not square", n, c.ncols())));
    }
    if !(clip_tol >= 0.0) || !(floor >= 0.0) {
        return Err(Error::InvalidParameter("clip tolerance and floor must be nonnegative".into()));
    }
    let scale = c.amax();
    if !scale.is_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let asym = (c - c.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::InvalidParameter(format!(
            "matrix asymmetric: {asym:e} against scale {scale:e}"
        )));
    }
    let empty = SpectralFactor {
        dimension: n,
        eigenvalues: Vec::new(),
        eigenvectors: DMatrix::zeros(n, 0),
        clipped_mass: 0.0,
    };
    if scale == 0.0 {
        return Ok(empty);
    }
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lam_max = eig.eigenvalues.amax();
    let cut = (clip_tol * lam_max).max(floor);
    let reject = (100.0 * clip_tol * lam_max).max(floor);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut kept = Vec::new();
    let mut clipped = 0.0;
    for &i in &order {
        let lam = eig.eigenvalues[i];
        if strict && lam < -reject {
            return Err(Error::NotPsd {
                eigenvalue: lam,
                scale: lam_max,
            });
        }
        if lam > cut {
            kept.push(i);
        } else {
            clipped += lam.abs();
        }
    }
    if kept.is_empty() {
        return Ok(SpectralFactor {
            clipped_mass: clipped,
            ..empty
        });
    }
    let mut vecs = DMatrix::zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        // fix the sign so the largest component is positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(j, &col);
    }
    Ok(SpectralFactor {
        dimension: n,
        eigenvalues: kept.iter().map(|&i| eig.eigenvalues[i]).collect(),
        eigenvectors: vecs,
        clipped_mass: clipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity() {
        let f = psd_factor(&DMatrix::identity(5, 5), DEFAULT_CLIP_TOL).unwrap();
        assert_eq!(f.rank(), 5);
        assert!((f.reconstruct() - DMatrix::<f64>::identity(5, 5)).amax() < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let f = psd_factor(&DMatrix::zeros(6, 6), DEFAULT_CLIP_TOL).unwrap();
        assert_eq!(f.dimension, 6);
        assert_eq!(f.rank(), 0);
        assert!(f.apply(&[]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rank_one() {
        let v = DVector::from_vec(vec![1.0, -2.0, 2.0]);
        let c = &v * v.transpose();
        let f = psd_factor(&c, DEFAULT_CLIP_TOL).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.eigenvalues[0] - 9.0).abs() < 1e-13);
        let u = f.eigenvectors.column(0);
        let dot = u.dot(&(&v / 3.0)).abs();
        assert!((dot - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_indefinite() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(psd_factor(&c, DEFAULT_CLIP_TOL), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn rejects_asymmetric() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(psd_factor(&c, DEFAULT_CLIP_TOL), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn floor_clips_roundoff_matrix() {
        let c = DMatrix::from_row_slice(2, 2, &[1e-30, 0.0, 0.0, 2e-30]);
        assert_eq!(psd_factor(&c, DEFAULT_CLIP_TOL).unwrap().rank(), 2);
        assert_eq!(psd_factor_with_floor(&c, DEFAULT_CLIP_TOL, 1e-20).unwrap().rank(), 0);
    }

    #[test]
    fn projection_drops_negative_part() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let f = psd_project(&c, DEFAULT_CLIP_TOL, 0.0).unwrap();
        assert_eq!(f.rank(), 1);
        assert!((f.clipped_mass - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn reconstruction_within_clipped_mass(entries in proptest::collection::vec(-1.0f64..1.0, 24)) {
            // Gram matrix of a 6x4 factor: PSD with rank <= 4
            let b = DMatrix::from_row_slice(6, 4, &entries);
            let c = &b * b.transpose();
            let f = psd_factor(&c, DEFAULT_CLIP_TOL).unwrap();
            prop_assert!(f.eigenvalues.iter().all(|&l| l >= 0.0));
            let vtv = f.eigenvectors.transpose() * &f.eigenvectors;
            prop_assert!((vtv - DMatrix::<f64>::identity(f.rank(), f.rank())).amax() < 1e-10);
            let err = (f.reconstruct() - &c).amax();
            prop_assert!(err <= f.clipped_mass + 1e-10 * c.amax());
        }
    }
}
