//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here works on `nalgebra` dynamic matrices. Dimensions stay small
//! (at most `2^10`), so plain dense kernels are sufficient.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

/// `‖M − M†‖`, measured in Frobenius norm.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Column `j` of the returned matrix is the normalized eigenvector of the
/// `j`-th eigenvalue.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let dim = m.nrows();
    if dim == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    // Symmetrize so round-off in assembly never reaches the solver.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen(format!("no convergence for {dim}x{dim} matrix")))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if order.iter().any(|&k| !eig.eigenvalues[k].is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(dim, dim);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok((values, vectors))
}

/// Operator norm (largest singular value) of a Hermitian matrix, i.e. the
/// largest absolute eigenvalue.
pub fn operator_norm(m: &CMat) -> Result<f64> {
    let (values, _) = hermitian_eigen(m)?;
    Ok(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Largest singular value of an arbitrary square matrix.
pub fn spectral_norm(m: &CMat) -> Result<f64> {
    let gram = m.adjoint() * m;
    let (values, _) = hermitian_eigen(&gram)?;
    Ok(values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dimension above which exponentials go through an eigendecomposition.
pub const EXPM_EIGEN_THRESHOLD: usize = 256;

/// `exp(−i·s·H)` for Hermitian `H`.
///
/// Uses scaling and squaring with a truncated Taylor series for
/// `dim ≤ 256` and the spectral decomposition beyond that.
pub fn expm_hermitian(h: &CMat, s: f64) -> Result<CMat> {
    if h.nrows() > EXPM_EIGEN_THRESHOLD {
        expm_hermitian_eigen(h, s)
    } else {
        Ok(expm_taylor(&h.map(|z| -I * z * s)))
    }
}

/// `exp(−i·s·H)` through `H = V diag(λ) V†`.
pub fn expm_hermitian_eigen(h: &CMat, s: f64) -> Result<CMat> {
    let (values, vectors) = hermitian_eigen(h)?;
    let mut scaled = vectors.clone();
    for (j, lambda) in values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -s * lambda);
        let col = vectors.column(j) * phase;
        scaled.set_column(j, &col);
    }
    Ok(scaled * vectors.adjoint())
}

/// Matrix exponential by scaling and squaring with an 18-term Taylor series.
pub fn expm_taylor(a: &CMat) -> CMat {
    let dim = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5_f64.powi(squarings));
    // Horner form of sum_{k<=18} X^k / k!.
    let mut result = identity(dim);
    for k in (1..=18).rev() {
        result = identity(dim) + (&scaled * &result).scale(1.0 / k as f64);
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Normalizes `v` in place and returns its previous norm.
pub fn normalize(v: &mut CVec) -> f64 {
    let n = v.norm();
    if n > 0.0 {
        v.unscale_mut(n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(dim: usize, seed: u64) -> CMat {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = CMat::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&m + m.adjoint()).scale(0.5)
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let h = random_hermitian(6, 1);
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let diag = CMat::from_diagonal(&CVec::from_iterator(6, vals.iter().map(|&v| c(v))));
        let rebuilt = &vecs * diag * vecs.adjoint();
        assert!((rebuilt - h).norm() < 1e-12);
    }

    #[test]
    fn operator_norm_matches_power_iteration() {
        let h = random_hermitian(8, 7);
        let mut v = CVec::from_element(8, c(1.0));
        let mut estimate = 0.0;
        for _ in 0..20_000 {
            let w = &h * &h * &v;
            estimate = w.norm().sqrt();
            v = w.unscale(w.norm());
        }
        let norm = operator_norm(&h).unwrap();
        assert!((norm - estimate).abs() < 1e-10, "{norm} vs {estimate}");
    }

    #[test]
    fn diagonal_norms() {
        assert_eq!(operator_norm(&identity(4)).unwrap(), 1.0);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0), c(-5.0)]));
        assert!((operator_norm(&d).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn submultiplicative() {
        for seed in 0..10 {
            let a = random_hermitian(5, seed);
            let b = random_hermitian(5, seed + 100);
            let lhs = spectral_norm(&(&a * &b)).unwrap();
            let rhs = operator_norm(&a).unwrap() * operator_norm(&b).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn taylor_and_eigen_exponentials_agree() {
        let h = random_hermitian(7, 3);
        for s in [0.01, 0.7, 12.0] {
            let a = expm_hermitian(&h, s).unwrap();
            let b = expm_hermitian_eigen(&h, s).unwrap();
            assert!((&a - &b).norm() < 1e-12, "s={s}: {}", (&a - &b).norm());
            let defect = (a.adjoint() * &a - identity(7)).norm();
            assert!(defect < 1e-13);
        }
    }
}
