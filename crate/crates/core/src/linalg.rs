//! Small dense complex helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;

/// Force exact Hermitian symmetry: `(m + m^*) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rebuild `V diag(f(λ)) V^*`.
pub fn spectral_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for c in 0..n {
        let s = f(values[c]);
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    hermitize(&(scaled * vectors.adjoint()))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped to zero).
pub fn psd_clip(m: &CMatrix) -> CMatrix {
    spectral_map(m, |v| v.max(0.0))
}

/// `m^{-1/2}` for a positive definite matrix.
pub fn inv_sqrt(m: &CMatrix) -> CMatrix {
    spectral_map(m, |v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt())
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Operator norm of a Hermitian matrix.
pub fn hermitian_op_norm(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Random POVM: `E_a = S^{-1/2} G_a G_a^* S^{-1/2}` with Gaussian `G_a` and `S = Σ G_a G_a^*`.
pub fn random_povm<R: rand::Rng + ?Sized>(dim: usize, outputs: usize, rng: &mut R) -> Vec<CMatrix> {
    let positives: Vec<CMatrix> = (0..outputs)
        .map(|_| {
            let g = CMatrix::from_fn(dim, dim, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            hermitize(&(&g * g.adjoint()))
        })
        .collect();
    normalize_povm(&positives)
}

/// Map PSD operators onto an exact POVM via `S^{-1/2} H_a S^{-1/2}`.
pub fn normalize_povm(positives: &[CMatrix]) -> Vec<CMatrix> {
    let dim = positives.first().map_or(0, |m| m.nrows());
    let total = positives.iter().fold(CMatrix::zeros(dim, dim), |acc, h| acc + h);
    let root = inv_sqrt(&total);
    positives.iter().map(|h| hermitize(&(&root * h * &root))).collect()
}

/// Random unit vector drawn uniformly from the sphere in `R^n`, entries nonnegative
/// when `nonnegative` is set.
pub fn random_unit<R: rand::Rng + ?Sized>(n: usize, nonnegative: bool, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if nonnegative {
            v.iter_mut().for_each(|x| *x = x.abs());
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm2(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_povm_is_complete_and_psd() {
        let mut rng = crate::rng::rng(3);
        let povm = random_povm(4, 3, &mut rng);
        let total = povm.iter().fold(CMatrix::zeros(4, 4), |acc, e| acc + e);
        assert!((total - identity(4)).norm() < 1e-12);
        for e in &povm {
            assert!(min_eigenvalue(e) > -1e-12);
        }
    }

    #[test]
    fn psd_clip_removes_negative_part() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(-2.0, 0.0)],
        );
        let c = psd_clip(&m);
        assert!((c[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(c[(1, 1)].norm() < 1e-14);
    }
}
