//! Small dense linear-algebra helpers on top of nalgebra.

use crate::{CMat, CVec, C64};
use nalgebra::linalg::{Schur, SymmetricEigen};

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// ‖A − A†‖_max.
pub fn hermiticity_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// ‖U†U − 1‖_max.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let d = u.nrows();
    max_abs(&(u.adjoint() * u - CMat::identity(d, d)))
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
pub fn herm_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// exp(−i H t) for Hermitian H. Closed form for 2×2, spectral otherwise.
pub fn expm_herm(h: &CMat, t: f64) -> CMat {
    if h.nrows() == 2 {
        return expm_herm2(h[(0, 0)].re, h[(1, 1)].re, h[(0, 1)], t);
    }
    let (vals, vecs) = herm_eig(h);
    let phases = CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&e| C64::from_polar(1.0, -e * t)),
    );
    let mut left = vecs.clone();
    for (j, mut col) in left.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    left * vecs.adjoint()
}

/// exp(−i H t) for H = [[a, b], [b*, d]].
pub fn expm_herm2(a: f64, d: f64, b: C64, t: f64) -> CMat {
    let a0 = 0.5 * (a + d);
    let z = 0.5 * (a - d);
    let r = (z * z + b.norm_sqr()).sqrt();
    let (s, c) = (r * t).sin_cos();
    let sr = if r > 1e-300 { s / r } else { t };
    let g = C64::from_polar(1.0, -a0 * t);
    let m00 = g * C64::new(c, -sr * z);
    let m11 = g * C64::new(c, sr * z);
    let m01 = g * (-I * sr * b);
    let m10 = g * (-I * sr * b.conj());
    CMat::from_row_slice(2, 2, &[m00, m01, m10, m11])
}

/// Eigen-decomposition of a unitary (normal) matrix via complex Schur form.
/// Returns eigenvalues and an orthonormal eigenvector basis (columns).
pub fn unitary_eig(u: &CMat) -> (Vec<C64>, CMat) {
    let n = u.nrows();
    let schur = Schur::new(u.clone());
    let (q, t) = schur.unpack();
    let vals = (0..n).map(|k| t[(k, k)]).collect();
    (vals, q)
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn sqrt_psd(m: &CMat) -> CMat {
    let (vals, vecs) = herm_eig(m);
    let mut left = vecs.clone();
    for (j, mut col) in left.column_iter_mut().enumerate() {
        col *= C64::new(vals[j].max(0.0).sqrt(), 0.0);
    }
    left * vecs.adjoint()
}

/// Uhlmann fidelity F(ρ, σ) = (tr √(√ρ σ √ρ))².
pub fn uhlmann_fidelity(rho: &CMat, sigma: &CMat) -> f64 {
    let r = sqrt_psd(rho);
    let inner = &r * sigma * &r;
    let (vals, _) = herm_eig(&inner);
    let t: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    t * t
}

/// Orthonormalise the columns of `m` in place (modified Gram–Schmidt).
/// Returns the smallest pre-normalisation column norm.
pub fn gram_schmidt(m: &mut CMat) -> f64 {
    let mut smallest = f64::INFINITY;
    for j in 0..m.ncols() {
        for k in 0..j {
            let proj = m.column(k).dotc(&m.column(j));
            let ck = m.column(k).clone_owned();
            let mut cj = m.column_mut(j);
            cj -= ck * proj;
        }
        let nrm = m.column(j).norm();
        smallest = smallest.min(nrm);
        if nrm > 0.0 {
            let mut cj = m.column_mut(j);
            cj /= C64::new(nrm, 0.0);
        }
    }
    smallest
}

/// ⟨ψ|A|ψ⟩.
pub fn expectation(a: &CMat, psi: &CVec) -> C64 {
    psi.dotc(&(a * psi))
}

/// Kronecker product of two dense matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_herm(n: usize, seed: u64) -> CMat {
        let mut x = seed;
        let mut next = || {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMat::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&m + m.adjoint()).scale(0.5)
    }

    #[test]
    fn closed_form_matches_spectral_exponential() {
        let h = sample_herm(2, 7);
        let closed = expm_herm(&h, 1.3);
        let (vals, vecs) = herm_eig(&h);
        let diag = CMat::from_diagonal(&CVec::from_iterator(
            2,
            vals.iter().map(|&e| C64::from_polar(1.0, -1.3 * e)),
        ));
        let spectral = &vecs * diag * vecs.adjoint();
        assert!(max_abs(&(closed - spectral)) < 1e-13);
    }

    #[test]
    fn unitary_eig_reconstructs() {
        let u = expm_herm(&sample_herm(3, 3), 2.0);
        let (vals, q) = unitary_eig(&u);
        for k in 0..3 {
            let v = q.column(k).clone_owned();
            let r = &u * &v - v.clone() * vals[k];
            assert!(r.norm() < 1e-12);
        }
        assert!(unitarity_residual(&q) < 1e-12);
    }

    #[test]
    fn unitary_eig_handles_scalar_matrix() {
        let u = CMat::identity(2, 2) * C64::new(-1.0, 0.0);
        let (vals, q) = unitary_eig(&u);
        assert!(vals.iter().all(|v| (v + ONE).norm() < 1e-14));
        assert!(unitarity_residual(&q) < 1e-14);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let h = sample_herm(3, 11);
        let psd = &h * &h;
        let r = sqrt_psd(&psd);
        assert!(max_abs(&(&r * &r - psd)) < 1e-12);
    }
}
