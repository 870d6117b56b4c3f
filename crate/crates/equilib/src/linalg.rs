//! Dense complex linear-algebra helpers: trace norm, Hermitian square roots,
//! operator norms, and seeded random matrix generators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Trace norm ‖A‖₁ = Σ singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().sum()
}

/// Trace norm computed from the eigenvalues of A†A, as an algorithmically
/// independent cross-check of [`trace_norm`].
pub fn trace_norm_via_gram(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    hermitian_eigenvalues(&gram)
        .iter()
        .map(|ev| ev.max(0.0).sqrt())
        .sum()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut evs: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    evs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    evs
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// Principal square root of a PSD Hermitian matrix. Eigenvalues are clamped
/// at zero to absorb roundoff on the PSD boundary.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        let root = ev.max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j].conj() * root;
            }
        }
    }
    out
}

/// Inverse square root of a positive-definite Hermitian matrix.
pub fn pd_inv_sqrt(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        assert!(ev > 0.0, "matrix must be positive definite");
        let root = 1.0 / ev.sqrt();
        let v = eig.eigenvectors.column(k);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += v[i] * v[j].conj() * root;
            }
        }
    }
    out
}

/// Operator norm (largest |eigenvalue|) of a Hermitian matrix.
///
/// Small matrices diagonalize directly; larger ones use Lanczos with full
/// reorthogonalization and a deterministic start vector, which converges to
/// the spectral edges far faster than power iteration.
pub fn hermitian_opnorm(m: &CMatrix) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    if n <= 32 {
        return hermitian_eigenvalues(m)
            .iter()
            .fold(0.0f64, |acc, &e| acc.max(e.abs()));
    }
    let steps = 128.min(n);
    let mut basis: Vec<CVector> = Vec::with_capacity(steps);
    let mut alphas = Vec::with_capacity(steps);
    let mut betas = Vec::with_capacity(steps);
    let mut v = CVector::from_fn(n, |i, _| {
        let a = ((i as f64) * 0.7390851332151607).sin();
        let b = ((i as f64 + 1.0) * 1.3247179572447460).cos();
        Complex64::new(1.0 + a, b)
    });
    v /= Complex64::new(v.norm(), 0.0);
    basis.push(v.clone());
    for k in 0..steps {
        let mut w = m * &basis[k];
        let alpha = (basis[k].adjoint() * &w)[(0, 0)].re;
        alphas.push(alpha);
        // Full reorthogonalization keeps the recurrence honest.
        for _ in 0..2 {
            for q in &basis {
                let overlap = (q.adjoint() * &w)[(0, 0)];
                w -= q * overlap;
            }
        }
        let beta = w.norm();
        if beta < 1e-13 || k + 1 == steps {
            break;
        }
        betas.push(beta);
        basis.push(w / Complex64::new(beta, 0.0));
    }
    // Largest |eigenvalue| of the real symmetric tridiagonal Ritz matrix.
    let k = alphas.len();
    let mut tri = nalgebra::DMatrix::<f64>::zeros(k, k);
    for (i, &a) in alphas.iter().enumerate() {
        tri[(i, i)] = a;
    }
    for (i, &b) in betas.iter().enumerate() {
        tri[(i, i + 1)] = b;
        tri[(i + 1, i)] = b;
    }
    tri.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e.abs()))
}

/// Hermiticity defect: max entrywise |A - A†|.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Random Hermitian matrix with independent Gaussian entries (GUE-like,
/// unnormalized).
pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = Complex64::new(StandardNormal.sample(rng), 0.0);
        for j in (i + 1)..n {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            m[(i, j)] = Complex64::new(re, im);
            m[(j, i)] = Complex64::new(re, -im);
        }
    }
    m
}

/// Random PSD matrix B†B built from a Gaussian factor.
pub fn random_psd<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let b = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    b.adjoint() * b
}

/// Random density matrix: a normalized mixture of `rank` random pure states.
pub fn random_density<R: Rng>(n: usize, rank: usize, rng: &mut R) -> CMatrix {
    let mut rho = CMatrix::zeros(n, n);
    let mut probs: Vec<f64> = (0..rank).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    for &p in &probs {
        let mut v = CVector::from_fn(n, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        v /= Complex64::new(v.norm(), 0.0);
        rho += (&v * v.adjoint()).map(|z| z * p);
    }
    // Re-hermitize to scrub accumulation error.
    let rho = (&rho + rho.adjoint()).map(|z| z * 0.5);
    let tr: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
    rho.map(|z| z / tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trace_norm_of_rank_one_block() {
        // ‖u v†‖₁ = ‖u‖·‖v‖
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = CVector::from_fn(5, |_, _| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let v = CVector::from_fn(5, |_, _| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let m = &u * v.adjoint();
        assert_abs_diff_eq!(trace_norm(&m), u.norm() * v.norm(), epsilon = 1e-10);
    }

    #[test]
    fn trace_norm_of_psd_equals_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_psd(6, &mut rng);
        let tr: f64 = (0..6).map(|i| m[(i, i)].re).sum();
        assert_abs_diff_eq!(trace_norm(&m), tr, epsilon = 1e-9 * tr.abs());
    }

    #[test]
    fn svd_route_agrees_with_gram_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let m = CMatrix::from_fn(8, 8, |_, _| {
                Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            });
            let a = trace_norm(&m);
            let b = trace_norm_via_gram(&m);
            assert_abs_diff_eq!(a, b, epsilon = 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn opnorm_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let m = random_hermitian(12, &mut rng);
            let evs = hermitian_eigenvalues(&m);
            let exact = evs.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
            assert_abs_diff_eq!(hermitian_opnorm(&m), exact, epsilon = 1e-9 * exact);
        }
        // The Lanczos branch on larger matrices.
        for _ in 0..3 {
            let m = random_hermitian(80, &mut rng);
            let evs = hermitian_eigenvalues(&m);
            let exact = evs.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
            assert_abs_diff_eq!(hermitian_opnorm(&m), exact, epsilon = 1e-8 * exact);
        }
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = random_psd(6, &mut rng);
        let r = psd_sqrt(&m);
        let back = &r * &r;
        let worst = (&back - &m).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        assert!(worst < 1e-9 * trace_norm(&m).max(1.0));
    }

    #[test]
    fn holder_inequality_on_random_pairs() {
        // ‖A B‖₁ ≤ ‖A‖·‖B‖₁ and |Tr A| ≤ ‖A‖₁
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let a = random_hermitian(7, &mut rng);
            let b = CMatrix::from_fn(7, 7, |_, _| {
                Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            });
            let opnorm_a = hermitian_opnorm(&a);
            assert!(trace_norm(&(&a * &b)) <= opnorm_a * trace_norm(&b) + 1e-9);
            let tr: Complex64 = (0..7).map(|i| b[(i, i)]).sum();
            assert!(tr.norm() <= trace_norm(&b) + 1e-9);
        }
    }
}
