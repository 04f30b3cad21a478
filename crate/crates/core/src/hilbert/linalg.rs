//! Self-contained dense Hermitian eigensolvers.
//!
//! Cyclic complex Jacobi for full spectra of small-to-medium matrices and a
//! fully reorthogonalized Lanczos iteration for extreme eigenvalues of large
//! ones. Both are deterministic.

use ndarray::{Array1, Array2};
use num_traits::Zero;

use super::C64;

/// Full eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns: `a ≈ V · diag(w) · V†`. Intended for dimensions up to a few
/// hundred; cost grows as O(d³) per sweep.
pub fn eigh(a: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh: matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<C64>::eye(n);

    let off = |m: &Array2<C64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    };

    let scale: f64 = a.iter().map(|x| x.norm()).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-15 * scale * (n as f64);
    const MAX_SWEEPS: usize = 60;

    for _ in 0..MAX_SWEEPS {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m[(p, q)];
                if g.norm() <= 1e-300 {
                    continue;
                }
                // Factor out the phase of the pivot so the 2×2 block becomes
                // real symmetric, then rotate it away. The combined unitary is
                //   J[p,p] = c, J[p,q] = s, J[q,p] = −s·e^{−iφ}, J[q,q] = c·e^{−iφ}
                // with φ = arg(m[p,q]); apply M ← J† M J and V ← V J.
                let phase = g / g.norm();
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let zeta = (aqq - app) / (2.0 * g.norm());
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let cpc = phase.conj() * c;
                let spc = phase.conj() * s;
                let cp = phase * c;
                let sp = phase * s;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - spc * miq;
                    m[(i, q)] = s * mip + cpc * miq;
                }
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj - sp * mqj;
                    m[(q, j)] = s * mpj + cp * mqj;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - spc * viq;
                    v[(i, q)] = s * vip + cpc * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());

    let w = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut vecs = Array2::<C64>::zeros((n, n));
    for (newc, &oldc) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, newc)] = v[(r, oldc)];
        }
    }
    (w, vecs)
}

/// Smallest eigenvalue of a dense Hermitian matrix via Lanczos with full
/// reorthogonalization and a fixed deterministic start vector.
pub fn min_eig_lanczos(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let m = 80.min(n);

    let matvec = |x: &Array1<C64>| -> Array1<C64> {
        let mut y = Array1::<C64>::zeros(n);
        for i in 0..n {
            let mut acc = C64::zero();
            for j in 0..n {
                acc += a[(i, j)] * x[j];
            }
            y[i] = acc;
        }
        y
    };

    // Deterministic start vector with all components engaged.
    let mut v = Array1::<C64>::from_iter((0..n).map(|i| {
        let x = (i as f64 + 1.0) * 0.7390851332151607;
        C64::new(1.0 + 0.3 * x.sin(), 0.2 * x.cos())
    }));
    let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|x| x / nv);

    let mut basis: Vec<Array1<C64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for j in 0..m {
        let mut w = matvec(&basis[j]);
        let alpha = basis[j]
            .iter()
            .zip(w.iter())
            .map(|(b, wi)| b.conj() * wi)
            .sum::<C64>()
            .re;
        alphas.push(alpha);
        // Full reorthogonalization, twice for safety.
        for _ in 0..2 {
            for b in &basis {
                let proj: C64 = b.iter().zip(w.iter()).map(|(bi, wi)| bi.conj() * wi).sum();
                for (wi, bi) in w.iter_mut().zip(b.iter()) {
                    *wi -= proj * bi;
                }
            }
        }
        let beta = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if beta < 1e-14 || j == m - 1 {
            break;
        }
        betas.push(beta);
        w.mapv_inplace(|x| x / beta);
        basis.push(w);
    }

    // Diagonalize the small real symmetric tridiagonal projection.
    let k = alphas.len();
    let mut t = Array2::<C64>::zeros((k, k));
    for i in 0..k {
        t[(i, i)] = C64::new(alphas[i], 0.0);
        if i + 1 < k {
            t[(i, i + 1)] = C64::new(betas[i], 0.0);
            t[(i + 1, i)] = C64::new(betas[i], 0.0);
        }
    }
    let (w, _) = eigh(&t);
    w[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Array2<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            m[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }

    #[test]
    fn eigh_two_by_two_analytic() {
        // [[0, 1], [1, 0]] has eigenvalues ∓1.
        let mut m = Array2::<C64>::zeros((2, 2));
        m[(0, 1)] = C64::new(1.0, 0.0);
        m[(1, 0)] = C64::new(1.0, 0.0);
        let (w, _) = eigh(&m);
        assert!((w[0] + 1.0).abs() < 1e-14);
        assert!((w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        for seed in 0..3u64 {
            let n = 14;
            let m = random_hermitian(n, seed);
            let (w, v) = eigh(&m);
            // Residual ‖A v_k − w_k v_k‖ and orthonormality.
            for k in 0..n {
                let mut res = 0.0f64;
                for i in 0..n {
                    let mut av = C64::new(0.0, 0.0);
                    for j in 0..n {
                        av += m[(i, j)] * v[(j, k)];
                    }
                    res = res.max((av - C64::new(w[k], 0.0) * v[(i, k)]).norm());
                }
                assert!(res < 1e-10, "residual {res:.3e} for eigenpair {k}");
            }
            for k1 in 0..n {
                for k2 in 0..n {
                    let dot: C64 = (0..n).map(|i| v[(i, k1)].conj() * v[(i, k2)]).sum();
                    let expected = if k1 == k2 { 1.0 } else { 0.0 };
                    assert!((dot.norm() - expected).abs() < 1e-10);
                }
            }
            for k in 1..n {
                assert!(w[k] >= w[k - 1]);
            }
        }
    }

    #[test]
    fn lanczos_matches_jacobi_minimum() {
        let n = 60;
        let m = random_hermitian(n, 7);
        // Make it positive-ish with one deliberate low outlier.
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += C64::new(3.0, 0.0);
        }
        shifted[(0, 0)] = C64::new(-0.5, 0.0);
        let (w, _) = eigh(&shifted);
        let lo = min_eig_lanczos(&shifted);
        assert!((lo - w[0]).abs() < 1e-8, "lanczos {lo} vs jacobi {}", w[0]);
    }
}
