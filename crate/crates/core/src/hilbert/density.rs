//! Dense density matrices and the partial trace.

use ndarray::{Array1, Array2};
use num_traits::Zero;

use super::linalg;
use super::{Ket, Space, Subsystem, C64};
use crate::{Error, Result};

/// Dense Hermitian density matrix over a [`Space`].
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: Space,
    mat: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(space: Space, mat: Array2<C64>) -> Result<Self> {
        if mat.nrows() != space.dim() || mat.ncols() != space.dim() {
            return Err(Error::Dimension(format!(
                "density matrix shape {:?} does not match space dimension {}",
                mat.dim(),
                space.dim()
            )));
        }
        Ok(DensityMatrix { space, mat })
    }

    /// |ψ⟩⟨ψ| of a pure state.
    pub fn from_pure(psi: &Ket) -> Self {
        let n = psi.dim();
        let mut mat = Array2::<C64>::zeros((n, n));
        for (i, &a) in psi.amplitudes().iter().enumerate() {
            if a == C64::zero() {
                continue;
            }
            for (j, &b) in psi.amplitudes().iter().enumerate() {
                mat[(i, j)] = a * b.conj();
            }
        }
        DensityMatrix {
            space: *psi.space(),
            mat,
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<C64> {
        &mut self.mat
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    /// tr(ρ²); for Hermitian ρ this is the squared Frobenius norm.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Largest absolute entry of ρ − ρ†.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut defect = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                if d > defect {
                    defect = d;
                }
            }
        }
        defect
    }

    /// ρ ← (ρ + ρ†)/2 in place.
    pub fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (self.mat[(i, j)] + self.mat[(j, i)].conj());
                self.mat[(i, j)] = v;
                self.mat[(j, i)] = v.conj();
            }
        }
    }

    /// Smallest eigenvalue: exact Jacobi diagonalization for small matrices,
    /// Lanczos with a deterministic start vector otherwise.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim();
        if n <= 192 {
            let (w, _) = linalg::eigh(&self.mat);
            w[0]
        } else {
            linalg::min_eig_lanczos(&self.mat)
        }
    }

    /// ⟨ψ|ρ|ψ⟩ as a complex number (real up to Hermiticity defects).
    pub fn expectation(&self, psi: &Ket) -> Result<C64> {
        self.space.check_match(psi.space(), "density expectation")?;
        let n = self.dim();
        let amps = psi.amplitudes();
        let mut acc = C64::zero();
        for i in 0..n {
            let ai = amps[i].conj();
            if ai == C64::zero() {
                continue;
            }
            let mut row = C64::zero();
            for j in 0..n {
                row += self.mat[(i, j)] * amps[j];
            }
            acc += ai * row;
        }
        Ok(acc)
    }
}

pub(super) fn partial_trace(rho: &DensityMatrix, keep: &[Subsystem]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::Dimension(
            "partial_trace: keep set must be non-empty".into(),
        ));
    }
    let dims = rho.space().system_dims().ok_or_else(|| {
        Error::Dimension("partial_trace: density matrix is not on a composite space".into())
    })?;
    let factor_dims = dims.factor_dims();

    let mut keep_mask = [false; 4];
    for s in keep {
        keep_mask[s.position()] = true;
    }
    if keep_mask.iter().all(|&k| k) {
        return Ok(rho.clone());
    }

    let kept: Vec<usize> = (0..4).filter(|&p| keep_mask[p]).collect();
    let traced: Vec<usize> = (0..4).filter(|&p| !keep_mask[p]).collect();
    let kept_dim: usize = kept.iter().map(|&p| factor_dims[p]).product();
    let traced_dim: usize = traced.iter().map(|&p| factor_dims[p]).product();

    // Composite strides in the fixed row-major (a, b, c, q) layout.
    let mut strides = [0usize; 4];
    for p in 0..4 {
        strides[p] = factor_dims[p + 1..].iter().product();
    }

    let flat_index = |positions: &[usize], multi: usize| -> usize {
        // `multi` is a row-major multi-index over `positions`.
        let mut rem = multi;
        let mut idx = 0;
        for &p in positions.iter().rev() {
            let d = factor_dims[p];
            idx += (rem % d) * strides[p];
            rem /= d;
        }
        idx
    };

    let mut out = Array2::<C64>::zeros((kept_dim, kept_dim));
    for kr in 0..kept_dim {
        let base_r = flat_index(&kept, kr);
        for kc in 0..kept_dim {
            let base_c = flat_index(&kept, kc);
            let mut acc = C64::zero();
            for t in 0..traced_dim {
                let off = flat_index(&traced, t);
                acc += rho.matrix()[(base_r + off, base_c + off)];
            }
            out[(kr, kc)] = acc;
        }
    }

    DensityMatrix::new(Space::Mode(kept_dim), out)
}

/// Reduced state of a pure ket without forming the full density matrix,
/// used for entanglement diagnostics.
pub fn reduced_from_pure(psi: &Ket, keep: &[Subsystem]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::Dimension(
            "reduced_from_pure: keep set must be non-empty".into(),
        ));
    }
    let dims = psi.space().system_dims().ok_or_else(|| {
        Error::Dimension("reduced_from_pure: ket is not on a composite space".into())
    })?;
    let factor_dims = dims.factor_dims();

    let mut keep_mask = [false; 4];
    for s in keep {
        keep_mask[s.position()] = true;
    }
    let kept: Vec<usize> = (0..4).filter(|&p| keep_mask[p]).collect();
    let traced: Vec<usize> = (0..4).filter(|&p| !keep_mask[p]).collect();
    let kept_dim: usize = kept.iter().map(|&p| factor_dims[p]).product();
    let traced_dim: usize = traced.iter().map(|&p| factor_dims[p]).product();

    let mut strides = [0usize; 4];
    for p in 0..4 {
        strides[p] = factor_dims[p + 1..].iter().product();
    }
    let flat_index = |positions: &[usize], multi: usize| -> usize {
        let mut rem = multi;
        let mut idx = 0;
        for &p in positions.iter().rev() {
            let d = factor_dims[p];
            idx += (rem % d) * strides[p];
            rem /= d;
        }
        idx
    };

    // Reshape |ψ⟩ into a kept × traced matrix M, then ρ_kept = M M†.
    let mut m = Array2::<C64>::zeros((kept_dim, traced_dim));
    for k in 0..kept_dim {
        let base = flat_index(&kept, k);
        for t in 0..traced_dim {
            m[(k, t)] = psi.amplitudes()[base + flat_index(&traced, t)];
        }
    }
    let mut out = Array2::<C64>::zeros((kept_dim, kept_dim));
    for i in 0..kept_dim {
        for j in 0..kept_dim {
            let mut acc = C64::zero();
            for t in 0..traced_dim {
                acc += m[(i, t)] * m[(j, t)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    DensityMatrix::new(Space::Mode(kept_dim), out)
}

/// Column of amplitudes of ρ|ψ⟩, used by fidelity-style quadratic forms.
pub fn apply_to_ket(rho: &DensityMatrix, psi: &Ket) -> Result<Array1<C64>> {
    rho.space().check_match(psi.space(), "apply_to_ket")?;
    let n = rho.dim();
    let mut out = Array1::<C64>::zeros(n);
    for i in 0..n {
        let mut acc = C64::zero();
        for j in 0..n {
            acc += rho.matrix()[(i, j)] * psi.amplitudes()[j];
        }
        out[i] = acc;
    }
    Ok(out)
}
