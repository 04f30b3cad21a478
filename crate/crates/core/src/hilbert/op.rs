//! Sparse complex operators in CSR form.

use ndarray::{Array1, Array2};
use num_traits::Zero;
use rayon::prelude::*;

use super::{Space, Subsystem, SystemDims, C64};
use crate::{Error, Result};

/// Below this dimension the parallel dispatch overhead outweighs the work.
const PAR_THRESHOLD: usize = 512;

/// Sparse complex matrix acting on a [`Space`], with an optional Hermitian
/// marker used by propagators to refuse non-Hermitian generators.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    space: Space,
    indptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Builds from (row, col, value) triplets; duplicate entries are summed
    /// and exact zeros dropped.
    pub fn from_triplets(
        space: Space,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
        hermitian: bool,
    ) -> Self {
        let n = space.dim();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet index out of range");
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        indptr.push(0);
        for row in rows.iter_mut() {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = C64::zero();
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != C64::zero() {
                    cols.push(c);
                    vals.push(v);
                }
            }
            indptr.push(cols.len());
        }
        OperatorMatrix {
            space,
            indptr,
            cols,
            vals,
            hermitian,
        }
    }

    pub fn zeros(space: Space) -> Self {
        OperatorMatrix {
            indptr: vec![0; space.dim() + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            space,
            hermitian: true,
        }
    }

    pub fn identity(space: Space) -> Self {
        let n = space.dim();
        OperatorMatrix {
            space,
            indptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![C64::new(1.0, 0.0); n],
            hermitian: true,
        }
    }

    /// Diagonal operator from real entries.
    pub fn diagonal(space: Space, diag: &[f64]) -> Self {
        assert_eq!(diag.len(), space.dim());
        Self::from_triplets(
            space,
            diag.iter()
                .enumerate()
                .map(|(i, &d)| (i, i, C64::new(d, 0.0))),
            true,
        )
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn row(&self, r: usize) -> (&[usize], &[C64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => C64::zero(),
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim();
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(self.space, triplets, self.hermitian)
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for v in out.vals.iter_mut() {
            *v *= factor;
        }
        out.hermitian = self.hermitian && factor.im == 0.0;
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.space.check_match(&other.space, "operator add")?;
        let n = self.dim();
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for r in 0..n {
                let (cols, vals) = m.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    triplets.push((r, c, v));
                }
            }
        }
        Ok(Self::from_triplets(
            self.space,
            triplets,
            self.hermitian && other.hermitian,
        ))
    }

    /// Sparse-sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.space.check_match(&other.space, "operator matmul")?;
        let n = self.dim();
        let mut triplets = Vec::new();
        let mut acc: Vec<C64> = vec![C64::zero(); n];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&k, &v) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&c, &ov) in ocols.iter().zip(ovals) {
                    if acc[c] == C64::zero() {
                        touched.push(c);
                    }
                    acc[c] += v * ov;
                }
            }
            for &c in &touched {
                if acc[c] != C64::zero() {
                    triplets.push((r, c, acc[c]));
                }
                acc[c] = C64::zero();
            }
            touched.clear();
        }
        Ok(Self::from_triplets(self.space, triplets, false))
    }

    /// Largest absolute entry of `self − self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut defect = 0.0f64;
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let d = (v - self.entry(c, r).conj()).norm();
                defect = defect.max(d);
            }
        }
        defect
    }

    /// Marks the operator Hermitian after verifying the defect is within
    /// `tol` (the stored flag is trusted by propagators).
    pub fn into_hermitian(mut self, tol: f64) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect > tol {
            return Err(Error::Consistency(format!(
                "operator marked Hermitian but ‖O − O†‖_max = {defect:.3e} > {tol:.3e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn matvec(&self, x: &Array1<C64>) -> Array1<C64> {
        assert_eq!(x.len(), self.dim());
        let n = self.dim();
        let mut y = Array1::<C64>::zeros(n);
        for r in 0..n {
            let (cols, vals) = self.row(r);
            let mut acc = C64::zero();
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    /// Applies the conjugate transpose to a vector without forming it.
    pub fn matvec_dagger(&self, x: &Array1<C64>) -> Array1<C64> {
        assert_eq!(x.len(), self.dim());
        let n = self.dim();
        let mut y = Array1::<C64>::zeros(n);
        for r in 0..n {
            let (cols, vals) = self.row(r);
            let xr = x[r];
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v.conj() * xr;
            }
        }
        y
    }

    /// Dense product `self · b`, parallel over output rows for large states.
    pub fn mul_dense(&self, b: &Array2<C64>) -> Array2<C64> {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let ncols = b.ncols();
        let mut out = Array2::<C64>::zeros((n, ncols));
        let bs = b.as_slice().expect("dense matrix must be contiguous");
        let kernel = |r: usize, orow: &mut [C64]| {
            let (cols, vals) = self.row(r);
            for (&k, &v) in cols.iter().zip(vals) {
                let brow = &bs[k * ncols..(k + 1) * ncols];
                for (o, &bkj) in orow.iter_mut().zip(brow) {
                    *o += v * bkj;
                }
            }
        };
        if n < PAR_THRESHOLD {
            for (r, mut row) in out.axis_iter_mut(ndarray::Axis(0)).enumerate() {
                kernel(r, row.as_slice_mut().expect("row must be contiguous"));
            }
        } else {
            out.axis_iter_mut(ndarray::Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(r, mut row)| {
                    kernel(r, row.as_slice_mut().expect("row must be contiguous"));
                });
        }
        out
    }

    /// Dense product `b · self`, parallel over rows of `b` for large states.
    pub fn dense_mul(&self, b: &Array2<C64>) -> Array2<C64> {
        let n = self.dim();
        assert_eq!(b.ncols(), n);
        let nrows = b.nrows();
        let mut out = Array2::<C64>::zeros((nrows, n));
        let bs = b.as_slice().expect("dense matrix must be contiguous");
        let kernel = |i: usize, orow: &mut [C64]| {
            let brow = &bs[i * n..(i + 1) * n];
            for k in 0..n {
                let bik = brow[k];
                if bik == C64::zero() {
                    continue;
                }
                let (cols, vals) = self.row(k);
                for (&c, &v) in cols.iter().zip(vals) {
                    orow[c] += bik * v;
                }
            }
        };
        if nrows < PAR_THRESHOLD {
            for (i, mut row) in out.axis_iter_mut(ndarray::Axis(0)).enumerate() {
                kernel(i, row.as_slice_mut().expect("row must be contiguous"));
            }
        } else {
            out.axis_iter_mut(ndarray::Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(|(i, mut row)| {
                    kernel(i, row.as_slice_mut().expect("row must be contiguous"));
                });
        }
        out
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let n = self.dim();
        let mut out = Array2::<C64>::zeros((n, n));
        for r in 0..n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c)] += v;
            }
        }
        out
    }

    /// Embeds a single-factor operator into the composite space, acting as
    /// identity on every other factor.
    pub fn lift(&self, target: Subsystem, dims: &SystemDims) -> Result<OperatorMatrix> {
        let d_target = dims.factor_dim(target);
        match self.space {
            Space::Mode(n) if n == d_target => {}
            _ => {
                return Err(Error::Dimension(format!(
                    "lift: operator dimension {} does not match factor {:?} of size {}",
                    self.dim(),
                    target,
                    d_target
                )));
            }
        }
        if target == Subsystem::OscC && !dims.has_osc_c() {
            return Err(Error::Dimension(
                "lift: oscillator c is absent in these dims".into(),
            ));
        }
        let total = dims.total();
        let stride = dims.stride(target);
        let full = Space::System(*dims);
        let mut indptr = Vec::with_capacity(total + 1);
        let mut cols = Vec::with_capacity(self.nnz() * total / d_target);
        let mut vals = Vec::with_capacity(self.nnz() * total / d_target);
        indptr.push(0);
        for r in 0..total {
            let it = (r / stride) % d_target;
            let base = r - it * stride;
            let (tcols, tvals) = self.row(it);
            for (&jt, &v) in tcols.iter().zip(tvals) {
                cols.push(base + jt * stride);
                vals.push(v);
            }
            indptr.push(cols.len());
        }
        Ok(OperatorMatrix {
            space: full,
            indptr,
            cols,
            vals,
            hermitian: self.hermitian,
        })
    }
}

/// Photon annihilation operator on a truncated mode: ⟨m−1|a|m⟩ = √m.
pub fn annihilation(n: usize) -> Result<OperatorMatrix> {
    if n < 2 {
        return Err(Error::Dimension(format!(
            "annihilation: truncation must be at least 2, got {n}"
        )));
    }
    Ok(OperatorMatrix::from_triplets(
        Space::Mode(n),
        (1..n).map(|m| (m - 1, m, C64::new((m as f64).sqrt(), 0.0))),
        false,
    ))
}

/// Photon creation operator, the transpose of [`annihilation`].
pub fn creation(n: usize) -> Result<OperatorMatrix> {
    Ok(annihilation(n)?.dagger())
}

/// Photon number operator, diagonal (0, 1, …, n−1).
pub fn number_op(n: usize) -> Result<OperatorMatrix> {
    if n < 2 {
        return Err(Error::Dimension(format!(
            "number_op: truncation must be at least 2, got {n}"
        )));
    }
    let diag: Vec<f64> = (0..n).map(|m| m as f64).collect();
    Ok(OperatorMatrix::diagonal(Space::Mode(n), &diag))
}

/// Coupler raising-type transition |upper⟩⟨lower| on the bare 4-level factor.
pub fn level_transition(upper: usize, lower: usize) -> OperatorMatrix {
    assert!(upper < super::COUPLER_LEVELS && lower < super::COUPLER_LEVELS);
    OperatorMatrix::from_triplets(
        Space::Mode(super::COUPLER_LEVELS),
        [(upper, lower, C64::new(1.0, 0.0))],
        false,
    )
}

/// Coupler level projector |level⟩⟨level|.
pub fn level_projector(level: usize) -> OperatorMatrix {
    assert!(level < super::COUPLER_LEVELS);
    OperatorMatrix::from_triplets(
        Space::Mode(super::COUPLER_LEVELS),
        [(level, level, C64::new(1.0, 0.0))],
        true,
    )
}
