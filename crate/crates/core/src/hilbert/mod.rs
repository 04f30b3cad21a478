//! Truncated tensor-product Hilbert-space algebra.
//!
//! The system is a fixed tensor product of up to four factors, ordered as
//! (oscillator a, oscillator b, optional oscillator c, coupler) with row-major
//! composite indexing: the coupler index varies fastest. All operators are
//! stored sparse (CSR); states and density matrices are dense.

mod density;
mod expm;
mod ket;
pub mod linalg;
mod op;

pub use density::{apply_to_ket, reduced_from_pure, DensityMatrix};
pub use expm::expm_apply;
pub use ket::Ket;
pub use op::{
    annihilation, creation, level_projector, level_transition, number_op, OperatorMatrix,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Complex scalar used everywhere.
pub type C64 = num_complex::Complex64;

/// Coupler level layout. The protocol only ever drives `g`; `g'` is the
/// spectator flag level; `e` and `f` are the auxiliary levels of the Raman
/// construction.
pub const LEVEL_G: usize = 0;
pub const LEVEL_GPRIME: usize = 1;
pub const LEVEL_E: usize = 2;
pub const LEVEL_F: usize = 3;
/// Number of coupler levels.
pub const COUPLER_LEVELS: usize = 4;

/// One tensor factor of the composite system.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    OscA,
    OscB,
    OscC,
    Coupler,
}

impl Subsystem {
    /// Position in the fixed (a, b, c, coupler) ordering.
    pub fn position(self) -> usize {
        match self {
            Subsystem::OscA => 0,
            Subsystem::OscB => 1,
            Subsystem::OscC => 2,
            Subsystem::Coupler => 3,
        }
    }

    pub const ALL: [Subsystem; 4] = [
        Subsystem::OscA,
        Subsystem::OscB,
        Subsystem::OscC,
        Subsystem::Coupler,
    ];
}

/// Truncation sizes of the tensor factors.
///
/// `n_c = 0` means oscillator c is absent; it only ever needs two Fock states
/// when present. The coupler always has four levels.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemDims {
    n_a: usize,
    n_b: usize,
    n_c: usize,
    n_q: usize,
}

impl SystemDims {
    /// Two oscillators plus the four-level coupler.
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        Self::with_aux(n_a, n_b, 0)
    }

    /// Two oscillators, optional oscillator c (`n_c` ∈ {0, 2}), coupler.
    pub fn with_aux(n_a: usize, n_b: usize, n_c: usize) -> Result<Self> {
        if n_a < 2 || n_b < 2 {
            return Err(Error::Dimension(format!(
                "oscillator truncations must be at least 2, got n_a={n_a}, n_b={n_b}"
            )));
        }
        if n_c != 0 && n_c != 2 {
            return Err(Error::Dimension(format!(
                "oscillator c is either absent (0) or two-level (2), got n_c={n_c}"
            )));
        }
        Ok(SystemDims {
            n_a,
            n_b,
            n_c,
            n_q: COUPLER_LEVELS,
        })
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Raw c truncation: 0 when absent.
    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn has_osc_c(&self) -> bool {
        self.n_c > 0
    }

    /// Factor dimensions in composite order, absent factors contributing 1.
    pub fn factor_dims(&self) -> [usize; 4] {
        [self.n_a, self.n_b, self.n_c.max(1), self.n_q]
    }

    /// Dimension of one factor as it enters the tensor product.
    pub fn factor_dim(&self, s: Subsystem) -> usize {
        self.factor_dims()[s.position()]
    }

    /// Total composite dimension.
    pub fn total(&self) -> usize {
        self.factor_dims().iter().product()
    }

    /// Composite index of a basis state, coupler index fastest.
    pub fn index_of(&self, ia: usize, ib: usize, ic: usize, iq: usize) -> usize {
        let [da, db, dc, dq] = self.factor_dims();
        debug_assert!(ia < da && ib < db && ic < dc && iq < dq);
        ((ia * db + ib) * dc + ic) * dq + iq
    }

    /// Inverse of [`Self::index_of`].
    pub fn unravel(&self, idx: usize) -> [usize; 4] {
        let [_, db, dc, dq] = self.factor_dims();
        let iq = idx % dq;
        let rest = idx / dq;
        let ic = rest % dc;
        let rest = rest / dc;
        let ib = rest % db;
        let ia = rest / db;
        [ia, ib, ic, iq]
    }

    /// Stride of a factor in the composite index.
    pub fn stride(&self, s: Subsystem) -> usize {
        let dims = self.factor_dims();
        dims[s.position() + 1..].iter().product()
    }
}

/// The space a ket or operator is defined on: either a single bare factor of
/// some dimension, or the full composite system.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    /// A single subsystem of the given dimension (oscillator mode or coupler).
    Mode(usize),
    /// The full composite space.
    System(SystemDims),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Mode(n) => *n,
            Space::System(d) => d.total(),
        }
    }

    pub fn system_dims(&self) -> Option<SystemDims> {
        match self {
            Space::System(d) => Some(*d),
            Space::Mode(_) => None,
        }
    }

    pub(crate) fn check_match(&self, other: &Space, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Dimension(format!(
                "{what}: spaces do not match ({self:?} vs {other:?})"
            )));
        }
        Ok(())
    }
}

/// Partial trace of a density matrix over the complement of `keep`.
///
/// The kept factors stay in canonical (a, b, c, coupler) order. The result is
/// tagged with the flat dimension of the kept factors unless everything is
/// kept, in which case the composite space survives.
pub fn partial_trace(rho: &DensityMatrix, keep: &[Subsystem]) -> Result<DensityMatrix> {
    density::partial_trace(rho, keep)
}
