//! Dense state vectors.

use ndarray::Array1;
use num_traits::Zero;

use super::{Space, C64};
use crate::{Error, Result};

/// A complex state vector over a [`Space`].
#[derive(Clone, Debug)]
pub struct Ket {
    space: Space,
    amps: Array1<C64>,
}

impl Ket {
    pub fn new(space: Space, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "ket length {} does not match space dimension {}",
                amps.len(),
                space.dim()
            )));
        }
        Ok(Ket { space, amps })
    }

    /// Basis vector |idx⟩.
    pub fn basis(space: Space, idx: usize) -> Self {
        let mut amps = Array1::<C64>::zeros(space.dim());
        amps[idx] = C64::new(1.0, 0.0);
        Ket { space, amps }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut Array1<C64> {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Renormalizes in place; errors on (numerically) zero vectors.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::State("cannot normalize a zero vector".into()));
        }
        self.amps.mapv_inplace(|a| a / n);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// ⟨self|other⟩ with the physics convention (conjugate-linear in self).
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        self.space.check_match(&other.space, "inner product")?;
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨self|other⟩|².
    pub fn overlap_sqr(&self, other: &Ket) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn scale(&self, factor: C64) -> Self {
        Ket {
            space: self.space,
            amps: self.amps.mapv(|a| a * factor),
        }
    }

    pub fn add(&self, other: &Ket) -> Result<Self> {
        self.space.check_match(&other.space, "ket add")?;
        Ok(Ket {
            space: self.space,
            amps: &self.amps + &other.amps,
        })
    }

    /// Tensor product, `self` as the slower-varying factor.
    pub fn kron(&self, other: &Ket, space: Space) -> Result<Self> {
        let d = self.dim() * other.dim();
        if space.dim() != d {
            return Err(Error::Dimension(format!(
                "kron: result space dimension {} does not match {}",
                space.dim(),
                d
            )));
        }
        let mut amps = Array1::<C64>::zeros(d);
        for (i, &a) in self.amps.iter().enumerate() {
            if a == C64::zero() {
                continue;
            }
            for (j, &b) in other.amps.iter().enumerate() {
                amps[i * other.dim() + j] = a * b;
            }
        }
        Ok(Ket { space, amps })
    }

    /// Checks the unit-norm invariant within `tol`.
    pub fn assert_normalized(&self, tol: f64) -> Result<()> {
        let dev = (self.norm() - 1.0).abs();
        if dev > tol {
            return Err(Error::State(format!(
                "norm deviation {dev:.3e} exceeds tolerance {tol:.3e}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn inner_products_and_norms() {
        let s = Space::Mode(2);
        let zero = Ket::basis(s, 0);
        let one = Ket::basis(s, 1);
        assert!((zero.inner(&zero).unwrap().re - 1.0).abs() < 1e-15);
        assert!(zero.inner(&one).unwrap().norm() < 1e-15);
        // Conjugate-linearity in the bra.
        let plus_i = Ket::new(s, array![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]).unwrap();
        assert!((plus_i.inner(&zero).unwrap() - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let a = Ket::basis(Space::Mode(2), 0);
        let b = Ket::basis(Space::Mode(3), 0);
        assert!(a.inner(&b).is_err());
    }

    #[test]
    fn normalize_rejects_zero_vector() {
        let mut z = Ket::new(Space::Mode(2), array![C64::new(0.0, 0.0), C64::new(0.0, 0.0)])
            .unwrap();
        assert!(z.normalize().is_err());
    }
}
