//! Factories for oscillator and coupler states.
//!
//! Every factory renormalizes after truncation and records the tail mass
//! (probability weight above the cutoff) so downstream accuracy claims can be
//! traced. Factories reject truncations whose tail mass exceeds the requested
//! tolerance, naming the truncation that would suffice.

use ndarray::Array1;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::hilbert::{Ket, Space, SystemDims, C64, LEVEL_G, LEVEL_GPRIME};
use crate::{Error, Result};

/// Default bound on the truncated tail mass.
///
/// Loose enough to admit squeezed vacuum at r = 1 with 30 Fock states
/// (tail ≈ 6×10⁻⁵), the standard truncation of the bundled scenarios;
/// callers wanting a tighter guarantee pass their own tolerance to
/// [`OscState::build`].
pub const DEFAULT_TAIL_TOL: f64 = 1e-4;

/// Hard cap when searching for a sufficient truncation.
const MAX_TRUNCATION_SEARCH: usize = 4096;

/// Cat-state parity: |α⟩ + |−α⟩ (even) or |α⟩ − |−α⟩ (odd).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// Symbolic description of a single-oscillator state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OscKind {
    Fock(usize),
    Coherent(C64),
    Squeezed(C64),
    Cat { alpha: C64, parity: Parity },
    Custom(Vec<(f64, f64)>),
}

/// A realized truncated oscillator state: normalized amplitudes plus the tail
/// mass that was cut off.
#[derive(Clone, Debug)]
pub struct OscState {
    kind: OscKind,
    truncation: usize,
    amps: Array1<C64>,
    tail_mass: f64,
}

impl OscState {
    /// Builds the truncated, renormalized state, enforcing the tail bound.
    pub fn build(kind: OscKind, truncation: usize, tail_tol: f64) -> Result<Self> {
        if truncation < 2 {
            return Err(Error::Dimension(format!(
                "oscillator truncation must be at least 2, got {truncation}"
            )));
        }
        let (amps, tail) = match &kind {
            OscKind::Fock(m) => fock_amplitudes(*m, truncation)?,
            OscKind::Coherent(alpha) => coherent_amplitudes(*alpha, truncation),
            OscKind::Squeezed(xi) => squeezed_amplitudes(*xi, truncation),
            OscKind::Cat { alpha, parity } => cat_amplitudes(*alpha, *parity, truncation)?,
            OscKind::Custom(list) => custom_amplitudes(list, truncation)?,
        };
        if tail > tail_tol {
            let required = required_truncation(&kind, tail_tol)
                .unwrap_or(MAX_TRUNCATION_SEARCH);
            return Err(Error::Truncation {
                context: format!("{kind:?}"),
                tail,
                tol: tail_tol,
                required,
            });
        }
        let mut amps = amps;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::State(format!(
                "{kind:?}: truncated amplitudes form a zero vector"
            )));
        }
        amps.mapv_inplace(|a| a / norm);
        Ok(OscState {
            kind,
            truncation,
            amps,
            tail_mass: tail,
        })
    }

    pub fn kind(&self) -> &OscKind {
        &self.kind
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    /// The state as a bare single-mode ket.
    pub fn ket(&self) -> Ket {
        Ket::new(Space::Mode(self.truncation), self.amps.clone()).expect("consistent by build")
    }

    /// ⟨n̂⟩ of the truncated state.
    pub fn mean_photon_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(m, a)| m as f64 * a.norm_sqr())
            .sum()
    }

    /// Rebuilds the same symbolic state at another truncation.
    pub fn at_truncation(&self, truncation: usize, tail_tol: f64) -> Result<Self> {
        Self::build(self.kind.clone(), truncation, tail_tol)
    }
}

/// Coherent state |α⟩ truncated to `n` Fock states.
pub fn coherent(alpha: C64, n: usize) -> Result<OscState> {
    OscState::build(OscKind::Coherent(alpha), n, DEFAULT_TAIL_TOL)
}

/// Squeezed vacuum |ξ⟩ truncated to `n` Fock states; support on even Fock
/// states only. |−ξ⟩ is the same state with the squeeze phase shifted by π.
pub fn squeezed_vacuum(xi: C64, n: usize) -> Result<OscState> {
    OscState::build(OscKind::Squeezed(xi), n, DEFAULT_TAIL_TOL)
}

/// Normalized cat state (|α⟩ ± |−α⟩)/√(2(1 ± e^{−2|α|²})).
pub fn cat(alpha: C64, parity: Parity, n: usize) -> Result<OscState> {
    OscState::build(OscKind::Cat { alpha, parity }, n, DEFAULT_TAIL_TOL)
}

/// Fock state |m⟩.
pub fn fock(m: usize, n: usize) -> Result<OscState> {
    OscState::build(OscKind::Fock(m), n, DEFAULT_TAIL_TOL)
}

/// State of the four-level coupler.
#[derive(Clone, Debug)]
pub struct CouplerState {
    amps: [C64; 4],
}

impl CouplerState {
    /// Normalizing constructor.
    pub fn new(amps: [C64; 4]) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::State("coupler state is a zero vector".into()));
        }
        Ok(CouplerState {
            amps: [
                amps[0] / norm,
                amps[1] / norm,
                amps[2] / norm,
                amps[3] / norm,
            ],
        })
    }

    pub fn ground() -> Self {
        let mut amps = [C64::zero(); 4];
        amps[LEVEL_G] = C64::new(1.0, 0.0);
        CouplerState { amps }
    }

    pub fn gprime() -> Self {
        let mut amps = [C64::zero(); 4];
        amps[LEVEL_GPRIME] = C64::new(1.0, 0.0);
        CouplerState { amps }
    }

    /// The protocol's initial coupler state α|g′⟩ + β|g⟩.
    pub fn superposition(alpha_gprime: C64, beta_g: C64) -> Result<Self> {
        let mut amps = [C64::zero(); 4];
        amps[LEVEL_GPRIME] = alpha_gprime;
        amps[LEVEL_G] = beta_g;
        Self::new(amps)
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.amps
    }

    /// True when the excited working levels e, f carry no amplitude.
    pub fn is_protocol_initial(&self) -> bool {
        self.amps[2].norm_sqr() + self.amps[3].norm_sqr() < 1e-24
    }

    pub fn ket(&self) -> Ket {
        Ket::new(Space::Mode(4), Array1::from_iter(self.amps.iter().copied()))
            .expect("consistent by build")
    }
}

/// Tensor product in the fixed (a, b, c, coupler) ordering.
pub fn product_state(
    a: &OscState,
    b: &OscState,
    c: Option<&OscState>,
    coupler: &CouplerState,
) -> Result<Ket> {
    let dims = SystemDims::with_aux(
        a.truncation(),
        b.truncation(),
        c.map(|s| s.truncation()).unwrap_or(0),
    )?;
    let space = Space::System(dims);
    let ab = a.ket().kron(
        &b.ket(),
        Space::Mode(a.truncation() * b.truncation()),
    )?;
    let abc = match c {
        Some(cs) => ab.kron(
            &cs.ket(),
            Space::Mode(ab.dim() * cs.truncation()),
        )?,
        None => ab,
    };
    let mut full = Ket::new(space, abc.kron(&coupler.ket(), Space::Mode(abc.dim() * 4))?
        .amplitudes()
        .clone())?;
    full.normalize()?;
    Ok(full)
}

fn fock_amplitudes(m: usize, n: usize) -> Result<(Array1<C64>, f64)> {
    if m >= n {
        return Err(Error::Truncation {
            context: format!("Fock({m})"),
            tail: 1.0,
            tol: 0.0,
            required: m + 1,
        });
    }
    let mut amps = Array1::<C64>::zeros(n);
    amps[m] = C64::new(1.0, 0.0);
    Ok((amps, 0.0))
}

fn coherent_amplitudes(alpha: C64, n: usize) -> (Array1<C64>, f64) {
    let mut amps = Array1::<C64>::zeros(n);
    // c_m = e^{−|α|²/2} α^m/√(m!), via the stable ratio recursion.
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    let mut kept = 0.0f64;
    for m in 0..n {
        amps[m] = c;
        kept += c.norm_sqr();
        c *= alpha / C64::new(((m + 1) as f64).sqrt(), 0.0);
    }
    (amps, (1.0 - kept).max(0.0))
}

fn squeezed_amplitudes(xi: C64, n: usize) -> (Array1<C64>, f64) {
    let r = xi.norm();
    let mut amps = Array1::<C64>::zeros(n);
    if r == 0.0 {
        amps[0] = C64::new(1.0, 0.0);
        return (amps, 0.0);
    }
    let theta = xi.arg();
    let factor = -C64::from_polar(r.tanh(), theta);
    // c_{2m} with the full-series normalization 1/√cosh r, even support only.
    let mut c = C64::new((1.0 / r.cosh()).sqrt(), 0.0);
    let mut kept = 0.0f64;
    let mut m = 0usize;
    while 2 * m < n {
        amps[2 * m] = c;
        kept += c.norm_sqr();
        let k = 2.0 * m as f64;
        c *= factor * C64::new(((k + 1.0) / (k + 2.0)).sqrt(), 0.0);
        m += 1;
    }
    (amps, (1.0 - kept).max(0.0))
}

fn cat_amplitudes(alpha: C64, parity: Parity, n: usize) -> Result<(Array1<C64>, f64)> {
    let sign = match parity {
        Parity::Plus => 1.0,
        Parity::Minus => -1.0,
    };
    if parity == Parity::Minus && alpha.norm() < 1e-150 {
        return Err(Error::State(
            "odd cat state with α = 0 is the zero vector".into(),
        ));
    }
    // Unnormalized u_m = (1 ± (−1)^m)·c_m(α); full squared norm 2(1 ± e^{−2|α|²}).
    let full_norm_sqr = 2.0 * (1.0 + sign * (-2.0 * alpha.norm_sqr()).exp());
    let mut amps = Array1::<C64>::zeros(n);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    let mut kept = 0.0f64;
    let mut parity_sign = 1.0;
    for m in 0..n {
        let u = c * C64::new(1.0 + sign * parity_sign, 0.0);
        amps[m] = u;
        kept += u.norm_sqr();
        c *= alpha / C64::new(((m + 1) as f64).sqrt(), 0.0);
        parity_sign = -parity_sign;
    }
    Ok((amps, (1.0 - kept / full_norm_sqr).max(0.0)))
}

fn custom_amplitudes(list: &[(f64, f64)], n: usize) -> Result<(Array1<C64>, f64)> {
    if list.is_empty() || list.len() > n {
        return Err(Error::Dimension(format!(
            "custom amplitudes length {} incompatible with truncation {n}",
            list.len()
        )));
    }
    let mut amps = Array1::<C64>::zeros(n);
    for (m, &(re, im)) in list.iter().enumerate() {
        amps[m] = C64::new(re, im);
    }
    Ok((amps, 0.0))
}

/// Smallest truncation whose tail mass is within `tol`.
fn required_truncation(kind: &OscKind, tol: f64) -> Option<usize> {
    for n in 2..=MAX_TRUNCATION_SEARCH {
        let tail = match kind {
            OscKind::Fock(m) => {
                if *m < n {
                    0.0
                } else {
                    1.0
                }
            }
            OscKind::Coherent(alpha) => coherent_amplitudes(*alpha, n).1,
            OscKind::Squeezed(xi) => squeezed_amplitudes(*xi, n).1,
            OscKind::Cat { alpha, parity } => match cat_amplitudes(*alpha, *parity, n) {
                Ok((_, tail)) => tail,
                Err(_) => return None,
            },
            OscKind::Custom(_) => 0.0,
        };
        if tail <= tol {
            return Some(n);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::partial_trace;
    use crate::hilbert::DensityMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn coherent_vacuum_limit() {
        let s = coherent(c(0.0, 0.0), 8).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-14);
        assert!(s.tail_mass() < 1e-15);
    }

    #[test]
    fn coherent_mean_photon_number() {
        let s = coherent(c(1.0, 0.0), 15).unwrap();
        assert!((s.mean_photon_number() - 1.0).abs() < 1e-4);
        assert!(s.tail_mass() <= DEFAULT_TAIL_TOL);
    }

    #[test]
    fn coherent_overlap_analytic() {
        // ⟨α|−α⟩ = e^{−2|α|²} at α = 1, checked against the truncated sum.
        let plus = coherent(c(1.0, 0.0), 20).unwrap();
        let minus = coherent(c(-1.0, 0.0), 20).unwrap();
        let overlap = plus.ket().inner(&minus.ket()).unwrap();
        assert!((overlap.re - (-2.0f64).exp()).abs() < 1e-8);
        assert!(overlap.im.abs() < 1e-12);
    }

    #[test]
    fn coherent_displacement_recursion() {
        let alpha = c(0.6, 0.3);
        let s = coherent(alpha, 12).unwrap();
        for m in 0..8 {
            let ratio = s.amplitudes()[m + 1] / s.amplitudes()[m];
            let expected = alpha / c(((m + 1) as f64).sqrt(), 0.0);
            assert!((ratio - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn coherent_truncation_error_names_requirement() {
        let err = coherent(c(3.0, 0.0), 6).unwrap_err();
        match err {
            crate::Error::Truncation { required, tail, .. } => {
                assert!(required > 6);
                assert!(tail > DEFAULT_TAIL_TOL);
                // The suggested truncation must actually satisfy the bound.
                assert!(coherent(c(3.0, 0.0), required).is_ok());
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn squeezed_vacuum_limit_and_parity() {
        let s = squeezed_vacuum(c(0.0, 0.0), 8).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-14);
        let s = squeezed_vacuum(c(1.0, 0.0), 30).unwrap();
        for m in (1..30).step_by(2) {
            assert_eq!(s.amplitudes()[m], C64::new(0.0, 0.0));
        }
        // ⟨n̂⟩ = sinh²(r) at r = 1; truncation at 30 shifts it by ~1.5e-3,
        // and the deviation vanishes as the truncation grows.
        assert!((s.mean_photon_number() - 1.0f64.sinh().powi(2)).abs() < 3e-3);
        let wide = squeezed_vacuum(c(1.0, 0.0), 60).unwrap();
        assert!((wide.mean_photon_number() - 1.0f64.sinh().powi(2)).abs() < 1e-5);
    }

    #[test]
    fn squeezed_opposite_phase_is_distinct() {
        let plus = squeezed_vacuum(c(1.0, 0.0), 30).unwrap();
        let minus = squeezed_vacuum(c(-1.0, 0.0), 30).unwrap();
        let overlap = plus.ket().inner(&minus.ket()).unwrap().norm();
        // 1/√cosh(2r) at r = 1, up to O(tail) renormalization shifts.
        let expected = 1.0 / (2.0f64.cosh()).sqrt();
        assert!((overlap - expected).abs() < 5e-4, "overlap {overlap}");
    }

    #[test]
    fn cat_states_match_coherent_combinations() {
        let n = 15;
        let alpha = c(1.0, 0.0);
        let plus = cat(alpha, Parity::Plus, n).unwrap();
        let even_norm_sqr = 2.0 * (1.0 + (-2.0f64).exp());
        // Rebuild from coherent kets and compare.
        let cp = coherent(alpha, n).unwrap().ket();
        let cm = coherent(-alpha, n).unwrap().ket();
        let manual = cp
            .add(&cm)
            .unwrap()
            .scale(c(1.0 / even_norm_sqr.sqrt(), 0.0));
        let overlap = manual.inner(&plus.ket()).unwrap().re;
        assert!((overlap - 1.0).abs() < 1e-9);

        let minus = cat(alpha, Parity::Minus, n).unwrap();
        for m in (0..n).step_by(2) {
            assert!(minus.amplitudes()[m].norm() < 1e-15);
        }
        let cross = plus.ket().inner(&minus.ket()).unwrap().norm();
        assert!(cross < 1e-12);
    }

    #[test]
    fn cat_collinearity_with_coherent() {
        let n = 18;
        let alpha = c(1.0, 0.0);
        let plus = cat(alpha, Parity::Plus, n).unwrap();
        let minus = cat(alpha, Parity::Minus, n).unwrap();
        let wp = (2.0 * (1.0 + (-2.0f64).exp())).sqrt();
        let wm = (2.0 * (1.0 - (-2.0f64).exp())).sqrt();
        let combo = plus
            .ket()
            .scale(c(wp, 0.0))
            .add(&minus.ket().scale(c(wm, 0.0)))
            .unwrap()
            .normalized()
            .unwrap();
        let coh = coherent(alpha, n).unwrap().ket();
        assert!((combo.inner(&coh).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn odd_cat_at_zero_alpha_is_rejected() {
        assert!(matches!(
            cat(c(0.0, 0.0), Parity::Minus, 8),
            Err(crate::Error::State(_))
        ));
    }

    #[test]
    fn fock_state_bounds() {
        let s = fock(1, 4).unwrap();
        assert!((s.amplitudes()[1].re - 1.0).abs() < 1e-15);
        assert!(fock(4, 4).is_err());
    }

    #[test]
    fn product_state_layout_anchor() {
        let a = fock(0, 2).unwrap();
        let b = fock(0, 2).unwrap();
        let psi = product_state(&a, &b, None, &CouplerState::ground()).unwrap();
        assert!((psi.amplitudes()[0].re - 1.0).abs() < 1e-14);
        assert_eq!(
            psi.amplitudes().iter().filter(|v| v.norm() > 1e-15).count(),
            1
        );
    }

    #[test]
    fn product_state_coupler_populations() {
        let a = coherent(c(1.0, 0.0), 15).unwrap();
        let b = coherent(c(-1.0, 0.0), 15).unwrap();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let q = CouplerState::superposition(c(inv_sqrt2, 0.0), c(inv_sqrt2, 0.0)).unwrap();
        let psi = product_state(&a, &b, None, &q).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        let rho = DensityMatrix::from_pure(&psi);
        let rq = partial_trace(&rho, &[crate::hilbert::Subsystem::Coupler]).unwrap();
        assert!((rq.matrix()[(LEVEL_G, LEVEL_G)].re - 0.5).abs() < 1e-9);
        assert!((rq.matrix()[(LEVEL_GPRIME, LEVEL_GPRIME)].re - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fock_product_single_amplitude() {
        let a = fock(1, 3).unwrap();
        let b = fock(0, 3).unwrap();
        let psi = product_state(&a, &b, None, &CouplerState::ground()).unwrap();
        let nz: Vec<usize> = psi
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 1e-15)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nz.len(), 1);
        let dims = psi.space().system_dims().unwrap();
        assert_eq!(nz[0], dims.index_of(1, 0, 0, 0));
    }

    #[test]
    fn factory_outputs_are_normalized_with_recorded_tail() {
        for state in [
            coherent(c(1.0, 0.0), 15).unwrap(),
            squeezed_vacuum(c(1.0, 0.0), 30).unwrap(),
            cat(c(1.0, 0.0), Parity::Plus, 15).unwrap(),
            cat(c(1.0, 0.0), Parity::Minus, 15).unwrap(),
        ] {
            assert!((state.ket().norm() - 1.0).abs() < 1e-12);
            assert!(state.tail_mass() <= DEFAULT_TAIL_TOL);
        }
    }
}
