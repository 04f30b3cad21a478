//! Fidelity, populations, purity, and entanglement diagnostics.

use crate::hilbert::linalg;
use crate::hilbert::{partial_trace, reduced_from_pure, DensityMatrix, Ket, Subsystem};
use crate::{Error, Result};

/// One diagnostic sample along a trajectory. Times are in seconds; the tail
/// fields hold the population of each oscillator's topmost retained Fock
/// state (truncation-pressure proxies) when they were computed.
#[derive(Clone, Debug)]
pub struct MetricSample {
    pub time: f64,
    pub fidelity: Option<f64>,
    pub trace: f64,
    pub purity: f64,
    /// Coupler level populations (g, g′, e, f).
    pub populations: [f64; 4],
    pub tail_a: Option<f64>,
    pub tail_b: Option<f64>,
    pub lambda_min: Option<f64>,
}

/// Fidelity F = √(⟨ψ_id|ρ|ψ_id⟩) against a pure target.
///
/// Floating-point negativity of the quadratic form is clipped to zero; a
/// clip beyond −10⁻⁹ is reported on stderr since it signals a positivity
/// problem rather than roundoff.
pub fn fidelity(rho: &DensityMatrix, psi_id: &Ket) -> Result<f64> {
    psi_id.assert_normalized(1e-6)?;
    let q = rho.expectation(psi_id)?.re;
    if q < -1e-9 {
        eprintln!("metrics::fidelity: clipped negative quadratic form {q:.3e}");
    }
    Ok(q.max(0.0).sqrt())
}

/// Pure-state fidelity |⟨ψ_id|ψ⟩|.
pub fn fidelity_pure(psi: &Ket, psi_id: &Ket) -> Result<f64> {
    Ok(psi_id.inner(psi)?.norm())
}

/// Coupler level populations (p_g, p_g′, p_e, p_f); sums to tr ρ.
pub fn level_populations(rho: &DensityMatrix) -> Result<[f64; 4]> {
    let reduced = partial_trace(rho, &[Subsystem::Coupler])?;
    let mut pops = [0.0; 4];
    for (l, p) in pops.iter_mut().enumerate() {
        *p = reduced.matrix()[(l, l)].re;
    }
    Ok(pops)
}

/// Coupler level populations of a pure state.
pub fn level_populations_pure(psi: &Ket) -> Result<[f64; 4]> {
    let dims = psi
        .space()
        .system_dims()
        .ok_or_else(|| Error::Dimension("level_populations: not a composite state".into()))?;
    let mut pops = [0.0; 4];
    for (idx, amp) in psi.amplitudes().iter().enumerate() {
        let [_, _, _, iq] = dims.unravel(idx);
        pops[iq] += amp.norm_sqr();
    }
    Ok(pops)
}

/// Population of one oscillator's topmost retained Fock state.
pub fn top_level_population(rho: &DensityMatrix, osc: Subsystem) -> Result<f64> {
    let reduced = partial_trace(rho, &[osc])?;
    let top = reduced.dim() - 1;
    Ok(reduced.matrix()[(top, top)].re)
}

/// Same for a pure state.
pub fn top_level_population_pure(psi: &Ket, osc: Subsystem) -> Result<f64> {
    let reduced = reduced_from_pure(psi, &[osc])?;
    let top = reduced.dim() - 1;
    Ok(reduced.matrix()[(top, top)].re)
}

/// Von Neumann entanglement entropy (natural log) of a pure state across the
/// cut defined by `keep`. Eigenvalues below 10⁻¹² are dropped (0·ln 0 limit).
pub fn entanglement_entropy(psi: &Ket, keep: &[Subsystem]) -> Result<f64> {
    psi.assert_normalized(1e-6)?;
    let reduced = reduced_from_pure(psi, keep)?;
    let (w, _) = linalg::eigh(reduced.matrix());
    let mut s = 0.0;
    for &lambda in w.iter() {
        if lambda > 1e-12 {
            s -= lambda * lambda.ln();
        }
    }
    Ok(s)
}

/// Assembles a sample from a density matrix; fidelity only when a target is
/// supplied, tails and positivity only when requested (they cost O(d²)–O(d³)).
pub fn sample_from_density(
    time: f64,
    rho: &DensityMatrix,
    target: Option<&Ket>,
    with_tails: bool,
    with_positivity: bool,
) -> Result<MetricSample> {
    let fidelity_val = match target {
        Some(psi) => Some(fidelity(rho, psi)?),
        None => None,
    };
    let (tail_a, tail_b) = if with_tails {
        (
            Some(top_level_population(rho, Subsystem::OscA)?),
            Some(top_level_population(rho, Subsystem::OscB)?),
        )
    } else {
        (None, None)
    };
    Ok(MetricSample {
        time,
        fidelity: fidelity_val,
        trace: rho.trace().re,
        purity: rho.purity(),
        populations: level_populations(rho)?,
        tail_a,
        tail_b,
        lambda_min: if with_positivity {
            Some(rho.min_eigenvalue())
        } else {
            None
        },
    })
}

/// Assembles a sample from a pure state.
pub fn sample_from_pure(time: f64, psi: &Ket, target: Option<&Ket>) -> Result<MetricSample> {
    let fidelity_val = match target {
        Some(id) => Some(fidelity_pure(psi, id)?),
        None => None,
    };
    let norm_sqr = psi.norm() * psi.norm();
    Ok(MetricSample {
        time,
        fidelity: fidelity_val,
        trace: norm_sqr,
        purity: 1.0,
        populations: level_populations_pure(psi)?,
        tail_a: Some(top_level_population_pure(psi, Subsystem::OscA)?),
        tail_b: Some(top_level_population_pure(psi, Subsystem::OscB)?),
        lambda_min: None,
    })
}
