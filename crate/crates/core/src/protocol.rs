//! The ideal entangling protocol.
//!
//! Conditional evolution under the exchange Hamiltonian, the analytic swap
//! oracles with and without the phase correction, the coupler pulse with
//! post-selection, the tripartite extension, and a SWAP gate checker.

use ndarray::Array1;
use num_traits::Zero;

use crate::hamiltonians::{self, IdealParams};
use crate::hilbert::{
    expm_apply, Ket, Space, SystemDims, C64, LEVEL_E, LEVEL_F, LEVEL_G, LEVEL_GPRIME,
};
use crate::states::{product_state, CouplerState, OscState};
use crate::{Error, Result};

/// Tolerance on the phase-matching condition ∓π/2 − ωt = 2kπ.
pub const PHASE_TOL: f64 = 1e-9;

/// Outcome of one post-selection branch: the Born probability and the
/// post-measurement state (full-system ket with the coupler collapsed onto
/// the measured level).
#[derive(Clone, Debug)]
pub struct MeasurementBranch {
    pub probability: f64,
    pub state: Ket,
}

impl MeasurementBranch {
    /// The two-oscillator part of the branch as a flat ket.
    pub fn oscillator_ket(&self) -> Result<Ket> {
        let dims = self
            .state
            .space()
            .system_dims()
            .ok_or_else(|| Error::Dimension("branch state is not composite".into()))?;
        let [da, db, dc, dq] = dims.factor_dims();
        if dc != 1 {
            return Err(Error::Dimension(
                "oscillator_ket: branch includes oscillator c".into(),
            ));
        }
        // The branch must be collapsed onto a single coupler level.
        let mut level_weight = vec![0.0f64; dq];
        for (idx, v) in self.state.amplitudes().iter().enumerate() {
            level_weight[idx % dq] += v.norm_sqr();
        }
        let (level, _) = level_weight
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let spread: f64 = level_weight
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != level)
            .map(|(_, w)| w)
            .sum();
        if spread > 1e-18 {
            return Err(Error::State(
                "branch state has support on more than one coupler level".into(),
            ));
        }
        let mut amps = Array1::<C64>::zeros(da * db);
        for (idx, &v) in self.state.amplitudes().iter().enumerate() {
            if idx % dq == level {
                amps[idx / dq] = v;
            }
        }
        Ket::new(Space::Mode(da * db), amps)?.normalized()
    }
}

/// Result of running the entangling protocol up to and through the coupler
/// pulse.
#[derive(Clone, Debug)]
pub struct ProtocolResult {
    /// State right before the pulse (conditional evolution completed).
    pub pre_pulse_state: Ket,
    /// State right after the pulse.
    pub post_pulse_state: Ket,
    /// Measurement branch for coupler outcome g (the + combination).
    pub branch_g: MeasurementBranch,
    /// Measurement branch for coupler outcome g′ (the − combination).
    pub branch_gprime: MeasurementBranch,
}

/// The target entangled superposition α|φ⟩_a|φ̄⟩_b ± β|φ̄⟩_a|φ⟩_b.
#[derive(Clone, Debug)]
pub struct EntangledTarget {
    pub phi: OscState,
    pub phi_bar: OscState,
    pub alpha: C64,
    pub beta: C64,
    pub plus: bool,
}

impl EntangledTarget {
    pub fn new(
        phi: OscState,
        phi_bar: OscState,
        alpha: C64,
        beta: C64,
        plus: bool,
    ) -> Result<Self> {
        check_weights(alpha, beta)?;
        Ok(EntangledTarget {
            phi,
            phi_bar,
            alpha,
            beta,
            plus,
        })
    }

    /// Unnormalized two-oscillator ket and its squared norm
    /// ‖ψ±‖² = |α|² + |β|² ± 2 Re(ᾱβ⟨φ|φ̄⟩⟨φ̄|φ⟩).
    pub fn unnormalized(&self) -> Result<(Ket, f64)> {
        let n = self.phi.truncation();
        if n != self.phi_bar.truncation() {
            return Err(Error::Dimension(
                "entangled target requires equal truncations".into(),
            ));
        }
        let space = Space::Mode(n * n);
        let sign = if self.plus { 1.0 } else { -1.0 };
        let first = self.phi.ket().kron(&self.phi_bar.ket(), space)?;
        let second = self.phi_bar.ket().kron(&self.phi.ket(), space)?;
        let ket = first
            .scale(self.alpha)
            .add(&second.scale(self.beta * C64::new(sign, 0.0)))?;
        let norm = ket.norm();
        Ok((ket, norm * norm))
    }

    /// Normalized target with its Born weight ‖ψ±‖²/2 under an equal pulse.
    pub fn normalized(&self) -> Result<(Ket, f64)> {
        let (ket, norm_sqr) = self.unnormalized()?;
        if norm_sqr < 1e-24 {
            return Err(Error::State(
                "entangled target vanishes (identical states with opposite sign)".into(),
            ));
        }
        Ok((ket.normalized()?, norm_sqr / 2.0))
    }
}

fn check_weights(alpha: C64, beta: C64) -> Result<()> {
    let s = alpha.norm_sqr() + beta.norm_sqr();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::State(format!(
            "coupler weights must satisfy |α|² + |β|² = 1, got {s:.12}"
        )));
    }
    Ok(())
}

/// Multiplies the m-th Fock amplitude by e^{∓imπ/2} (− for λ > 0).
fn number_phase(ket: &Ket, lambda_positive: bool) -> Ket {
    let unit = if lambda_positive {
        C64::new(0.0, -1.0)
    } else {
        C64::new(0.0, 1.0)
    };
    let mut amps = ket.amplitudes().clone();
    let mut phase = C64::new(1.0, 0.0);
    for a in amps.iter_mut() {
        *a *= phase;
        phase *= unit;
    }
    Ket::new(*ket.space(), amps).expect("same space")
}

/// The bare swap at t = π/(2|λ|): the oscillators exchange their states while
/// each Fock component picks up the photon-number-dependent phase e^{∓inπ/2}.
/// Returns (new state of a, new state of b).
pub fn swap_oracle(phi_a: &Ket, phi_b: &Ket, lambda_positive: bool) -> (Ket, Ket) {
    (
        number_phase(phi_b, lambda_positive),
        number_phase(phi_a, lambda_positive),
    )
}

/// Residual of the phase condition ∓π/2 − ωt = 2kπ, minimized over both λ
/// sign branches and all integers k.
pub fn phase_condition_residual(freq_shift: f64, t: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut best = f64::INFINITY;
    for sign in [-1.0, 1.0] {
        let phase = sign * std::f64::consts::FRAC_PI_2 - freq_shift * t;
        let residual = phase - (phase / two_pi).round() * two_pi;
        best = best.min(residual.abs());
    }
    best
}

/// The corrected swap: with the phase condition met, the exchange is exact
/// with no residual phases. Errors when the condition is violated.
pub fn corrected_swap_oracle(
    phi_a: &Ket,
    phi_b: &Ket,
    freq_shift: f64,
    t: f64,
) -> Result<(Ket, Ket)> {
    let residual = phase_condition_residual(freq_shift, t);
    if residual > PHASE_TOL {
        return Err(Error::PhaseCondition {
            residual,
            tol: PHASE_TOL,
        });
    }
    Ok((phi_b.clone(), phi_a.clone()))
}

/// The ideal pre-pulse state α|φ⟩_a|φ̄⟩_b|g′⟩ + β|φ̄⟩_a|φ⟩_b|g⟩.
pub fn ideal_pre_pulse_state(
    phi: &OscState,
    phi_bar: &OscState,
    alpha: C64,
    beta: C64,
) -> Result<Ket> {
    check_weights(alpha, beta)?;
    let first = product_state(phi, phi_bar, None, &CouplerState::gprime())?;
    let second = product_state(phi_bar, phi, None, &CouplerState::ground())?;
    first.scale(alpha).add(&second.scale(beta))
}

/// The ideal pre-pulse state with the emission mode c attached in vacuum,
/// ready for [`tripartite_map`].
pub fn ideal_pre_pulse_state_with_aux(
    phi: &OscState,
    phi_bar: &OscState,
    alpha: C64,
    beta: C64,
) -> Result<Ket> {
    check_weights(alpha, beta)?;
    let vac_c = crate::states::fock(0, 2)?;
    let first = product_state(phi, phi_bar, Some(&vac_c), &CouplerState::gprime())?;
    let second = product_state(phi_bar, phi, Some(&vac_c), &CouplerState::ground())?;
    first.scale(alpha).add(&second.scale(beta))
}

/// The exact coupler pulse |g′⟩ → (|g⟩+|g′⟩)/√2, |g⟩ → (|g⟩−|g′⟩)/√2 as a
/// basis rotation on the {|g⟩, |g′⟩} pair; e and f are untouched.
pub fn coupler_pulse(psi: &Ket) -> Result<Ket> {
    let dims = psi
        .space()
        .system_dims()
        .ok_or_else(|| Error::Dimension("coupler_pulse: not a composite state".into()))?;
    let dq = dims.n_q();
    let inv_sqrt2 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amps = psi.amplitudes().clone();
    let n_blocks = amps.len() / dq;
    for blk in 0..n_blocks {
        let base = blk * dq;
        let g = amps[base + LEVEL_G];
        let gp = amps[base + LEVEL_GPRIME];
        amps[base + LEVEL_G] = (g + gp) * inv_sqrt2;
        amps[base + LEVEL_GPRIME] = (gp - g) * inv_sqrt2;
    }
    Ket::new(*psi.space(), amps)
}

/// Born-rule projection onto one coupler level.
fn project_coupler(psi: &Ket, level: usize) -> Result<MeasurementBranch> {
    let dims = psi
        .space()
        .system_dims()
        .ok_or_else(|| Error::Dimension("project_coupler: not a composite state".into()))?;
    let dq = dims.n_q();
    let mut amps = Array1::<C64>::zeros(psi.dim());
    let mut prob = 0.0;
    for (idx, &v) in psi.amplitudes().iter().enumerate() {
        if idx % dq == level {
            prob += v.norm_sqr();
            amps[idx] = v;
        }
    }
    let mut state = Ket::new(*psi.space(), amps)?;
    if prob > 1e-24 {
        state.normalize()?;
    }
    Ok(MeasurementBranch {
        probability: prob,
        state,
    })
}

/// Runs the full ideal protocol: conditional evolution for t = π/(2|λ|)
/// under the conditional exchange Hamiltonian, the coupler pulse, and both
/// post-selection branches.
pub fn run_protocol(
    phi: &OscState,
    phi_bar: &OscState,
    alpha: C64,
    beta: C64,
    params: &IdealParams,
    dims: &SystemDims,
) -> Result<ProtocolResult> {
    check_weights(alpha, beta)?;
    if dims.n_a() != dims.n_b() {
        return Err(Error::Dimension(
            "run_protocol: the swap requires equal oscillator truncations".into(),
        ));
    }
    if phi.truncation() != dims.n_a() || phi_bar.truncation() != dims.n_b() {
        return Err(Error::Dimension(
            "run_protocol: state truncations must match the system dims".into(),
        ));
    }
    let t_swap = params.t_swap()?;
    let residual = phase_condition_residual(params.freq_shift, t_swap);
    if residual > PHASE_TOL {
        return Err(Error::PhaseCondition {
            residual,
            tol: PHASE_TOL,
        });
    }

    let coupler = CouplerState::superposition(alpha, beta)?;
    let initial = product_state(phi, phi_bar, None, &coupler)?;
    let h = hamiltonians::ideal(params, dims)?;
    let pre_pulse_state = expm_apply(&h, &initial, t_swap)?;
    let post_pulse_state = coupler_pulse(&pre_pulse_state)?;
    let branch_g = project_coupler(&post_pulse_state, LEVEL_G)?;
    let branch_gprime = project_coupler(&post_pulse_state, LEVEL_GPRIME)?;

    let total = branch_g.probability + branch_gprime.probability;
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Consistency(format!(
            "branch probabilities sum to {total:.12}, expected 1"
        )));
    }
    Ok(ProtocolResult {
        pre_pulse_state,
        post_pulse_state,
        branch_g,
        branch_gprime,
    })
}

/// The ideal tripartite map: a photon is emitted into oscillator c exactly
/// when the coupler is in |g′⟩, i.e. |g′⟩|0⟩_c → |g⟩|1⟩_c with |g⟩|0⟩_c left
/// alone. The coupler disentangles into |g⟩.
pub fn tripartite_map(pre_pulse: &Ket) -> Result<Ket> {
    let dims = pre_pulse
        .space()
        .system_dims()
        .ok_or_else(|| Error::Dimension("tripartite_map: not a composite state".into()))?;
    if !dims.has_osc_c() {
        return Err(Error::Dimension(
            "tripartite_map: dims must include oscillator c (n_c = 2)".into(),
        ));
    }
    let mut amps = Array1::<C64>::zeros(pre_pulse.dim());
    for (idx, &v) in pre_pulse.amplitudes().iter().enumerate() {
        if v == C64::zero() {
            continue;
        }
        let [ia, ib, ic, iq] = dims.unravel(idx);
        if ic != 0 {
            return Err(Error::State(
                "tripartite_map: oscillator c must start in vacuum".into(),
            ));
        }
        match iq {
            LEVEL_G => amps[idx] += v,
            LEVEL_GPRIME => {
                amps[dims.index_of(ia, ib, 1, LEVEL_G)] += v;
            }
            LEVEL_E | LEVEL_F => {
                return Err(Error::State(
                    "tripartite_map: input must have coupler support on {g, g′} only".into(),
                ));
            }
            _ => unreachable!(),
        }
    }
    Ket::new(*pre_pulse.space(), amps)
}

/// Report of the four-mapping SWAP gate verification.
#[derive(Clone, Debug)]
pub struct SwapGateReport {
    /// Infidelity 1 − |⟨expected|evolved⟩|² per mapping, in the order
    /// (φφ), (φφ̄), (φ̄φ), (φ̄φ̄).
    pub infidelities: [f64; 4],
    pub worst: f64,
}

/// Verifies the SWAP gate action on the qubit encoded by {|φ⟩, |φ̄⟩}: all
/// four basis mappings under the corrected conditional evolution with the
/// coupler held in |g⟩.
pub fn swap_gate_check(
    phi: &OscState,
    phi_bar: &OscState,
    params: &IdealParams,
    dims: &SystemDims,
) -> Result<SwapGateReport> {
    let t_swap = params.t_swap()?;
    let residual = phase_condition_residual(params.freq_shift, t_swap);
    if residual > PHASE_TOL {
        return Err(Error::PhaseCondition {
            residual,
            tol: PHASE_TOL,
        });
    }
    let h = hamiltonians::ideal(params, dims)?;
    let coupler = CouplerState::ground();
    let cases: [(&OscState, &OscState); 4] = [
        (phi, phi),
        (phi, phi_bar),
        (phi_bar, phi),
        (phi_bar, phi_bar),
    ];
    let mut infidelities = [0.0; 4];
    for (i, (s1, s2)) in cases.iter().enumerate() {
        let input = product_state(s1, s2, None, &coupler)?;
        let evolved = expm_apply(&h, &input, t_swap)?;
        let expected = product_state(s2, s1, None, &coupler)?;
        let overlap = expected.inner(&evolved)?.norm_sqr();
        infidelities[i] = (1.0 - overlap).max(0.0);
    }
    let worst = infidelities.iter().copied().fold(0.0, f64::max);
    Ok(SwapGateReport {
        infidelities,
        worst,
    })
}

/// Coupler purity of a pure composite state: tr(ρ_q²) of the reduced coupler
/// state, 1 when the coupler factorizes.
pub fn coupler_purity(psi: &Ket) -> Result<f64> {
    let reduced = crate::hilbert::reduced_from_pure(psi, &[crate::hilbert::Subsystem::Coupler])?;
    Ok(reduced.purity())
}
