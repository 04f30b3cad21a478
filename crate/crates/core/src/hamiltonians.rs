//! Hamiltonian builders and the parameter-matching solver.
//!
//! All rates and detunings are angular frequencies (rad/s). Time-dependent
//! Hamiltonians are sums of harmonically phased sparse terms evaluated at a
//! requested time; the integrators decide the sampling.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::hilbert::{
    annihilation, creation, level_projector, level_transition, number_op, OperatorMatrix, Space,
    Subsystem, SystemDims, C64, LEVEL_E, LEVEL_F, LEVEL_G,
};
use crate::{Error, Result};

/// Physical drive and coupling parameters of the four-level construction.
///
/// Detunings: `det_a` is the oscillator-a ↔ f–g detuning, `det_pulse` the
/// classical-pulse ↔ f–e detuning, `det_b` the oscillator-b ↔ e–g detuning.
/// The a-side Raman detuning is the derived quantity `det_a − det_pulse`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Oscillator-a coupling to the f–g transition (rad/s).
    pub g_a: f64,
    /// Oscillator-b coupling to the e–g transition (rad/s).
    pub g_b: f64,
    /// Classical pulse Rabi frequency (rad/s).
    pub rabi: f64,
    /// Δ_a = ω_fg − ω_a (rad/s).
    pub det_a: f64,
    /// Δ = ω_fe − ω_p (rad/s).
    pub det_pulse: f64,
    /// δ_b = ω_eg − ω_b (rad/s).
    pub det_b: f64,
    /// Resonator frequencies (rad/s), used only by the crosstalk term.
    pub omega_a: f64,
    pub omega_b: f64,
    /// Inter-resonator crosstalk strength (rad/s).
    pub g_ab: f64,
    /// Phase-matching index k ≥ 1.
    pub k: u32,
    /// Sign of the conditional coupling produced by the construction.
    pub lambda_positive: bool,
}

impl PhysicalParams {
    /// δ_a = Δ_a − Δ, enforced by definition.
    pub fn det_raman_a(&self) -> f64 {
        self.det_a - self.det_pulse
    }

    /// The pulse-assisted Raman coupling g̃_a = g_a·Ω·(Δ_a⁻¹ + Δ⁻¹)/2.
    pub fn raman_coupling(&self) -> f64 {
        self.g_a * self.rabi * (1.0 / self.det_a + 1.0 / self.det_pulse) / 2.0
    }

    /// Resonator frequency difference Δ_ab = ω_a − ω_b.
    pub fn delta_ab(&self) -> f64 {
        self.omega_a - self.omega_b
    }

    /// True when δ_a and δ_b agree to 1 part in 10⁹.
    pub fn is_phase_matched(&self) -> bool {
        let d = self.det_raman_a();
        (d - self.det_b).abs() <= 1e-9 * self.det_b.abs().max(d.abs())
    }

    /// Sets the resonator frequencies and the crosstalk strength.
    pub fn with_resonators(mut self, omega_a: f64, omega_b: f64, g_ab: f64) -> Self {
        self.omega_a = omega_a;
        self.omega_b = omega_b;
        self.g_ab = g_ab;
        self
    }
}

/// Parameters of the conditional two-oscillator Hamiltonian: the common
/// frequency shift and the exchange coupling, both sign-carrying.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealParams {
    /// Conditional frequency shift ω (rad/s, may be negative).
    pub freq_shift: f64,
    /// Conditional exchange coupling λ (rad/s, sign carried).
    pub coupling: f64,
}

impl IdealParams {
    /// Swap time π/(2|λ|).
    pub fn t_swap(&self) -> Result<f64> {
        if self.coupling == 0.0 || !self.coupling.is_finite() {
            return Err(Error::Parameter(
                "swap time undefined for zero exchange coupling".into(),
            ));
        }
        Ok(std::f64::consts::PI / (2.0 * self.coupling.abs()))
    }
}

/// Output of [`solve_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolvedParams {
    pub physical: PhysicalParams,
    pub ideal: IdealParams,
    pub t_swap: f64,
}

/// One large-detuning condition `large ≫ small`, reported as the margin
/// ratio large/small (≫ satisfied when the ratio is large).
#[derive(Clone, Debug)]
pub struct DetuningCondition {
    pub name: &'static str,
    pub small: f64,
    pub large: f64,
    pub ratio: f64,
}

/// Report over every large-detuning inequality of the derivation.
#[derive(Clone, Debug, Default)]
pub struct DetuningReport {
    pub conditions: Vec<DetuningCondition>,
}

impl DetuningReport {
    pub fn min_ratio(&self) -> f64 {
        self.conditions
            .iter()
            .map(|c| c.ratio)
            .fold(f64::INFINITY, f64::min)
    }
}

/// A harmonically phased Hermitian pair: amplitude·e^{i·freq·t}·op + h.c.
#[derive(Clone, Debug)]
pub struct HarmonicTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub op: OperatorMatrix,
    pub op_dag: OperatorMatrix,
}

/// A Hamiltonian given as a static sparse part plus harmonically phased
/// terms; evaluation-at-t is cheap and does not rebuild sparsity patterns.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    space: Space,
    static_part: Option<OperatorMatrix>,
    terms: Vec<HarmonicTerm>,
}

impl Hamiltonian {
    pub fn from_static(op: OperatorMatrix) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::Consistency(
                "static Hamiltonian must carry a verified Hermitian flag".into(),
            ));
        }
        Ok(Hamiltonian {
            space: *op.space(),
            static_part: Some(op),
            terms: Vec::new(),
        })
    }

    fn new(
        space: Space,
        static_part: Option<OperatorMatrix>,
        terms: Vec<(f64, f64, OperatorMatrix)>,
    ) -> Self {
        let terms = terms
            .into_iter()
            .map(|(amplitude, frequency, op)| {
                let op_dag = op.dagger();
                HarmonicTerm {
                    amplitude,
                    frequency,
                    op,
                    op_dag,
                }
            })
            .collect();
        Hamiltonian {
            space,
            static_part,
            terms,
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.frequency == 0.0)
    }

    pub fn static_part(&self) -> Option<&OperatorMatrix> {
        self.static_part.as_ref()
    }

    pub fn terms(&self) -> &[HarmonicTerm] {
        &self.terms
    }

    /// Largest harmonic phase frequency (rad/s); 0 for a static Hamiltonian.
    pub fn max_phase_frequency(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.frequency.abs())
            .fold(0.0, f64::max)
    }

    /// Sparse evaluation H(t).
    pub fn sparse_at(&self, t: f64) -> OperatorMatrix {
        let mut acc = match &self.static_part {
            Some(s) => s.clone(),
            None => OperatorMatrix::zeros(self.space),
        };
        for term in &self.terms {
            let phase = C64::from_polar(term.amplitude, term.frequency * t);
            let part = term
                .op
                .scale(phase)
                .add(&term.op_dag.scale(phase.conj()))
                .expect("same space");
            acc = acc.add(&part).expect("same space");
        }
        acc.into_hermitian(1e-12)
            .expect("harmonic pairs are Hermitian by construction")
    }

    /// H(t)|x⟩ without forming the sparse sum.
    pub fn apply(&self, t: f64, x: &Array1<C64>) -> Array1<C64> {
        let mut y = match &self.static_part {
            Some(s) => s.matvec(x),
            None => Array1::zeros(x.len()),
        };
        for term in &self.terms {
            let phase = C64::from_polar(term.amplitude, term.frequency * t);
            y = y + term.op.matvec(x).mapv(|v| v * phase)
                + term.op_dag.matvec(x).mapv(|v| v * phase.conj());
        }
        y
    }

    /// Sum of two Hamiltonians on the same space.
    pub fn add(mut self, other: Hamiltonian) -> Result<Hamiltonian> {
        self.space.check_match(&other.space, "hamiltonian add")?;
        let static_part = match (self.static_part.take(), other.static_part) {
            (Some(a), Some(b)) => Some(a.add(&b)?),
            (Some(a), None) => Some(a),
            (None, b) => b,
        };
        let mut terms = self.terms;
        terms.extend(other.terms);
        Ok(Hamiltonian {
            space: self.space,
            static_part,
            terms,
        })
    }
}

/// Lifted mode and coupler building blocks shared by the builders.
struct Blocks {
    a: OperatorMatrix,
    a_dag: OperatorMatrix,
    b: OperatorMatrix,
    b_dag: OperatorMatrix,
    num_a: OperatorMatrix,
    num_b: OperatorMatrix,
}

impl Blocks {
    fn build(dims: &SystemDims) -> Result<Self> {
        Ok(Blocks {
            a: annihilation(dims.n_a())?.lift(Subsystem::OscA, dims)?,
            a_dag: creation(dims.n_a())?.lift(Subsystem::OscA, dims)?,
            b: annihilation(dims.n_b())?.lift(Subsystem::OscB, dims)?,
            b_dag: creation(dims.n_b())?.lift(Subsystem::OscB, dims)?,
            num_a: number_op(dims.n_a())?.lift(Subsystem::OscA, dims)?,
            num_b: number_op(dims.n_b())?.lift(Subsystem::OscB, dims)?,
        })
    }
}

fn projector(level: usize, dims: &SystemDims) -> Result<OperatorMatrix> {
    level_projector(level).lift(Subsystem::Coupler, dims)
}

fn transition(upper: usize, lower: usize, dims: &SystemDims) -> Result<OperatorMatrix> {
    level_transition(upper, lower).lift(Subsystem::Coupler, dims)
}

/// The conditional Hamiltonian
/// H = ω(a†a + b†b)|g⟩⟨g| + λ(a†b + ab†)|g⟩⟨g|.
pub fn ideal(p: &IdealParams, dims: &SystemDims) -> Result<OperatorMatrix> {
    let blk = Blocks::build(dims)?;
    let pg = projector(LEVEL_G, dims)?;
    let number_sum = blk.num_a.add(&blk.num_b)?;
    let hop = blk.a_dag.matmul(&blk.b)?.add(&blk.a.matmul(&blk.b_dag)?)?;
    let h = number_sum
        .matmul(&pg)?
        .scale(C64::new(p.freq_shift, 0.0))
        .add(&hop.matmul(&pg)?.scale(C64::new(p.coupling, 0.0)))?;
    h.into_hermitian(1e-12)
}

/// The full interaction-picture Hamiltonian
/// H(t) = g_a e^{iΔ_a t} a σ_fg⁺ + g_b e^{iδ_b t} b σ_eg⁺ + Ω e^{iΔt} σ_fe⁺ + H.c.
pub fn full(p: &PhysicalParams, dims: &SystemDims) -> Result<Hamiltonian> {
    let blk = Blocks::build(dims)?;
    let t_fg = transition(LEVEL_F, LEVEL_G, dims)?;
    let t_eg = transition(LEVEL_E, LEVEL_G, dims)?;
    let t_fe = transition(LEVEL_F, LEVEL_E, dims)?;
    let terms = vec![
        (p.g_a, p.det_a, blk.a.matmul(&t_fg)?),
        (p.g_b, p.det_b, blk.b.matmul(&t_eg)?),
        (p.rabi, p.det_pulse, t_fe),
    ];
    Ok(Hamiltonian::new(Space::System(*dims), None, terms))
}

/// [`full`] evaluated at one time.
pub fn full_at(p: &PhysicalParams, t: f64, dims: &SystemDims) -> Result<OperatorMatrix> {
    Ok(full(p, dims)?.sparse_at(t))
}

/// The unwanted inter-resonator crosstalk ε = g_ab e^{iΔ_ab t} a†b + h.c.,
/// identity on the coupler.
pub fn crosstalk(p: &PhysicalParams, dims: &SystemDims) -> Result<Hamiltonian> {
    let blk = Blocks::build(dims)?;
    let terms = vec![(p.g_ab, p.delta_ab(), blk.a_dag.matmul(&blk.b)?)];
    Ok(Hamiltonian::new(Space::System(*dims), None, terms))
}

/// [`crosstalk`] evaluated at one time.
pub fn crosstalk_at(p: &PhysicalParams, t: f64, dims: &SystemDims) -> Result<OperatorMatrix> {
    Ok(crosstalk(p, dims)?.sparse_at(t))
}

/// First adiabatic-elimination stage: Stark shifts of the f and e levels plus
/// the pulse-assisted Raman term and the bare b coupling.
pub fn effective_stage2(p: &PhysicalParams, dims: &SystemDims) -> Result<Hamiltonian> {
    let blk = Blocks::build(dims)?;
    let pg = projector(LEVEL_G, dims)?;
    let pe = projector(LEVEL_E, dims)?;
    let pf = projector(LEVEL_F, dims)?;
    let t_eg = transition(LEVEL_E, LEVEL_G, dims)?;

    // (g_a²/Δ_a)[P_f + n̂_a(P_f − P_g)] + (Ω²/Δ)(P_f − P_e)
    let stark_a = pf
        .add(&blk.num_a.matmul(&pf)?)?
        .add(&blk.num_a.matmul(&pg)?.scale(C64::new(-1.0, 0.0)))?
        .scale(C64::new(p.g_a * p.g_a / p.det_a, 0.0));
    let stark_pulse = pf
        .add(&pe.scale(C64::new(-1.0, 0.0)))?
        .scale(C64::new(p.rabi * p.rabi / p.det_pulse, 0.0));
    let static_part = stark_a.add(&stark_pulse)?.into_hermitian(1e-12)?;

    let terms = vec![
        (-p.raman_coupling(), p.det_raman_a(), blk.a.matmul(&t_eg)?),
        (p.g_b, p.det_b, blk.b.matmul(&t_eg)?),
    ];
    Ok(Hamiltonian::new(
        Space::System(*dims),
        Some(static_part),
        terms,
    ))
}

/// Second elimination stage: all diagonal Stark terms plus the conditional
/// hopping term with prefactor −(g̃_a g_b/2)(1/δ_a + 1/δ_b) and phase
/// e^{i(δ_a−δ_b)t}.
pub fn effective_stage3(p: &PhysicalParams, dims: &SystemDims) -> Result<Hamiltonian> {
    let blk = Blocks::build(dims)?;
    let pg = projector(LEVEL_G, dims)?;
    let pe = projector(LEVEL_E, dims)?;
    let pf = projector(LEVEL_F, dims)?;
    let g_tilde = p.raman_coupling();
    let det_raman_a = p.det_raman_a();

    let shifted = |num: &OperatorMatrix,
                   up: &OperatorMatrix,
                   strength: f64|
     -> Result<OperatorMatrix> {
        Ok(up
            .add(&num.matmul(up)?)?
            .add(&num.matmul(&pg)?.scale(C64::new(-1.0, 0.0)))?
            .scale(C64::new(strength, 0.0)))
    };
    let static_part = shifted(&blk.num_a, &pe, g_tilde * g_tilde / det_raman_a)?
        .add(&shifted(&blk.num_b, &pe, p.g_b * p.g_b / p.det_b)?)?
        .add(&shifted(&blk.num_a, &pf, p.g_a * p.g_a / p.det_a)?)?
        .add(
            &pf.add(&pe.scale(C64::new(-1.0, 0.0)))?
                .scale(C64::new(p.rabi * p.rabi / p.det_pulse, 0.0)),
        )?
        .into_hermitian(1e-12)?;

    // (a b† |e⟩⟨e| − a† b |g⟩⟨g|) e^{i(δ_a−δ_b)t} + h.c.
    let hop = blk
        .a
        .matmul(&blk.b_dag)?
        .matmul(&pe)?
        .add(&blk.a_dag.matmul(&blk.b)?.matmul(&pg)?.scale(C64::new(-1.0, 0.0)))?;
    let prefactor = -(g_tilde * p.g_b / 2.0) * (1.0 / det_raman_a + 1.0 / p.det_b);
    let terms = vec![(prefactor, det_raman_a - p.det_b, hop)];
    Ok(Hamiltonian::new(
        Space::System(*dims),
        Some(static_part),
        terms,
    ))
}

/// The final effective Hamiltonian, static and conditioned on |g⟩:
/// −(g_a²/Δ_a + g̃_a²/δ) a†a|g⟩⟨g| − (g_b²/δ) b†b|g⟩⟨g| + λ(ab† + a†b)|g⟩⟨g|.
pub fn effective(p: &PhysicalParams, dims: &SystemDims) -> Result<OperatorMatrix> {
    let freq_shift_a = effective_shift_a(p);
    let freq_shift_b = effective_shift_b(p);
    let coupling = effective_coupling(p);
    let blk = Blocks::build(dims)?;
    let pg = projector(LEVEL_G, dims)?;
    let hop = blk.a.matmul(&blk.b_dag)?.add(&blk.a_dag.matmul(&blk.b)?)?;
    let h = blk
        .num_a
        .matmul(&pg)?
        .scale(C64::new(freq_shift_a, 0.0))
        .add(&blk.num_b.matmul(&pg)?.scale(C64::new(freq_shift_b, 0.0)))?
        .add(&hop.matmul(&pg)?.scale(C64::new(coupling, 0.0)))?;
    h.into_hermitian(1e-12)
}

/// Effective a-mode frequency shift −(g_a²/Δ_a + g̃_a²/δ_a).
pub fn effective_shift_a(p: &PhysicalParams) -> f64 {
    let g_tilde = p.raman_coupling();
    -(p.g_a * p.g_a / p.det_a + g_tilde * g_tilde / p.det_raman_a())
}

/// Effective b-mode frequency shift −g_b²/δ_b.
pub fn effective_shift_b(p: &PhysicalParams) -> f64 {
    -(p.g_b * p.g_b / p.det_b)
}

/// Effective exchange coupling λ = (g̃_a g_b/2)(1/δ_a + 1/δ_b), reducing to
/// g̃_a g_b/δ when phase-matched.
pub fn effective_coupling(p: &PhysicalParams) -> f64 {
    p.raman_coupling() * p.g_b / 2.0 * (1.0 / p.det_raman_a() + 1.0 / p.det_b)
}

/// Solves the parameter-matching relations for the λ > 0 branch: given g_a,
/// the two large detunings, the matched Raman detuning δ, and the phase index
/// k, returns the g_b and Ω that make the effective Hamiltonian a clean
/// conditional exchange with the phase condition −π/2 − ωt_swap = 2kπ.
pub fn solve_params(
    g_a: f64,
    det_a: f64,
    det_pulse: f64,
    det_raman: f64,
    k: u32,
) -> Result<SolvedParams> {
    for (name, v) in [
        ("g_a", g_a),
        ("det_a", det_a),
        ("det_pulse", det_pulse),
        ("det_raman", det_raman),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parameter(format!(
                "solve_params: {name} must be positive and finite, got {v}"
            )));
        }
    }
    if k < 1 {
        return Err(Error::Parameter("solve_params: k must be at least 1".into()));
    }
    let mismatch = (det_a - det_pulse - det_raman).abs();
    if mismatch > 1e-9 * det_raman {
        return Err(Error::Parameter(format!(
            "solve_params: detunings must satisfy det_a − det_pulse = det_raman \
             (mismatch {mismatch:.3e} rad/s)"
        )));
    }

    let kf = k as f64;
    let branch = 2.0 * kf * (2.0 * kf + 1.0);
    let g_b = (4.0 * kf + 1.0) * g_a / (2.0 * (branch * det_a / det_raman).sqrt());
    let rabi =
        det_pulse * det_a / (det_pulse + det_a) * (det_raman / (branch * det_a)).sqrt();

    let physical = PhysicalParams {
        g_a,
        g_b,
        rabi,
        det_a,
        det_pulse,
        det_b: det_raman,
        omega_a: 0.0,
        omega_b: 0.0,
        g_ab: 0.0,
        k,
        lambda_positive: true,
    };

    let g_tilde = physical.raman_coupling();
    let coupling = g_tilde * g_b / det_raman;
    let freq_shift = -g_b * g_b / det_raman;
    let ideal = IdealParams {
        freq_shift,
        coupling,
    };
    let t_swap = ideal.t_swap()?;

    // Matching-relation self-check.
    let lhs = g_a * g_a / det_a + g_tilde * g_tilde / det_raman;
    let rhs = g_b * g_b / det_raman;
    if (lhs - rhs).abs() > 1e-9 * rhs {
        return Err(Error::Consistency(format!(
            "solve_params: matching relation violated: {lhs:.12e} vs {rhs:.12e}"
        )));
    }
    // Phase-condition self-check: −π/2 − ωt_swap must be a multiple of 2π.
    let phase = -std::f64::consts::FRAC_PI_2 - freq_shift * t_swap;
    let residual = (phase / (2.0 * std::f64::consts::PI)).round() * 2.0 * std::f64::consts::PI
        - phase;
    if residual.abs() > 1e-9 {
        return Err(Error::Consistency(format!(
            "solve_params: phase condition residual {residual:.3e} rad"
        )));
    }

    Ok(SolvedParams {
        physical,
        ideal,
        t_swap,
    })
}

/// Evaluates every large-detuning inequality of the derivation and reports
/// the margin ratio (large/small) of each.
pub fn check_detuning_conditions(p: &PhysicalParams) -> DetuningReport {
    let g_tilde = p.raman_coupling().abs();
    let det_raman_a = p.det_raman_a();
    let stark_a = p.g_a * p.g_a / p.det_a;
    let stark_pulse = p.rabi * p.rabi / p.det_pulse;
    let raman_cross_ab = p.g_a * p.g_b * (1.0 / p.det_a + 1.0 / p.det_b) / 2.0;
    let raman_cross_pb = p.rabi * p.g_b * (1.0 / p.det_pulse + 1.0 / p.det_b) / 2.0;

    let mut report = DetuningReport::default();
    let mut push = |name: &'static str, small: f64, large: f64| {
        report.conditions.push(DetuningCondition {
            name,
            small,
            large,
            ratio: if small == 0.0 {
                f64::INFINITY
            } else {
                large / small
            },
        });
    };

    push("det_a >> g_a", p.g_a, p.det_a);
    push("det_pulse >> rabi", p.rabi, p.det_pulse);
    push(
        "det_a - det_b >> g_a g_b (1/det_a + 1/det_b)/2",
        raman_cross_ab,
        p.det_a - p.det_b,
    );
    push(
        "det_pulse - det_b >> rabi g_b (1/det_pulse + 1/det_b)/2",
        raman_cross_pb,
        p.det_pulse - p.det_b,
    );
    push("det_raman_a >> raman_coupling", g_tilde, det_raman_a);
    push("det_raman_a >> g_a^2/det_a", stark_a, det_raman_a);
    push("det_raman_a >> rabi^2/det_pulse", stark_pulse, det_raman_a);
    push("det_b >> g_b", p.g_b, p.det_b);
    push("det_b >> g_a^2/det_a", stark_a, p.det_b);
    push("det_b >> rabi^2/det_pulse", stark_pulse, p.det_b);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{Ket, LEVEL_GPRIME};

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    /// The working point used throughout: g_a/2π = 60 MHz, Δ_a/2π = 1.5 GHz,
    /// Δ/2π = 1.25 GHz, δ/2π = 0.25 GHz, k = 1.
    fn solved() -> SolvedParams {
        solve_params(
            TWO_PI * 60.0e6,
            TWO_PI * 1.5e9,
            TWO_PI * 1.25e9,
            TWO_PI * 0.25e9,
            1,
        )
        .unwrap()
    }

    fn max_abs(op: &OperatorMatrix) -> f64 {
        (0..op.dim())
            .flat_map(|r| op.row(r).1.iter().map(|v| v.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    #[test]
    fn solver_reproduces_reference_point() {
        let s = solved();
        assert!((s.physical.g_b / TWO_PI / 1e6 - 25.0).abs() < 1.0);
        assert!((s.physical.rabi / TWO_PI / 1e6 - 114.0).abs() < 1.0);
        assert!((s.t_swap * 1e6 - 0.5).abs() < 0.01);
        // g̃_a comes out at exactly 2π·5 MHz at this point.
        assert!((s.physical.raman_coupling() / TWO_PI / 1e6 - 5.0).abs() < 1e-6);
        // Matching relation, relative to 1e-9.
        let lhs = s.physical.g_a.powi(2) / s.physical.det_a
            + s.physical.raman_coupling().powi(2) / s.physical.det_raman_a();
        let rhs = s.physical.g_b.powi(2) / s.physical.det_b;
        assert!((lhs - rhs).abs() <= 1e-9 * rhs);
        // Frequency shift −g_b²/δ = −2π·2.5 MHz.
        assert!((s.ideal.freq_shift / TWO_PI / 1e6 + 2.5).abs() < 1e-6);
        // λ = g̃_a g_b/δ ≈ 2π·0.5 MHz.
        assert!((s.ideal.coupling / TWO_PI / 1e6 - 0.5).abs() < 1e-3);
        // ω·t_swap = −5π/2 closes the phase condition −π/2 − ωt = 2π.
        let phase = s.ideal.freq_shift * s.t_swap;
        assert!((phase + 2.5 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn solver_rejects_bad_inputs() {
        assert!(solve_params(-1.0, 1.0, 0.8, 0.2, 1).is_err());
        assert!(solve_params(1.0, 1.0, 0.8, 0.2, 0).is_err());
        // Detuning bookkeeping must close: Δ_a − Δ = δ.
        assert!(solve_params(1.0, 10.0, 8.0, 3.0, 1).is_err());
    }

    #[test]
    fn ideal_hamiltonian_structure() {
        let dims = SystemDims::new(3, 3).unwrap();
        let p = IdealParams {
            freq_shift: 0.7,
            coupling: 1.3,
        };
        let h = ideal(&p, &dims).unwrap();
        // Zero on any state with the coupler in g′.
        for ia in 0..3 {
            for ib in 0..3 {
                let idx = dims.index_of(ia, ib, 0, LEVEL_GPRIME);
                let psi = Ket::basis(Space::System(dims), idx);
                let hpsi = h.matvec(psi.amplitudes());
                assert!(hpsi.iter().map(|v| v.norm()).sum::<f64>() < 1e-14);
            }
        }
        // One-excitation block at ω = 0: H|1,0,g⟩ = λ|0,1,g⟩.
        let p0 = IdealParams {
            freq_shift: 0.0,
            coupling: 1.3,
        };
        let h0 = ideal(&p0, &dims).unwrap();
        let psi = Ket::basis(Space::System(dims), dims.index_of(1, 0, 0, LEVEL_G));
        let hpsi = h0.matvec(psi.amplitudes());
        let target = dims.index_of(0, 1, 0, LEVEL_G);
        assert!((hpsi[target] - C64::new(1.3, 0.0)).norm() < 1e-14);
        assert!(hpsi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() - 1.3 < 1e-12);
    }

    #[test]
    fn ideal_parts_commute() {
        // The shift part and the exchange part share the |g⟩⟨g| projector and
        // conserve total photon number, so they commute.
        let dims = SystemDims::new(4, 4).unwrap();
        let shift_only = ideal(
            &IdealParams {
                freq_shift: 1.0,
                coupling: 0.0,
            },
            &dims,
        )
        .unwrap();
        let hop_only = ideal(
            &IdealParams {
                freq_shift: 0.0,
                coupling: 1.0,
            },
            &dims,
        )
        .unwrap();
        let ab = shift_only.matmul(&hop_only).unwrap();
        let ba = hop_only.matmul(&shift_only).unwrap();
        let diff = ab.add(&ba.scale(C64::new(-1.0, 0.0))).unwrap();
        assert!(max_abs(&diff) < 1e-12);
    }

    #[test]
    fn full_hamiltonian_matrix_elements() {
        let s = solved();
        let dims = SystemDims::new(2, 2).unwrap();
        let t = 0.37e-9;
        let h = full_at(&s.physical, t, &dims).unwrap();
        assert!(h.is_hermitian());
        // ⟨0_a 0_b f|H|1_a 0_b g⟩ = g_a e^{iΔ_a t}.
        let row = dims.index_of(0, 0, 0, LEVEL_F);
        let col = dims.index_of(1, 0, 0, LEVEL_G);
        let expected = C64::from_polar(s.physical.g_a, s.physical.det_a * t);
        assert!((h.entry(row, col) - expected).norm() < 1e-6 * s.physical.g_a);
        // ⟨0_a 0_b e|H|0_a 1_b g⟩ = g_b e^{iδ_b t}.
        let row = dims.index_of(0, 0, 0, LEVEL_E);
        let col = dims.index_of(0, 1, 0, LEVEL_G);
        let expected = C64::from_polar(s.physical.g_b, s.physical.det_b * t);
        assert!((h.entry(row, col) - expected).norm() < 1e-6 * s.physical.g_b);
        // g′ row and column vanish identically.
        for r in 0..h.dim() {
            let (cols, vals) = h.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if r % 4 == LEVEL_GPRIME || c % 4 == LEVEL_GPRIME {
                    assert!(v.norm() < 1e-300, "g′ should be decoupled");
                }
            }
        }
        // Real matrix at t = 0 (all couplings real).
        let h0 = full_at(&s.physical, 0.0, &dims).unwrap();
        for r in 0..h0.dim() {
            let (_, vals) = h0.row(r);
            for v in vals {
                assert!(v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crosstalk_matrix_elements() {
        let s = solved();
        let physical = s
            .physical
            .clone()
            .with_resonators(TWO_PI * 7.5e9, TWO_PI * 4.5e9, TWO_PI * 6.0e6);
        let dims = SystemDims::new(2, 2).unwrap();
        let eps = crosstalk_at(&physical, 0.0, &dims).unwrap();
        // ⟨0,1|ε(0)|1,0⟩ = g_ab on every coupler level.
        for level in 0..4 {
            let row = dims.index_of(0, 1, 0, level);
            let col = dims.index_of(1, 0, 0, level);
            assert!((eps.entry(row, col) - C64::new(physical.g_ab, 0.0)).norm() < 1e-9);
        }
        // Zero crosstalk strength gives the zero operator.
        let none = s.physical.clone().with_resonators(1.0, 0.5, 0.0);
        let eps0 = crosstalk_at(&none, 0.0, &dims).unwrap();
        assert_eq!(eps0.nnz(), 0);
    }

    #[test]
    fn stage_builders_match_printed_strengths() {
        let s = solved();
        // Raman coupling from the printed rounded Ω = 2π·114 MHz.
        let mut rounded = s.physical.clone();
        rounded.rabi = TWO_PI * 114.0e6;
        let g_tilde = rounded.raman_coupling();
        assert!((g_tilde / TWO_PI / 1e6 - 5.016).abs() < 1e-3);
        // λ = g̃_a g_b / δ with those numbers.
        let lambda = g_tilde * rounded.g_b / rounded.det_b;
        assert!((lambda / TWO_PI / 1e6 - 0.5016).abs() < 1e-3);

        let dims = SystemDims::new(3, 3).unwrap();
        let stage2 = effective_stage2(&s.physical, &dims).unwrap();
        // Raman term amplitude −g̃_a at phase frequency δ_a.
        let raman = &stage2.terms()[0];
        assert!((raman.amplitude + s.physical.raman_coupling()).abs() < 1e-6);
        assert!((raman.frequency - s.physical.det_raman_a()).abs() < 1e-3);

        let stage3 = effective_stage3(&s.physical, &dims).unwrap();
        // Matched Raman detunings make the hopping phase static (up to
        // float rounding of the GHz-scale inputs).
        assert!(stage3.terms()[0].frequency.abs() < 1e-12 * s.physical.det_b);
        let prefactor = stage3.terms()[0].amplitude;
        assert!((prefactor + s.ideal.coupling).abs() < 1e-6 * s.ideal.coupling.abs());

        // Hermiticity of evaluated stages at sampled times.
        for h in [&stage2, &stage3] {
            for &t in &[0.0, 1.3e-9, 7.7e-9] {
                assert!(h.sparse_at(t).hermiticity_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn effective_equals_ideal_at_matched_point() {
        let s = solved();
        let dims = SystemDims::new(4, 4).unwrap();
        let h_eff = effective(&s.physical, &dims).unwrap();
        let h_ideal = ideal(&s.ideal, &dims).unwrap();
        let diff = h_eff.add(&h_ideal.scale(C64::new(-1.0, 0.0))).unwrap();
        assert!(max_abs(&diff) <= 1e-12 * max_abs(&h_eff).max(1.0));
        // Zero on the g′, e, f coupler sector.
        for r in 0..h_eff.dim() {
            let (cols, vals) = h_eff.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if r % 4 != LEVEL_G || c % 4 != LEVEL_G {
                    assert!(v.norm() < 1e-300);
                }
            }
        }
    }

    #[test]
    fn detuning_report_reference_ratios() {
        let s = solved();
        let report = check_detuning_conditions(&s.physical);
        let by_name = |name: &str| {
            report
                .conditions
                .iter()
                .find(|c| c.name == name)
                .unwrap_or_else(|| panic!("missing condition {name}"))
        };
        assert!((by_name("det_a >> g_a").ratio - 25.0).abs() < 1e-9);
        assert!((by_name("det_b >> g_b").ratio - 10.0).abs() < 1e-6);
        assert_eq!(report.conditions.len(), 10);
        assert!(report.min_ratio() > 1.0);

        // Couplings → 0 sends the coupling-dependent margins to ∞.
        let mut free = s.physical.clone();
        free.g_a = 0.0;
        free.g_b = 0.0;
        let report = check_detuning_conditions(&free);
        assert!(by_name_report(&report, "det_a >> g_a").ratio.is_infinite());
        assert!(by_name_report(&report, "det_b >> g_b").ratio.is_infinite());
    }

    fn by_name_report<'r>(report: &'r DetuningReport, name: &str) -> &'r DetuningCondition {
        report
            .conditions
            .iter()
            .find(|c| c.name == name)
            .unwrap_or_else(|| panic!("missing condition {name}"))
    }

    #[test]
    fn harmonic_hamiltonian_apply_matches_sparse() {
        let s = solved();
        let dims = SystemDims::new(3, 2).unwrap();
        let h = full(&s.physical, &dims).unwrap();
        let t = 2.1e-10;
        let sparse = h.sparse_at(t);
        let psi = Ket::basis(Space::System(dims), dims.index_of(1, 1, 0, LEVEL_G));
        let via_apply = h.apply(t, psi.amplitudes());
        let via_sparse = sparse.matvec(psi.amplitudes());
        let err: f64 = via_apply
            .iter()
            .zip(via_sparse.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-9 * s.physical.g_a);
    }
}
