//! Master-equation integration.
//!
//! Three drivers share the same dissipator kernels:
//!
//! - fixed-step RK4, the default for static or slowly phased Hamiltonians;
//! - an adaptive embedded Dormand–Prince 5(4) pair for the fully driven
//!   model, whose phases run at GHz scales;
//! - an interaction-picture RK4 for the long open-system runs with the
//!   oscillatory crosstalk term: the coherent part is a number-conserving
//!   two-mode transformation per coupler level and is applied exactly through
//!   closed two-mode propagators, so the integrator only resolves the slow
//!   dissipative flow. A fixed-step method naive to the crosstalk phase would
//!   need picosecond steps to avoid aliasing the 2π·3 GHz phase.

mod adaptive;
mod dense;
mod fixed;
mod ip;
mod mode;

pub(crate) use dense::DissipatorKernel;

use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::hamiltonians::{self, Hamiltonian, IdealParams, PhysicalParams};
use crate::hilbert::{
    annihilation, level_projector, level_transition, DensityMatrix, Ket, OperatorMatrix,
    Subsystem, SystemDims, C64, LEVEL_E, LEVEL_F, LEVEL_G, LEVEL_GPRIME,
};
use crate::metrics::{self, MetricSample};
use crate::protocol;
use crate::states::{CouplerState, OscState};
use crate::{Error, Result};

/// One dissipation channel: jump operator Λ with its rate.
#[derive(Clone, Debug)]
pub struct LindbladChannel {
    pub op: OperatorMatrix,
    pub rate: f64,
}

/// All decay, relaxation and dephasing rates (1/s). Zero disables a channel.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceRates {
    /// Resonator photon decay rates.
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Coupler energy relaxation rates, labelled upper→lower.
    pub gamma_gprime_g: f64,
    pub gamma_e_g: f64,
    pub gamma_e_gprime: f64,
    pub gamma_f_g: f64,
    pub gamma_f_gprime: f64,
    pub gamma_f_e: f64,
    /// Pure dephasing rates of the levels g′, e, f.
    pub dephasing_gprime: f64,
    pub dephasing_e: f64,
    pub dephasing_f: f64,
}

impl DecoherenceRates {
    pub fn is_zero(&self) -> bool {
        self.as_list().iter().all(|&(_, r)| r == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in self.as_list() {
            if r < 0.0 || !r.is_finite() {
                return Err(Error::Parameter(format!(
                    "decoherence rate {name} must be non-negative and finite, got {r}"
                )));
            }
        }
        Ok(())
    }

    fn as_list(&self) -> [(&'static str, f64); 11] {
        [
            ("kappa_a", self.kappa_a),
            ("kappa_b", self.kappa_b),
            ("gamma_gprime_g", self.gamma_gprime_g),
            ("gamma_e_g", self.gamma_e_g),
            ("gamma_e_gprime", self.gamma_e_gprime),
            ("gamma_f_g", self.gamma_f_g),
            ("gamma_f_gprime", self.gamma_f_gprime),
            ("gamma_f_e", self.gamma_f_e),
            ("dephasing_gprime", self.dephasing_gprime),
            ("dephasing_e", self.dephasing_e),
            ("dephasing_f", self.dephasing_f),
        ]
    }

    /// Relaxation graph edges (upper level, lower level, rate).
    pub(crate) fn relaxations(&self) -> [(usize, usize, f64); 6] {
        [
            (LEVEL_GPRIME, LEVEL_G, self.gamma_gprime_g),
            (LEVEL_E, LEVEL_G, self.gamma_e_g),
            (LEVEL_E, LEVEL_GPRIME, self.gamma_e_gprime),
            (LEVEL_F, LEVEL_G, self.gamma_f_g),
            (LEVEL_F, LEVEL_GPRIME, self.gamma_f_gprime),
            (LEVEL_F, LEVEL_E, self.gamma_f_e),
        ]
    }

    pub(crate) fn dephasings(&self) -> [(usize, f64); 3] {
        [
            (LEVEL_GPRIME, self.dephasing_gprime),
            (LEVEL_E, self.dephasing_e),
            (LEVEL_F, self.dephasing_f),
        ]
    }
}

/// Builds the channel list exactly as the master equation lists them:
/// photon decay of both resonators, the six coupler relaxation paths, and
/// projector-form dephasing of g′, e, f. Zero-rate channels are omitted.
pub fn build_channels(
    rates: &DecoherenceRates,
    dims: &SystemDims,
) -> Result<Vec<LindbladChannel>> {
    rates.validate()?;
    let mut channels = Vec::new();
    if rates.kappa_a > 0.0 {
        channels.push(LindbladChannel {
            op: annihilation(dims.n_a())?.lift(Subsystem::OscA, dims)?,
            rate: rates.kappa_a,
        });
    }
    if rates.kappa_b > 0.0 {
        channels.push(LindbladChannel {
            op: annihilation(dims.n_b())?.lift(Subsystem::OscB, dims)?,
            rate: rates.kappa_b,
        });
    }
    for (upper, lower, rate) in rates.relaxations() {
        if rate > 0.0 {
            channels.push(LindbladChannel {
                op: level_transition(lower, upper).lift(Subsystem::Coupler, dims)?,
                rate,
            });
        }
    }
    for (level, rate) in rates.dephasings() {
        if rate > 0.0 {
            channels.push(LindbladChannel {
                op: level_projector(level).lift(Subsystem::Coupler, dims)?,
                rate,
            });
        }
    }
    Ok(channels)
}

/// Integration method selection.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pick per Hamiltonian: interaction picture when an oscillatory
    /// crosstalk drive is present, fixed RK4 otherwise, adaptive for the
    /// fully driven model.
    Auto,
    FixedRk4,
    Adaptive,
    InteractionPicture,
}

/// Solver configuration.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    /// Fixed-step size (s); derived from the generator when absent.
    pub dt: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,
    /// Number of output intervals over the horizon.
    pub samples: usize,
    /// Upper bound on the number of smallest-eigenvalue checks.
    pub positivity_checks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Auto,
            dt: None,
            rtol: 1e-8,
            atol: 1e-10,
            max_step: None,
            samples: 600,
            positivity_checks: 20,
        }
    }
}

/// Output sampling schedule.
#[derive(Clone, Debug)]
pub(crate) struct SamplePlan {
    pub times: Vec<f64>,
    pub positivity_stride: usize,
}

impl SamplePlan {
    pub fn new(horizon: f64, samples: usize, positivity_checks: usize) -> Self {
        let samples = samples.max(1);
        let times: Vec<f64> = (0..=samples)
            .map(|k| horizon * k as f64 / samples as f64)
            .collect();
        let positivity_stride = if positivity_checks == 0 {
            usize::MAX
        } else {
            (samples / positivity_checks.min(samples)).max(1)
        };
        SamplePlan {
            times,
            positivity_stride,
        }
    }

    pub fn check_positivity_at(&self, sample_idx: usize) -> bool {
        if self.positivity_stride == usize::MAX {
            return false;
        }
        sample_idx % self.positivity_stride == 0 || sample_idx + 1 == self.times.len()
    }
}

/// Tolerances the trajectory must respect (enforced during integration).
pub(crate) const TRACE_TOL: f64 = 1e-6;
pub(crate) const POSITIVITY_FLOOR: f64 = -1e-7;

/// Time series of metric samples plus the final density matrix.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<MetricSample>,
    pub final_state: Option<DensityMatrix>,
}

impl Trajectory {
    pub fn sample_nearest(&self, t: f64) -> &MetricSample {
        self.samples
            .iter()
            .min_by(|a, b| {
                (a.time - t)
                    .abs()
                    .partial_cmp(&(b.time - t).abs())
                    .unwrap()
            })
            .expect("trajectory has samples")
    }

    /// Fixed CSV schema: time_us, fidelity, trace, purity, pop_e, pop_f,
    /// pop_gprime; 12 significant digits.
    pub fn write_csv<W: IoWrite>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "time_us,fidelity,trace,purity,pop_e,pop_f,pop_gprime")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                s.time * 1e6,
                s.fidelity.unwrap_or(f64::NAN),
                s.trace,
                s.purity,
                s.populations[LEVEL_E],
                s.populations[LEVEL_F],
                s.populations[LEVEL_GPRIME],
            )?;
        }
        Ok(())
    }

    /// Physics invariants over the recorded samples.
    pub fn check_physics(&self) -> Result<()> {
        for s in &self.samples {
            if (s.trace - 1.0).abs() > TRACE_TOL {
                return Err(Error::SolverFailure(format!(
                    "trace drift {:.3e} at t = {:.3e} s",
                    s.trace - 1.0,
                    s.time
                )));
            }
            if let Some(lmin) = s.lambda_min {
                if lmin < POSITIVITY_FLOOR {
                    return Err(Error::SolverFailure(format!(
                        "negative eigenvalue {lmin:.3e} at t = {:.3e} s",
                        s.time
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Which Hamiltonian drives an open or closed protocol run.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianChoice {
    Ideal,
    Effective,
    Full,
}

/// Integrates the master equation dρ/dt = −i[H(t), ρ] + Σ rate·L[Λ]ρ.
///
/// Symmetrizes ρ each step and rejects runs whose sampled trace drifts
/// beyond 10⁻⁶. The trajectory's fidelity column is filled when `target`
/// is given.
pub fn integrate(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    channels: &[LindbladChannel],
    cfg: &SolverConfig,
    horizon: f64,
    target: Option<&Ket>,
) -> Result<Trajectory> {
    if horizon <= 0.0 || !horizon.is_finite() {
        return Err(Error::Parameter(format!(
            "integration horizon must be positive and finite, got {horizon}"
        )));
    }
    rho0.space().check_match(h.space(), "integrate")?;
    let kernel = DissipatorKernel::new(channels)?;
    let plan = SamplePlan::new(horizon, cfg.samples, cfg.positivity_checks);
    let trajectory = match cfg.method {
        Method::Adaptive => adaptive::integrate_adaptive(rho0, h, &kernel, cfg, &plan, target)?,
        Method::FixedRk4 | Method::Auto => {
            let dt = cfg.dt.unwrap_or_else(|| default_fixed_dt(h));
            fixed::integrate_fixed_rk4(rho0, h, &kernel, dt, &plan, target)?
        }
        Method::InteractionPicture => {
            return Err(Error::Parameter(
                "the interaction-picture method is driven through simulate_protocol_open, \
                 which knows the mode structure of the Hamiltonian"
                    .into(),
            ));
        }
    };
    trajectory.check_physics()?;
    Ok(trajectory)
}

/// Default fixed step: resolve the fastest harmonic phase with 50 samples
/// per period and stay well inside the RK4 stability region of the static
/// part's spectral scale.
pub(crate) fn default_fixed_dt(h: &Hamiltonian) -> f64 {
    let phase = h.max_phase_frequency(); // rad/s
    let mut dt = f64::INFINITY;
    if phase > 0.0 {
        dt = dt.min(2.0 * std::f64::consts::PI / (50.0 * phase));
    }
    let hnorm = hamiltonian_norm_estimate(h);
    if hnorm > 0.0 {
        dt = dt.min(0.5 / hnorm);
    }
    if !dt.is_finite() {
        dt = 1e-9;
    }
    dt
}

fn hamiltonian_norm_estimate(h: &Hamiltonian) -> f64 {
    let op = h.sparse_at(0.0);
    let n = op.dim();
    let mut norm = 0.0f64;
    for r in 0..n {
        let (_, vals) = op.row(r);
        let s: f64 = vals.iter().map(|v| v.norm()).sum();
        norm = norm.max(s);
    }
    // Harmonic amplitudes can vanish at t = 0; add their magnitudes.
    let extra: f64 = h
        .terms()
        .iter()
        .map(|t| {
            2.0 * t.amplitude.abs()
                * (0..n)
                    .map(|r| t.op.row(r).1.iter().map(|v| v.norm()).sum::<f64>())
                    .fold(0.0f64, f64::max)
        })
        .sum();
    norm + extra
}

/// Inputs of an open-system protocol run.
#[derive(Clone, Debug)]
pub struct OpenRunSpec<'a> {
    pub phi: &'a OscState,
    pub phi_bar: &'a OscState,
    pub alpha: C64,
    pub beta: C64,
    pub params: &'a PhysicalParams,
    pub rates: &'a DecoherenceRates,
    pub crosstalk: bool,
    pub hamiltonian: HamiltonianChoice,
    pub horizon: f64,
    pub cfg: SolverConfig,
}

impl<'a> OpenRunSpec<'a> {
    fn dims(&self) -> Result<SystemDims> {
        if self.phi.truncation() != self.phi_bar.truncation() {
            return Err(Error::Dimension(
                "protocol runs require equal oscillator truncations".into(),
            ));
        }
        SystemDims::new(self.phi.truncation(), self.phi_bar.truncation())
    }

    fn ideal_params(&self) -> IdealParams {
        IdealParams {
            freq_shift: hamiltonians::effective_shift_b(self.params),
            coupling: hamiltonians::effective_coupling(self.params),
        }
    }
}

/// Runs the entangling protocol's conditional-evolution phase as an open
/// system and samples the fidelity against the ideal pre-pulse target.
pub fn simulate_protocol_open(spec: &OpenRunSpec) -> Result<Trajectory> {
    spec.rates.validate()?;
    let dims = spec.dims()?;
    let coupler = CouplerState::superposition(spec.alpha, spec.beta)?;
    let initial = crate::states::product_state(spec.phi, spec.phi_bar, None, &coupler)?;
    let rho0 = DensityMatrix::from_pure(&initial);
    let psi_id =
        protocol::ideal_pre_pulse_state(spec.phi, spec.phi_bar, spec.alpha, spec.beta)?;

    // The conditional Hamiltonians are block-diagonal quadratic forms, so
    // the interaction-picture driver applies whether or not the crosstalk
    // drive is on (a zero drive just makes the mode propagator closed-form).
    let use_ip = match spec.cfg.method {
        Method::InteractionPicture => true,
        Method::Auto => spec.hamiltonian != HamiltonianChoice::Full,
        _ => false,
    };

    if use_ip {
        if spec.hamiltonian == HamiltonianChoice::Full {
            return Err(Error::Parameter(
                "the interaction-picture method applies to the conditional (ideal/effective) \
                 Hamiltonians, not the fully driven model"
                    .into(),
            ));
        }
        let forms = mode_forms(spec)?;
        let (drive_amp, drive_freq) = if spec.crosstalk {
            (spec.params.g_ab, spec.params.delta_ab())
        } else {
            (0.0, 0.0)
        };
        let plan = SamplePlan::new(spec.horizon, spec.cfg.samples, spec.cfg.positivity_checks);
        let dt = spec.cfg.dt.unwrap_or(2e-9);
        let trajectory = ip::integrate_ip(&ip::IpSpec {
            dims,
            static_forms: forms,
            drive_amp,
            drive_freq,
            rates: spec.rates,
            rho0: &rho0,
            psi_id: Some(&psi_id),
            dt,
            plan,
        })?;
        trajectory.check_physics()?;
        return Ok(trajectory);
    }

    let h = open_hamiltonian(spec, &dims)?;
    let channels = build_channels(spec.rates, &dims)?;
    let mut cfg = spec.cfg;
    if cfg.method == Method::Auto {
        cfg.method = match spec.hamiltonian {
            HamiltonianChoice::Full => Method::Adaptive,
            _ => Method::FixedRk4,
        };
    }
    integrate(&rho0, &h, &channels, &cfg, spec.horizon, Some(&psi_id))
}

/// Closed-system counterpart: pure-state evolution under the chosen
/// Hamiltonian, no dissipation, same sampling and fidelity target.
pub fn simulate_protocol_closed(spec: &OpenRunSpec) -> Result<Trajectory> {
    let dims = spec.dims()?;
    let coupler = CouplerState::superposition(spec.alpha, spec.beta)?;
    let initial = crate::states::product_state(spec.phi, spec.phi_bar, None, &coupler)?;
    let psi_id =
        protocol::ideal_pre_pulse_state(spec.phi, spec.phi_bar, spec.alpha, spec.beta)?;
    let h = open_hamiltonian(spec, &dims)?;
    let plan = SamplePlan::new(spec.horizon, spec.cfg.samples, spec.cfg.positivity_checks);

    let mut samples = Vec::with_capacity(plan.times.len());
    let mut psi = initial;
    if h.is_static() && h.max_phase_frequency() == 0.0 {
        let h_static = h.sparse_at(0.0);
        let mut t_prev = 0.0;
        for (k, &t) in plan.times.iter().enumerate() {
            if k > 0 {
                psi = crate::hilbert::expm_apply(&h_static, &psi, t - t_prev)?;
            }
            t_prev = t;
            samples.push(metrics::sample_from_pure(t, &psi, Some(&psi_id))?);
        }
    } else {
        let mut t_prev = 0.0;
        for (k, &t) in plan.times.iter().enumerate() {
            if k > 0 {
                adaptive::advance_ket(&mut psi, &h, t_prev, t, spec.cfg.rtol, spec.cfg.atol)?;
            }
            t_prev = t;
            samples.push(metrics::sample_from_pure(t, &psi, Some(&psi_id))?);
        }
    }
    Ok(Trajectory {
        samples,
        final_state: Some(DensityMatrix::from_pure(&psi)),
    })
}

fn open_hamiltonian(spec: &OpenRunSpec, dims: &SystemDims) -> Result<Hamiltonian> {
    let base = match spec.hamiltonian {
        HamiltonianChoice::Ideal => {
            Hamiltonian::from_static(hamiltonians::ideal(&spec.ideal_params(), dims)?)?
        }
        HamiltonianChoice::Effective => {
            Hamiltonian::from_static(hamiltonians::effective(spec.params, dims)?)?
        }
        HamiltonianChoice::Full => hamiltonians::full(spec.params, dims)?,
    };
    if spec.crosstalk {
        base.add(hamiltonians::crosstalk(spec.params, dims)?)
    } else {
        Ok(base)
    }
}

/// Per-coupler-level two-mode quadratic forms of the conditional part.
fn mode_forms(spec: &OpenRunSpec) -> Result<[mode::Mat2; 4]> {
    let zero = [[C64::new(0.0, 0.0); 2]; 2];
    let mut forms = [zero; 4];
    let (shift_a, shift_b, coupling) = match spec.hamiltonian {
        HamiltonianChoice::Ideal => {
            let p = spec.ideal_params();
            (p.freq_shift, p.freq_shift, p.coupling)
        }
        HamiltonianChoice::Effective => (
            hamiltonians::effective_shift_a(spec.params),
            hamiltonians::effective_shift_b(spec.params),
            hamiltonians::effective_coupling(spec.params),
        ),
        HamiltonianChoice::Full => {
            return Err(Error::Parameter(
                "the fully driven model has no conditional two-mode form".into(),
            ));
        }
    };
    forms[LEVEL_G] = [
        [C64::new(shift_a, 0.0), C64::new(coupling, 0.0)],
        [C64::new(coupling, 0.0), C64::new(shift_b, 0.0)],
    ];
    Ok(forms)
}
