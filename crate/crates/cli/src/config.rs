//! Scenario configuration: a TOML tree with explicit unit suffixes.
//!
//! Frequencies are written as ordinary (non-angular) frequencies with a unit
//! ("60 MHz", "1.5 GHz") and converted to angular rad/s on load; times and
//! lifetimes carry time units ("0.6 us", "20 ns"). Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use oscswap_core::hamiltonians::{self, PhysicalParams};
use oscswap_core::lindblad::{DecoherenceRates, HamiltonianChoice, Method, SolverConfig};
use oscswap_core::states::{OscKind, OscState, Parity};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// An ordinary frequency with unit, stored internally as angular rad/s.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Frequency(pub f64);

impl Frequency {
    pub fn rad_per_sec(self) -> f64 {
        self.0
    }

    fn parse(text: &str) -> Result<Self, String> {
        let (value, unit) = split_unit(text)?;
        let scale = match unit {
            "Hz" => 1.0,
            "kHz" => 1e3,
            "MHz" => 1e6,
            "GHz" => 1e9,
            other => {
                return Err(format!(
                    "unknown frequency unit '{other}' (expected Hz, kHz, MHz, or GHz)"
                ))
            }
        };
        Ok(Frequency(TWO_PI * value * scale))
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} Hz", self.0 / TWO_PI)
    }
}

impl Serialize for Frequency {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Frequency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Frequency::parse(&text).map_err(DeError::custom)
    }
}

/// A time span with unit, stored in seconds.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TimeSpan(pub f64);

impl TimeSpan {
    pub fn seconds(self) -> f64 {
        self.0
    }

    fn parse(text: &str) -> Result<Self, String> {
        let (value, unit) = split_unit(text)?;
        let scale = match unit {
            "s" => 1.0,
            "ms" => 1e-3,
            "us" => 1e-6,
            "ns" => 1e-9,
            "ps" => 1e-12,
            other => {
                return Err(format!(
                    "unknown time unit '{other}' (expected s, ms, us, ns, or ps)"
                ))
            }
        };
        Ok(TimeSpan(value * scale))
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} s", self.0)
    }
}

impl Serialize for TimeSpan {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TimeSpan {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        TimeSpan::parse(&text).map_err(DeError::custom)
    }
}

fn split_unit(text: &str) -> Result<(f64, &str), String> {
    let trimmed = text.trim();
    let split = trimmed
        .find(|c: char| c.is_ascii_alphabetic())
        .ok_or_else(|| format!("'{trimmed}' is missing a unit suffix"))?;
    let (num, unit) = trimmed.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|e| format!("cannot parse '{num}' as a number: {e}"))?;
    Ok((value, unit.trim()))
}

/// A complex amplitude: a plain number or [re, im].
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexSpec {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexSpec {
    pub fn value(self) -> C64 {
        match self {
            ComplexSpec::Real(re) => C64::new(re, 0.0),
            ComplexSpec::Pair([re, im]) => C64::new(re, im),
        }
    }
}

/// One oscillator's initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OscSpec {
    Vacuum {
        truncation: usize,
    },
    Fock {
        n: usize,
        truncation: usize,
    },
    Coherent {
        alpha: ComplexSpec,
        truncation: usize,
    },
    Squeezed {
        xi: ComplexSpec,
        truncation: usize,
    },
    Cat {
        alpha: ComplexSpec,
        parity: Parity,
        truncation: usize,
    },
}

impl OscSpec {
    pub fn truncation(&self) -> usize {
        match self {
            OscSpec::Vacuum { truncation }
            | OscSpec::Fock { truncation, .. }
            | OscSpec::Coherent { truncation, .. }
            | OscSpec::Squeezed { truncation, .. }
            | OscSpec::Cat { truncation, .. } => *truncation,
        }
    }

    pub fn with_truncation(mut self, n: usize) -> Self {
        match &mut self {
            OscSpec::Vacuum { truncation }
            | OscSpec::Fock { truncation, .. }
            | OscSpec::Coherent { truncation, .. }
            | OscSpec::Squeezed { truncation, .. }
            | OscSpec::Cat { truncation, .. } => *truncation = n,
        }
        self
    }

    pub fn build(&self, tail_tol: f64) -> anyhow::Result<OscState> {
        let (kind, truncation) = match self {
            OscSpec::Vacuum { truncation } => (OscKind::Fock(0), *truncation),
            OscSpec::Fock { n, truncation } => (OscKind::Fock(*n), *truncation),
            OscSpec::Coherent { alpha, truncation } => {
                (OscKind::Coherent(alpha.value()), *truncation)
            }
            OscSpec::Squeezed { xi, truncation } => (OscKind::Squeezed(xi.value()), *truncation),
            OscSpec::Cat {
                alpha,
                parity,
                truncation,
            } => (
                OscKind::Cat {
                    alpha: alpha.value(),
                    parity: *parity,
                },
                *truncation,
            ),
        };
        Ok(OscState::build(kind, truncation, tail_tol)?)
    }
}

/// Initial coupler superposition weights (α on g′, β on g).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerSpec {
    pub weight_gprime: ComplexSpec,
    pub weight_g: ComplexSpec,
}

/// Drive parameters: either inputs for the matching-relation solver or a
/// fully explicit parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriveSpec {
    Solve {
        g_a: Frequency,
        det_a: Frequency,
        det_pulse: Frequency,
        det_raman: Frequency,
        k: u32,
    },
    Explicit {
        g_a: Frequency,
        g_b: Frequency,
        rabi: Frequency,
        det_a: Frequency,
        det_pulse: Frequency,
        det_b: Frequency,
        k: u32,
    },
}

/// Crosstalk strength: the 0.1·max(g_a, g_b) rule or an explicit value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CrosstalkStrength {
    Rule(String),
    Explicit(Frequency),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSpec {
    pub omega_a: Frequency,
    pub omega_b: Frequency,
    pub crosstalk: bool,
    pub g_ab: CrosstalkStrength,
}

/// Lifetimes (inverse rates); a missing entry disables the channel.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoherenceSpec {
    pub t1_kappa_a: Option<TimeSpan>,
    pub t1_kappa_b: Option<TimeSpan>,
    pub t1_gprime_g: Option<TimeSpan>,
    pub t1_e_g: Option<TimeSpan>,
    pub t1_e_gprime: Option<TimeSpan>,
    pub t1_f_g: Option<TimeSpan>,
    pub t1_f_gprime: Option<TimeSpan>,
    pub t1_f_e: Option<TimeSpan>,
    pub tphi_gprime: Option<TimeSpan>,
    pub tphi_e: Option<TimeSpan>,
    pub tphi_f: Option<TimeSpan>,
}

impl DecoherenceSpec {
    pub fn rates(&self) -> DecoherenceRates {
        let rate = |t: Option<TimeSpan>| t.map(|v| 1.0 / v.seconds()).unwrap_or(0.0);
        DecoherenceRates {
            kappa_a: rate(self.t1_kappa_a),
            kappa_b: rate(self.t1_kappa_b),
            gamma_gprime_g: rate(self.t1_gprime_g),
            gamma_e_g: rate(self.t1_e_g),
            gamma_e_gprime: rate(self.t1_e_gprime),
            gamma_f_g: rate(self.t1_f_g),
            gamma_f_gprime: rate(self.t1_f_gprime),
            gamma_f_e: rate(self.t1_f_e),
            dephasing_gprime: rate(self.tphi_gprime),
            dephasing_e: rate(self.tphi_e),
            dephasing_f: rate(self.tphi_f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub hamiltonian: HamiltonianChoice,
    pub horizon: TimeSpan,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tolerance: f64,
}

fn default_samples() -> usize {
    600
}

fn default_tail_tol() -> f64 {
    oscswap_core::states::DEFAULT_TAIL_TOL
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub method: Option<Method>,
    pub dt: Option<TimeSpan>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub positivity_checks: Option<usize>,
}

/// A complete simulation scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub oscillator_a: OscSpec,
    pub oscillator_b: OscSpec,
    pub coupler: CouplerSpec,
    pub drive: DriveSpec,
    pub resonators: ResonatorSpec,
    #[serde(default)]
    pub decoherence: DecoherenceSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

impl Scenario {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text)
            .map_err(|e| anyhow::anyhow!("in scenario file {}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.oscillator_a.truncation() != self.oscillator_b.truncation() {
            anyhow::bail!(
                "oscillator truncations must match (got {} and {})",
                self.oscillator_a.truncation(),
                self.oscillator_b.truncation()
            );
        }
        if self.run.horizon.seconds() <= 0.0 {
            anyhow::bail!("run.horizon must be positive");
        }
        let a = self.coupler.weight_gprime.value();
        let b = self.coupler.weight_g.value();
        let s = a.norm_sqr() + b.norm_sqr();
        if (s - 1.0).abs() > 1e-9 {
            anyhow::bail!("coupler weights must satisfy |α|² + |β|² = 1, got {s}");
        }
        Ok(())
    }

    /// Zeroed-decoherence, crosstalk-off analogue of this scenario.
    pub fn idealized(&self) -> Scenario {
        let mut s = self.clone();
        s.name = format!("{}-ideal", s.name);
        s.decoherence = DecoherenceSpec::default();
        s.resonators.crosstalk = false;
        s
    }

    /// Applies a truncation override to both oscillators.
    pub fn with_truncation(mut self, n: usize) -> Scenario {
        self.oscillator_a = self.oscillator_a.with_truncation(n);
        self.oscillator_b = self.oscillator_b.with_truncation(n);
        self
    }

    /// Solved/assembled physical parameters with the crosstalk strength.
    pub fn physical_params(&self) -> anyhow::Result<PhysicalParams> {
        let mut params = match &self.drive {
            DriveSpec::Solve {
                g_a,
                det_a,
                det_pulse,
                det_raman,
                k,
            } => {
                hamiltonians::solve_params(
                    g_a.rad_per_sec(),
                    det_a.rad_per_sec(),
                    det_pulse.rad_per_sec(),
                    det_raman.rad_per_sec(),
                    *k,
                )?
                .physical
            }
            DriveSpec::Explicit {
                g_a,
                g_b,
                rabi,
                det_a,
                det_pulse,
                det_b,
                k,
            } => PhysicalParams {
                g_a: g_a.rad_per_sec(),
                g_b: g_b.rad_per_sec(),
                rabi: rabi.rad_per_sec(),
                det_a: det_a.rad_per_sec(),
                det_pulse: det_pulse.rad_per_sec(),
                det_b: det_b.rad_per_sec(),
                omega_a: 0.0,
                omega_b: 0.0,
                g_ab: 0.0,
                k: *k,
                lambda_positive: true,
            },
        };
        let g_ab = match &self.resonators.g_ab {
            CrosstalkStrength::Explicit(f) => f.rad_per_sec(),
            CrosstalkStrength::Rule(rule) if rule == "auto" => {
                0.1 * params.g_a.max(params.g_b)
            }
            CrosstalkStrength::Rule(other) => {
                anyhow::bail!("unknown crosstalk rule '{other}' (expected \"auto\")")
            }
        };
        params = params.with_resonators(
            self.resonators.omega_a.rad_per_sec(),
            self.resonators.omega_b.rad_per_sec(),
            g_ab,
        );
        Ok(params)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig {
            samples: self.run.samples,
            ..SolverConfig::default()
        };
        if let Some(m) = self.solver.method {
            cfg.method = m;
        }
        if let Some(dt) = self.solver.dt {
            cfg.dt = Some(dt.seconds());
        }
        if let Some(rtol) = self.solver.rtol {
            cfg.rtol = rtol;
        }
        if let Some(atol) = self.solver.atol {
            cfg.atol = atol;
        }
        if let Some(p) = self.solver.positivity_checks {
            cfg.positivity_checks = p;
        }
        cfg
    }
}
