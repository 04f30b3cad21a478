//! Scenario execution: dispatches to the closed- or open-system simulators
//! and writes the trajectory artifacts.

use std::path::Path;

use oscswap_core::lindblad::{
    simulate_protocol_closed, simulate_protocol_open, OpenRunSpec, Trajectory,
};
use oscswap_core::states::OscState;

use crate::config::Scenario;

/// Everything a run resolves before touching the integrators.
pub struct ResolvedScenario {
    pub scenario: Scenario,
    pub phi: OscState,
    pub phi_bar: OscState,
    pub params: oscswap_core::hamiltonians::PhysicalParams,
    pub rates: oscswap_core::lindblad::DecoherenceRates,
    pub closed: bool,
}

pub fn resolve(scenario: &Scenario) -> anyhow::Result<ResolvedScenario> {
    let tail_tol = scenario.run.tail_tolerance;
    let phi = scenario.oscillator_a.build(tail_tol)?;
    let phi_bar = scenario.oscillator_b.build(tail_tol)?;
    let params = scenario.physical_params()?;
    let rates = scenario.decoherence.rates();
    let closed = rates.is_zero();
    Ok(ResolvedScenario {
        scenario: scenario.clone(),
        phi,
        phi_bar,
        params,
        rates,
        closed,
    })
}

/// Runs a resolved scenario to a trajectory.
pub fn run(resolved: &ResolvedScenario) -> anyhow::Result<Trajectory> {
    let scenario = &resolved.scenario;
    let spec = OpenRunSpec {
        phi: &resolved.phi,
        phi_bar: &resolved.phi_bar,
        alpha: scenario.coupler.weight_gprime.value(),
        beta: scenario.coupler.weight_g.value(),
        params: &resolved.params,
        rates: &resolved.rates,
        crosstalk: scenario.resonators.crosstalk,
        hamiltonian: scenario.run.hamiltonian,
        horizon: scenario.run.horizon.seconds(),
        cfg: scenario.solver_config(),
    };
    let trajectory = if resolved.closed {
        simulate_protocol_closed(&spec)?
    } else {
        simulate_protocol_open(&spec)?
    };
    Ok(trajectory)
}

/// Convenience: load-resolve-run in one call.
pub fn run_scenario(scenario: &Scenario) -> anyhow::Result<Trajectory> {
    run(&resolve(scenario)?)
}

pub fn write_csv(trajectory: &Trajectory, path: &Path) -> anyhow::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    trajectory.write_csv(&mut file)?;
    Ok(())
}
