//! Master-equation physics checks: analytic decay and dephasing, the
//! unitary limit, and cross-validation of the interaction-picture driver
//! against brute-force fixed-step integration.

use num_complex::Complex64 as C64;

use oscswap_core::hamiltonians::{self, Hamiltonian};
use oscswap_core::hilbert::{
    annihilation, expm_apply, DensityMatrix, Ket, OperatorMatrix, Space, Subsystem, SystemDims,
    LEVEL_G, LEVEL_GPRIME,
};
use oscswap_core::lindblad::{
    build_channels, integrate, simulate_protocol_closed, simulate_protocol_open,
    DecoherenceRates, HamiltonianChoice, LindbladChannel, Method, OpenRunSpec, SolverConfig,
};
use oscswap_core::metrics;
use oscswap_core::states::{coherent, fock, product_state, CouplerState};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The supplementary-material decoherence rates: lifetimes
/// κ⁻¹ = 20 µs, γ_g′g⁻¹ = 60 µs, γ_eg′⁻¹ = 40 µs, γ_fe⁻¹ = 30 µs,
/// γ_eg⁻¹ = γ_fg′⁻¹ = γ_fg⁻¹ = 100 µs, and 15 µs dephasing on g′, e, f.
fn reference_rates() -> DecoherenceRates {
    DecoherenceRates {
        kappa_a: 1.0 / 20e-6,
        kappa_b: 1.0 / 20e-6,
        gamma_gprime_g: 1.0 / 60e-6,
        gamma_e_g: 1.0 / 100e-6,
        gamma_e_gprime: 1.0 / 40e-6,
        gamma_f_g: 1.0 / 100e-6,
        gamma_f_gprime: 1.0 / 100e-6,
        gamma_f_e: 1.0 / 30e-6,
        dephasing_gprime: 1.0 / 15e-6,
        dephasing_e: 1.0 / 15e-6,
        dephasing_f: 1.0 / 15e-6,
    }
}

fn reference_params() -> hamiltonians::SolvedParams {
    let mut solved = hamiltonians::solve_params(
        TWO_PI * 60.0e6,
        TWO_PI * 1.5e9,
        TWO_PI * 1.25e9,
        TWO_PI * 0.25e9,
        1,
    )
    .unwrap();
    solved.physical = solved.physical.with_resonators(
        TWO_PI * 7.5e9,
        TWO_PI * 4.5e9,
        0.1 * TWO_PI * 60.0e6,
    );
    solved
}

#[test]
fn channel_count_matches_the_master_equation() {
    let dims = SystemDims::new(2, 2).unwrap();
    let channels = build_channels(&reference_rates(), &dims).unwrap();
    assert_eq!(channels.len(), 11);
    let none = build_channels(&DecoherenceRates::default(), &dims).unwrap();
    assert!(none.is_empty());
    let mut bad = reference_rates();
    bad.kappa_a = -1.0;
    assert!(build_channels(&bad, &dims).is_err());
}

#[test]
fn photon_decay_is_exponential() {
    // H = 0, single decay channel on oscillator a, |1⟩ initial state:
    // excited population e^{−κt}, checked at κt ∈ {0.5, 1, 2}.
    let dims = SystemDims::new(2, 2).unwrap();
    let kappa = 1.0 / 20e-6;
    let channels = vec![LindbladChannel {
        op: annihilation(2).unwrap().lift(Subsystem::OscA, &dims).unwrap(),
        rate: kappa,
    }];
    let h = Hamiltonian::from_static(OperatorMatrix::zeros(Space::System(dims))).unwrap();
    let a1 = fock(1, 2).unwrap();
    let b0 = fock(0, 2).unwrap();
    let psi0 = product_state(&a1, &b0, None, &CouplerState::ground()).unwrap();
    let rho0 = DensityMatrix::from_pure(&psi0);
    for kt in [0.5, 1.0, 2.0] {
        let horizon = kt / kappa;
        let cfg = SolverConfig {
            method: Method::FixedRk4,
            dt: Some(horizon / 400.0),
            samples: 4,
            ..SolverConfig::default()
        };
        let trajectory = integrate(&rho0, &h, &channels, &cfg, horizon, None).unwrap();
        let rho_end = trajectory.final_state.as_ref().unwrap();
        let excited = rho_end.matrix()[(dims.index_of(1, 0, 0, LEVEL_G), dims.index_of(1, 0, 0, LEVEL_G))]
            .re;
        assert!(
            (excited - (-kt).exp()).abs() < 1e-6,
            "κt = {kt}: population {excited} vs {}",
            (-kt).exp()
        );
    }
}

#[test]
fn projector_dephasing_damps_coherence_at_half_rate() {
    // Pure dephasing on g′ with the projector-form dissipator: the g–g′
    // coherence decays as e^{−γt/2}.
    let dims = SystemDims::new(2, 2).unwrap();
    let gamma = 1.0 / 15e-6;
    let rates = DecoherenceRates {
        dephasing_gprime: gamma,
        ..DecoherenceRates::default()
    };
    let channels = build_channels(&rates, &dims).unwrap();
    let h = Hamiltonian::from_static(OperatorMatrix::zeros(Space::System(dims))).unwrap();
    let vac = fock(0, 2).unwrap();
    let q = CouplerState::superposition(c(INV_SQRT2, 0.0), c(INV_SQRT2, 0.0)).unwrap();
    let psi0 = product_state(&vac, &vac, None, &q).unwrap();
    let rho0 = DensityMatrix::from_pure(&psi0);
    let horizon = 10e-6;
    let cfg = SolverConfig {
        method: Method::FixedRk4,
        dt: Some(horizon / 800.0),
        samples: 5,
        ..SolverConfig::default()
    };
    let trajectory = integrate(&rho0, &h, &channels, &cfg, horizon, None).unwrap();
    let rho_end = trajectory.final_state.as_ref().unwrap();
    let r = dims.index_of(0, 0, 0, LEVEL_G);
    let col = dims.index_of(0, 0, 0, LEVEL_GPRIME);
    let coherence = rho_end.matrix()[(r, col)].norm();
    let expected = 0.5 * (-gamma * horizon / 2.0).exp();
    assert!(
        (coherence - expected).abs() < 1e-6,
        "coherence {coherence} vs {expected}"
    );
}

#[test]
fn unitary_limit_matches_krylov_propagator() {
    // No channels, static conditional Hamiltonian: the density-matrix
    // integrator must agree with pure-state propagation.
    let dims = SystemDims::new(4, 4).unwrap();
    let params = hamiltonians::IdealParams {
        freq_shift: -TWO_PI * 2.5e6,
        coupling: TWO_PI * 0.5e6,
    };
    let h_op = hamiltonians::ideal(&params, &dims).unwrap();
    let h = Hamiltonian::from_static(h_op.clone()).unwrap();
    let a = coherent(c(0.4, 0.0), 4).unwrap();
    let b = coherent(c(-0.4, 0.0), 4).unwrap();
    let q = CouplerState::superposition(c(INV_SQRT2, 0.0), c(INV_SQRT2, 0.0)).unwrap();
    let psi0 = product_state(&a, &b, None, &q).unwrap();
    let rho0 = DensityMatrix::from_pure(&psi0);
    let horizon = 0.1e-6;
    let cfg = SolverConfig {
        method: Method::FixedRk4,
        dt: Some(0.2e-9),
        samples: 4,
        ..SolverConfig::default()
    };
    let trajectory = integrate(&rho0, &h, &[], &cfg, horizon, None).unwrap();
    let rho_end = trajectory.final_state.as_ref().unwrap();
    let psi_end = expm_apply(&h_op, &psi0, horizon).unwrap();
    let f = metrics::fidelity(rho_end, &psi_end).unwrap();
    assert!(f > 1.0 - 1e-8, "fidelity {f}");
    assert!((rho_end.purity() - 1.0).abs() < 1e-8);
}

#[test]
fn interaction_picture_matches_brute_force_with_crosstalk() {
    // Small open run with the oscillatory crosstalk on: the
    // interaction-picture driver against plain RK4 forced to resolve the
    // 2π·3 GHz phase. The brute-force answer converges to the
    // interaction-picture one as its step shrinks.
    let solved = reference_params();
    let n = 6;
    let phi = coherent(c(0.4, 0.0), n).unwrap();
    let phi_bar = coherent(c(-0.4, 0.0), n).unwrap();
    let horizon = 10e-9;
    let base = OpenRunSpec {
        phi: &phi,
        phi_bar: &phi_bar,
        alpha: c(INV_SQRT2, 0.0),
        beta: c(INV_SQRT2, 0.0),
        params: &solved.physical,
        rates: &reference_rates(),
        crosstalk: true,
        hamiltonian: HamiltonianChoice::Effective,
        horizon,
        cfg: SolverConfig {
            method: Method::InteractionPicture,
            dt: Some(0.25e-9),
            samples: 8,
            ..SolverConfig::default()
        },
    };
    let ip = simulate_protocol_open(&base).unwrap();

    let mut brute = base.clone();
    brute.cfg.method = Method::FixedRk4;
    brute.cfg.dt = Some(horizon / 8192.0);
    let fine = simulate_protocol_open(&brute).unwrap();

    // The two paths differ in how they truncate (exponential of the
    // truncated generator vs truncated exact-mode propagator), which floors
    // the agreement at the edge-block weight of the state, ~1e-7 here.
    let f_ip = ip.samples.last().unwrap().fidelity.unwrap();
    let f_fine = fine.samples.last().unwrap().fidelity.unwrap();
    let err_fine = (f_fine - f_ip).abs();
    assert!(
        err_fine < 1e-6,
        "interaction picture vs brute force: {err_fine:.3e}"
    );

    // Density matrices agree entrywise at the end of the window.
    let rho_ip = ip.final_state.as_ref().unwrap();
    let rho_bf = fine.final_state.as_ref().unwrap();
    let mut max = 0.0f64;
    for i in 0..rho_ip.dim() {
        for j in 0..rho_ip.dim() {
            max = max.max((rho_ip.matrix()[(i, j)] - rho_bf.matrix()[(i, j)]).norm());
        }
    }
    assert!(max < 5e-6, "final state max deviation {max:.3e}");
}

#[test]
fn zero_rates_reduce_to_the_pure_protocol() {
    // With all rates zero and crosstalk off the open-system run reproduces
    // the closed-system fidelity curve. The truncation is generous enough
    // that the edge-block convention gap sits well below the tolerance.
    let solved = reference_params();
    let n = 8;
    let phi = coherent(c(0.5, 0.0), n).unwrap();
    let phi_bar = coherent(c(-0.5, 0.0), n).unwrap();
    let spec = OpenRunSpec {
        phi: &phi,
        phi_bar: &phi_bar,
        alpha: c(INV_SQRT2, 0.0),
        beta: c(INV_SQRT2, 0.0),
        params: &solved.physical,
        rates: &DecoherenceRates::default(),
        crosstalk: false,
        hamiltonian: HamiltonianChoice::Effective,
        horizon: solved.t_swap,
        cfg: SolverConfig {
            method: Method::InteractionPicture,
            dt: Some(2e-9),
            samples: 16,
            ..SolverConfig::default()
        },
    };
    let open = simulate_protocol_open(&spec).unwrap();
    let closed = simulate_protocol_closed(&spec).unwrap();
    for (o, p) in open.samples.iter().zip(closed.samples.iter()) {
        let fo = o.fidelity.unwrap();
        let fp = p.fidelity.unwrap();
        assert!(
            (fo - fp).abs() <= 1e-6,
            "t = {:.3e}: open {fo} vs closed {fp}",
            o.time
        );
    }
    // The swap completes: fidelity against the pre-pulse target near 1.
    let f_end = open.samples.last().unwrap().fidelity.unwrap();
    assert!(f_end > 1.0 - 1e-6, "fidelity at t_swap {f_end}");
}

#[test]
fn fixed_step_convergence_is_fourth_order() {
    // Clean fixed-RK4 convergence on a dissipative run without fast phases;
    // halving dt changes the final fidelity by ≤ 1e-5 with ~dt⁴ scaling.
    let solved = reference_params();
    let n = 4;
    let phi = coherent(c(0.4, 0.0), n).unwrap();
    let phi_bar = coherent(c(-0.4, 0.0), n).unwrap();
    let horizon = 0.1e-6;
    let run = |dt: f64| {
        let spec = OpenRunSpec {
            phi: &phi,
            phi_bar: &phi_bar,
            alpha: c(INV_SQRT2, 0.0),
            beta: c(INV_SQRT2, 0.0),
            params: &solved.physical,
            rates: &reference_rates(),
            crosstalk: false,
            hamiltonian: HamiltonianChoice::Effective,
            horizon,
            cfg: SolverConfig {
                method: Method::FixedRk4,
                dt: Some(dt),
                samples: 2,
                ..SolverConfig::default()
            },
        };
        simulate_protocol_open(&spec)
            .unwrap()
            .samples
            .last()
            .unwrap()
            .fidelity
            .unwrap()
    };
    let dt0 = 2.0e-9;
    let f1 = run(dt0);
    let f2 = run(dt0 / 2.0);
    let f3 = run(dt0 / 4.0);
    let d1 = (f1 - f2).abs();
    let d2 = (f2 - f3).abs();
    assert!(d1 <= 1e-5, "halving dt changed fidelity by {d1:.3e}");
    if d2 > 1e-14 {
        let order = (d1 / d2).log2();
        assert!(
            (2.5..=5.5).contains(&order),
            "observed convergence order {order:.2} (d1 {d1:.3e}, d2 {d2:.3e})"
        );
    }
}

#[test]
fn interaction_picture_halving_is_stable() {
    // The same ≤1e-5 bound for the interaction-picture driver with the
    // crosstalk drive on.
    let solved = reference_params();
    let n = 5;
    let phi = coherent(c(0.5, 0.0), n).unwrap();
    let phi_bar = coherent(c(-0.5, 0.0), n).unwrap();
    let run = |dt: f64| {
        let spec = OpenRunSpec {
            phi: &phi,
            phi_bar: &phi_bar,
            alpha: c(INV_SQRT2, 0.0),
            beta: c(INV_SQRT2, 0.0),
            params: &solved.physical,
            rates: &reference_rates(),
            crosstalk: true,
            hamiltonian: HamiltonianChoice::Effective,
            horizon: solved.t_swap,
            cfg: SolverConfig {
                method: Method::InteractionPicture,
                dt: Some(dt),
                samples: 2,
                ..SolverConfig::default()
            },
        };
        simulate_protocol_open(&spec)
            .unwrap()
            .samples
            .last()
            .unwrap()
            .fidelity
            .unwrap()
    };
    let f1 = run(2e-9);
    let f2 = run(1e-9);
    assert!((f1 - f2).abs() <= 1e-5, "halving changed fidelity by {:.3e}", (f1 - f2).abs());
}

#[test]
fn adaptive_driver_handles_the_full_model_on_a_short_window() {
    // Full driven Hamiltonian with dissipation over 2 ns: the adaptive
    // method must hold the physics invariants.
    let solved = reference_params();
    let n = 3;
    let phi = fock(1, n).unwrap();
    let phi_bar = fock(0, n).unwrap();
    let spec = OpenRunSpec {
        phi: &phi,
        phi_bar: &phi_bar,
        alpha: c(INV_SQRT2, 0.0),
        beta: c(INV_SQRT2, 0.0),
        params: &solved.physical,
        rates: &reference_rates(),
        crosstalk: true,
        hamiltonian: HamiltonianChoice::Full,
        horizon: 2e-9,
        cfg: SolverConfig {
            method: Method::Adaptive,
            samples: 4,
            ..SolverConfig::default()
        },
    };
    let trajectory = simulate_protocol_open(&spec).unwrap();
    for s in &trajectory.samples {
        assert!((s.trace - 1.0).abs() <= 1e-6);
        if let Some(lmin) = s.lambda_min {
            assert!(lmin >= -1e-7);
        }
    }
    let rho_end = trajectory.final_state.as_ref().unwrap();
    assert!(rho_end.hermiticity_defect() <= 1e-9);
}

#[test]
fn trajectory_csv_schema_is_stable() {
    let solved = reference_params();
    let n = 3;
    let phi = fock(1, n).unwrap();
    let phi_bar = fock(0, n).unwrap();
    let spec = OpenRunSpec {
        phi: &phi,
        phi_bar: &phi_bar,
        alpha: c(INV_SQRT2, 0.0),
        beta: c(INV_SQRT2, 0.0),
        params: &solved.physical,
        rates: &reference_rates(),
        crosstalk: false,
        hamiltonian: HamiltonianChoice::Effective,
        horizon: 10e-9,
        cfg: SolverConfig {
            method: Method::InteractionPicture,
            dt: Some(1e-9),
            samples: 3,
            ..SolverConfig::default()
        },
    };
    let trajectory = simulate_protocol_open(&spec).unwrap();
    let mut csv = Vec::new();
    trajectory.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time_us,fidelity,trace,purity,pop_e,pop_f,pop_gprime"
    );
    assert_eq!(lines.count(), 4);
    // Bit-identical on rerun.
    let mut again = Vec::new();
    simulate_protocol_open(&spec)
        .unwrap()
        .write_csv(&mut again)
        .unwrap();
    assert_eq!(text, String::from_utf8(again).unwrap());
}
