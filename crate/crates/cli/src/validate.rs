//! Quick in-process validation suites, exposed through `oscswap validate`.

use num_complex::Complex64 as C64;

use oscswap_core::hamiltonians::{self, IdealParams};
use oscswap_core::hilbert::{
    annihilation, creation, expm_apply, partial_trace, DensityMatrix, Subsystem, SystemDims,
};
use oscswap_core::protocol;
use oscswap_core::states::{coherent, fock, product_state, CouplerState};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

pub fn suite_names() -> &'static [&'static str] {
    &["algebra", "params", "swap"]
}

pub fn run_suite(name: &str) -> anyhow::Result<Vec<CheckResult>> {
    match name {
        "algebra" => Ok(algebra_suite()),
        "params" => Ok(params_suite()),
        "swap" => Ok(swap_suite()),
        "all" => {
            let mut all = algebra_suite();
            all.extend(params_suite());
            all.extend(swap_suite());
            Ok(all)
        }
        other => anyhow::bail!(
            "unknown suite '{other}' (expected one of algebra, params, swap, all)"
        ),
    }
}

fn algebra_suite() -> Vec<CheckResult> {
    let mut results = Vec::new();

    // Ladder-operator commutator away from the truncation edge.
    let n = 12;
    let a = annihilation(n).unwrap();
    let adag = creation(n).unwrap();
    let comm = a
        .matmul(&adag)
        .unwrap()
        .add(&adag.matmul(&a).unwrap().scale(C64::new(-1.0, 0.0)))
        .unwrap();
    let mut worst = 0.0f64;
    for r in 0..(n - 1) {
        for col in 0..(n - 1) {
            let expected = if r == col { 1.0 } else { 0.0 };
            worst = worst.max((comm.entry(r, col) - C64::new(expected, 0.0)).norm());
        }
    }
    results.push(check(
        "ladder commutator below truncation edge",
        worst < 1e-12,
        format!("max deviation {worst:.3e}"),
    ));

    // Lift sparsity bookkeeping.
    let dims = SystemDims::new(5, 4).unwrap();
    let lifted = a_of(5).lift(Subsystem::OscA, &dims).unwrap();
    let expected_nnz = a_of(5).nnz() * dims.total() / 5;
    results.push(check(
        "lift preserves sparsity count",
        lifted.nnz() == expected_nnz,
        format!("nnz {} vs {}", lifted.nnz(), expected_nnz),
    ));

    // Partial trace: trace preservation and product recovery.
    let phi = coherent(C64::new(0.7, 0.0), 8).unwrap();
    let phi_bar = fock(1, 8).unwrap();
    let psi = product_state(&phi, &phi_bar, None, &CouplerState::ground()).unwrap();
    let rho = DensityMatrix::from_pure(&psi);
    let reduced = partial_trace(&rho, &[Subsystem::OscB]).unwrap();
    let trace_dev = (reduced.trace().re - 1.0).abs();
    let pop_dev = (reduced.matrix()[(1, 1)].re - 1.0).abs();
    results.push(check(
        "partial trace preserves trace and factors",
        trace_dev < 1e-12 && pop_dev < 1e-12,
        format!("trace deviation {trace_dev:.3e}, factor deviation {pop_dev:.3e}"),
    ));

    // Krylov propagator preserves the norm.
    let h = hamiltonians::ideal(
        &IdealParams {
            freq_shift: -1.0,
            coupling: 0.4,
        },
        &SystemDims::new(6, 6).unwrap(),
    )
    .unwrap();
    let psi0 = product_state(
        &coherent(C64::new(0.6, 0.0), 6).unwrap(),
        &coherent(C64::new(-0.6, 0.0), 6).unwrap(),
        None,
        &CouplerState::ground(),
    )
    .unwrap();
    let out = expm_apply(&h, &psi0, 3.7).unwrap();
    let norm_dev = (out.norm() - 1.0).abs();
    results.push(check(
        "propagator preserves the norm",
        norm_dev < 1e-9,
        format!("deviation {norm_dev:.3e}"),
    ));

    results
}

fn params_suite() -> Vec<CheckResult> {
    let mut results = Vec::new();
    let solved = hamiltonians::solve_params(
        TWO_PI * 60.0e6,
        TWO_PI * 1.5e9,
        TWO_PI * 1.25e9,
        TWO_PI * 0.25e9,
        1,
    );
    match solved {
        Ok(s) => {
            let g_b = s.physical.g_b / TWO_PI / 1e6;
            let rabi = s.physical.rabi / TWO_PI / 1e6;
            let t_swap = s.t_swap * 1e6;
            results.push(check(
                "matching relations reproduce the reference point",
                (g_b - 25.0).abs() < 1.0 && (rabi - 114.0).abs() < 1.0,
                format!("g_b/2π = {g_b:.3} MHz, Ω/2π = {rabi:.3} MHz"),
            ));
            results.push(check(
                "swap time",
                (t_swap - 0.5).abs() < 0.01,
                format!("t_swap = {t_swap:.4} us"),
            ));
            let dims = SystemDims::new(4, 4).unwrap();
            let h_eff = hamiltonians::effective(&s.physical, &dims).unwrap();
            let h_ideal = hamiltonians::ideal(&s.ideal, &dims).unwrap();
            let diff = h_eff
                .add(&h_ideal.scale(C64::new(-1.0, 0.0)))
                .unwrap();
            let mut worst = 0.0f64;
            for r in 0..diff.dim() {
                let (_, vals) = diff.row(r);
                for v in vals {
                    worst = worst.max(v.norm());
                }
            }
            let scale = s.ideal.coupling.abs();
            results.push(check(
                "effective Hamiltonian equals the conditional form",
                worst <= 1e-12 * scale.max(1.0) + 1e-18,
                format!("entrywise deviation {worst:.3e}"),
            ));
            let report = hamiltonians::check_detuning_conditions(&s.physical);
            results.push(check(
                "large-detuning margins",
                report.min_ratio() > 2.0,
                format!("smallest margin ratio {:.2}", report.min_ratio()),
            ));
        }
        Err(e) => results.push(check(
            "matching relations reproduce the reference point",
            false,
            format!("solver error: {e}"),
        )),
    }
    results
}

fn swap_suite() -> Vec<CheckResult> {
    let mut results = Vec::new();
    let coupling = TWO_PI * 0.5e6;
    let t_swap = std::f64::consts::PI / (2.0 * coupling);
    let params = IdealParams {
        freq_shift: -2.5 * std::f64::consts::PI / t_swap,
        coupling,
    };

    // Fock-encoded SWAP gate.
    let n = 4;
    let dims = SystemDims::new(n, n).unwrap();
    let phi = fock(0, n).unwrap();
    let phi_bar = fock(1, n).unwrap();
    match protocol::swap_gate_check(&phi, &phi_bar, &params, &dims) {
        Ok(report) => results.push(check(
            "swap gate on the Fock-encoded qubit",
            report.worst <= 1e-8,
            format!("worst infidelity {:.3e}", report.worst),
        )),
        Err(e) => results.push(check(
            "swap gate on the Fock-encoded qubit",
            false,
            format!("{e}"),
        )),
    }

    // Corrected oracle against full propagation for a coherent pair.
    let n = 12;
    let dims = SystemDims::new(n, n).unwrap();
    let phi = coherent(C64::new(0.8, 0.0), n).unwrap();
    let phi_bar = coherent(C64::new(-0.8, 0.0), n).unwrap();
    let joint = product_state(&phi, &phi_bar, None, &CouplerState::ground()).unwrap();
    let h = hamiltonians::ideal(&params, &dims).unwrap();
    let evolved = expm_apply(&h, &joint, t_swap).unwrap();
    let expected = product_state(&phi_bar, &phi, None, &CouplerState::ground()).unwrap();
    let overlap = expected.inner(&evolved).unwrap().norm();
    results.push(check(
        "corrected swap equals full propagation",
        overlap > 1.0 - 1e-6,
        format!("overlap {overlap:.9}"),
    ));

    // Protocol branch probabilities against the overlap formula.
    let result = protocol::run_protocol(
        &phi,
        &phi_bar,
        C64::new(INV_SQRT2, 0.0),
        C64::new(INV_SQRT2, 0.0),
        &params,
        &dims,
    );
    match result {
        Ok(r) => {
            let o = phi.ket().inner(&phi_bar.ket()).unwrap().norm_sqr();
            let expected_pg = (1.0 + o) / 2.0;
            let dev = (r.branch_g.probability - expected_pg).abs();
            results.push(check(
                "post-selection probabilities follow the overlap formula",
                dev < 1e-8,
                format!("deviation {dev:.3e}"),
            ));
        }
        Err(e) => results.push(check(
            "post-selection probabilities follow the overlap formula",
            false,
            format!("{e}"),
        )),
    }

    results
}

fn a_of(n: usize) -> oscswap_core::hilbert::OperatorMatrix {
    annihilation(n).unwrap()
}

/// Prints results; true when everything passed.
pub fn report(results: &[CheckResult]) -> bool {
    let mut ok = true;
    for r in results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {} — {}", r.name, r.detail);
        ok &= r.passed;
    }
    ok
}
