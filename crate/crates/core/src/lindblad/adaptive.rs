//! Adaptive embedded Dormand–Prince 5(4) driver, shared by density-matrix
//! and pure-state propagation.

use ndarray::{Array, Dimension};

use super::dense::{lindblad_rhs, DissipatorKernel};
use super::{SamplePlan, SolverConfig, Trajectory, TRACE_TOL};
use crate::hamiltonians::Hamiltonian;
use crate::hilbert::{DensityMatrix, Ket, C64};
use crate::metrics;
use crate::{Error, Result};

const SAFETY: f64 = 0.9;
const SHRINK_MIN: f64 = 0.2;
const GROW_MAX: f64 = 5.0;

/// One adaptive advance from `t0` to `t1` with step-size control; calls
/// `post_step` after every accepted step (used to re-Hermitize states).
pub(crate) fn dp54_advance<D: Dimension>(
    y: &mut Array<C64, D>,
    t0: f64,
    t1: f64,
    rhs: &mut impl FnMut(f64, &Array<C64, D>) -> Array<C64, D>,
    rtol: f64,
    atol: f64,
    max_step: Option<f64>,
    post_step: &mut impl FnMut(&mut Array<C64, D>),
) -> Result<()> {
    // Dormand–Prince 5(4) tableau.
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    // 5th-order weights equal the last A row; embedded 4th-order weights:
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];

    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(());
    }
    let mut t = t0;
    let mut h = span / 100.0;
    if let Some(hmax) = max_step {
        h = h.min(hmax);
    }
    let h_floor = span * 1e-14;
    let mut guard = 0usize;

    while t < t1 {
        guard += 1;
        if guard > 50_000_000 {
            return Err(Error::SolverFailure(
                "adaptive: step limit exceeded".into(),
            ));
        }
        if t + h > t1 {
            h = t1 - t;
        }

        let k1 = rhs(t, y);
        let mut ks: Vec<Array<C64, D>> = Vec::with_capacity(7);
        ks.push(k1);
        for stage in 0..6 {
            let mut ys = y.clone();
            for (j, k) in ks.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    ys.zip_mut_with(k, |o, &v| *o += C64::new(a * h, 0.0) * v);
                }
            }
            ks.push(rhs(t + C[stage] * h, &ys));
        }

        let mut y5 = y.clone();
        let mut err = Array::<C64, D>::zeros(y.raw_dim());
        for (j, k) in ks.iter().enumerate() {
            if B5[j] != 0.0 {
                y5.zip_mut_with(k, |o, &v| *o += C64::new(B5[j] * h, 0.0) * v);
            }
            let d = B5[j] - B4[j];
            if d != 0.0 {
                err.zip_mut_with(k, |o, &v| *o += C64::new(d * h, 0.0) * v);
            }
        }

        let mut acc = 0.0f64;
        let n_el = err.len().max(1);
        for (e, (a, b)) in err.iter().zip(y.iter().zip(y5.iter())) {
            let scale = atol + rtol * a.norm().max(b.norm());
            let r = e.norm() / scale;
            acc += r * r;
        }
        let err_norm = (acc / n_el as f64).sqrt();

        if err_norm <= 1.0 {
            t += h;
            *y = y5;
            post_step(y);
        }

        let factor = if err_norm == 0.0 {
            GROW_MAX
        } else {
            (SAFETY * err_norm.powf(-0.2)).clamp(SHRINK_MIN, GROW_MAX)
        };
        h *= factor;
        if let Some(hmax) = max_step {
            h = h.min(hmax);
        }
        if h < h_floor {
            return Err(Error::Stiffness(format!(
                "adaptive: step underflow at t = {t:.6e} s (h = {h:.3e}, error norm {err_norm:.3e}); \
                 the generator is too stiff for the requested tolerances"
            )));
        }
    }
    Ok(())
}

/// Adaptive master-equation integration between the sample times.
pub(crate) fn integrate_adaptive(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    kernel: &DissipatorKernel,
    cfg: &SolverConfig,
    plan: &SamplePlan,
    target: Option<&Ket>,
) -> Result<Trajectory> {
    let space = *rho0.space();
    let h_static = if h.is_static() {
        Some(h.sparse_at(0.0))
    } else {
        None
    };

    let mut m = rho0.matrix().clone();
    let mut samples = Vec::with_capacity(plan.times.len());
    samples.push(metrics::sample_from_density(
        plan.times[0],
        rho0,
        target,
        true,
        plan.check_positivity_at(0),
    )?);

    for seg in 1..plan.times.len() {
        let t0 = plan.times[seg - 1];
        let t1 = plan.times[seg];
        let mut rhs = |t: f64, y: &ndarray::Array2<C64>| match &h_static {
            Some(op) => lindblad_rhs(Some(op), kernel, y),
            None => {
                let op = h.sparse_at(t);
                lindblad_rhs(Some(&op), kernel, y)
            }
        };
        let mut post = |y: &mut ndarray::Array2<C64>| symmetrize_in_place(y);
        dp54_advance(
            &mut m,
            t0,
            t1,
            &mut rhs,
            cfg.rtol,
            cfg.atol,
            cfg.max_step,
            &mut post,
        )?;
        let rho = DensityMatrix::new(space, m.clone())?;
        let sample = metrics::sample_from_density(
            t1,
            &rho,
            target,
            true,
            plan.check_positivity_at(seg),
        )?;
        if (sample.trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::SolverFailure(format!(
                "adaptive: trace drift {:.3e} at t = {:.3e} s",
                sample.trace - 1.0,
                t1
            )));
        }
        samples.push(sample);
    }

    let final_state = DensityMatrix::new(space, m)?;
    Ok(Trajectory {
        samples,
        final_state: Some(final_state),
    })
}

/// Pure-state Schrödinger advance under a time-dependent Hamiltonian.
pub(crate) fn advance_ket(
    psi: &mut Ket,
    h: &Hamiltonian,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<()> {
    let mut amps = psi.amplitudes().clone();
    let minus_i = C64::new(0.0, -1.0);
    let mut rhs = |t: f64, y: &ndarray::Array1<C64>| h.apply(t, y).mapv(|v| v * minus_i);
    let mut post = |_: &mut ndarray::Array1<C64>| {};
    dp54_advance(&mut amps, t0, t1, &mut rhs, rtol, atol, None, &mut post)?;
    *psi = Ket::new(*psi.space(), amps)?;
    Ok(())
}

fn symmetrize_in_place(m: &mut ndarray::Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}
