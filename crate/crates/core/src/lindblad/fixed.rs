//! Fixed-step RK4 master-equation driver.

use ndarray::Array2;

use super::dense::{lindblad_rhs, DissipatorKernel};
use super::{SamplePlan, Trajectory, TRACE_TOL};
use crate::hamiltonians::Hamiltonian;
use crate::hilbert::{DensityMatrix, Ket, C64};
use crate::metrics;
use crate::{Error, Result};

pub(crate) fn integrate_fixed_rk4(
    rho0: &DensityMatrix,
    h: &Hamiltonian,
    kernel: &DissipatorKernel,
    dt_max: f64,
    plan: &SamplePlan,
    target: Option<&Ket>,
) -> Result<Trajectory> {
    if dt_max <= 0.0 || !dt_max.is_finite() {
        return Err(Error::Parameter(format!(
            "fixed-step size must be positive and finite, got {dt_max}"
        )));
    }
    let space = *rho0.space();
    let h_static = if h.is_static() {
        Some(h.sparse_at(0.0))
    } else {
        None
    };
    let h_at = |t: f64| match &h_static {
        Some(op) => op.clone(),
        None => h.sparse_at(t),
    };

    let mut rho = rho0.clone();
    let mut samples = Vec::with_capacity(plan.times.len());
    samples.push(metrics::sample_from_density(
        plan.times[0],
        &rho,
        target,
        true,
        plan.check_positivity_at(0),
    )?);

    for seg in 1..plan.times.len() {
        let t_start = plan.times[seg - 1];
        let t_end = plan.times[seg];
        let span = t_end - t_start;
        let n_steps = (span / dt_max).ceil().max(1.0) as usize;
        let dt = span / n_steps as f64;
        for step in 0..n_steps {
            let t = t_start + step as f64 * dt;
            rk4_step(&mut rho, t, dt, &h_at, kernel, h_static.as_ref());
            rho.symmetrize();
        }
        let sample = metrics::sample_from_density(
            t_end,
            &rho,
            target,
            true,
            plan.check_positivity_at(seg),
        )?;
        if (sample.trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::SolverFailure(format!(
                "fixed-rk4: trace drift {:.3e} at t = {:.3e} s (dt = {:.3e})",
                sample.trace - 1.0,
                t_end,
                dt
            )));
        }
        samples.push(sample);
    }

    let final_state = DensityMatrix::new(space, rho.matrix().clone())?;
    Ok(Trajectory {
        samples,
        final_state: Some(final_state),
    })
}

fn rk4_step(
    rho: &mut DensityMatrix,
    t: f64,
    dt: f64,
    h_at: &impl Fn(f64) -> crate::hilbert::OperatorMatrix,
    kernel: &DissipatorKernel,
    h_static: Option<&crate::hilbert::OperatorMatrix>,
) {
    let half = dt / 2.0;
    let m = rho.matrix();

    let h0;
    let h_mid;
    let h_end;
    let (h_t0, h_t_mid, h_t_end) = match h_static {
        Some(op) => (Some(op), Some(op), Some(op)),
        None => {
            h0 = h_at(t);
            h_mid = h_at(t + half);
            h_end = h_at(t + dt);
            (Some(&h0), Some(&h_mid), Some(&h_end))
        }
    };

    let k1 = lindblad_rhs(h_t0, kernel, m);
    let y2 = axpy(m, &k1, half);
    let k2 = lindblad_rhs(h_t_mid, kernel, &y2);
    let y3 = axpy(m, &k2, half);
    let k3 = lindblad_rhs(h_t_mid, kernel, &y3);
    let y4 = axpy(m, &k3, dt);
    let k4 = lindblad_rhs(h_t_end, kernel, &y4);

    let sixth = dt / 6.0;
    let out = rho.matrix_mut();
    ndarray::Zip::from(&mut *out)
        .and(&k1)
        .and(&k2)
        .and(&k3)
        .and(&k4)
        .for_each(|y, &a, &b, &c, &d| {
            *y += C64::new(sixth, 0.0) * (a + C64::new(2.0, 0.0) * (b + c) + d);
        });
}

fn axpy(y: &Array2<C64>, x: &Array2<C64>, a: f64) -> Array2<C64> {
    let mut out = y.clone();
    out.zip_mut_with(x, |o, &v| *o += C64::new(a, 0.0) * v);
    out
}
