//! Interaction-picture RK4 for conditional dynamics with oscillatory
//! crosstalk.
//!
//! The coherent part is block-diagonal over coupler levels and quadratic in
//! the mode operators, so its time-ordered propagator U(t) = ⊕_x U_x(t) is
//! known exactly through 2×2 mode matrices. In the frame σ = U†ρU the
//! equation keeps only the dissipator, with unitarily transformed jump
//! operators: â and b̂ become level-dependent linear mode combinations,
//! coupler relaxation |y⟩⟨x| picks up the two-mode rotation U_y†U_x, and
//! dephasing projectors are invariant. The integrator therefore steps on the
//! slow dissipative timescale while the GHz crosstalk phase is handled
//! exactly; density weight confined to a subset of coupler levels stays
//! there, and the state is stored on that subspace.

use ndarray::{Array1, Array2};
use num_traits::Zero;

use super::dense::{lindblad_rhs, DissipatorKernel};
use super::mode::{fock_lift, mat2_dagger, mat2_mul, Mat2, ModeEvolution, TwoModeGenerator};
use super::{DecoherenceRates, LindbladChannel, SamplePlan, Trajectory, TRACE_TOL};
use crate::hilbert::{DensityMatrix, Ket, OperatorMatrix, Space, SystemDims, C64};
use crate::metrics::MetricSample;
use crate::{Error, Result};

pub(crate) struct IpSpec<'a> {
    pub(crate) dims: SystemDims,
    pub(crate) static_forms: [Mat2; 4],
    pub(crate) drive_amp: f64,
    pub(crate) drive_freq: f64,
    pub(crate) rates: &'a DecoherenceRates,
    pub(crate) rho0: &'a DensityMatrix,
    pub(crate) psi_id: Option<&'a Ket>,
    pub(crate) dt: f64,
    pub(crate) plan: SamplePlan,
}

pub(crate) fn integrate_ip(spec: &IpSpec) -> Result<Trajectory> {
    spec.rates.validate()?;
    if spec.dims.has_osc_c() {
        return Err(Error::Dimension(
            "interaction-picture runs do not include oscillator c".into(),
        ));
    }
    if spec.dt <= 0.0 || !spec.dt.is_finite() {
        return Err(Error::Parameter(format!(
            "interaction-picture step must be positive, got {}",
            spec.dt
        )));
    }
    let n_a = spec.dims.n_a();
    let n_b = spec.dims.n_b();
    let osc_dim = n_a * n_b;
    let full_dim = spec.dims.total();
    if spec.rho0.dim() != full_dim {
        return Err(Error::Dimension(
            "initial state does not match the system dims".into(),
        ));
    }

    let active = active_levels(spec)?;
    let n_act = active.len();
    let pos_of = |level: usize| active.iter().position(|&l| l == level);
    let sub_dim = osc_dim * n_act;

    // Project ρ0 onto the invariant subspace and verify nothing is lost.
    let mut sigma = Array2::<C64>::zeros((sub_dim, sub_dim));
    let mut kept = 0.0f64;
    let mut total = 0.0f64;
    let m0 = spec.rho0.matrix();
    for r in 0..full_dim {
        for c in 0..full_dim {
            let v = m0[(r, c)];
            if v == C64::zero() {
                continue;
            }
            total += v.norm_sqr();
            let (rf, rl) = (r / 4, r % 4);
            let (cf, cl) = (c / 4, c % 4);
            if let (Some(rp), Some(cp)) = (pos_of(rl), pos_of(cl)) {
                sigma[(rf * n_act + rp, cf * n_act + cp)] = v;
                kept += v.norm_sqr();
            }
        }
    }
    if total > 0.0 && (total - kept) / total > 1e-20 {
        return Err(Error::Consistency(
            "initial state has weight outside the dissipation-closed coupler subspace".into(),
        ));
    }

    // Transformed fidelity target blocks, per active level.
    let psi_blocks: Option<Vec<Array1<C64>>> = match spec.psi_id {
        Some(psi) => {
            let mut blocks = Vec::with_capacity(n_act);
            let amps = psi.amplitudes();
            let mut covered = 0.0;
            for &level in &active {
                let mut block = Array1::<C64>::zeros(osc_dim);
                for of in 0..osc_dim {
                    block[of] = amps[of * 4 + level];
                }
                covered += block.iter().map(|a| a.norm_sqr()).sum::<f64>();
                blocks.push(block);
            }
            if (covered - 1.0).abs() > 1e-9 {
                return Err(Error::Consistency(
                    "fidelity target has weight outside the coupler subspace of the run".into(),
                ));
            }
            Some(blocks)
        }
        None => None,
    };

    let mut evolutions: Vec<ModeEvolution> = active
        .iter()
        .map(|&level| {
            ModeEvolution::new(&TwoModeGenerator {
                static_form: spec.static_forms[level],
                drive_amp: spec.drive_amp,
                drive_freq: spec.drive_freq,
            })
        })
        .collect();

    // Relaxation edges inside the subspace, as (upper pos, lower pos, rate).
    let mut relax_edges: Vec<(usize, usize, f64)> = Vec::new();
    for (upper, lower, rate) in spec.rates.relaxations() {
        if rate > 0.0 {
            if let (Some(up), Some(lp)) = (pos_of(upper), pos_of(lower)) {
                relax_edges.push((up, lp, rate));
            }
        }
    }
    let mut dephase_edges: Vec<(usize, f64)> = Vec::new();
    for (level, rate) in spec.rates.dephasings() {
        if rate > 0.0 {
            if let Some(p) = pos_of(level) {
                dephase_edges.push((p, rate));
            }
        }
    }

    let stage_kernel = |ks: &[Mat2]| -> Result<DissipatorKernel> {
        let channels = stage_channels(
            ks,
            spec.rates,
            &relax_edges,
            &dephase_edges,
            n_a,
            n_b,
            n_act,
        )?;
        DissipatorKernel::new(&channels)
    };

    let mut samples: Vec<MetricSample> = Vec::with_capacity(spec.plan.times.len());
    let push_sample = |samples: &mut Vec<MetricSample>,
                       idx: usize,
                       t: f64,
                       sigma: &Array2<C64>,
                       ks: &[Mat2]|
     -> Result<()> {
        let fidelity = match &psi_blocks {
            Some(blocks) => {
                let mut psi_t = Array1::<C64>::zeros(sub_dim);
                for (p, block) in blocks.iter().enumerate() {
                    let lift = fock_lift(&ks[p], n_a, n_b);
                    let rotated = lift.matvec_dagger(block);
                    for of in 0..osc_dim {
                        psi_t[of * n_act + p] = rotated[of];
                    }
                }
                let mut q = C64::zero();
                for i in 0..sub_dim {
                    let ai = psi_t[i].conj();
                    if ai == C64::zero() {
                        continue;
                    }
                    let mut row = C64::zero();
                    for j in 0..sub_dim {
                        row += sigma[(i, j)] * psi_t[j];
                    }
                    q += ai * row;
                }
                if q.re < -1e-9 {
                    eprintln!(
                        "interaction-picture: clipped negative quadratic form {:.3e}",
                        q.re
                    );
                }
                Some(q.re.max(0.0).sqrt())
            }
            None => None,
        };
        let mut populations = [0.0f64; 4];
        for (p, &level) in active.iter().enumerate() {
            let mut acc = 0.0;
            for of in 0..osc_dim {
                acc += sigma[(of * n_act + p, of * n_act + p)].re;
            }
            populations[level] = acc;
        }
        let trace: f64 = (0..sub_dim).map(|i| sigma[(i, i)].re).sum();
        let purity: f64 = sigma.iter().map(|v| v.norm_sqr()).sum();
        let lambda_min = if spec.plan.check_positivity_at(idx) {
            let dm = DensityMatrix::new(Space::Mode(sub_dim), sigma.clone())?;
            Some(dm.min_eigenvalue())
        } else {
            None
        };
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::SolverFailure(format!(
                "interaction-picture: trace drift {:.3e} at t = {t:.3e} s",
                trace - 1.0
            )));
        }
        samples.push(MetricSample {
            time: t,
            fidelity,
            trace,
            purity,
            populations,
            tail_a: None,
            tail_b: None,
            lambda_min,
        });
        Ok(())
    };

    let ks0: Vec<Mat2> = evolutions.iter().map(|e| *e.k()).collect();
    push_sample(&mut samples, 0, spec.plan.times[0], &sigma, &ks0)?;

    // Cache the end-of-step kernel: it is the next step's start kernel.
    let mut kernel_start: Option<DissipatorKernel> = Some(stage_kernel(&ks0)?);

    for seg in 1..spec.plan.times.len() {
        let t_start = spec.plan.times[seg - 1];
        let t_end = spec.plan.times[seg];
        let span = t_end - t_start;
        let n_steps = (span / spec.dt).ceil().max(1.0) as usize;
        let dt = span / n_steps as f64;
        for step in 0..n_steps {
            let t = t_start + step as f64 * dt;
            let k_start = match kernel_start.take() {
                Some(k) => k,
                None => {
                    let ks: Vec<Mat2> = evolutions.iter_mut().map(|e| e.advance_to(t)).collect();
                    stage_kernel(&ks)?
                }
            };
            let ks_mid: Vec<Mat2> = evolutions
                .iter_mut()
                .map(|e| e.advance_to(t + dt / 2.0))
                .collect();
            let kernel_mid = stage_kernel(&ks_mid)?;
            let ks_end: Vec<Mat2> = evolutions
                .iter_mut()
                .map(|e| e.advance_to(t + dt))
                .collect();
            let kernel_end = stage_kernel(&ks_end)?;

            let k1 = lindblad_rhs(None, &k_start, &sigma);
            let y2 = axpy(&sigma, &k1, dt / 2.0);
            let k2 = lindblad_rhs(None, &kernel_mid, &y2);
            let y3 = axpy(&sigma, &k2, dt / 2.0);
            let k3 = lindblad_rhs(None, &kernel_mid, &y3);
            let y4 = axpy(&sigma, &k3, dt);
            let k4 = lindblad_rhs(None, &kernel_end, &y4);
            let sixth = dt / 6.0;
            ndarray::Zip::from(&mut sigma)
                .and(&k1)
                .and(&k2)
                .and(&k3)
                .and(&k4)
                .for_each(|y, &a, &b, &c, &d| {
                    *y += C64::new(sixth, 0.0) * (a + C64::new(2.0, 0.0) * (b + c) + d);
                });
            symmetrize(&mut sigma);
            kernel_start = Some(kernel_end);
        }
        let ks: Vec<Mat2> = evolutions.iter().map(|e| *e.k()).collect();
        push_sample(&mut samples, seg, t_end, &sigma, &ks)?;
    }

    // Rotate the final state back to the lab frame and embed in full space.
    let ks: Vec<Mat2> = evolutions.iter().map(|e| *e.k()).collect();
    let lifts: Vec<OperatorMatrix> = ks.iter().map(|k| fock_lift(k, n_a, n_b)).collect();
    let lift_daggers: Vec<OperatorMatrix> = lifts.iter().map(|l| l.dagger()).collect();
    let mut rho_final = Array2::<C64>::zeros((full_dim, full_dim));
    for (rp, &rl) in active.iter().enumerate() {
        for (cp, &cl) in active.iter().enumerate() {
            let mut block = Array2::<C64>::zeros((osc_dim, osc_dim));
            for rf in 0..osc_dim {
                for cf in 0..osc_dim {
                    block[(rf, cf)] = sigma[(rf * n_act + rp, cf * n_act + cp)];
                }
            }
            let rotated = lift_daggers[cp].dense_mul(&lifts[rp].mul_dense(&block));
            for rf in 0..osc_dim {
                for cf in 0..osc_dim {
                    rho_final[(rf * 4 + rl, cf * 4 + cl)] = rotated[(rf, cf)];
                }
            }
        }
    }
    let final_state = DensityMatrix::new(Space::System(spec.dims), rho_final)?;

    Ok(Trajectory {
        samples,
        final_state: Some(final_state),
    })
}

/// Coupler levels carrying weight initially, closed under relaxation.
fn active_levels(spec: &IpSpec) -> Result<Vec<usize>> {
    let full_dim = spec.dims.total();
    let m = spec.rho0.matrix();
    let mut has_weight = [false; 4];
    for r in 0..full_dim {
        for c in 0..full_dim {
            if m[(r, c)].norm_sqr() > 1e-28 {
                has_weight[r % 4] = true;
                has_weight[c % 4] = true;
            }
        }
    }
    loop {
        let mut grew = false;
        for (upper, lower, rate) in spec.rates.relaxations() {
            if rate > 0.0 && has_weight[upper] && !has_weight[lower] {
                has_weight[lower] = true;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let active: Vec<usize> = (0..4).filter(|&l| has_weight[l]).collect();
    if active.is_empty() {
        return Err(Error::State("initial state is empty".into()));
    }
    Ok(active)
}

/// Transformed channel set at one stage, on the subspace.
#[allow(clippy::too_many_arguments)]
fn stage_channels(
    ks: &[Mat2],
    rates: &DecoherenceRates,
    relax_edges: &[(usize, usize, f64)],
    dephase_edges: &[(usize, f64)],
    n_a: usize,
    n_b: usize,
    n_act: usize,
) -> Result<Vec<LindbladChannel>> {
    let osc_dim = n_a * n_b;
    let sub_dim = osc_dim * n_act;
    let space = Space::Mode(sub_dim);
    let mut channels = Vec::new();

    // Photon decay: U†âU = K₀₀â + K₀₁b̂ per level (row 0 of K), and the
    // matching row 1 for b̂.
    for (rate, row) in [(rates.kappa_a, 0usize), (rates.kappa_b, 1usize)] {
        if rate == 0.0 {
            continue;
        }
        let mut triplets = Vec::with_capacity(2 * osc_dim * n_act);
        for (p, k) in ks.iter().enumerate() {
            let ca = k[row][0];
            let cb = k[row][1];
            for m in 0..n_a {
                for n in 0..n_b {
                    let col = (m * n_b + n) * n_act + p;
                    if m > 0 && ca != C64::zero() {
                        let rowi = ((m - 1) * n_b + n) * n_act + p;
                        triplets.push((rowi, col, ca * C64::new((m as f64).sqrt(), 0.0)));
                    }
                    if n > 0 && cb != C64::zero() {
                        let rowi = (m * n_b + (n - 1)) * n_act + p;
                        triplets.push((rowi, col, cb * C64::new((n as f64).sqrt(), 0.0)));
                    }
                }
            }
        }
        channels.push(LindbladChannel {
            op: OperatorMatrix::from_triplets(space, triplets, false),
            rate,
        });
    }

    // Coupler relaxation |lower⟩⟨upper| → (U_lower† U_upper) ⊗ |lower⟩⟨upper|.
    for &(up, lp, rate) in relax_edges {
        let k_v = mat2_mul(&mat2_dagger(&ks[lp]), &ks[up]);
        let w = fock_lift(&k_v, n_a, n_b);
        let mut triplets = Vec::with_capacity(w.nnz());
        for r in 0..osc_dim {
            let (cols, vals) = w.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((r * n_act + lp, c * n_act + up, v));
            }
        }
        channels.push(LindbladChannel {
            op: OperatorMatrix::from_triplets(space, triplets, false),
            rate,
        });
    }

    // Dephasing projectors commute with the frame.
    for &(p, rate) in dephase_edges {
        let triplets =
            (0..osc_dim).map(|of| (of * n_act + p, of * n_act + p, C64::new(1.0, 0.0)));
        channels.push(LindbladChannel {
            op: OperatorMatrix::from_triplets(space, triplets, true),
            rate,
        });
    }

    Ok(channels)
}

fn axpy(y: &Array2<C64>, x: &Array2<C64>, a: f64) -> Array2<C64> {
    let mut out = y.clone();
    out.zip_mut_with(x, |o, &v| *o += C64::new(a, 0.0) * v);
    out
}

fn symmetrize(m: &mut Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}
