//! Dense right-hand-side kernels shared by the integrators.

use ndarray::Array2;

use super::LindbladChannel;
use crate::hilbert::{OperatorMatrix, C64};
use crate::{Error, Result};

/// Prepared dissipator: jump operators with their daggers plus the fused
/// anticommutator generator G = Σ rate·Λ†Λ.
pub(crate) struct DissipatorKernel {
    channels: Vec<(OperatorMatrix, OperatorMatrix, f64)>,
    anticomm: Option<OperatorMatrix>,
}

impl DissipatorKernel {
    pub fn new(channels: &[LindbladChannel]) -> Result<Self> {
        let mut prepared = Vec::with_capacity(channels.len());
        let mut anticomm: Option<OperatorMatrix> = None;
        for ch in channels {
            if ch.rate < 0.0 || !ch.rate.is_finite() {
                return Err(Error::Parameter(format!(
                    "channel rate must be non-negative and finite, got {}",
                    ch.rate
                )));
            }
            if ch.rate == 0.0 {
                continue;
            }
            let dag = ch.op.dagger();
            let ata = dag.matmul(&ch.op)?.scale(C64::new(ch.rate, 0.0));
            anticomm = Some(match anticomm {
                Some(acc) => acc.add(&ata)?,
                None => ata,
            });
            prepared.push((ch.op.clone(), dag, ch.rate));
        }
        Ok(DissipatorKernel {
            channels: prepared,
            anticomm,
        })
    }

    /// out += Σ rate·(Λ ρ Λ† − ½{Λ†Λ, ρ}).
    pub fn apply_into(&self, rho: &Array2<C64>, out: &mut Array2<C64>) {
        for (op, dag, rate) in &self.channels {
            // rate · Λ (ρ Λ†)  — computed as Λρ first, then (Λρ)Λ†.
            let lr = op.mul_dense(rho);
            let sandwich = dag.dense_mul(&lr);
            out.zip_mut_with(&sandwich, |o, s| *o += C64::new(*rate, 0.0) * s);
        }
        if let Some(g) = &self.anticomm {
            let gr = g.mul_dense(rho);
            let rg = g.dense_mul(rho);
            let half = C64::new(0.5, 0.0);
            out.zip_mut_with(&gr, |o, v| *o -= half * v);
            out.zip_mut_with(&rg, |o, v| *o -= half * v);
        }
    }
}

/// Full master-equation right-hand side with the Hamiltonian evaluated at
/// one time: −i[H, ρ] + D(ρ).
pub(crate) fn lindblad_rhs(
    h_at_t: Option<&OperatorMatrix>,
    kernel: &DissipatorKernel,
    rho: &Array2<C64>,
) -> Array2<C64> {
    let mut out = match h_at_t {
        Some(h) => {
            let hr = h.mul_dense(rho);
            let rh = h.dense_mul(rho);
            let mut out = hr;
            out.zip_mut_with(&rh, |o, v| *o -= v);
            let minus_i = C64::new(0.0, -1.0);
            out.mapv_inplace(|v| v * minus_i);
            out
        }
        None => Array2::zeros(rho.raw_dim()),
    };
    kernel.apply_into(rho, &mut out);
    out
}
