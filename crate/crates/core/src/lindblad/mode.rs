//! Exact propagation of number-conserving two-mode quadratic generators.
//!
//! The conditional and crosstalk Hamiltonians are quadratic in the mode
//! operators, H(t) = Σ_{ij} h_{ij}(t) a_i†a_j, so the Heisenberg action of
//! their time-ordered propagator U(t) is a 2×2 mode transformation
//! U†(t) a_i U(t) = Σ_j K_{ij}(t) a_j with K′ = −i h(t) K. A static
//! generator is exponentiated in closed form; a harmonically driven one is
//! advanced on a fine grid by a fourth-order Magnus rule (two-point Gauss),
//! which keeps K exactly unitary. The Fock-space matrix of U is then rebuilt
//! from K by a stable block recursion over total photon number.

use num_traits::Zero;

use crate::hilbert::{OperatorMatrix, Space, C64};

pub(crate) type Mat2 = [[C64; 2]; 2];

pub(crate) fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn mat2_dagger(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn mat2_identity() -> Mat2 {
    [
        [C64::new(1.0, 0.0), C64::zero()],
        [C64::zero(), C64::new(1.0, 0.0)],
    ]
}

/// e^{−i h t} of a Hermitian 2×2 form via its closed-form eigensystem.
fn mat2_exp_herm(h: &Mat2, t: f64) -> Mat2 {
    let a = h[0][0].re;
    let d = h[1][1].re;
    let b = h[0][1];
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let omega = (half_diff * half_diff + b.norm_sqr()).sqrt();
    let phase_mean = C64::from_polar(1.0, -mean * t);
    if omega < 1e-300 {
        let mut out = mat2_identity();
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v *= phase_mean;
            }
        }
        return out;
    }
    // e^{−i(mean·I + M)t} with M = [[half_diff, b],[b̄, −half_diff]],
    // M² = ω² I  →  cos(ωt) I − i sin(ωt) M/ω.
    let cosv = (omega * t).cos();
    let sincv = (omega * t).sin() / omega;
    let mi = C64::new(0.0, -sincv);
    [
        [
            phase_mean * (C64::new(cosv, 0.0) + mi * C64::new(half_diff, 0.0)),
            phase_mean * (mi * b),
        ],
        [
            phase_mean * (mi * b.conj()),
            phase_mean * (C64::new(cosv, 0.0) - mi * C64::new(half_diff, 0.0)),
        ],
    ]
}

/// The two-mode generator h(t) = h₀ + drive·(e^{iωt} a†b + h.c.).
#[derive(Clone, Debug)]
pub(crate) struct TwoModeGenerator {
    pub static_form: Mat2,
    pub drive_amp: f64,
    pub drive_freq: f64,
}

impl TwoModeGenerator {
    fn form_at(&self, t: f64) -> Mat2 {
        let mut h = self.static_form;
        if self.drive_amp != 0.0 {
            let d = C64::from_polar(self.drive_amp, self.drive_freq * t);
            h[0][1] += d;
            h[1][0] += d.conj();
        }
        h
    }
}

/// Streaming evaluation of the mode transfer matrix K(t); requests must come
/// with non-decreasing times.
#[derive(Clone, Debug)]
pub(crate) struct ModeEvolution {
    gen: TwoModeGenerator,
    t: f64,
    k: Mat2,
    /// 0 means the generator is static and K is closed-form from any time.
    micro_dt: f64,
}

/// Grid resolution per drive period for the Magnus micro-integrator.
const STEPS_PER_PERIOD: f64 = 256.0;

impl ModeEvolution {
    pub fn new(gen: &TwoModeGenerator) -> Self {
        let mut gen = gen.clone();
        if gen.drive_amp != 0.0 && gen.drive_freq == 0.0 {
            // A zero-frequency drive is just a static coupling.
            gen.static_form[0][1] += C64::new(gen.drive_amp, 0.0);
            gen.static_form[1][0] += C64::new(gen.drive_amp, 0.0);
            gen.drive_amp = 0.0;
        }
        let micro_dt = if gen.drive_amp == 0.0 {
            0.0
        } else {
            2.0 * std::f64::consts::PI / (gen.drive_freq.abs() * STEPS_PER_PERIOD)
        };
        ModeEvolution {
            gen,
            t: 0.0,
            k: mat2_identity(),
            micro_dt,
        }
    }

    pub fn k(&self) -> &Mat2 {
        &self.k
    }

    /// Advances to `t_new ≥ t` and returns K(t_new).
    pub fn advance_to(&mut self, t_new: f64) -> Mat2 {
        debug_assert!(
            t_new >= self.t - 1e-18,
            "mode evolution must advance monotonically"
        );
        if t_new <= self.t {
            return self.k;
        }
        if self.micro_dt == 0.0 {
            // Static generator: closed form from t to t_new.
            let step = mat2_exp_herm(&self.gen.static_form, t_new - self.t);
            self.k = mat2_mul(&step, &self.k);
            self.t = t_new;
            return self.k;
        }
        let span = t_new - self.t;
        let n_steps = (span / self.micro_dt).ceil().max(1.0) as usize;
        let dt = span / n_steps as f64;
        // Two-point Gauss–Magnus: Ω = −i·dt·H_eff with
        // H_eff = (h₁+h₂)/2 − i(√3·dt/12)[h₂, h₁], exact to O(dt⁵).
        let offset = 3f64.sqrt() / 6.0;
        let comm_scale = 3f64.sqrt() * dt / 12.0;
        for step in 0..n_steps {
            let t0 = self.t + step as f64 * dt;
            let h1 = self.gen.form_at(t0 + (0.5 - offset) * dt);
            let h2 = self.gen.form_at(t0 + (0.5 + offset) * dt);
            let mut h_eff = [[C64::zero(); 2]; 2];
            let comm = mat2_comm(&h2, &h1);
            let minus_i_scale = C64::new(0.0, -comm_scale);
            for i in 0..2 {
                for j in 0..2 {
                    h_eff[i][j] = 0.5 * (h1[i][j] + h2[i][j]) + minus_i_scale * comm[i][j];
                }
            }
            let stepper = mat2_exp_herm(&h_eff, dt);
            self.k = mat2_mul(&stepper, &self.k);
        }
        self.t = t_new;
        self.k
    }
}

fn mat2_comm(a: &Mat2, b: &Mat2) -> Mat2 {
    let ab = mat2_mul(a, b);
    let ba = mat2_mul(b, a);
    let mut out = [[C64::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = ab[i][j] - ba[i][j];
        }
    }
    out
}

/// Fock-space matrix of the two-mode unitary with mode matrix K on the
/// truncated (n_a, n_b) pair, as a sparse operator on Mode(n_a·n_b) with
/// row-major (m·n_b + n) indexing.
///
/// Built column-by-column from U|m,n⟩ = (c_a)^m (c_b)^n |0,0⟩/√(m! n!) with
/// c_i = U a_i† U† = Σ_j K_{ji} a_j†; every intermediate column is a unit
/// vector (up to truncation loss at the top total-photon-number blocks), so
/// the recursion is numerically stable.
pub(crate) fn fock_lift(k: &Mat2, n_a: usize, n_b: usize) -> OperatorMatrix {
    let dim = n_a * n_b;
    let idx = |m: usize, n: usize| m * n_b + n;
    // Creation-operator coefficient pairs: columns of K.
    let ca = (k[0][0], k[1][0]);
    let cb = (k[0][1], k[1][1]);

    // Apply c = c.0·a† + c.1·b† to a sparse column and divide by √level.
    let apply_raise = |col: &Vec<(usize, C64)>, c: (C64, C64), level: usize| {
        let scale = 1.0 / (level as f64).sqrt();
        let mut dense: Vec<C64> = vec![C64::zero(); dim];
        for &(i, v) in col {
            let m = i / n_b;
            let n = i % n_b;
            if m + 1 < n_a && c.0 != C64::zero() {
                dense[idx(m + 1, n)] += c.0 * v * C64::new(((m + 1) as f64).sqrt() * scale, 0.0);
            }
            if n + 1 < n_b && c.1 != C64::zero() {
                dense[idx(m, n + 1)] += c.1 * v * C64::new(((n + 1) as f64).sqrt() * scale, 0.0);
            }
        }
        let mut out = Vec::new();
        for (i, v) in dense.into_iter().enumerate() {
            if v != C64::zero() {
                out.push((i, v));
            }
        }
        out
    };

    let mut columns: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
    columns[idx(0, 0)] = vec![(idx(0, 0), C64::new(1.0, 0.0))];
    for n in 0..n_b {
        if n > 0 {
            let prev = columns[idx(0, n - 1)].clone();
            columns[idx(0, n)] = apply_raise(&prev, cb, n);
        }
        for m in 1..n_a {
            let prev = columns[idx(m - 1, n)].clone();
            columns[idx(m, n)] = apply_raise(&prev, ca, m);
        }
    }

    let mut triplets = Vec::new();
    for (col, entries) in columns.iter().enumerate() {
        for &(row, v) in entries {
            triplets.push((row, col, v));
        }
    }
    OperatorMatrix::from_triplets(Space::Mode(dim), triplets, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::linalg;
    use ndarray::Array2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Dense two-mode quadratic Hamiltonian Σ h_ij a_i†a_j on (n_a, n_b).
    fn dense_quadratic(h: &Mat2, n_a: usize, n_b: usize) -> Array2<C64> {
        let dim = n_a * n_b;
        let idx = |m: usize, n: usize| m * n_b + n;
        let mut out = Array2::<C64>::zeros((dim, dim));
        for m in 0..n_a {
            for n in 0..n_b {
                let col = idx(m, n);
                // a†a and b†b diagonals.
                out[(col, col)] += h[0][0] * c(m as f64, 0.0) + h[1][1] * c(n as f64, 0.0);
                // a†b: (m,n) → (m+1, n−1).
                if m + 1 < n_a && n > 0 {
                    let row = idx(m + 1, n - 1);
                    out[(row, col)] +=
                        h[0][1] * c((((m + 1) * n) as f64).sqrt(), 0.0);
                }
                // b†a: (m,n) → (m−1, n+1).
                if m > 0 && n + 1 < n_b {
                    let row = idx(m - 1, n + 1);
                    out[(row, col)] +=
                        h[1][0] * c(((m * (n + 1)) as f64).sqrt(), 0.0);
                }
            }
        }
        out
    }

    fn dense_expm(h: &Array2<C64>, t: f64) -> Array2<C64> {
        let (w, v) = linalg::eigh(h);
        let n = h.nrows();
        let mut out = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            let phase = C64::from_polar(1.0, -w[k] * t);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += v[(i, k)] * phase * v[(j, k)].conj();
                }
            }
        }
        out
    }

    fn mat2_unitarity_defect(k: &Mat2) -> f64 {
        let kk = mat2_mul(&mat2_dagger(k), k);
        let mut d = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                d = d.max((kk[i][j] - c(expected, 0.0)).norm());
            }
        }
        d
    }

    #[test]
    fn static_mode_matrix_solves_the_heisenberg_equation() {
        // Brute-force RK4 on K′ = −i h K as the oracle.
        let h: Mat2 = [
            [c(0.9, 0.0), c(0.4, -0.2)],
            [c(0.4, 0.2), c(-0.3, 0.0)],
        ];
        let gen = TwoModeGenerator {
            static_form: h,
            drive_amp: 0.0,
            drive_freq: 0.0,
        };
        let mut evo = ModeEvolution::new(&gen);
        let t = 2.7;
        let k = evo.advance_to(t);
        let oracle = brute_force_k(&gen, t, 40_000);
        for i in 0..2 {
            for j in 0..2 {
                assert!((k[i][j] - oracle[i][j]).norm() < 1e-9);
            }
        }
        assert!(mat2_unitarity_defect(&k) < 1e-13);
    }

    #[test]
    fn driven_mode_matrix_matches_brute_force() {
        let h: Mat2 = [
            [c(0.5, 0.0), c(0.25, 0.0)],
            [c(0.25, 0.0), c(-0.125, 0.0)],
        ];
        let gen = TwoModeGenerator {
            static_form: h,
            drive_amp: 0.35,
            drive_freq: 60.0,
        };
        let mut evo = ModeEvolution::new(&gen);
        let t = 1.9;
        // Walk in a few monotone increments, as the integrator does.
        evo.advance_to(0.3);
        evo.advance_to(1.1);
        let k = evo.advance_to(t);
        let oracle = brute_force_k(&gen, t, 4_000_000);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (k[i][j] - oracle[i][j]).norm() < 1e-8,
                    "entry ({i},{j}): {:?} vs {:?}",
                    k[i][j],
                    oracle[i][j]
                );
            }
        }
        assert!(mat2_unitarity_defect(&k) < 1e-12);
    }

    fn brute_force_k(gen: &TwoModeGenerator, t: f64, steps: usize) -> Mat2 {
        let dt = t / steps as f64;
        let mut k = [
            [c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0)],
        ];
        let rhs = |time: f64, m: &Mat2| -> Mat2 {
            let h = gen.form_at(time);
            let hm = mat2_mul(&h, m);
            let mut out = [[C64::zero(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = c(0.0, -1.0) * hm[i][j];
                }
            }
            out
        };
        let addm = |a: &Mat2, b: &Mat2, s: f64| -> Mat2 {
            let mut out = *a;
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += c(s, 0.0) * b[i][j];
                }
            }
            out
        };
        for n in 0..steps {
            let time = n as f64 * dt;
            let k1 = rhs(time, &k);
            let k2 = rhs(time + dt / 2.0, &addm(&k, &k1, dt / 2.0));
            let k3 = rhs(time + dt / 2.0, &addm(&k, &k2, dt / 2.0));
            let k4 = rhs(time + dt, &addm(&k, &k3, dt));
            for i in 0..2 {
                for j in 0..2 {
                    k[i][j] += c(dt / 6.0, 0.0)
                        * (k1[i][j]
                            + c(2.0, 0.0) * (k2[i][j] + k3[i][j])
                            + k4[i][j]);
                }
            }
        }
        k
    }

    #[test]
    fn fock_lift_matches_dense_exponential_inside_truncation() {
        let n_a = 6;
        let n_b = 6;
        let h: Mat2 = [
            [c(0.8, 0.0), c(0.5, 0.3)],
            [c(0.5, -0.3), c(-0.4, 0.0)],
        ];
        let t = 1.1;
        let gen = TwoModeGenerator {
            static_form: h,
            drive_amp: 0.0,
            drive_freq: 0.0,
        };
        let mut evo = ModeEvolution::new(&gen);
        let k = evo.advance_to(t);
        let lifted = fock_lift(&k, n_a, n_b);
        let dense = dense_expm(&dense_quadratic(&h, n_a, n_b), t);
        // Total-photon-number blocks that fit entirely inside the truncation
        // evolve exactly; compare those.
        let idx = |m: usize, n: usize| m * n_b + n;
        let mut max_err = 0.0f64;
        for m1 in 0..n_a {
            for n1 in 0..n_b {
                for m2 in 0..n_a {
                    for n2 in 0..n_b {
                        if m1 + n1 < n_a.min(n_b) && m2 + n2 < n_a.min(n_b) {
                            let e = (lifted.entry(idx(m1, n1), idx(m2, n2))
                                - dense[(idx(m1, n1), idx(m2, n2))])
                                .norm();
                            max_err = max_err.max(e);
                        }
                    }
                }
            }
        }
        assert!(max_err < 1e-11, "lift vs dense expm: {max_err:.3e}");
    }

    #[test]
    fn fock_lift_columns_are_normalized_inside_truncation() {
        let h: Mat2 = [
            [c(0.0, 0.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0)],
        ];
        let gen = TwoModeGenerator {
            static_form: h,
            drive_amp: 0.0,
            drive_freq: 0.0,
        };
        let mut evo = ModeEvolution::new(&gen);
        let k = evo.advance_to(0.7);
        let n = 8;
        let lifted = fock_lift(&k, n, n);
        let dense = lifted.to_dense();
        for m in 0..n {
            for l in 0..n {
                if m + l < n {
                    let col = m * n + l;
                    let norm: f64 = (0..n * n).map(|r| dense[(r, col)].norm_sqr()).sum();
                    assert!((norm - 1.0).abs() < 1e-12, "column ({m},{l}) norm {norm}");
                }
            }
        }
    }
}
