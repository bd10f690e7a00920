//! Exact solutions of the Fourier-Galerkin semi-discretization.
//!
//! Mode `k` obeys `dÛ_k/dt = (−iκ_k A + Q/ε) Û_k`, so `Û_k(t)` is a matrix
//! exponential applied to `Û_k(0)`. For band-limited data this is the exact
//! PDE solution.

use num_complex::Complex64;

use crate::error::Result;
use crate::integrator::{run, Startup};
use crate::linalg::ComplexMatrix;
use crate::spectral::SpectralField;
use crate::system::RelaxationSystem;

/// Generator `M_k = −iκ_k A + Q/ε` of a single Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGenerator {
    pub k: i64,
    pub matrix: ComplexMatrix,
    conserved: usize,
}

impl ModeGenerator {
    pub fn new(system: &RelaxationSystem, k: i64) -> Self {
        let kappa = 2.0 * std::f64::consts::PI * k as f64 / system.domain_length();
        let a = system.convection();
        let q = system.source();
        let inv_eps = 1.0 / system.epsilon();
        let n = system.dim();
        let matrix = ComplexMatrix::from_fn(n, n, |i, j| {
            Complex64::new(q[(i, j)] * inv_eps, -kappa * a[(i, j)])
        });
        Self {
            k,
            matrix,
            conserved: system.conserved_size(),
        }
    }

    /// `exp(t M_k)`. When the relaxation block dominates, the slow and fast
    /// invariant subspaces are separated first so that the long squaring
    /// chain needed for `t/ε ≫ 1` only acts on the decaying block.
    pub fn propagator(&self, t: f64) -> Result<ComplexMatrix> {
        if self.matrix.norm_1() * t.abs() > DECOUPLE_NORM {
            if let Some(p) = self.decoupled_propagator(t)? {
                return Ok(p);
            }
        }
        self.matrix.expm(t)
    }

    /// Block diagonalization `M = L U diag(S, F) U⁻¹ L⁻¹` with
    /// `L = [I 0; X I]`, `U = [I Y; 0 I]`, where `X` solves the Riccati
    /// equation of the slow subspace and `Y` the Sylvester equation that
    /// removes the remaining coupling. Both are fixed-point iterations that
    /// contract at a rate of order `ε|κ|`; `None` if they do not converge.
    fn decoupled_propagator(&self, t: f64) -> Result<Option<ComplexMatrix>> {
        let m = &self.matrix;
        let n = m.rows();
        let p = self.conserved;
        let r = n - p;
        if p == 0 || r == 0 {
            return Ok(None);
        }
        let m11 = m.block(0, 0, p, p);
        let m12 = m.block(0, p, p, r);
        let m21 = m.block(p, 0, r, p);
        let m22 = m.block(p, p, r, r);
        let m22_inv = m22.inverse()?;
        if m22_inv.norm_1() * (m11.norm_1() + m12.norm_1()) > MAX_CONTRACTION {
            return Ok(None);
        }

        let mut x = m22_inv.matmul(&m21)?.scale(Complex64::new(-1.0, 0.0));
        let mut converged = false;
        for _ in 0..FIXED_POINT_ITERATIONS {
            let rhs = x
                .matmul(&m11)?
                .add(&x.matmul(&m12)?.matmul(&x)?)?
                .sub(&m21)?;
            let next = m22_inv.matmul(&rhs)?;
            let change = next.sub(&x)?.norm_1();
            x = next;
            if change <= FIXED_POINT_TOL * x.norm_1().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Ok(None);
        }
        let slow = m11.add(&m12.matmul(&x)?)?;
        let fast = m22.sub(&x.matmul(&m12)?)?;
        let fast_inv = fast.inverse()?;

        let mut y = m12.matmul(&fast_inv)?;
        converged = false;
        for _ in 0..FIXED_POINT_ITERATIONS {
            let next = slow.matmul(&y)?.add(&m12)?.matmul(&fast_inv)?;
            let change = next.sub(&y)?.norm_1();
            y = next;
            if change <= FIXED_POINT_TOL * y.norm_1().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Ok(None);
        }

        let es = slow.expm(t)?;
        let ef = fast.expm(t)?;
        // exp(tM) = L U diag(es, ef) U⁻¹ L⁻¹
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let lower = |sign: f64| {
            ComplexMatrix::from_fn(n, n, |i, j| match (i < p, j < p) {
                _ if i == j => one,
                (false, true) => x[(i - p, j)] * sign,
                _ => zero,
            })
        };
        let upper = |sign: f64| {
            ComplexMatrix::from_fn(n, n, |i, j| match (i < p, j < p) {
                _ if i == j => one,
                (true, false) => y[(i, j - p)] * sign,
                _ => zero,
            })
        };
        let diag = ComplexMatrix::from_fn(n, n, |i, j| match (i < p, j < p) {
            (true, true) => es[(i, j)],
            (false, false) => ef[(i - p, j - p)],
            _ => zero,
        });
        let out = lower(1.0)
            .matmul(&upper(1.0))?
            .matmul(&diag)?
            .matmul(&upper(-1.0))?
            .matmul(&lower(-1.0))?;
        Ok(Some(out))
    }
}

/// `‖tM‖₁` above which the subspace decoupling is attempted.
const DECOUPLE_NORM: f64 = 64.0;
/// Upper bound on `‖M₂₂⁻¹‖(‖M₁₁‖ + ‖M₁₂‖)` for the fixed-point iterations.
const MAX_CONTRACTION: f64 = 0.25;
const FIXED_POINT_ITERATIONS: usize = 200;
const FIXED_POINT_TOL: f64 = 1e-17;

/// `Û_k(t) = exp(t M_k) Û_k(0)` for every mode.
pub fn exact_evolve(
    u0: &SpectralField,
    system: &RelaxationSystem,
    t: f64,
) -> Result<SpectralField> {
    let mut out = u0.clone();
    for k in 0..=u0.modes() as i64 {
        let prop = ModeGenerator::new(system, k).propagator(t)?;
        let value = prop.mul_vec(u0.mode(k))?;
        out.mode_mut(k).copy_from_slice(&value);
        if k > 0 {
            for (dst, v) in out.mode_mut(-k).iter_mut().zip(&value) {
                *dst = v.conj();
            }
        }
    }
    Ok(out)
}

/// Reference computed by the integrator itself on the step `dt_ref`.
pub fn fine_step_reference(
    u0: &SpectralField,
    system: &RelaxationSystem,
    q: usize,
    dt_ref: f64,
    t0: f64,
    t_final: f64,
    startup: Startup,
) -> Result<SpectralField> {
    run(u0, system, q, dt_ref, t0, t_final, startup)
}
