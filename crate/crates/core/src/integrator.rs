//! IMEX-BDF time stepping in Fourier space.
//!
//! Convection is extrapolated explicitly and the stiff source is implicit:
//!
//! ```text
//! Σ_{i=0}^{q} α_i U^{n+i} + Δt A Σ_{i=0}^{q-1} γ_i ∂ₓU^{n+i} = (βΔt/ε) Q U^{n+q}
//! ```
//!
//! Each Fourier mode is an independent `n x n` linear system, and because the
//! implicit matrix `α_q I − (βΔt/ε) Q` is real and mode independent it is
//! factored once and applied to real and imaginary parts separately.
//! The first `q − 1` starting values come either from the exact mode
//! propagator or from an ARS IMEX Runge-Kutta scheme on a finer step.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{Lu, RealMatrix};
use crate::oracle::exact_evolve;
use crate::spectral::SpectralField;
use crate::system::RelaxationSystem;

/// Substep divisor used for the Runge-Kutta startup of the published experiments.
pub const DEFAULT_SUBSTEP_DIVISOR: usize = 500;

/// `(α, γ, β)` of the order-`q` IMEX-BDF scheme, `α_q = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BdfCoefficients {
    pub order: usize,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: f64,
}

/// Coefficients for `q = 1..=4`.
///
/// `α` and `β` are those of BDF-q; `γ_i = β·e_i` where `e` extrapolates
/// `U^{n+q}` from the previous `q` levels with order `q`.
pub fn bdf_coefficients(q: usize) -> Result<BdfCoefficients> {
    let (alpha, gamma, beta): (Vec<f64>, Vec<f64>, f64) = match q {
        1 => (vec![-1.0, 1.0], vec![1.0], 1.0),
        2 => (
            vec![1.0 / 3.0, -4.0 / 3.0, 1.0],
            vec![-2.0 / 3.0, 4.0 / 3.0],
            2.0 / 3.0,
        ),
        3 => (
            vec![-2.0 / 11.0, 9.0 / 11.0, -18.0 / 11.0, 1.0],
            vec![6.0 / 11.0, -18.0 / 11.0, 18.0 / 11.0],
            6.0 / 11.0,
        ),
        4 => (
            vec![3.0 / 25.0, -16.0 / 25.0, 36.0 / 25.0, -48.0 / 25.0, 1.0],
            vec![-12.0 / 25.0, 48.0 / 25.0, -72.0 / 25.0, 48.0 / 25.0],
            12.0 / 25.0,
        ),
        other => return Err(Error::UnsupportedOrder(other)),
    };
    Ok(BdfCoefficients {
        order: q,
        alpha,
        gamma,
        beta,
    })
}

impl BdfCoefficients {
    /// `α_q I − (βΔt/ε) Q`.
    pub fn implicit_matrix(&self, system: &RelaxationSystem, dt: f64) -> RealMatrix {
        let n = system.dim();
        let c = self.beta * dt / system.epsilon();
        let q = system.source();
        RealMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { self.alpha[self.order] } else { 0.0 };
            diag - c * q[(i, j)]
        })
    }
}

/// ARS IMEX Runge-Kutta schemes used to generate starting values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArsScheme {
    /// Two-stage, second order, L-stable implicit part.
    Ars222,
    /// Four-stage, third order.
    Ars443,
}

impl ArsScheme {
    /// ARS(2,2,2) for `q ≤ 3`, ARS(4,4,3) for `q = 4`.
    pub fn for_order(q: usize) -> Self {
        if q >= 4 {
            Self::Ars443
        } else {
            Self::Ars222
        }
    }

    pub fn tableau(self) -> ImexRkTableau {
        match self {
            Self::Ars222 => ImexRkTableau::ars222(),
            Self::Ars443 => ImexRkTableau::ars443(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Ars222 => "ARS(2,2,2)",
            Self::Ars443 => "ARS(4,4,3)",
        }
    }
}

/// Butcher pair for an IMEX Runge-Kutta method; row `i` of each matrix holds
/// the stage-`i` coefficients, and `implicit[0][0] = 0` is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ImexRkTableau {
    pub explicit: Vec<Vec<f64>>,
    pub implicit: Vec<Vec<f64>>,
    pub b_explicit: Vec<f64>,
    pub b_implicit: Vec<f64>,
}

impl ImexRkTableau {
    pub fn ars222() -> Self {
        let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let d = 1.0 - 1.0 / (2.0 * g);
        Self {
            explicit: vec![
                vec![0.0, 0.0, 0.0],
                vec![g, 0.0, 0.0],
                vec![d, 1.0 - d, 0.0],
            ],
            implicit: vec![
                vec![0.0, 0.0, 0.0],
                vec![0.0, g, 0.0],
                vec![0.0, 1.0 - g, g],
            ],
            b_explicit: vec![d, 1.0 - d, 0.0],
            b_implicit: vec![0.0, 1.0 - g, g],
        }
    }

    pub fn ars443() -> Self {
        Self {
            explicit: vec![
                vec![0.0, 0.0, 0.0, 0.0, 0.0],
                vec![1.0 / 2.0, 0.0, 0.0, 0.0, 0.0],
                vec![11.0 / 18.0, 1.0 / 18.0, 0.0, 0.0, 0.0],
                vec![5.0 / 6.0, -5.0 / 6.0, 1.0 / 2.0, 0.0, 0.0],
                vec![1.0 / 4.0, 7.0 / 4.0, 3.0 / 4.0, -7.0 / 4.0, 0.0],
            ],
            implicit: vec![
                vec![0.0, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0 / 2.0, 0.0, 0.0, 0.0],
                vec![0.0, 1.0 / 6.0, 1.0 / 2.0, 0.0, 0.0],
                vec![0.0, -1.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0, 0.0],
                vec![0.0, 3.0 / 2.0, -3.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0],
            ],
            b_explicit: vec![1.0 / 4.0, 7.0 / 4.0, 3.0 / 4.0, -7.0 / 4.0, 0.0],
            b_implicit: vec![0.0, 3.0 / 2.0, -3.0 / 2.0, 1.0 / 2.0, 1.0 / 2.0],
        }
    }

    pub fn stages(&self) -> usize {
        self.b_implicit.len()
    }

    /// The new value equals the last stage.
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages();
        self.b_implicit == self.implicit[s - 1]
            && self.b_explicit == self.explicit[s - 1]
            && self.b_explicit[s - 1] == 0.0
    }

    /// Abscissae of the explicit and implicit parts.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.explicit.iter().map(|r| r.iter().sum()).collect(),
            self.implicit.iter().map(|r| r.iter().sum()).collect(),
        )
    }
}

/// Per-mode data shared by the steppers.
struct ModeOperator<'a> {
    a: &'a RealMatrix,
    n: usize,
}

impl ModeOperator<'_> {
    /// `−iκ A v`.
    fn convection(&self, kappa: f64, v: &[Complex64], out: &mut [Complex64]) {
        for i in 0..self.n {
            let mut s = Complex64::new(0.0, 0.0);
            for (j, vj) in v.iter().enumerate() {
                s += vj * self.a[(i, j)];
            }
            out[i] = Complex64::new(kappa * s.im, -kappa * s.re);
        }
    }
}

/// Solves `M x = rhs` for real `M` and complex `rhs` in place.
fn solve_complex(
    lu: &Lu<f64>,
    rhs: &mut [Complex64],
    re: &mut [f64],
    im: &mut [f64],
) -> Result<()> {
    for (i, c) in rhs.iter().enumerate() {
        re[i] = c.re;
        im[i] = c.im;
    }
    lu.solve_in_place(re)?;
    lu.solve_in_place(im)?;
    for (i, c) in rhs.iter_mut().enumerate() {
        *c = Complex64::new(re[i], im[i]);
    }
    Ok(())
}

/// One IMEX Runge-Kutta step of size `dt` applied to every mode.
pub struct ImexRkStepper<'a> {
    system: &'a RelaxationSystem,
    tableau: ImexRkTableau,
    dt: f64,
    factors: Vec<Option<Lu<f64>>>,
}

impl<'a> ImexRkStepper<'a> {
    pub fn new(system: &'a RelaxationSystem, tableau: ImexRkTableau, dt: f64) -> Result<Self> {
        let n = system.dim();
        let q = system.source();
        let factors = (0..tableau.stages())
            .map(|i| {
                let aii = tableau.implicit[i][i];
                if aii == 0.0 {
                    return Ok(None);
                }
                let c = dt * aii / system.epsilon();
                RealMatrix::from_fn(n, n, |r, s| f64::from(r == s) - c * q[(r, s)])
                    .lu()
                    .map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            system,
            tableau,
            dt,
            factors,
        })
    }

    pub fn step(&self, u: &SpectralField) -> Result<SpectralField> {
        let n = self.system.dim();
        let s = self.tableau.stages();
        let op = ModeOperator {
            a: self.system.convection(),
            n,
        };
        let q = self.system.source();
        let inv_eps = 1.0 / self.system.epsilon();
        let stiffly_accurate = self.tableau.is_stiffly_accurate();
        let zero = Complex64::new(0.0, 0.0);

        let mut out = u.clone();
        let mut stage = vec![vec![zero; n]; s];
        let mut k_exp = vec![vec![zero; n]; s];
        let mut k_imp = vec![vec![zero; n]; s];
        let mut rhs = vec![zero; n];
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);

        for k in 0..=u.modes() as i64 {
            let u0 = u.mode(k);
            if u0.iter().all(|c| *c == zero) {
                continue;
            }
            let kappa = u.wavenumber(k);
            for i in 0..s {
                rhs.copy_from_slice(u0);
                for j in 0..i {
                    let (ae, ai) = (self.tableau.explicit[i][j], self.tableau.implicit[i][j]);
                    for c in 0..n {
                        rhs[c] += (k_exp[j][c] * ae + k_imp[j][c] * ai) * self.dt;
                    }
                }
                let aii = self.tableau.implicit[i][i];
                match &self.factors[i] {
                    Some(lu) => {
                        stage[i].copy_from_slice(&rhs);
                        solve_complex(lu, &mut stage[i], &mut re, &mut im)?;
                        for c in 0..n {
                            k_imp[i][c] = (stage[i][c] - rhs[c]) / (self.dt * aii);
                        }
                    }
                    None => {
                        stage[i].copy_from_slice(&rhs);
                        for r in 0..n {
                            let mut acc = zero;
                            for c in 0..n {
                                acc += stage[i][c] * q[(r, c)];
                            }
                            k_imp[i][r] = acc * inv_eps;
                        }
                    }
                }
                op.convection(kappa, &stage[i], &mut k_exp[i]);
            }
            let target = out.mode_mut(k);
            if stiffly_accurate {
                target.copy_from_slice(&stage[s - 1]);
            } else {
                target.copy_from_slice(u0);
                for j in 0..s {
                    let (be, bi) = (self.tableau.b_explicit[j], self.tableau.b_implicit[j]);
                    for c in 0..n {
                        target[c] += (k_exp[j][c] * be + k_imp[j][c] * bi) * self.dt;
                    }
                }
            }
            if k > 0 {
                let value = out.mode(k).to_vec();
                for (dst, v) in out.mode_mut(-k).iter_mut().zip(value) {
                    *dst = v.conj();
                }
            }
        }
        Ok(out)
    }
}

/// Starting values `[U(T0), U(T0+Δt), …, U(T0+(q−1)Δt)]` from an ARS scheme
/// run with step `Δt / substep_divisor`.
pub fn ars_startup(
    u0: &SpectralField,
    system: &RelaxationSystem,
    q: usize,
    dt: f64,
    substep_divisor: usize,
    scheme: ArsScheme,
) -> Result<Vec<SpectralField>> {
    if !(1..=4).contains(&q) {
        return Err(Error::UnsupportedOrder(q));
    }
    if substep_divisor == 0 {
        return Err(Error::Config("substep divisor must be at least 1".into()));
    }
    let mut out = vec![u0.clone()];
    if q == 1 {
        return Ok(out);
    }
    let stepper = ImexRkStepper::new(system, scheme.tableau(), dt / substep_divisor as f64)?;
    let mut u = u0.clone();
    for _ in 1..q {
        for _ in 0..substep_divisor {
            u = stepper.step(&u)?;
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// How the first `q − 1` levels after `T0` are produced.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Startup {
    /// Exact propagation of each Fourier mode.
    #[default]
    Exact,
    /// ARS IMEX Runge-Kutta with `Δt / divisor` substeps; `scheme: None`
    /// selects [`ArsScheme::for_order`].
    Ars {
        divisor: usize,
        scheme: Option<ArsScheme>,
    },
}

impl Startup {
    pub fn history(
        &self,
        u0: &SpectralField,
        system: &RelaxationSystem,
        q: usize,
        dt: f64,
    ) -> Result<Vec<SpectralField>> {
        match *self {
            Self::Exact => {
                if !(1..=4).contains(&q) {
                    return Err(Error::UnsupportedOrder(q));
                }
                let mut out = vec![u0.clone()];
                for i in 1..q {
                    out.push(exact_evolve(u0, system, i as f64 * dt)?);
                }
                Ok(out)
            }
            Self::Ars { divisor, scheme } => ars_startup(
                u0,
                system,
                q,
                dt,
                divisor,
                scheme.unwrap_or_else(|| ArsScheme::for_order(q)),
            ),
        }
    }
}

/// Multistep state: the last `q` levels and the cached implicit factorization.
#[derive(Debug, Clone)]
pub struct SolverState {
    system: RelaxationSystem,
    coeffs: BdfCoefficients,
    history: VecDeque<SpectralField>,
    step_index: usize,
    dt: f64,
    implicit: Lu<f64>,
}

impl SolverState {
    /// `history` holds `U^n, …, U^{n+q−1}` in time order.
    pub fn new(
        system: &RelaxationSystem,
        coeffs: BdfCoefficients,
        dt: f64,
        history: Vec<SpectralField>,
    ) -> Result<Self> {
        if history.len() != coeffs.order {
            return Err(Error::Config(format!(
                "order {} needs {} history levels, got {}",
                coeffs.order,
                coeffs.order,
                history.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let first = &history[0];
        if first.components() != system.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{}-component field for a system of size {}",
                first.components(),
                system.dim()
            )));
        }
        if history.iter().any(|f| !f.same_shape(first)) {
            return Err(Error::ShapeMismatch(
                "history fields differ in shape".into(),
            ));
        }
        let implicit = coeffs.implicit_matrix(system, dt).lu()?;
        Ok(Self {
            system: system.clone(),
            coeffs,
            history: history.into(),
            step_index: 0,
            dt,
            implicit,
        })
    }

    /// Builds the state at `T0 + (q−1)Δt` from `u0` at `T0`.
    pub fn start(
        u0: &SpectralField,
        system: &RelaxationSystem,
        q: usize,
        dt: f64,
        startup: Startup,
    ) -> Result<Self> {
        let coeffs = bdf_coefficients(q)?;
        let history = startup.history(u0, system, q, dt)?;
        Self::new(system, coeffs, dt, history)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn coefficients(&self) -> &BdfCoefficients {
        &self.coeffs
    }

    pub fn system(&self) -> &RelaxationSystem {
        &self.system
    }

    /// Number of BDF steps taken.
    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn history(&self) -> impl Iterator<Item = &SpectralField> {
        self.history.iter()
    }

    /// Most recent level.
    pub fn current(&self) -> &SpectralField {
        self.history.back().expect("history is never empty")
    }

    pub fn into_current(mut self) -> SpectralField {
        self.history.pop_back().expect("history is never empty")
    }

    /// Advances one step and returns the new level.
    pub fn step(&mut self) -> Result<&SpectralField> {
        let n = self.system.dim();
        let q = self.coeffs.order;
        let op = ModeOperator {
            a: self.system.convection(),
            n,
        };
        let zero = Complex64::new(0.0, 0.0);
        let template = self.current();
        let mut next = SpectralField::zeros(n, template.modes(), template.length());
        let mut extrap = vec![zero; n];
        let mut conv = vec![zero; n];
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);

        // modes with an all-zero history stay zero; k < 0 is the conjugate of −k
        for k in 0..=template.modes() as i64 {
            if self
                .history
                .iter()
                .all(|level| level.mode(k).iter().all(|c| *c == zero))
            {
                continue;
            }
            let kappa = template.wavenumber(k);
            let rhs = next.mode_mut(k);
            extrap.iter_mut().for_each(|x| *x = zero);
            for (i, level) in self.history.iter().enumerate() {
                let u = level.mode(k);
                let (a, g) = (self.coeffs.alpha[i], self.coeffs.gamma[i]);
                for c in 0..n {
                    rhs[c] -= u[c] * a;
                    extrap[c] += u[c] * g;
                }
            }
            if kappa != 0.0 {
                op.convection(kappa, &extrap, &mut conv);
                for c in 0..n {
                    rhs[c] += conv[c] * self.dt;
                }
            }
            solve_complex(&self.implicit, rhs, &mut re, &mut im)?;
            if k > 0 {
                let value = next.mode(k).to_vec();
                for (dst, v) in next.mode_mut(-k).iter_mut().zip(value) {
                    *dst = v.conj();
                }
            }
        }
        debug_assert!(next.conjugate_symmetry_residual() < 1e-10);
        debug_assert_eq!(self.history.len(), q);
        self.history.pop_front();
        self.history.push_back(next);
        self.step_index += 1;
        Ok(self.current())
    }
}

/// Advances `state` by one step.
pub fn imex_bdf_step(state: &mut SolverState) -> Result<&SpectralField> {
    state.step()
}

/// Number of steps of size `dt` spanning `[t0, t_final]`.
pub fn step_count(t0: f64, t_final: f64, dt: f64) -> Result<usize> {
    let span = t_final - t0;
    if !(dt > 0.0) || !(span >= 0.0) || !span.is_finite() {
        return Err(Error::NonIntegerStepCount { span, dt });
    }
    let steps = span / dt;
    let rounded = steps.round();
    if (steps - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::NonIntegerStepCount { span, dt });
    }
    Ok(rounded as usize)
}

/// Integrates from `t0` to `t_final` with the order-`q` scheme.
pub fn run(
    u0: &SpectralField,
    system: &RelaxationSystem,
    q: usize,
    dt: f64,
    t0: f64,
    t_final: f64,
    startup: Startup,
) -> Result<SpectralField> {
    let steps = step_count(t0, t_final, dt)?;
    let coeffs = bdf_coefficients(q)?;
    let history = startup.history(u0, system, q, dt)?;
    if steps < q {
        return Ok(history[steps].clone());
    }
    let mut state = SolverState::new(system, coeffs, dt, history)?;
    for _ in 0..(steps + 1 - q) {
        state.step()?;
    }
    Ok(state.into_current())
}
