//! Checks of the algebraic identities behind the stability proof: the
//! multiplier quadratic forms, the discrete energy, and the local truncation
//! residual of the exact solution.

use rand::Rng;

use crate::error::{Error, Result};
use crate::integrator::BdfCoefficients;
use crate::linalg::RealMatrix;
use crate::spectral::SpectralField;
use crate::system::{RelaxationSystem, StabilityWitness};

/// Multiplier forms `G`, `A`, `L₁`, `L₂` and constants `d₁`, `d₂` of order `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierData {
    pub q: usize,
    /// `g_ij`, `q × q`.
    pub g: Vec<Vec<f64>>,
    /// `a_ij`, `(q−1) × (q−1)`.
    pub a: Vec<Vec<f64>>,
    /// `η_i` of `L₁(u_1, …, u_{q−1}) = Σ η_i u_i`.
    pub l1: Vec<f64>,
    /// `c_i` of `L₂(u_1, …, u_q) = Σ c_i u_i`.
    pub l2: Vec<f64>,
    pub d1: f64,
    pub d2: f64,
}

pub fn multiplier_data(q: usize) -> Result<MultiplierData> {
    match q {
        1 => Ok(MultiplierData {
            q,
            g: vec![vec![0.5]],
            a: vec![],
            l1: vec![],
            l2: vec![1.0],
            d1: 0.5,
            d2: 1.0,
        }),
        2 => Ok(MultiplierData {
            q,
            g: vec![vec![1.0 / 6.0, -1.0 / 3.0], vec![-1.0 / 3.0, 5.0 / 6.0]],
            a: vec![vec![0.0]],
            l1: vec![0.0],
            l2: vec![0.0, 1.0],
            d1: 1.0 / 6.0,
            d2: 1.5,
        }),
        _ => Err(Error::UnsupportedOrder(q)),
    }
}

impl MultiplierData {
    /// `Σ g_ij ⟨u_i, u_j⟩` for an arbitrary bilinear pairing.
    fn quadratic<T>(coeffs: &[Vec<f64>], u: &[T], pair: &impl Fn(&T, &T) -> f64) -> f64 {
        let mut s = 0.0;
        for (i, row) in coeffs.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    s += c * pair(&u[i], &u[j]);
                }
            }
        }
        s
    }

    /// Residuals of both identities for the tuple `u_0, …, u_q` of vectors,
    /// using `⟨u, v⟩ = uᵀHv`.
    pub fn residuals(
        &self,
        coeffs: &BdfCoefficients,
        u: &[Vec<f64>],
        h: &RealMatrix,
    ) -> (f64, f64) {
        let q = self.q;
        let n = u[0].len();
        let pair = |x: &Vec<f64>, y: &Vec<f64>| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += x[i] * h[(i, j)] * y[j];
                }
            }
            s
        };
        let combo = |w: &[f64], vs: &[Vec<f64>]| {
            let mut out = vec![0.0; n];
            for (c, v) in w.iter().zip(vs) {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
            out
        };
        let l1 = combo(&self.l1, &u[1..q]);
        let lead: Vec<f64> = u[q].iter().zip(&l1).map(|(a, b)| a - b).collect();
        let alpha_sum = combo(&coeffs.alpha, u);
        let gamma_sum = combo(&coeffs.gamma, &u[..q]);

        let lhs1 = pair(&lead, &alpha_sum);
        let tail: Vec<f64> = lead
            .iter()
            .zip(&gamma_sum)
            .map(|(a, g)| a - self.d2 * g)
            .collect();
        let rhs1 = Self::quadratic(&self.g, &u[1..=q], &pair)
            - Self::quadratic(&self.g, &u[..q], &pair)
            + self.d1 * pair(&tail, &tail);

        let lhs2 = pair(&lead, &u[q]);
        let l2 = combo(&self.l2, &u[1..=q]);
        let rhs2 = Self::quadratic(&self.a, &u[2..=q], &pair)
            - Self::quadratic(&self.a, &u[1..q], &pair)
            + pair(&l2, &l2);
        ((lhs1 - rhs1).abs(), (lhs2 - rhs2).abs())
    }
}

/// Largest absolute residuals found by [`verify_multiplier_identity`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IdentityReport {
    pub scalar_first: f64,
    pub scalar_second: f64,
    pub weighted_first: f64,
    pub weighted_second: f64,
    /// Mismatch between `(u, v)_H` and `(Mu, Mv)` with `H = M²`.
    pub splitting: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        [
            self.scalar_first,
            self.scalar_second,
            self.weighted_first,
            self.weighted_second,
            self.splitting,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Random SPD matrix of size `n` with spectrum in `[1, cond]`, returned with
/// its square root.
pub fn random_spd<R: Rng + ?Sized>(
    n: usize,
    cond: f64,
    rng: &mut R,
) -> Result<(RealMatrix, RealMatrix)> {
    let b = RealMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let v = b.add(&b.transpose())?.symmetric_eigen()?.vectors;
    let lambda: Vec<f64> = (0..n).map(|_| cond.powf(rng.gen::<f64>())).collect();
    let build = |f: &dyn Fn(f64) -> f64| {
        RealMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * f(lambda[k]) * v[(j, k)]).sum()
        })
    };
    Ok((build(&|l| l), build(&f64::sqrt)))
}

/// Evaluates both multiplier identities on `samples` random tuples in
/// `[−1, 1]^{q+1}`, and their `H`-weighted forms on random vector tuples with
/// random SPD `H` of condition number at most 100.
pub fn verify_multiplier_identity<R: Rng + ?Sized>(
    data: &MultiplierData,
    coeffs: &BdfCoefficients,
    samples: usize,
    rng: &mut R,
) -> Result<IdentityReport> {
    if data.q != coeffs.order {
        return Err(Error::DimensionMismatch(format!(
            "multiplier data of order {} with BDF order {}",
            data.q, coeffs.order
        )));
    }
    let q = data.q;
    let one = RealMatrix::identity(1);
    let mut report = IdentityReport::default();
    for _ in 0..samples {
        let u: Vec<Vec<f64>> = (0..=q).map(|_| vec![rng.gen_range(-1.0..=1.0)]).collect();
        let (r1, r2) = data.residuals(coeffs, &u, &one);
        report.scalar_first = report.scalar_first.max(r1);
        report.scalar_second = report.scalar_second.max(r2);

        let n = rng.gen_range(2..=5);
        let (h, m) = random_spd(n, 100.0, rng)?;
        let u: Vec<Vec<f64>> = (0..=q)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let (w1, w2) = data.residuals(coeffs, &u, &h);
        report.weighted_first = report.weighted_first.max(w1);
        report.weighted_second = report.weighted_second.max(w2);

        let mu: Vec<Vec<f64>> = u.iter().map(|x| m.mul_vec(x)).collect::<Result<_>>()?;
        let identity = RealMatrix::identity(n);
        let (s1, s2) = data.residuals(coeffs, &mu, &identity);
        let direct = h
            .mul_vec(&u[q])?
            .iter()
            .zip(&u[0])
            .map(|(a, b)| a * b)
            .sum::<f64>();
        let split = mu[q].iter().zip(&mu[0]).map(|(a, b)| a * b).sum::<f64>();
        report.splitting = report.splitting.max((direct - split).abs()).max(s1).max(s2);
    }
    Ok(report)
}

/// Which discrete energy to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyForm {
    /// `G_{A₀}(U^n, …, U^{n+q−1}) + (βΔt/ε) A_M(W^{n+1}, …, W^{n+q−1})`, `q ≤ 2`.
    Full,
    /// `Σ ∫ Uᵀ A₀ U` over the history.
    Surrogate,
}

/// Discrete energy of a history `U^n, …, U^{n+q−1}` (oldest first) with the
/// normal-form symmetrizer `a0`.
pub fn discrete_energy(
    history: &[SpectralField],
    system: &RelaxationSystem,
    a0: &RealMatrix,
    dt: f64,
    form: EnergyForm,
) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::DimensionMismatch("empty history".into()));
    }
    match form {
        EnergyForm::Surrogate => Ok(history.iter().map(|u| u.weighted_energy(a0)).sum()),
        EnergyForm::Full => {
            let q = history.len();
            let data = multiplier_data(q)?;
            let coeffs = crate::integrator::bdf_coefficients(q)?;
            let mut e = 0.0;
            for i in 0..q {
                for j in 0..q {
                    if data.g[i][j] != 0.0 {
                        e += data.g[i][j] * history[i].weighted_inner(&history[j], a0)?;
                    }
                }
            }
            if q > 1 {
                // M = −A₀₂Ŝ placed on the W block
                let n = system.dim();
                let r = system.stiff_size();
                let off = n - r;
                let m = a0
                    .block(off, off, r, r)
                    .matmul(&system.stiff_block())?
                    .scale(-1.0)
                    .symmetric_part();
                let hm = RealMatrix::from_fn(n, n, |i, j| {
                    if i >= off && j >= off {
                        m[(i - off, j - off)]
                    } else {
                        0.0
                    }
                });
                let w = &history[1..];
                let mut a_term = 0.0;
                for (i, row) in data.a.iter().enumerate() {
                    for (j, &c) in row.iter().enumerate() {
                        if c != 0.0 {
                            a_term += c * w[i].weighted_inner(&w[j], &hm)?;
                        }
                    }
                }
                e += coeffs.beta * dt / system.epsilon() * a_term;
            }
            Ok(e)
        }
    }
}

/// `max_n (E^{n+1} − E^n) / (Δt E^n)`, the smallest `C` with
/// `E^{n+1} ≤ (1 + CΔt) E^n` along the sequence.
pub fn energy_growth_constant(energies: &[f64], dt: f64) -> f64 {
    energies
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| (w[1] - w[0]) / (dt * w[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// L² norm of `Σα_i U(t_{n+i}) + Δt A Σγ_i ∂ₓU(t_{n+i}) − (βΔt/ε) Q U(t_{n+q})`
/// with `t_{n+i} = t_n + iΔt`.
pub fn truncation_residual<F>(
    system: &RelaxationSystem,
    exact: F,
    coeffs: &BdfCoefficients,
    dt: f64,
    t_n: f64,
) -> Result<f64>
where
    F: Fn(f64) -> Result<SpectralField>,
{
    let q = coeffs.order;
    let levels: Vec<SpectralField> = (0..=q)
        .map(|i| exact(t_n + i as f64 * dt))
        .collect::<Result<_>>()?;
    let mut res = levels[q]
        .apply_matrix(system.source())?
        .scale(-coeffs.beta * dt / system.epsilon());
    let mut convected = SpectralField::zeros(
        levels[0].components(),
        levels[0].modes(),
        levels[0].length(),
    );
    for (i, u) in levels.iter().enumerate() {
        res.axpy(coeffs.alpha[i], u)?;
        if i < q {
            convected.axpy(coeffs.gamma[i], u)?;
        }
    }
    res.axpy(
        dt,
        &convected
            .differentiate()
            .apply_matrix(system.convection())?,
    )?;
    Ok(res.l2_norm())
}

/// Largest characteristic speed `ρ(A)`, computed from the symmetrized
/// `Lᵀ A L⁻ᵀ` with `A₀ = L Lᵀ`.
pub fn characteristic_speed(a: &RealMatrix, witness: &StabilityWitness) -> Result<f64> {
    let l = witness
        .a0
        .cholesky(0.0)
        .map_err(|(index, pivot)| Error::SingularMatrix {
            index,
            pivot,
            threshold: 0.0,
        })?;
    let s = l.transpose().matmul(a)?.matmul(&l.inverse()?.transpose())?;
    let eig = s.symmetric_eigen()?;
    Ok(eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Least-squares slope of `ln e` against `ln Δt`.
pub fn fit_order(dts: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = dts
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&d, &e)| (d.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
