//! The three linear test systems: linearized Aw-Rascle-Zhang traffic flow,
//! the linearized Broadwell model and the linearized Grad moment system.
//!
//! Every model is stored in normal form (`Q = diag(0, Ŝ)`); the raw matrices,
//! the change of variables `P` and both witnesses are kept for reporting.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrator::ArsScheme;
use crate::linalg::RealMatrix;
use crate::spectral::SpectralField;
use crate::system::{
    find_symmetrizer, find_transform, transform_to_normal_form, RelaxationSystem, StabilityWitness,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelName {
    Arz,
    Broadwell,
    Grad,
}

impl ModelName {
    pub const ALL: [ModelName; 3] = [ModelName::Arz, ModelName::Broadwell, ModelName::Grad];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Arz => "arz",
            Self::Broadwell => "broadwell",
            Self::Grad => "grad",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arz" => Ok(Self::Arz),
            "broadwell" => Ok(Self::Broadwell),
            "grad" => Ok(Self::Grad),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

/// Time grid of the published experiment for a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceExperiment {
    pub t_final: f64,
    pub dts: Vec<f64>,
}

/// A model with its data, transform and certificates.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: ModelName,
    pub parameters: BTreeMap<String, f64>,
    /// Matrices in the physical variables.
    pub raw_convection: RealMatrix,
    pub raw_source: RealMatrix,
    /// `P` with `Ũ = P U`.
    pub transform: RealMatrix,
    /// Witness for the raw system.
    pub raw_witness: StabilityWitness,
    /// Normal-form system at `ε = 1`.
    pub system: RelaxationSystem,
    /// Witness for the normal-form system (`P = I`).
    pub witness: StabilityWitness,
    /// Tolerance at which the certificate is expected to pass.
    pub certificate_tol: f64,
}

impl ModelSpec {
    pub fn by_name(name: ModelName, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        match name {
            ModelName::Arz => {
                let mut p = ArzParameters::default();
                for (key, &value) in overrides {
                    match key.as_str() {
                        "c0" => p.c0 = value,
                        "gamma" => p.gamma = value,
                        "rho_m" => p.rho_m = value,
                        "v_f" => p.v_f = value,
                        "rho_star" => p.rho_star = value,
                        "v_star" => p.v_star = value,
                        other => {
                            return Err(Error::Config(format!("unknown ARZ parameter {other:?}")))
                        }
                    }
                }
                make_arz_with(p)
            }
            ModelName::Broadwell => {
                if let Some(key) = overrides.keys().next() {
                    return Err(Error::Config(format!(
                        "Broadwell takes no parameter {key:?}"
                    )));
                }
                make_broadwell()
            }
            ModelName::Grad => {
                let mut m = 5usize;
                for (key, &value) in overrides {
                    match key.as_str() {
                        "M" | "m" => {
                            if value.fract() != 0.0 || value < 0.0 {
                                return Err(Error::Config(format!(
                                    "M must be a whole number, got {value}"
                                )));
                            }
                            m = value as usize;
                        }
                        other => {
                            return Err(Error::Config(format!("unknown Grad parameter {other:?}")))
                        }
                    }
                }
                make_grad(m)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Normal-form system at relaxation time `epsilon`.
    pub fn system_at(&self, epsilon: f64) -> Result<RelaxationSystem> {
        self.system.with_epsilon(epsilon)
    }

    pub fn domain_length(&self) -> f64 {
        self.system.domain_length()
    }

    /// Highest Fourier mode present in the initial data.
    pub fn max_active_mode(&self) -> usize {
        match self.name {
            ModelName::Arz => 1,
            ModelName::Broadwell => 4,
            ModelName::Grad => 2,
        }
    }

    /// Runge-Kutta scheme used to build starting values for order `q`.
    pub fn startup_scheme(&self, q: usize) -> ArsScheme {
        match self.name {
            ModelName::Arz => ArsScheme::for_order(q),
            ModelName::Broadwell | ModelName::Grad => ArsScheme::Ars443,
        }
    }

    /// Final time and time steps of the published convergence tables.
    pub fn reference_experiment(&self) -> ReferenceExperiment {
        match self.name {
            ModelName::Arz => ReferenceExperiment {
                t_final: 1.0,
                dts: vec![1.0 / 700.0, 1.0 / 1400.0, 1.0 / 2800.0, 1.0 / 5600.0],
            },
            ModelName::Broadwell => ReferenceExperiment {
                t_final: 2.0,
                dts: vec![5e-3, 2.5e-3, 1.25e-3, 6.25e-4],
            },
            ModelName::Grad => ReferenceExperiment {
                t_final: 1.0,
                dts: vec![2.5e-3, 1.25e-3, 6.25e-4, 3.125e-4],
            },
        }
    }
}

/// Parameters of the linearized ARZ model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArzParameters {
    pub c0: f64,
    pub gamma: f64,
    pub rho_m: f64,
    pub v_f: f64,
    pub rho_star: f64,
    pub v_star: f64,
}

impl Default for ArzParameters {
    fn default() -> Self {
        Self {
            c0: 1.5,
            gamma: 1.0,
            rho_m: 8.0,
            v_f: 4.0,
            rho_star: 1.0,
            v_star: 1.0,
        }
    }
}

impl ArzParameters {
    /// Convection and source of the linearization about `(ρ⋆, v⋆)` with
    /// `p(ρ) = c0 ρ^γ` and `V(ρ) = v_f (1 − ρ/ρ_m)`.
    pub fn matrices(&self) -> (RealMatrix, RealMatrix) {
        let dp = self.c0 * self.gamma * self.rho_star.powf(self.gamma - 1.0);
        let dv = -self.v_f / self.rho_m;
        let a = RealMatrix::from_rows(&[
            vec![self.v_star, self.rho_star],
            vec![0.0, self.v_star - self.rho_star * dp],
        ])
        .expect("2x2");
        let q = RealMatrix::from_rows(&[vec![0.0, 0.0], vec![dv, -1.0]]).expect("2x2");
        (a, q)
    }

    fn parameter_map(&self) -> BTreeMap<String, f64> {
        [
            ("c0", self.c0),
            ("gamma", self.gamma),
            ("rho_m", self.rho_m),
            ("v_f", self.v_f),
            ("rho_star", self.rho_star),
            ("v_star", self.v_star),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Linearized ARZ with the default parameters, on `[0, 1]`.
pub fn make_arz() -> Result<ModelSpec> {
    make_arz_with(ArzParameters::default())
}

pub fn make_arz_with(params: ArzParameters) -> Result<ModelSpec> {
    let (a, q) = params.matrices();
    let p = find_transform(&q)?;
    let normal = transform_to_normal_form(&a, &q, &p)?;
    let r = normal.r;
    let system = normal.into_system(1.0, 1.0)?;
    let (raw_witness, witness) = if params == ArzParameters::default() {
        let a0 = RealMatrix::from_rows(&[vec![3.0, 2.0], vec![2.0, 4.0]])?;
        let raw = StabilityWitness::new(p.clone(), a0, r)?;
        let normal = raw.to_normal_form()?;
        (raw, normal)
    } else {
        let normal = find_symmetrizer(&system)?;
        (raw_witness_from_normal(&p, &normal)?, normal)
    };
    Ok(ModelSpec {
        name: ModelName::Arz,
        parameters: params.parameter_map(),
        raw_convection: a,
        raw_source: q,
        transform: p,
        raw_witness,
        system,
        witness,
        certificate_tol: 1e-10,
    })
}

/// `A₀ = PᵀÃ₀P` so that the raw system carries the same certificate.
fn raw_witness_from_normal(p: &RealMatrix, normal: &StabilityWitness) -> Result<StabilityWitness> {
    let a0 = p
        .transpose()
        .matmul(&normal.a0)?
        .matmul(p)?
        .symmetric_part();
    StabilityWitness::new(p.clone(), a0, normal.r)
}

/// Linearized Broadwell model in `(ρ, m, z)` about `(2, 0, 1)`, on `[−π, π]`.
pub fn make_broadwell() -> Result<ModelSpec> {
    let a = RealMatrix::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![0.0, 1.0, 0.0],
    ])?;
    let q = RealMatrix::from_rows(&[
        vec![0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, -2.0],
    ])?;
    let p = find_transform(&q)?;
    let system = transform_to_normal_form(&a, &q, &p)?.into_system(1.0, TAU)?;
    let witness = find_symmetrizer(&system)?;
    let raw_witness = raw_witness_from_normal(&p, &witness)?;
    Ok(ModelSpec {
        name: ModelName::Broadwell,
        parameters: [("rho_star", 2.0), ("m_star", 0.0), ("z_star", 1.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        raw_convection: a,
        raw_source: q,
        transform: p,
        raw_witness,
        system,
        witness,
        certificate_tol: 1e-8,
    })
}

/// Linearized Grad moment system with moments up to `M`, on `[−π, π]`.
pub fn make_grad(m: usize) -> Result<ModelSpec> {
    if m < 3 {
        return Err(Error::InvalidM(m));
    }
    let n = m + 1;
    let a = RealMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            (j as f64).sqrt()
        } else if i == j + 1 {
            (i as f64).sqrt()
        } else {
            0.0
        }
    });
    let q = RealMatrix::from_fn(n, n, |i, j| if i == j && i >= 3 { -1.0 } else { 0.0 });
    let r = m - 2;
    let system = RelaxationSystem::new(a.clone(), q.clone(), r, 1.0, TAU)?;
    let witness = StabilityWitness::normal(RealMatrix::identity(n), r)?;
    Ok(ModelSpec {
        name: ModelName::Grad,
        parameters: [("M".to_string(), m as f64)].into_iter().collect(),
        raw_convection: a,
        raw_source: q,
        transform: RealMatrix::identity(n),
        raw_witness: witness.clone(),
        system,
        witness,
        certificate_tol: 1e-10,
    })
}

/// Initial data in the normal-form variables, prepared for order `q` at
/// relaxation time `epsilon`.
///
/// For ARZ and Broadwell the non-equilibrium variable is consistent with the
/// equilibrium manifold to `O(1)` for `q ≤ 2`, `O(ε)` for `q = 3` and `O(ε²)`
/// for `q = 4`; the corrections are formed by spectral differentiation.
pub fn initial_data(
    model: &ModelSpec,
    q: usize,
    modes: usize,
    epsilon: f64,
) -> Result<SpectralField> {
    if !(1..=4).contains(&q) {
        return Err(Error::UnsupportedOrder(q));
    }
    let length = model.domain_length();
    let first = if q >= 3 { epsilon } else { 0.0 };
    let second = if q >= 4 { epsilon * epsilon } else { 0.0 };
    let physical = match model.name {
        ModelName::Arz => {
            let rho =
                SpectralField::project(|x| vec![(2.0 * PI * x).sin() + 1.1], 1, modes, length);
            let rho_x = rho.differentiate();
            let rho_xx = rho_x.differentiate();
            let mut v = rho.scale(-0.5);
            v.axpy(-0.5 * first, &rho_x)?;
            v.axpy(-0.25 * second, &rho_xx)?;
            stack(&[&rho, &v])?
        }
        ModelName::Broadwell => {
            let (a_rho, a_u) = (0.3, 0.1);
            let rho_fn = move |x: f64| 1.0 + a_rho * (2.0 * x).sin();
            let rho = SpectralField::project(|x| vec![rho_fn(x)], 1, modes, length);
            let m = SpectralField::project(
                |x| vec![rho_fn(x) * (0.5 + a_u * (2.0 * x).cos())],
                1,
                modes,
                length,
            );
            let mut z = rho.scale(0.5);
            z.axpy(-0.25 * first, &m.differentiate())?;
            z.axpy(-second / 16.0, &rho.differentiate().differentiate())?;
            stack(&[&rho, &m, &z])?
        }
        ModelName::Grad => {
            let n = model.dim();
            // U = (ρ, w, θ/√2, √3! f₃, …) with θ = √2 and all f_j = 0
            SpectralField::project(
                |x| {
                    let mut u = vec![0.0; n];
                    u[0] = (2.0 * x).sin() + 1.1;
                    let theta = std::f64::consts::SQRT_2;
                    u[2] = theta / std::f64::consts::SQRT_2;
                    u
                },
                n,
                modes,
                length,
            )
        }
    };
    physical.apply_matrix(&model.transform)
}

fn stack(parts: &[&SpectralField]) -> Result<SpectralField> {
    let first = parts[0];
    let n: usize = parts.iter().map(|p| p.components()).sum();
    let mut coeffs = Vec::with_capacity(first.coefficients().len() * n);
    for k in first.mode_indices() {
        for p in parts {
            coeffs.extend_from_slice(p.mode(k));
        }
    }
    SpectralField::from_coefficients(n, first.modes(), first.length(), coeffs)
}
