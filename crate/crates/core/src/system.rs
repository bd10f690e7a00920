//! Relaxation systems `U_t + A U_x = Q U / ε`, the structural stability
//! certificate and the change of variables to normal form.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{is_negative_semidefinite, is_spd, DefinitenessWitness, RealMatrix};

/// Default tolerance for certificate checks.
pub const DEFAULT_TOL: f64 = 1e-10;

const NORMAL_FORM_TOL: f64 = 1e-12;

/// A linear relaxation system in normal form: `Q = diag(0, Ŝ)` with `Ŝ` the
/// trailing `r x r` block.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSystem {
    a: RealMatrix,
    q: RealMatrix,
    r: usize,
    epsilon: f64,
    domain_length: f64,
}

impl RelaxationSystem {
    pub fn new(
        a: RealMatrix,
        q: RealMatrix,
        r: usize,
        epsilon: f64,
        domain_length: f64,
    ) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() || q.rows() != n || q.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, Q is {}x{}",
                a.rows(),
                a.cols(),
                q.rows(),
                q.cols()
            )));
        }
        if r == 0 || r > n {
            return Err(Error::InvalidSystem(format!(
                "stiff block size r = {r} must satisfy 0 < r <= n = {n}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidSystem(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::InvalidSystem(format!(
                "domain length must be positive, got {domain_length}"
            )));
        }
        let residual = off_block_residual(&q, n - r);
        if residual > NORMAL_FORM_TOL * q.max_abs().max(1.0) {
            return Err(Error::NotNormalForm { residual });
        }
        let mut q = q;
        zero_off_block(&mut q, n - r);
        q.block(n - r, n - r, r, r)
            .lu()
            .map_err(|_| Error::InvalidSystem("stiff block Ŝ is singular".into()))?;
        Ok(Self {
            a,
            q,
            r,
            epsilon,
            domain_length,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }

    /// Size of the stiff block.
    pub fn stiff_size(&self) -> usize {
        self.r
    }

    /// Number of conserved (equilibrium) components.
    pub fn conserved_size(&self) -> usize {
        self.dim() - self.r
    }

    pub fn convection(&self) -> &RealMatrix {
        &self.a
    }

    pub fn source(&self) -> &RealMatrix {
        &self.q
    }

    /// `Ŝ`.
    pub fn stiff_block(&self) -> RealMatrix {
        let m = self.conserved_size();
        self.q.block(m, m, self.r, self.r)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.q.clone(),
            self.r,
            epsilon,
            self.domain_length,
        )
    }

    /// Certificate for this (normal-form) system.
    pub fn certify(&self, witness: &StabilityWitness, tol: f64) -> Result<CertificateReport> {
        check_structural_stability(&self.a, &self.q, witness, tol)
    }

    pub fn to_document(&self) -> SystemDocument {
        SystemDocument {
            n: self.dim(),
            r: self.r,
            epsilon: self.epsilon,
            domain_length: self.domain_length,
            a: self.a.to_rows(),
            q: self.q.to_rows(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("plain data serializes")
    }

    /// Parses `{n, r, epsilon, domain_length, A, Q}`. Matrices may be flat
    /// row-major arrays or nested rows; entries may be numbers or strings such
    /// as `"2/3"`.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let n = json_count(&v, "n")?;
        let r = json_count(&v, "r")?;
        let epsilon = json_real(&v, "epsilon")?;
        let domain_length = json_real(&v, "domain_length")?;
        let a = json_matrix(field(&v, "A")?, n)?;
        let q = json_matrix(field(&v, "Q")?, n)?;
        Self::new(a, q, r, epsilon, domain_length)
    }
}

/// Serialized form of a [`RelaxationSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDocument {
    pub n: usize,
    pub r: usize,
    pub epsilon: f64,
    pub domain_length: f64,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
}

/// Matrices `P` and `A₀` certifying the structural stability condition.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityWitness {
    pub p: RealMatrix,
    pub a0: RealMatrix,
    pub r: usize,
}

impl StabilityWitness {
    pub fn new(p: RealMatrix, a0: RealMatrix, r: usize) -> Result<Self> {
        if !p.is_square() || p.rows() != a0.rows() || !a0.is_square() {
            return Err(Error::DimensionMismatch("P and A0 must be n x n".into()));
        }
        if r == 0 || r > p.rows() {
            return Err(Error::InvalidSystem(format!(
                "invalid stiff block size {r}"
            )));
        }
        Ok(Self { p, a0, r })
    }

    /// Witness with `P = I`, for systems already in normal form.
    pub fn normal(a0: RealMatrix, r: usize) -> Result<Self> {
        let n = a0.rows();
        Self::new(RealMatrix::identity(n), a0, r)
    }

    /// The witness seen from the transformed variables `PU`: `(I, P⁻ᵀA₀P⁻¹)`.
    pub fn to_normal_form(&self) -> Result<Self> {
        let pinv = self.p.inverse().map_err(|_| Error::SingularP)?;
        let a0 = pinv
            .transpose()
            .matmul(&self.a0)?
            .matmul(&pinv)?
            .symmetric_part();
        Self::normal(a0, self.r)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "r": self.r,
            "P": self.p.to_rows(),
            "A0": self.a0.to_rows(),
        })
        .to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let p = json_matrix(field(&v, "P")?, 0)?;
        let n = p.rows();
        let a0 = json_matrix(field(&v, "A0")?, n)?;
        let r = json_count(&v, "r")?;
        Self::new(p, a0, r)
    }
}

/// One line of a [`CertificateReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub passed: bool,
    /// Measured quantity compared against the tolerance.
    pub value: f64,
    pub detail: String,
}

impl ConditionCheck {
    fn new(passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self {
            passed,
            value,
            detail: detail.into(),
        }
    }
}

/// Pass/fail per structural stability condition.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub tol: f64,
    /// `PQP⁻¹ = diag(0, Ŝ)` with `Ŝ` invertible. Value: off-block residual.
    pub condition_i: ConditionCheck,
    /// `A₀` symmetric positive definite. Value: smallest eigenvalue.
    pub symmetrizer_spd: ConditionCheck,
    /// `P⁻ᵀA₀P⁻¹` block diagonal. Value: off-block residual.
    pub symmetrizer_block_diagonal: ConditionCheck,
    /// `A₀A = AᵀA₀`. Value: symmetry residual of `A₀A`.
    pub condition_ii: ConditionCheck,
    /// `A₀Q + QᵀA₀ + Pᵀdiag(0, I_r)P ≤ 0`. Value: largest eigenvalue.
    pub condition_iii: ConditionCheck,
    /// `A₀₂Ŝ` symmetric negative definite. Value: largest eigenvalue of its symmetric part.
    pub stiff_coupling: ConditionCheck,
    pub a02_s_symmetry_residual: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.checks().iter().all(|(_, c)| c.passed)
    }

    pub fn checks(&self) -> [(&'static str, &ConditionCheck); 6] {
        [
            ("(i) normal form, Ŝ invertible", &self.condition_i),
            ("A0 symmetric positive definite", &self.symmetrizer_spd),
            (
                "A0 block diagonal in normal form",
                &self.symmetrizer_block_diagonal,
            ),
            ("(ii) A0·A symmetric", &self.condition_ii),
            ("(iii) dissipation inequality", &self.condition_iii),
            ("A02·Ŝ symmetric negative definite", &self.stiff_coupling),
        ]
    }
}

impl std::fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, c) in self.checks() {
            writeln!(
                f,
                "{} {:<36} {:>12.3e}  {}",
                if c.passed { "PASS" } else { "FAIL" },
                name,
                c.value,
                c.detail
            )?;
        }
        write!(
            f,
            "overall: {} (tol {:e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.tol
        )
    }
}

fn off_block_residual(m: &RealMatrix, conserved: usize) -> f64 {
    let n = m.rows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i < conserved || j < conserved {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

fn zero_off_block(m: &mut RealMatrix, conserved: usize) {
    let n = m.rows();
    for i in 0..n {
        for j in 0..n {
            if i < conserved || j < conserved {
                m[(i, j)] = 0.0;
            }
        }
    }
}

fn cross_block_residual(m: &RealMatrix, conserved: usize) -> f64 {
    let n = m.rows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if (i < conserved) != (j < conserved) {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

/// Checks conditions (i)–(iii) plus the symmetry and definiteness of `A₀₂Ŝ`
/// for the system `U_t + A U_x = Q U / ε` (not necessarily in normal form).
pub fn check_structural_stability(
    a: &RealMatrix,
    q: &RealMatrix,
    witness: &StabilityWitness,
    tol: f64,
) -> Result<CertificateReport> {
    let n = a.rows();
    if !a.is_square()
        || q.rows() != n
        || q.cols() != n
        || witness.p.rows() != n
        || witness.a0.rows() != n
    {
        return Err(Error::DimensionMismatch(format!(
            "system of size {n} with witness of size {}",
            witness.p.rows()
        )));
    }
    let r = witness.r;
    let m = n - r;
    let p = &witness.p;
    let a0 = &witness.a0;

    let pinv = p.inverse().map_err(|_| Error::SingularP)?;
    let q_normal = p.matmul(q)?.matmul(&pinv)?;
    let residual_i = off_block_residual(&q_normal, m);
    let s_hat = q_normal.block(m, m, r, r);
    let s_invertible = s_hat.lu().is_ok();
    let condition_i = ConditionCheck::new(
        residual_i <= tol && s_invertible,
        residual_i,
        if s_invertible {
            "off-block residual of PQP⁻¹".to_string()
        } else {
            "Ŝ is singular".to_string()
        },
    );

    let spd = is_spd(a0, tol);
    let min_eig = crate::linalg::min_symmetric_eigenvalue(a0)?;
    let symmetrizer_spd = ConditionCheck::new(
        spd.passed,
        min_eig,
        match spd.witness {
            None => "smallest eigenvalue".to_string(),
            Some(DefinitenessWitness::Pivot { index, value }) => {
                format!("Cholesky pivot {index} = {value:e}")
            }
            Some(DefinitenessWitness::Asymmetric { row, col, residual }) => {
                format!("asymmetric at ({row}, {col}): {residual:e}")
            }
            Some(DefinitenessWitness::Eigenvalue { value }) => format!("eigenvalue {value:e}"),
        },
    );

    let a0_normal = pinv.transpose().matmul(a0)?.matmul(&pinv)?;
    let block_residual = cross_block_residual(&a0_normal, m);
    let symmetrizer_block_diagonal = ConditionCheck::new(
        block_residual <= tol,
        block_residual,
        "coupling entries of P⁻ᵀA₀P⁻¹",
    );

    let sym_ii = a0.matmul(a)?.symmetry_residual();
    let condition_ii = ConditionCheck::new(sym_ii <= tol, sym_ii, "max |A₀A − (A₀A)ᵀ|");

    let a0q = a0.matmul(q)?;
    let mut selector = RealMatrix::zeros(n, n);
    for i in m..n {
        selector[(i, i)] = 1.0;
    }
    let dissipation = a0q
        .add(&a0q.transpose())?
        .add(&p.transpose().matmul(&selector)?.matmul(p)?)?
        .symmetric_part();
    let max_iii = crate::linalg::max_symmetric_eigenvalue(&dissipation)?;
    let nsd = is_negative_semidefinite(&dissipation, tol)?;
    let condition_iii = ConditionCheck::new(nsd.passed, max_iii, "largest eigenvalue");

    let a02 = a0_normal.block(m, m, r, r);
    let a02s = a02.matmul(&s_hat)?;
    let a02_s_symmetry_residual = a02s.symmetry_residual();
    let max_a02s = crate::linalg::max_symmetric_eigenvalue(&a02s)?;
    let stiff_coupling = ConditionCheck::new(
        a02_s_symmetry_residual <= tol && max_a02s < -tol,
        max_a02s,
        format!("symmetry residual {a02_s_symmetry_residual:.2e}"),
    );

    Ok(CertificateReport {
        tol,
        condition_i,
        symmetrizer_spd,
        symmetrizer_block_diagonal,
        condition_ii,
        condition_iii,
        stiff_coupling,
        a02_s_symmetry_residual,
    })
}

/// Matrices of a system after the change of variables `Ũ = PU`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm {
    pub a: RealMatrix,
    pub q: RealMatrix,
    pub r: usize,
}

impl NormalForm {
    /// Undo the change of variables: `(P⁻¹ÃP, P⁻¹Q̃P)`.
    pub fn inverse_transform(&self, p: &RealMatrix) -> Result<(RealMatrix, RealMatrix)> {
        let pinv = p.inverse().map_err(|_| Error::SingularP)?;
        Ok((
            pinv.matmul(&self.a)?.matmul(p)?,
            pinv.matmul(&self.q)?.matmul(p)?,
        ))
    }

    pub fn into_system(self, epsilon: f64, domain_length: f64) -> Result<RelaxationSystem> {
        RelaxationSystem::new(self.a, self.q, self.r, epsilon, domain_length)
    }
}

/// `Ã = PAP⁻¹`, `Q̃ = PQP⁻¹`, with `Q̃` checked to be `diag(0, Ŝ)`.
pub fn transform_to_normal_form(
    a: &RealMatrix,
    q_raw: &RealMatrix,
    p: &RealMatrix,
) -> Result<NormalForm> {
    let pinv = p.inverse().map_err(|_| Error::SingularP)?;
    let mut at = p.matmul(a)?.matmul(&pinv)?;
    let mut qt = p.matmul(q_raw)?.matmul(&pinv)?;
    let n = qt.rows();
    let scale = NORMAL_FORM_TOL * q_raw.max_abs().max(1.0);
    // Leading rows/columns that vanish identically form the conserved block.
    let mut conserved = 0;
    while conserved < n
        && (0..n).all(|j| qt[(conserved, j)].abs() <= scale && qt[(j, conserved)].abs() <= scale)
    {
        conserved += 1;
    }
    let r = n - conserved;
    if r == 0 {
        return Err(Error::InvalidSystem(
            "source term vanishes identically".into(),
        ));
    }
    if qt.block(conserved, conserved, r, r).lu().is_err() {
        return Err(Error::NotNormalForm {
            residual: off_block_residual(&qt, n.saturating_sub(r).max(1)),
        });
    }
    zero_off_block(&mut qt, conserved);
    snap_matrix(&mut qt);
    snap_matrix(&mut at);
    Ok(NormalForm { a: at, q: qt, r })
}

/// Builds `P` from the eigenstructure of `Q`: leading rows span the left null
/// space (in reduced row echelon form), trailing rows span the row space of `Q`
/// normalized to the identity on the non-pivot columns.
pub fn find_transform(q_raw: &RealMatrix) -> Result<RealMatrix> {
    let n = q_raw.rows();
    let scale = q_raw.max_abs().max(1.0);
    let zero_tol = 1e-10 * scale * scale;

    let left = q_raw.matmul(&q_raw.transpose())?.symmetric_eigen()?;
    let null_rows: Vec<Vec<f64>> = (0..n)
        .filter(|&j| left.values[j].abs() <= zero_tol)
        .map(|j| (0..n).map(|i| left.vectors[(i, j)]).collect())
        .collect();
    let right = q_raw.transpose().matmul(q_raw)?.symmetric_eigen()?;
    let range_rows: Vec<Vec<f64>> = (0..n)
        .filter(|&j| right.values[j].abs() > zero_tol)
        .map(|j| (0..n).map(|i| right.vectors[(i, j)]).collect())
        .collect();
    let m = null_rows.len();
    if range_rows.is_empty() || m + range_rows.len() != n {
        return Err(Error::NotNormalForm { residual: f64::NAN });
    }

    let (null_rref, pivots) = rref(null_rows);
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let range = RealMatrix::from_rows(&range_rows)?;
    let sub = RealMatrix::from_fn(range.rows(), free.len(), |i, j| range[(i, free[j])]);
    let normalizer = sub
        .inverse()
        .map_err(|_| Error::NotNormalForm { residual: f64::NAN })?;
    let range_normal = normalizer.matmul(&range)?;

    let mut rows = null_rref;
    rows.extend(range_normal.to_rows());
    let mut p = RealMatrix::from_rows(&rows)?;
    snap_matrix(&mut p);
    p.lu().map_err(|_| Error::SingularP)?;
    Ok(p)
}

fn rref(mut rows: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<usize>) {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut lead = 0;
    for c in 0..ncols {
        if lead == nrows {
            break;
        }
        let (best, mag) = (lead..nrows)
            .map(|i| (i, rows[i][c].abs()))
            .fold((lead, 0.0), |b, x| if x.1 > b.1 { x } else { b });
        if mag < 1e-12 {
            continue;
        }
        rows.swap(lead, best);
        let pv = rows[lead][c];
        rows[lead].iter_mut().for_each(|x| *x /= pv);
        for i in 0..nrows {
            if i != lead {
                let f = rows[i][c];
                if f != 0.0 {
                    for j in 0..ncols {
                        rows[i][j] -= f * rows[lead][j];
                    }
                }
            }
        }
        pivots.push(c);
        lead += 1;
    }
    (rows, pivots)
}

/// Rounds entries lying within roundoff of a small-denominator rational.
fn snap_matrix(m: &mut RealMatrix) {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            m[(i, j)] = snap(m[(i, j)]);
        }
    }
}

fn snap(x: f64) -> f64 {
    for d in 1..=16 {
        let scaled = x * d as f64;
        let rounded = scaled.round();
        if (scaled - rounded).abs() <= 1e-11 * (d as f64) * x.abs().max(1.0) {
            return rounded / d as f64;
        }
    }
    x
}

/// Coefficient grid for [`find_symmetrizer`].
const GRID_HALF_WIDTH: f64 = 2.0;
const GRID_STEP: f64 = 0.25;
const MAX_SOLUTION_DIM: usize = 6;
const MAX_GRID_POINTS: usize = 600_000;

/// Searches for a block-diagonal symmetrizer `A₀` (with `P = I`) of a
/// normal-form system.
///
/// The linear constraints `A₀A = AᵀA₀` and `A₀₂Ŝ = ŜᵀA₀₂` are solved for a
/// basis of their solution space; combinations of the basis are then scanned on
/// a coefficient grid and refined by golden-section search, maximizing the
/// smaller of the least eigenvalues of `A₀` and `−A₀₂Ŝ`. The winner is
/// normalized to unit smallest diagonal entry and scaled by the least integer
/// that satisfies condition (iii).
pub fn find_symmetrizer(system: &RelaxationSystem) -> Result<StabilityWitness> {
    let n = system.dim();
    let r = system.stiff_size();
    let m = n - r;
    let a = system.convection();
    let s_hat = system.stiff_block();

    // free parameters: upper triangle of each diagonal block
    let mut params = Vec::new();
    for (start, size) in [(0, m), (m, r)] {
        for i in 0..size {
            for j in i..size {
                params.push((start + i, start + j));
            }
        }
    }
    let build = |coeffs: &[f64]| -> RealMatrix {
        let mut a0 = RealMatrix::zeros(n, n);
        for (&(i, j), &c) in params.iter().zip(coeffs) {
            a0[(i, j)] = c;
            a0[(j, i)] = c;
        }
        a0
    };
    let constraints = |a0: &RealMatrix| -> Vec<f64> {
        let mut out = Vec::new();
        let prod = a0.matmul(a).expect("square");
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(prod[(i, j)] - prod[(j, i)]);
            }
        }
        let s = a0.block(m, m, r, r).matmul(&s_hat).expect("square");
        for i in 0..r {
            for j in (i + 1)..r {
                out.push(s[(i, j)] - s[(j, i)]);
            }
        }
        out
    };

    let d = params.len();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|p| {
            let mut e = vec![0.0; d];
            e[p] = 1.0;
            constraints(&build(&e))
        })
        .collect();
    let nrows = columns[0].len();
    let normal = RealMatrix::from_fn(d, d, |i, j| {
        (0..nrows).map(|k| columns[i][k] * columns[j][k]).sum()
    });
    let eig = normal.symmetric_eigen()?;
    let top = eig.values.last().copied().unwrap_or(0.0).max(1.0);
    let basis: Vec<RealMatrix> = (0..d)
        .filter(|&j| eig.values[j].abs() <= 1e-12 * top)
        .map(|j| build(&(0..d).map(|i| eig.vectors[(i, j)]).collect::<Vec<_>>()))
        .collect();
    let dim = basis.len();
    if dim == 0 {
        return Err(Error::NotFound(
            "A₀A = AᵀA₀ has only the trivial block-diagonal solution".into(),
        ));
    }
    if dim > MAX_SOLUTION_DIM {
        return Err(Error::NotFound(format!(
            "solution space has dimension {dim} > {MAX_SOLUTION_DIM}"
        )));
    }

    let combine = |c: &[f64]| -> RealMatrix {
        let mut a0 = RealMatrix::zeros(n, n);
        for (b, &ci) in basis.iter().zip(c) {
            a0 = a0.add(&b.scale(ci)).expect("same shape");
        }
        a0
    };
    let score = |c: &[f64]| -> f64 {
        let a0 = combine(c);
        let size = a0.max_abs();
        if size == 0.0 {
            return f64::NEG_INFINITY;
        }
        let spd = crate::linalg::min_symmetric_eigenvalue(&a0).unwrap_or(f64::NEG_INFINITY);
        let coupling = a0
            .block(m, m, r, r)
            .matmul(&s_hat)
            .expect("square")
            .scale(-1.0);
        let neg = crate::linalg::min_symmetric_eigenvalue(&coupling).unwrap_or(f64::NEG_INFINITY);
        spd.min(neg) / size
    };

    // coarse grid, widening the step when the full grid exceeds the budget
    let mut step = GRID_STEP;
    while ((2.0 * GRID_HALF_WIDTH / step) as usize + 1).pow(dim as u32) > MAX_GRID_POINTS {
        step *= 2.0;
    }
    let per_axis = (2.0 * GRID_HALF_WIDTH / step).round() as usize + 1;
    let mut best = (f64::NEG_INFINITY, vec![0.0; dim]);
    let mut idx = vec![0usize; dim];
    let mut c = vec![0.0; dim];
    loop {
        for (ci, &k) in c.iter_mut().zip(&idx) {
            *ci = -GRID_HALF_WIDTH + step * k as f64;
        }
        let s = score(&c);
        if s > best.0 {
            best = (s, c.clone());
        }
        let mut axis = 0;
        while axis < dim {
            idx[axis] += 1;
            if idx[axis] < per_axis {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if axis == dim {
            break;
        }
    }

    // golden-section refinement, one coordinate at a time
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut best_score, mut coeffs) = best;
    for _pass in 0..3 {
        for axis in 0..dim {
            let mut lo = coeffs[axis] - step;
            let mut hi = coeffs[axis] + step;
            let eval = |x: f64, base: &[f64]| {
                let mut t = base.to_vec();
                t[axis] = x;
                score(&t)
            };
            for _ in 0..40 {
                let x1 = hi - golden * (hi - lo);
                let x2 = lo + golden * (hi - lo);
                if eval(x1, &coeffs) < eval(x2, &coeffs) {
                    lo = x1;
                } else {
                    hi = x2;
                }
            }
            let x = 0.5 * (lo + hi);
            let s = eval(x, &coeffs);
            if s > best_score {
                best_score = s;
                coeffs[axis] = x;
            }
        }
    }
    if best_score <= 0.0 {
        return Err(Error::NotFound(format!(
            "best candidate has min(λ_min(A₀), λ_min(−A₀₂Ŝ))/max|A₀| = {best_score:e}"
        )));
    }

    let mut a0 = combine(&coeffs);
    let min_diag = (0..n).map(|i| a0[(i, i)]).fold(f64::INFINITY, f64::min);
    a0 = a0.scale(1.0 / min_diag).symmetric_part();
    snap_matrix(&mut a0);
    let coupling = a0.block(m, m, r, r).matmul(&s_hat)?.scale(-1.0);
    let lam = crate::linalg::min_symmetric_eigenvalue(&coupling)?;
    let factor = (1.0 / (2.0 * lam)).ceil().max(1.0);
    let a0 = a0.scale(factor);
    let witness = StabilityWitness::normal(a0, r)?;
    let report = system.certify(&witness, 1e-8)?;
    if !report.passed() {
        return Err(Error::NotFound(format!(
            "best candidate fails certification:\n{report}"
        )));
    }
    Ok(witness)
}

/// Parses a real number, accepting rationals written as `"p/q"`.
pub fn parse_real(text: &str) -> Result<f64> {
    let t = text.trim();
    let value = match t.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {t:?}")))?;
            let den: f64 = den
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {t:?}")))?;
            num / den
        }
        None => t
            .parse()
            .map_err(|_| Error::Parse(format!("bad number {t:?}")))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Parse(format!("non-finite number {t:?}")))
    }
}

fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
    v.get(name)
        .ok_or_else(|| Error::Parse(format!("missing field {name:?}")))
}

fn json_number(v: &Value) -> Result<f64> {
    match v {
        Value::Number(x) => x
            .as_f64()
            .ok_or_else(|| Error::Parse(format!("bad number {x}"))),
        Value::String(s) => parse_real(s),
        other => Err(Error::Parse(format!("expected number, got {other}"))),
    }
}

fn json_real(v: &Value, name: &str) -> Result<f64> {
    json_number(field(v, name)?)
}

fn json_count(v: &Value, name: &str) -> Result<usize> {
    field(v, name)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Parse(format!("field {name:?} must be a non-negative integer")))
}

/// Reads a square matrix from nested rows or a flat row-major array. With
/// `n == 0` the size is inferred.
fn json_matrix(v: &Value, n: usize) -> Result<RealMatrix> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse("matrix must be an array".into()))?;
    let entries: Vec<f64> = if arr.iter().all(Value::is_array) {
        arr.iter()
            .flat_map(|row| row.as_array().expect("checked").iter())
            .map(json_number)
            .collect::<Result<_>>()?
    } else {
        arr.iter().map(json_number).collect::<Result<_>>()?
    };
    let n = if n == 0 {
        (entries.len() as f64).sqrt().round() as usize
    } else {
        n
    };
    RealMatrix::new(n, n, entries)
}
