//! Fourier-Galerkin fields on a periodic interval of length `L`.
//!
//! A field stores `Û_k ∈ ℂⁿ` for `k = −N..=N` so that
//! `u(x) = Σ_k Û_k exp(iκ_k x)` with `κ_k = 2πk/L`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

/// Relative size below which projected coefficients are treated as roundoff.
pub const PROJECTION_FLUSH: f64 = 1e-13;

/// Dense coefficient storage for a real vector field in `P_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    components: usize,
    modes: usize,
    length: f64,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(components: usize, modes: usize, length: f64) -> Self {
        assert!(components > 0, "field needs at least one component");
        assert!(
            length > 0.0 && length.is_finite(),
            "domain length must be positive"
        );
        Self {
            components,
            modes,
            length,
            coeffs: vec![Complex64::new(0.0, 0.0); (2 * modes + 1) * components],
        }
    }

    /// Field from explicit coefficients ordered by mode then component.
    pub fn from_coefficients(
        components: usize,
        modes: usize,
        length: f64,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != (2 * modes + 1) * components {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                (2 * modes + 1) * components,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite coefficient".into()));
        }
        Ok(Self {
            components,
            modes,
            length,
            coeffs,
        })
    }

    /// Trapezoidal DFT of `sampler` on `2(2N+1)` uniform points of `[0, L)`.
    /// Exact to roundoff for trigonometric polynomials of degree ≤ N.
    ///
    /// Coefficients below `PROJECTION_FLUSH` times the largest sample are set
    /// to zero, so band-limited data stay band-limited: inactive modes are
    /// then exactly zero instead of carrying DFT roundoff, which the explicit
    /// convection would amplify when `Δt N²` is large.
    pub fn project(
        sampler: impl Fn(f64) -> Vec<f64>,
        components: usize,
        modes: usize,
        length: f64,
    ) -> Self {
        let mut field = Self::zeros(components, modes, length);
        let points = field.grid();
        let m = points.len() as f64;
        let samples: Vec<Vec<f64>> = points
            .iter()
            .map(|&x| {
                let v = sampler(x);
                assert_eq!(
                    v.len(),
                    components,
                    "sampler returned wrong component count"
                );
                v
            })
            .collect();
        let scale = samples.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let flush = PROJECTION_FLUSH * scale;
        for k in 0..=modes as i64 {
            let kappa = field.wavenumber(k);
            let mut acc = vec![Complex64::new(0.0, 0.0); components];
            for (x, v) in points.iter().zip(&samples) {
                let phase = Complex64::from_polar(1.0, -kappa * x);
                for (a, &vi) in acc.iter_mut().zip(v) {
                    *a += phase * vi;
                }
            }
            for (c, a) in acc.iter().enumerate() {
                let mut value = a / m;
                if value.re.abs() <= flush {
                    value.re = 0.0;
                }
                if value.im.abs() <= flush {
                    value.im = 0.0;
                }
                if k == 0 {
                    field.mode_mut(0)[c] = Complex64::new(value.re, 0.0);
                } else {
                    field.mode_mut(k)[c] = value;
                    field.mode_mut(-k)[c] = value.conj();
                }
            }
        }
        field
    }

    /// Uniform sample points `x_j = jL/(2(2N+1))`.
    pub fn grid(&self) -> Vec<f64> {
        let m = 2 * (2 * self.modes + 1);
        (0..m).map(|j| j as f64 * self.length / m as f64).collect()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Mode cutoff `N`.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `κ_k = 2πk/L`.
    pub fn wavenumber(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    /// Largest wavenumber magnitude `2πN/L`.
    pub fn max_wavenumber(&self) -> f64 {
        self.wavenumber(self.modes as i64)
    }

    pub fn mode_indices(&self) -> impl Iterator<Item = i64> {
        let n = self.modes as i64;
        -n..=n
    }

    fn offset(&self, k: i64) -> usize {
        assert!(
            k.unsigned_abs() as usize <= self.modes,
            "mode {k} out of range"
        );
        (k + self.modes as i64) as usize * self.components
    }

    pub fn mode(&self, k: i64) -> &[Complex64] {
        let o = self.offset(k);
        &self.coeffs[o..o + self.components]
    }

    pub fn mode_mut(&mut self, k: i64) -> &mut [Complex64] {
        let o = self.offset(k);
        &mut self.coeffs[o..o + self.components]
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.components == other.components
            && self.modes == other.modes
            && self.length == other.length
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "(n={}, N={}, L={}) vs (n={}, N={}, L={})",
                self.components,
                self.modes,
                self.length,
                other.components,
                other.modes,
                other.length
            )))
        }
    }

    /// `Û_k ↦ iκ_k Û_k`.
    pub fn differentiate(&self) -> Self {
        let mut out = self.clone();
        for k in self.mode_indices() {
            let factor = Complex64::new(0.0, self.wavenumber(k));
            out.mode_mut(k).iter_mut().for_each(|c| *c *= factor);
        }
        out
    }

    /// `sqrt(L Σ_k |Û_k|²)`, the L² norm over one period.
    pub fn l2_norm(&self) -> f64 {
        (self.length * self.coeffs.iter().map(Complex64::norm_sqr).sum::<f64>()).sqrt()
    }

    /// L² norm of the components in `range`.
    pub fn component_l2_norm(&self, range: std::ops::Range<usize>) -> f64 {
        let sum: f64 = self
            .coeffs
            .chunks(self.components)
            .flat_map(|mode| mode[range.clone()].iter())
            .map(Complex64::norm_sqr)
            .sum();
        (self.length * sum).sqrt()
    }

    /// `∫ uᵀ H u dx` for a real symmetric weight `H`.
    pub fn weighted_energy(&self, h: &RealMatrix) -> f64 {
        let n = self.components;
        let mut sum = 0.0;
        for mode in self.coeffs.chunks(n) {
            for i in 0..n {
                for j in 0..n {
                    sum += h[(i, j)] * (mode[i].conj() * mode[j]).re;
                }
            }
        }
        self.length * sum
    }

    /// `∫ uᵀ H v dx` for a real symmetric weight `H`.
    pub fn weighted_inner(&self, other: &Self, h: &RealMatrix) -> Result<f64> {
        if !self.same_shape(other) || h.rows() != self.components || h.cols() != self.components {
            return Err(Error::ShapeMismatch("weighted inner product".into()));
        }
        let n = self.components;
        let mut sum = 0.0;
        for (a, b) in self.coeffs.chunks(n).zip(other.coeffs.chunks(n)) {
            for i in 0..n {
                for j in 0..n {
                    sum += h[(i, j)] * (a[i].conj() * b[j]).re;
                }
            }
        }
        Ok(self.length * sum)
    }

    /// Point value `Σ_k Û_k exp(iκ_k x)` (real part).
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.components];
        for k in self.mode_indices() {
            let phase = Complex64::from_polar(1.0, self.wavenumber(k) * x);
            for (o, c) in out.iter_mut().zip(self.mode(k)) {
                *o += c * phase;
            }
        }
        debug_assert!(
            out.iter().all(|c| c.im.abs() <= 1e-10 * (1.0 + c.re.abs())),
            "imaginary residue in real field"
        );
        out.into_iter().map(|c| c.re).collect()
    }

    /// `max |Û_{−k} − conj(Û_k)|` relative to the largest coefficient.
    pub fn conjugate_symmetry_residual(&self) -> f64 {
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for k in 0..=self.modes as i64 {
            for (a, b) in self.mode(k).iter().zip(self.mode(-k)) {
                worst = worst.max((a.conj() - b).norm());
            }
        }
        worst / scale
    }

    /// `M·Û_k` for every mode.
    pub fn apply_matrix(&self, m: &RealMatrix) -> Result<Self> {
        if m.cols() != self.components {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix applied to {}-component field",
                m.rows(),
                m.cols(),
                self.components
            )));
        }
        let rows = m.rows();
        let mut coeffs = Vec::with_capacity((2 * self.modes + 1) * rows);
        for mode in self.coeffs.chunks(self.components) {
            for i in 0..rows {
                coeffs.push(
                    m.row(i)
                        .iter()
                        .zip(mode)
                        .fold(Complex64::new(0.0, 0.0), |acc, (&a, &c)| acc + c * a),
                );
            }
        }
        Ok(Self {
            components: rows,
            modes: self.modes,
            length: self.length,
            coeffs,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    /// Copy of the field on a different cutoff, truncating or zero-padding.
    pub fn resample(&self, modes: usize) -> Self {
        let mut out = Self::zeros(self.components, modes, self.length);
        let keep = modes.min(self.modes) as i64;
        for k in -keep..=keep {
            out.mode_mut(k).copy_from_slice(self.mode(k));
        }
        out
    }

    /// CSV `k,component,re,im`, one line per coefficient.
    pub fn write_coefficients_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "k,component,re,im")?;
        for k in self.mode_indices() {
            for (c, v) in self.mode(k).iter().enumerate() {
                writeln!(out, "{k},{c},{:.17e},{:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// CSV `x,u_1,..,u_n` on the `2(2N+1)` projection grid.
    pub fn write_physical_csv(&self, mut out: impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.components).map(|i| format!("u_{i}")).collect();
        writeln!(out, "x,{}", header.join(","))?;
        for x in self.grid() {
            let values: Vec<String> = self
                .evaluate(x)
                .iter()
                .map(|v| format!("{v:.17e}"))
                .collect();
            writeln!(out, "{x:.17e},{}", values.join(","))?;
        }
        Ok(())
    }
}
