//! Positive diagonal operators A, the semigroup S(t) = e^{−tA}, fractional
//! powers A^ν and the constants ι_ν = sup_{0<t≤T} t^ν |A^ν S(t)|.
//!
//! Operators act on coordinates in their eigenbasis. A dense symmetric
//! positive-definite matrix is reduced to this form once, at construction,
//! and the returned [`EigenBasis`] converts vectors in and out.

use crate::error::{invalid, Result, SpdeError};
use crate::state_space::{lp_norm, VectorState};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
}

/// How an operator is described in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    /// Explicit eigenvalue list.
    Eigenvalues { values: Vec<f64> },
    /// λ_k = scale · (kπ/(d+1))², k = 1..d. With scale = (d+1)² this is the
    /// Dirichlet Laplacian spectrum (kπ)² on the unit interval.
    DirichletLaplacian1d {
        d: usize,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl OperatorSpec {
    pub fn build(&self) -> Result<SpectralOperator> {
        match self {
            OperatorSpec::Eigenvalues { values } => SpectralOperator::new(values.clone()),
            OperatorSpec::DirichletLaplacian1d { d, scale } => SpectralOperator::dirichlet_laplacian_1d(*d, *scale),
        }
    }
}

/// Orthonormal eigenvectors (columns) of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    vectors: DMatrix<f64>,
}

impl EigenBasis {
    /// Canonical coordinates → spectral coordinates.
    pub fn to_spectral(&self, x: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (self.vectors.transpose() * v).iter().copied().collect()
    }

    /// Spectral coordinates → canonical coordinates.
    pub fn from_spectral(&self, y: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(y);
        (&self.vectors * v).iter().copied().collect()
    }
}

impl SpectralOperator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return invalid("operator needs at least one eigenvalue");
        }
        if eigenvalues.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return invalid("eigenvalues must be finite and strictly positive");
        }
        Ok(SpectralOperator { eigenvalues })
    }

    pub fn dirichlet_laplacian_1d(d: usize, scale: f64) -> Result<Self> {
        if d == 0 || !(scale > 0.0) {
            return invalid("dirichlet_laplacian_1d needs d >= 1 and scale > 0");
        }
        let h = PI / (d as f64 + 1.0);
        SpectralOperator::new((1..=d).map(|k| scale * (k as f64 * h).powi(2)).collect())
    }

    /// Diagonalizes a dense symmetric positive-definite matrix given by rows.
    pub fn from_symmetric(rows: &[Vec<f64>]) -> Result<(Self, EigenBasis)> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return invalid("matrix must be square and non-empty");
        }
        let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        let scale = m.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                    return invalid(format!("matrix not symmetric at ({i},{j})"));
                }
            }
        }
        let eig = m.symmetric_eigen();
        let op = SpectralOperator::new(eig.eigenvalues.iter().copied().collect())?;
        Ok((op, EigenBasis { vectors: eig.eigenvectors }))
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    fn check_dim(&self, x: &VectorState) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(SpdeError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// e^{−λ_i t}, one factor per mode.
    pub fn semigroup_factors(&self, t: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| (-l * t).exp()).collect()
    }

    /// λ_i^ν, one factor per mode (ν of either sign).
    pub fn power_factors(&self, nu: f64) -> Vec<f64> {
        if nu == 0.0 {
            return vec![1.0; self.dim()];
        }
        self.eigenvalues.iter().map(|l| l.powf(nu)).collect()
    }

    pub fn semigroup_apply(&self, t: f64, x: &VectorState) -> Result<VectorState> {
        if !(t >= 0.0) {
            return invalid(format!("semigroup time t = {t} must be nonnegative"));
        }
        self.check_dim(x)?;
        let f = self.semigroup_factors(t);
        VectorState::new(x.coords().iter().zip(&f).map(|(a, b)| a * b).collect())
    }

    pub fn fractional_power_apply(&self, nu: f64, x: &VectorState) -> Result<VectorState> {
        if !(nu >= 0.0) {
            return invalid(format!("fractional power ν = {nu} must be nonnegative"));
        }
        self.check_dim(x)?;
        let f = self.power_factors(nu);
        VectorState::new(x.coords().iter().zip(&f).map(|(a, b)| a * b).collect())
    }

    /// A^{−θ} x for θ ≥ 0.
    pub fn negative_power_apply(&self, theta: f64, x: &VectorState) -> Result<VectorState> {
        if !(theta >= 0.0) {
            return invalid(format!("inverse power θ = {theta} must be nonnegative"));
        }
        self.check_dim(x)?;
        let f = self.power_factors(-theta);
        VectorState::new(x.coords().iter().zip(&f).map(|(a, b)| a * b).collect())
    }

    /// Closed form of ι_ν on (0, T].
    pub fn iota(&self, nu: f64, t_end: f64) -> f64 {
        if nu == 0.0 {
            return 1.0;
        }
        let peak = nu.powf(nu) * (-nu).exp();
        self.eigenvalues
            .iter()
            .map(|&l| {
                if nu / l <= t_end {
                    peak
                } else {
                    (l * t_end).powf(nu) * (-l * t_end).exp()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Norm of A^ν S(t) in the operator norm induced by any ℓ^p (diagonal).
    pub fn smoothing_norm(&self, nu: f64, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&l| if nu == 0.0 { (-l * t).exp() } else { l.powf(nu) * (-l * t).exp() })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IotaValue {
    pub nu: f64,
    pub t_end: f64,
    pub closed_form: f64,
    pub grid_value: f64,
    pub grid_points: usize,
}

/// ι_ν by closed form with a log-grid cross-check. The grid also contains
/// the stationary points ν/λ_i so that the maximum is sampled exactly.
pub fn iota_constant(a: &SpectralOperator, nu: f64, t_end: f64, grid_resolution: usize) -> Result<IotaValue> {
    if !(nu >= 0.0) || !(t_end > 0.0) {
        return invalid("iota needs ν >= 0 and T > 0");
    }
    let closed = a.iota(nu, t_end);
    let n = grid_resolution.max(2);
    let lo = (t_end * 1e-12).ln();
    let hi = t_end.ln();
    let mut ts: Vec<f64> = (0..n).map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()).collect();
    ts.extend(a.eigenvalues().iter().map(|l| nu / l).filter(|t| *t > 0.0 && *t <= t_end));
    let grid = ts
        .iter()
        .map(|&t| {
            if nu == 0.0 {
                a.smoothing_norm(0.0, t)
            } else {
                t.powf(nu) * a.smoothing_norm(nu, t)
            }
        })
        .fold(0.0, f64::max);
    // ν = 0: the supremum is approached as t → 0.
    let grid = if nu == 0.0 { grid.max(a.smoothing_norm(0.0, 0.0)) } else { grid };
    if (grid - closed).abs() > 1e-6 * closed.max(f64::MIN_POSITIVE) {
        return Err(SpdeError::InvalidParameter(format!(
            "iota grid value {grid} disagrees with closed form {closed}"
        )));
    }
    Ok(IotaValue {
        nu,
        t_end,
        closed_form: closed,
        grid_value: grid,
        grid_points: ts.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemigroupConstants {
    pub t_end: f64,
    /// (ν, ι_ν) pairs.
    pub iota: Vec<(f64, f64)>,
    pub m_t: f64,
    pub nu_decay: f64,
    pub varpi: f64,
    pub m_varpi: f64,
}

impl SemigroupConstants {
    /// M_ϖ = 1/sin ϖ is sharp for positive spectra: the supremum of
    /// |λ|/|λ − λ_i| over the sector boundary is attained at |λ| = λ_i / cos ϖ.
    pub fn compute(a: &SpectralOperator, t_end: f64, exponents: &[f64], varpi: f64) -> Result<Self> {
        if !(varpi > 0.0 && varpi < PI / 2.0) {
            return invalid("sector half-angle must lie in (0, π/2)");
        }
        let iota = exponents.iter().map(|&nu| (nu, a.iota(nu, t_end))).collect();
        Ok(SemigroupConstants {
            t_end,
            iota,
            m_t: 1.0,
            nu_decay: a.min_eigenvalue(),
            varpi,
            m_varpi: 1.0 / varpi.sin(),
        })
    }

    pub fn iota_of(&self, nu: f64) -> Option<f64> {
        self.iota.iter().find(|(n, _)| *n == nu).map(|(_, v)| *v)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventReport {
    pub samples: usize,
    /// min over samples of M_ϖ/|λ| − ‖(λ − A)^{−1}‖.
    pub worst_margin: f64,
    pub worst_sample: (f64, f64),
    pub pass: bool,
}

pub fn resolvent_bound_check(a: &SpectralOperator, varpi: f64, m_varpi: f64, lambda_samples: &[Complex64]) -> Result<ResolventReport> {
    let mut worst = f64::INFINITY;
    let mut worst_sample = (0.0, 0.0);
    for z in lambda_samples {
        let r = z.norm();
        if r == 0.0 || z.arg().abs() < varpi {
            return Err(SpdeError::InsideSector(format!("{}{:+}i", z.re, z.im)));
        }
        let res = a.eigenvalues().iter().map(|&l| 1.0 / (z - l).norm()).fold(0.0, f64::max);
        let margin = m_varpi / r - res;
        if margin < worst {
            worst = margin;
            worst_sample = (z.re, z.im);
        }
    }
    Ok(ResolventReport {
        samples: lambda_samples.len(),
        worst_margin: worst,
        worst_sample,
        pass: worst >= -1e-15,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SmiReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// |[S(t) − I]A^{−θ}| ≤ (ι_{1−θ}/θ) t^θ, with ι taken over (0, T].
pub fn smi_bound_check(a: &SpectralOperator, theta: f64, t: f64, t_end: f64) -> Result<SmiReport> {
    if !(theta > 0.0 && theta <= 1.0) {
        return invalid("θ must lie in (0, 1]");
    }
    if !(t >= 0.0 && t <= t_end) {
        return invalid("t must lie in [0, T]");
    }
    let lhs = a
        .eigenvalues()
        .iter()
        .map(|&l| (1.0 - (-l * t).exp()) * l.powf(-theta))
        .fold(0.0, f64::max);
    let rhs = a.iota(1.0 - theta, t_end) / theta * t.powf(theta);
    Ok(SmiReport {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Operator norm of A^ν S(t) acting on ℓ^p coordinates, checked on a vector.
pub fn smoothing_ratio(a: &SpectralOperator, nu: f64, t: f64, x: &VectorState, p: f64) -> f64 {
    let f = a.power_factors(nu);
    let s = a.semigroup_factors(t);
    let y: Vec<f64> = x.coords().iter().zip(f.iter().zip(&s)).map(|(v, (g, h))| v * g * h).collect();
    lp_norm(&y, p) / lp_norm(x.coords(), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(v: &[f64]) -> SpectralOperator {
        SpectralOperator::new(v.to_vec()).unwrap()
    }

    fn vs(v: &[f64]) -> VectorState {
        VectorState::new(v.to_vec()).unwrap()
    }

    #[test]
    fn semigroup_examples() {
        let a = op(&[2.0]);
        let y = a.semigroup_apply(0.5, &vs(&[1.0])).unwrap();
        assert!((y.coords()[0] - (-1f64).exp()).abs() < 1e-15);
        let a = op(&[1.0, 3.0]);
        let y = a.semigroup_apply(1.0, &vs(&[1.0, 1.0])).unwrap();
        assert!((y.coords()[0] - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((y.coords()[1] - 0.049_787_068_367_863_944).abs() < 1e-15);
        assert_eq!(a.semigroup_apply(0.0, &vs(&[3.0, -2.0])).unwrap(), vs(&[3.0, -2.0]));
        assert!(a.semigroup_apply(-1.0, &vs(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn power_examples() {
        let y = op(&[4.0]).fractional_power_apply(0.5, &vs(&[1.0])).unwrap();
        assert!((y.coords()[0] - 2.0).abs() < 1e-15);
        let y = op(&[2.0, 8.0]).fractional_power_apply(1.0 / 3.0, &vs(&[1.0, 1.0])).unwrap();
        assert!((y.coords()[0] - 2f64.cbrt()).abs() < 1e-14);
        assert!((y.coords()[1] - 2.0).abs() < 1e-14);
        assert!(op(&[2.0]).fractional_power_apply(-0.5, &vs(&[1.0])).is_err());
    }

    #[test]
    fn iota_examples() {
        let a = op(&[1.0]);
        let v = iota_constant(&a, 1.0, 2.0, 4000).unwrap();
        assert!((v.closed_form - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(iota_constant(&a, 0.0, 2.0, 100).unwrap().closed_form, 1.0);
        let v = iota_constant(&a, 0.5, 2.0, 4000).unwrap();
        assert!((v.closed_form - 0.5f64.sqrt() * (-0.5f64).exp()).abs() < 1e-15);
        assert!((v.closed_form - 0.428_881_942_480_353_4).abs() < 1e-12);
    }

    #[test]
    fn iota_endpoint_branch() {
        // ν/λ = 2 > T = 1: supremum at t = T.
        let a = op(&[0.5]);
        let v = iota_constant(&a, 1.0, 1.0, 1000).unwrap();
        assert!((v.closed_form - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn resolvent_examples() {
        let a = op(&[1.0, 4.0]);
        let r = resolvent_bound_check(&a, 0.3, 0.5, &[Complex64::new(-1.0, 0.0)]).unwrap();
        assert!(r.pass);
        assert!((r.worst_margin - 0.0).abs() < 1e-15);
        let a1 = op(&[1.0]);
        let r = resolvent_bound_check(&a1, 0.3, 1.0, &[Complex64::new(-1e6, 0.0)]).unwrap();
        assert!(r.pass);
        let z = Complex64::new(0.0, -1.0);
        let res = 1.0 / (z - 1.0).norm();
        assert!((res - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(resolvent_bound_check(&a1, 0.3, 1.0 / 0.3f64.sin(), &[z]).unwrap().pass);
        assert!(matches!(
            resolvent_bound_check(&a1, 0.3, 1.0, &[Complex64::new(2.0, 0.1)]),
            Err(SpdeError::InsideSector(_))
        ));
    }

    #[test]
    fn sector_constant_is_sharp() {
        let varpi: f64 = 0.4;
        let a = op(&[1.0]);
        let c = SemigroupConstants::compute(&a, 1.0, &[0.0], varpi).unwrap();
        let z = Complex64::from_polar(1.0 / varpi.cos(), varpi);
        let r = resolvent_bound_check(&a, varpi, c.m_varpi, &[z]).unwrap();
        assert!(r.worst_margin.abs() < 1e-12);
    }

    #[test]
    fn smi_examples() {
        let a = op(&[1.0]);
        let r = smi_bound_check(&a, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
        let r = smi_bound_check(&a, 1.0, 1.0, 1.0).unwrap();
        assert!((r.lhs - 0.632_120_558_828_557_7).abs() < 1e-14 && r.rhs == 1.0 && r.pass);
        let r = smi_bound_check(&a, 0.5, 0.25, 1.0).unwrap();
        assert!((r.lhs - 0.221_199_216_928_595).abs() < 1e-12);
        assert!((r.rhs - 0.428_881_942_480_353_4).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn dirichlet_spectrum() {
        let a = SpectralOperator::dirichlet_laplacian_1d(3, 16.0).unwrap();
        for (k, l) in a.eigenvalues().iter().enumerate() {
            assert!((l - ((k + 1) as f64 * PI).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_reduction() {
        let (a, basis) = SpectralOperator::from_symmetric(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let mut ev = a.eigenvalues().to_vec();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
        let x = [0.3, -1.2];
        let back = basis.from_spectral(&basis.to_spectral(&x));
        assert!((back[0] - x[0]).abs() < 1e-14 && (back[1] - x[1]).abs() < 1e-14);
        assert!(SpectralOperator::from_symmetric(&[vec![2.0, 1.0], vec![0.0, 2.0]]).is_err());
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(SpectralOperator::new(vec![1.0, 0.0]).is_err());
        assert!(SpectralOperator::new(vec![]).is_err());
    }
}
