//! The series E_{μ₁,μ₂}(t) = Σ_{n≥0} t^{nμ₂}/Γ(μ₁+nμ₂), its explicit growth
//! bound, and a numerical checker for Volterra-type integral inequalities
//!
//! ```text
//! φ(t,s) ≤ a(t−s)^{μ₁−1} + b ∫_s^t (t−r)^{μ₂−1} φ(r,s) dr
//!   ⇒  φ(t,s) ≤ aΓ(μ₁)(t−s)^{μ₁−1} E_{μ₁,μ₂}([bΓ(μ₂)]^{1/μ₂}(t−s)).
//! ```
//!
//! Terms are summed in the log domain. Since ln Γ is convex, the term ratio
//! r_n = t^{μ₂}Γ(μ₁+nμ₂)/Γ(μ₁+(n+1)μ₂) is nonincreasing in n, so once
//! r_{n+1} < 1 the tail after term n is at most term_{n+1}/(1 − r_{n+1}).

use crate::error::{invalid, Result};
use crate::special::{gamma, gamma_minimum, ln_gamma};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolterraParams {
    pub a: f64,
    pub b: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub t_end: f64,
}

impl VolterraParams {
    pub fn new(a: f64, b: f64, mu1: f64, mu2: f64, t_end: f64) -> Result<Self> {
        if !(a >= 0.0 && b > 0.0 && mu1 > 0.0 && mu2 > 0.0 && t_end > 0.0) {
            return invalid("Volterra parameters need a ≥ 0 and b, μ₁, μ₂, T > 0");
        }
        Ok(VolterraParams { a, b, mu1, mu2, t_end })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEval {
    pub value: f64,
    pub terms_used: usize,
    pub truncation_bound: f64,
}

const MAX_TERMS: usize = 100_000;

pub fn e_series(mu1: f64, mu2: f64, t: f64, tol: f64) -> Result<SeriesEval> {
    if !(t >= 0.0) || !(tol > 0.0) || !(mu1 > 0.0) || !(mu2 > 0.0) {
        return invalid("e_series needs t ≥ 0, tol > 0 and μ₁, μ₂ > 0");
    }
    if t == 0.0 {
        return Ok(SeriesEval {
            value: 1.0 / gamma(mu1),
            terms_used: 1,
            truncation_bound: 0.0,
        });
    }
    let lt = t.ln();
    let log_term = |n: usize| n as f64 * mu2 * lt - ln_gamma(mu1 + n as f64 * mu2);
    let mut value = 0.0;
    let mut n = 0usize;
    loop {
        value += log_term(n).exp();
        let next = log_term(n + 1);
        let ratio = (log_term(n + 2) - next).exp();
        if ratio < 1.0 {
            let tail = next.exp() / (1.0 - ratio);
            if tail < tol {
                return Ok(SeriesEval {
                    value,
                    terms_used: n + 1,
                    truncation_bound: tail,
                });
            }
        }
        n += 1;
        if n > MAX_TERMS {
            return invalid("e_series did not converge within the term budget");
        }
    }
}

/// Γ₀ = min_{s>0} Γ(s).
pub fn gamma_zero() -> f64 {
    gamma_minimum().1
}

/// (2/(Γ₀μ₂))(1+t)^{2−μ₁}e^{t+1}.
pub fn e_bound(mu1: f64, mu2: f64, t: f64) -> f64 {
    2.0 / (gamma_zero() * mu2) * (1.0 + t).powf(2.0 - mu1) * (t + 1.0).exp()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCheckPoint {
    pub mu1: f64,
    pub mu2: f64,
    pub t: f64,
    pub series: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub gamma_zero: f64,
    pub points: Vec<BoundCheckPoint>,
    /// Point with the smallest bound/series ratio.
    pub worst: Option<BoundCheckPoint>,
    pub pass: bool,
}

pub fn e_bound_check(mu1s: &[f64], mu2s: &[f64], t_grid: &[f64]) -> Result<BoundCheckReport> {
    let g0 = gamma_zero();
    let mut points = Vec::new();
    for &m1 in mu1s {
        for &m2 in mu2s {
            for &t in t_grid {
                let s = e_series(m1, m2, t, 1e-12)?;
                let b = e_bound(m1, m2, t);
                points.push(BoundCheckPoint {
                    mu1: m1,
                    mu2: m2,
                    t,
                    series: s.value,
                    bound: b,
                    pass: s.value <= b,
                });
            }
        }
    }
    let worst = points
        .iter()
        .min_by(|x, y| (x.bound / x.series).partial_cmp(&(y.bound / y.series)).unwrap())
        .cloned();
    Ok(BoundCheckReport {
        gamma_zero: g0,
        pass: points.iter().all(|p| p.pass),
        points,
        worst,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum VolterraStatus {
    /// Hypothesis and conclusion hold everywhere on the grid.
    Holds,
    /// Hypothesis holds but the conclusion fails somewhere.
    ConclusionViolated,
    /// The kernel does not satisfy the hypothesis; nothing to conclude.
    NotApplicable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolterraReport {
    pub status: VolterraStatus,
    /// max over grid pairs of φ/RHS in the hypothesis.
    pub hypothesis_ratio: f64,
    /// min over grid pairs of (bound − φ)/bound.
    pub worst_slack: f64,
    /// max over grid pairs of |φ − bound|/bound.
    pub max_relative_gap: f64,
    pub worst_point: (f64, f64),
    pub nodes: usize,
}

/// ∫_{ua}^{ub} u^m du and ∫_{ua}^{ub} u^{m+1} du for m > −1.
fn power_moments(ua: f64, ub: f64, m: f64) -> (f64, f64) {
    let m0 = (ub.powf(m + 1.0) - ua.powf(m + 1.0)) / (m + 1.0);
    let m1 = (ub.powf(m + 2.0) - ua.powf(m + 2.0)) / (m + 2.0);
    (m0, m1)
}

/// Conclusion bound aΓ(μ₁)τ^{μ₁−1}E_{μ₁,μ₂}([bΓ(μ₂)]^{1/μ₂}τ) at τ = t − s.
pub fn volterra_bound(params: &VolterraParams, tau: f64) -> Result<f64> {
    let scale = (params.b * gamma(params.mu2)).powf(1.0 / params.mu2);
    let e = e_series(params.mu1, params.mu2, scale * tau, 1e-14)?;
    Ok(params.a * gamma(params.mu1) * tau.powf(params.mu1 - 1.0) * e.value)
}

/// Checks hypothesis and conclusion on the uniform grid t_k = kT/n.
///
/// The hypothesis integral uses product integration: (t−r)^{μ₂−1} is
/// integrated exactly against φ(·, s) interpolated linearly between nodes.
/// On the first panel φ(s, s) is taken from `phi` when finite and replaced by
/// φ(t_{j+1}, s) otherwise. `hypothesis_tol` is a relative allowance for the
/// quadrature error of that interpolation.
pub fn volterra_verify<F>(phi: F, params: &VolterraParams, n: usize, hypothesis_tol: f64, conclusion_tol: f64) -> Result<VolterraReport>
where
    F: Fn(f64, f64) -> f64,
{
    if n < 2 {
        return invalid("need at least two grid steps");
    }
    let h = params.t_end / n as f64;
    let t = |k: usize| k as f64 * h;
    let mut vals = vec![vec![0.0; n + 1]; n + 1];
    for j in 0..=n {
        for i in (j + 1)..=n {
            let v = phi(t(i), t(j));
            if !(v >= 0.0) || !v.is_finite() {
                return invalid(format!("φ must be finite and nonnegative, got {v} at ({}, {})", t(i), t(j)));
            }
            vals[i][j] = v;
        }
        let diag = phi(t(j), t(j));
        vals[j][j] = if diag.is_finite() && diag >= 0.0 {
            diag
        } else if j < n {
            vals[j + 1][j]
        } else {
            0.0
        };
    }
    let m = params.mu2 - 1.0;
    let mut hyp_ratio: f64 = 0.0;
    let mut worst_slack = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    let mut worst_point = (0.0, 0.0);
    let mut conclusion_ok = true;
    for j in 0..n {
        for i in (j + 1)..=n {
            let ti = t(i);
            let mut integral = 0.0;
            for k in j..i {
                let (a, b) = (t(k), t(k + 1));
                let (ua, ub) = (ti - b, ti - a);
                let (m0, m1) = power_moments(ua, ub, m);
                let (fa, fb) = (vals[k][j], vals[k + 1][j]);
                integral += fa * m0 + (fb - fa) / h * (ub * m0 - m1);
            }
            let tau = ti - t(j);
            let rhs = params.a * tau.powf(params.mu1 - 1.0) + params.b * integral;
            let v = vals[i][j];
            if rhs > 0.0 {
                hyp_ratio = hyp_ratio.max(v / rhs);
            } else if v > 0.0 {
                hyp_ratio = f64::INFINITY;
            }
            let bound = volterra_bound(params, tau)?;
            let slack = if bound > 0.0 {
                (bound - v) / bound
            } else if v == 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            if slack < worst_slack {
                worst_slack = slack;
                worst_point = (ti, t(j));
            }
            max_gap = max_gap.max(slack.abs());
            if v > bound * (1.0 + conclusion_tol) {
                conclusion_ok = false;
            }
        }
    }
    let status = if hyp_ratio > 1.0 + hypothesis_tol {
        VolterraStatus::NotApplicable
    } else if conclusion_ok {
        VolterraStatus::Holds
    } else {
        VolterraStatus::ConclusionViolated
    };
    Ok(VolterraReport {
        status,
        hypothesis_ratio: hyp_ratio,
        worst_slack,
        max_relative_gap: max_gap,
        worst_point,
        nodes: n + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_examples() {
        let s = e_series(0.5, 1.0, 0.0, 1e-12).unwrap();
        assert!((s.value - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
        let s = e_series(1.0, 1.0, 1.0, 1e-14).unwrap();
        assert!((s.value - std::f64::consts::E).abs() < 1e-13);
        assert!(s.truncation_bound < 1e-14);
        let s = e_series(1.0, 1.0, 3.0, 1e-13).unwrap();
        assert!((s.value - 3f64.exp()).abs() < 1e-11);
    }

    #[test]
    fn bound_examples() {
        let b = e_bound(1.0, 1.0, 1.0);
        assert!((b - 2.0 / 0.885_603_194_410_888_7 * 2.0 * 1f64.exp().powi(2)).abs() < 1e-9);
        assert!((b - 33.37).abs() < 0.01);
        assert!((e_bound(0.5, 1.0, 0.0) - 6.139).abs() < 1e-3);
        let r = e_bound_check(&[1.5], &[0.5], &[0.0, 0.5, 1.0, 2.0, 5.0]).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn saturated_first_term() {
        let p = VolterraParams::new(1.0, 1.0, 0.6, 0.8, 1.0).unwrap();
        let r = volterra_verify(|t, s| (t - s).powf(-0.4), &p, 40, 1e-6, 1e-9).unwrap();
        assert_eq!(r.status, VolterraStatus::Holds);
        assert!(r.worst_slack >= 0.0);
    }

    #[test]
    fn hypothesis_failure_is_not_applicable() {
        let p = VolterraParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = volterra_verify(|t, s| 10.0 * (t - s).exp(), &p, 20, 1e-6, 1e-6).unwrap();
        assert_eq!(r.status, VolterraStatus::NotApplicable);
    }

    #[test]
    fn bad_params() {
        assert!(VolterraParams::new(1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(e_series(1.0, 1.0, -1.0, 1e-9).is_err());
    }
}
