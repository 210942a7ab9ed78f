//! Additive linear equations dX + AX dt = F(t) dt + G(t) dw with
//! deterministic F and G.
//!
//! X = I₁ + I₂ with I₁(t) = S(t)ξ + ∫₀^t S(t−s)F(s) ds and I₂ the
//! stochastic convolution of G. I₁ is advanced panel by panel with the
//! s^{β−1} weight integrated exactly; I₂ uses G frozen per step at its
//! root mean square over the step.
//!
//! Second-moment bounds (ν = min λ_i, ι₀ = 1, c = c(E)):
//!
//! ```text
//! c₁'      = 2 max((2 + ι₀)², ([2 + ι₀ + ι₁B(β−σ, σ)] T^β/β)²)
//! F1:  E|X(t)|² ≤ 2c₁'[E|ξ|² + |F|²] + 2c ι₀² |G|² ∫₀^t e^{−2ν(t−s)} s^{2β−1} ds
//! F2:  E|X(t)|² ≤ 2c₁'[E|ξ|² + |F|²] + c ι₀² |G|²_∞ (1 − e^{−2νt})/ν
//! increments:  E|I₂(t) − I₂(s)|² ≤ K(t−s)^{2β},
//!              K = c|G|²[ι₀²/(2β) + ι₁² B(2β, 1−2β)/β²]
//! ```

use crate::brownian::{sample_brownian, stochastic_convolution, AdaptedProcess, Integrand, NoiseMode, TimeGrid};
use crate::ensemble::Ensemble;
use crate::error::{invalid, Result, SpdeError};
use crate::holder::{kolmogorov_exponent, IncrementStats, KolmogorovFit};
use crate::initial::InitialLaw;
use crate::profile::Profile;
use crate::sectorial::SpectralOperator;
use crate::special::beta as beta_fn;
use crate::state_space::{lp_diff_norm, lp_norm, NormSpec, TypeConstants};
use crate::stats::{Estimate, MomentAccumulator};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionFlag {
    /// F ∈ F^{β,σ}, G ∈ F^{β+1/2,σ}, 0 < σ < β ≤ 1/2.
    F1,
    /// F ∈ F^{β,σ}, G bounded, 0 < σ < β ≤ 1.
    F2,
}

#[derive(Clone, Debug)]
pub struct AdditiveLinearSpec {
    pub operator: SpectralOperator,
    pub f: Profile,
    pub g: Profile,
    pub initial: InitialLaw,
    pub beta: f64,
    pub sigma: f64,
    pub flag: ConditionFlag,
    pub t_end: f64,
    pub norm: NormSpec,
    pub constants: TypeConstants,
}

impl AdditiveLinearSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        operator: SpectralOperator,
        f: Profile,
        g: Profile,
        initial: InitialLaw,
        beta: f64,
        sigma: f64,
        flag: ConditionFlag,
        t_end: f64,
        p: f64,
    ) -> Result<Self> {
        let upper = match flag {
            ConditionFlag::F1 => 0.5,
            ConditionFlag::F2 => 1.0,
        };
        if !(sigma > 0.0 && sigma < beta && beta <= upper) {
            return invalid(format!("need 0 < σ < β ≤ {upper} under {flag:?}, got σ = {sigma}, β = {beta}"));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid("horizon T must be positive");
        }
        if !(p >= 2.0) {
            return invalid("p must be at least 2");
        }
        let norm = NormSpec::new(p, operator.dim())?;
        initial.validate(operator.dim())?;
        if !f.weighted(0.0, beta).is_finite() {
            return invalid("F violates the t^{β−1} growth allowance at 0");
        }
        match flag {
            ConditionFlag::F1 if !g.weighted(0.0, beta + 0.5).is_finite() => return invalid("G violates the t^{β−1/2} growth allowance at 0"),
            ConditionFlag::F2 if !g.eval(0.0).is_finite() => return invalid("flag F2 needs a bounded G"),
            _ => {}
        }
        Ok(AdditiveLinearSpec {
            constants: TypeConstants::default_for(&norm),
            operator,
            f,
            g,
            initial,
            beta,
            sigma,
            flag,
            t_end,
            norm,
        })
    }

    pub fn d(&self) -> usize {
        self.norm.d
    }

    pub fn p(&self) -> f64 {
        self.norm.p
    }

    /// Deterministic step values of G on the grid, node-major.
    pub fn g_steps(&self, grid: &TimeGrid) -> AdaptedProcess {
        let d = self.d();
        let mut data = vec![0.0; (grid.steps + 1) * d];
        for k in 0..grid.steps {
            let v = self.g.step_value(grid.node(k), grid.node(k + 1));
            data[k * d..(k + 1) * d].fill(v);
        }
        AdaptedProcess::from_flat(*grid, d, data).expect("finite step values")
    }

    /// I₁ = S(t)ξ + ∫S(t−s)F ds for a given ξ.
    pub fn deterministic_part(&self, grid: &TimeGrid, xi: &[f64]) -> Result<AdaptedProcess> {
        let d = self.d();
        let lam = self.operator.eigenvalues();
        let decay = self.operator.semigroup_factors(grid.dt());
        let mut data = vec![0.0; (grid.steps + 1) * d];
        data[..d].copy_from_slice(xi);
        for k in 0..grid.steps {
            let (a, b) = (grid.node(k), grid.node(k + 1));
            for i in 0..d {
                let panel = self.f.drift_panel(lam[i], a, b, self.beta);
                data[(k + 1) * d + i] = decay[i] * data[k * d + i] + panel;
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SpdeError::NonFinite("deterministic part (F norm infinite on grid)".into()));
        }
        AdaptedProcess::from_flat(*grid, d, data)
    }
}

#[derive(Clone, Debug)]
pub struct SolutionDecomposition {
    pub i1: AdaptedProcess,
    pub i2: AdaptedProcess,
    pub x: AdaptedProcess,
    pub xi: Vec<f64>,
    pub mode: NoiseMode,
    pub seed: u64,
    pub path_index: u64,
}

pub fn solve_linear_additive(
    spec: &AdditiveLinearSpec,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
    mode: NoiseMode,
) -> Result<SolutionDecomposition> {
    if (grid.t_end - spec.t_end).abs() > 1e-12 * spec.t_end {
        return Err(SpdeError::GridMismatch);
    }
    let xi = spec.initial.sample(seed, path_index);
    let i1 = spec.deterministic_part(grid, &xi)?;
    let i2 = if spec.g.is_zero() {
        AdaptedProcess::zeros(*grid, spec.d())
    } else {
        let w = sample_brownian(grid, seed, path_index);
        let g = spec.g_steps(grid);
        stochastic_convolution(&spec.operator, Integrand::Deterministic(&g), &w, mode)?
    };
    let sum: Vec<f64> = i1.flat().iter().zip(i2.flat()).map(|(a, b)| a + b).collect();
    Ok(SolutionDecomposition {
        x: AdaptedProcess::from_flat(*grid, spec.d(), sum)?,
        i1,
        i2,
        xi,
        mode,
        seed,
        path_index,
    })
}

/// sup_{0<t≤T} t^δ |AS(t)| = max_i sup_t t^δ λ_i e^{−λ_i t}, in closed form.
pub fn as_bound_constant(a: &SpectralOperator, delta: f64, t_end: f64) -> f64 {
    a.eigenvalues()
        .iter()
        .map(|&l| {
            let t = (delta / l).min(t_end);
            if t == 0.0 {
                l
            } else {
                l * t.powf(delta) * (-l * t).exp()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsCertificate {
    pub delta: f64,
    pub c_delta_measured: f64,
    pub c_delta_configured: Option<f64>,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum StrictStatus {
    Checked,
    AssumptionUnsatisfied,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrictResidualReport {
    pub status: StrictStatus,
    pub certificate: AsCertificate,
    pub steps: usize,
    /// max_k |X(t_k) + ∫AX − ξ − ∫F − ∫G dw|_p.
    pub residual_max: f64,
    pub profile: Vec<f64>,
}

/// Residual of the integrated equation with ∫AX by the trapezoid rule, ∫F
/// exactly and ∫G dw = Σ g_k Δw_k with the same noise.
pub fn strict_residual(spec: &AdditiveLinearSpec, decomp: &SolutionDecomposition, delta: f64, c_delta: Option<f64>) -> Result<StrictResidualReport> {
    if !(0.0..1.0).contains(&delta) {
        return invalid("δ must lie in [0, 1)");
    }
    let measured = as_bound_constant(&spec.operator, delta, spec.t_end);
    let holds = c_delta.map(|c| measured <= c).unwrap_or(true);
    let certificate = AsCertificate {
        delta,
        c_delta_measured: measured,
        c_delta_configured: c_delta,
        holds,
    };
    let grid = decomp.x.grid;
    if !holds {
        return Ok(StrictResidualReport {
            status: StrictStatus::AssumptionUnsatisfied,
            certificate,
            steps: grid.steps,
            residual_max: f64::NAN,
            profile: Vec::new(),
        });
    }
    if decomp.mode != NoiseMode::Increment && !spec.g.is_zero() {
        return Err(SpdeError::ModeMismatch("strict residual needs increment-mode noise".into()));
    }
    let d = spec.d();
    let p = spec.p();
    let lam = spec.operator.eigenvalues();
    let dt = grid.dt();
    let dw = sample_brownian(&grid, decomp.seed, decomp.path_index).increments();
    let g = spec.g_steps(&grid);
    let mut int_ax = vec![0.0; d];
    let mut int_g = vec![0.0; d];
    let mut r = vec![0.0; d];
    let mut profile = Vec::with_capacity(grid.steps + 1);
    for k in 0..=grid.steps {
        if k > 0 {
            let (x0, x1) = (decomp.x.at(k - 1), decomp.x.at(k));
            for i in 0..d {
                int_ax[i] += 0.5 * dt * lam[i] * (x0[i] + x1[i]);
                int_g[i] += g.at(k - 1)[i] * dw[k - 1];
            }
        }
        let int_f = spec.f.integral(0.0, grid.node(k));
        for i in 0..d {
            r[i] = decomp.x.at(k)[i] + int_ax[i] - decomp.xi[i] - int_f - int_g[i];
        }
        profile.push(lp_norm(&r, p));
    }
    Ok(StrictResidualReport {
        status: StrictStatus::Checked,
        certificate,
        steps: grid.steps,
        residual_max: profile.iter().copied().fold(0.0, f64::max),
        profile,
    })
}

/// Σ_i ∫₀^t e^{−2λ_i(t−s)} G(s)² ds. A power-law G is split as s^{2e}
/// times a smooth factor and the weight integrated exactly; panels are
/// doubled until two successive values agree to `tol` (relative to
/// max(1, value)).
pub fn convolution_covariance_oracle(a: &SpectralOperator, g: &Profile, t: f64, tol: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return invalid("t must be nonnegative");
    }
    if g.is_zero() || t == 0.0 {
        return Ok(0.0);
    }
    // G(s)² = s^{γ−1} r(s) with r smooth.
    let gamma = match g {
        Profile::Power { exponent, .. } if *exponent < 0.0 => 1.0 + 2.0 * exponent,
        _ => 1.0,
    };
    if !(gamma > 0.0) {
        return invalid("G² is not integrable at 0");
    }
    let value = |lambda: f64, n: usize| -> f64 {
        let h = t / n as f64;
        let r = |s: f64| -> f64 {
            if s == 0.0 {
                return match g {
                    Profile::Power { coef, .. } if gamma < 1.0 => coef * coef * (-2.0 * lambda * t).exp(),
                    _ => g.eval(0.0).powi(2) * (-2.0 * lambda * t).exp(),
                };
            }
            (-2.0 * lambda * (t - s)).exp() * g.eval(s).powi(2) * s.powf(1.0 - gamma)
        };
        (0..n)
            .map(|k| {
                let (lo, hi) = (k as f64 * h, if k + 1 == n { t } else { (k + 1) as f64 * h });
                let m0 = (hi.powf(gamma) - lo.powf(gamma)) / gamma;
                let m1 = ((hi.powf(gamma + 1.0) - lo.powf(gamma + 1.0)) / (gamma + 1.0) - lo * m0) / (hi - lo);
                let (ra, rb) = (r(lo), r(hi));
                ra * m0 + (rb - ra) * m1
            })
            .sum()
    };
    let mut total = 0.0;
    for &lambda in a.eigenvalues() {
        let mut n = 64;
        let mut prev = value(lambda, n);
        loop {
            n *= 2;
            let cur = value(lambda, n);
            if (cur - prev).abs() <= tol * cur.abs().max(1.0) {
                total += cur;
                break;
            }
            if n >= 1 << 22 {
                return invalid("covariance quadrature did not reach the tolerance");
            }
            prev = cur;
        }
    }
    Ok(total)
}

/// ∫₀^t e^{−2ν(t−s)} s^{2β−1} ds by its power series.
pub fn weighted_decay_integral(nu: f64, beta: f64, t: f64) -> f64 {
    let e = 2.0 * beta;
    let x = 2.0 * nu * t;
    let mut term = 1.0;
    let mut sum = 0.0;
    for m in 0..500 {
        let add = term / (m as f64 + e);
        sum += add;
        if add < 1e-17 * sum && m > 2 {
            break;
        }
        term *= x / (m as f64 + 1.0);
    }
    (-x).exp() * t.powf(e) * sum
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityConstants {
    pub c1_prime: f64,
    pub f_norm: f64,
    /// |G| in F^{β+1/2,σ} (F1) or sup norm (F2).
    pub g_norm: f64,
    pub iota0: f64,
    pub iota1: f64,
    pub nu: f64,
    pub increment_k: Option<f64>,
}

pub fn regularity_constants(spec: &AdditiveLinearSpec, grid: &TimeGrid) -> Result<RegularityConstants> {
    let (beta, sigma, t) = (spec.beta, spec.sigma, spec.t_end);
    let (d, p) = (spec.d(), spec.p());
    let iota0 = 1.0;
    let iota1 = spec.operator.iota(1.0, t);
    let c1_prime = 2.0
        * (2.0f64 + iota0)
            .powi(2)
            .max(((2.0 + iota0 + iota1 * beta_fn(beta - sigma, sigma)) * t.powf(beta) / beta).powi(2));
    let f_norm = spec.f.fbeta_norm(grid, d, beta, sigma, p)?;
    let (g_norm, increment_k) = match spec.flag {
        ConditionFlag::F1 => {
            let gn = spec.g.fbeta_norm(grid, d, beta + 0.5, sigma, p)?;
            let k =
                spec.constants.c * gn * gn * (iota0 * iota0 / (2.0 * beta) + iota1 * iota1 * beta_fn(2.0 * beta, 1.0 - 2.0 * beta) / (beta * beta));
            (gn, Some(k))
        }
        ConditionFlag::F2 => (spec.g.sup_norm(grid, d, p), None),
    };
    Ok(RegularityConstants {
        c1_prime,
        f_norm,
        g_norm,
        iota0,
        iota1,
        nu: spec.operator.min_eigenvalue(),
        increment_k,
    })
}

/// Second-moment bound at time t.
pub fn moment_bound(spec: &AdditiveLinearSpec, k: &RegularityConstants, xi2: f64, t: f64) -> f64 {
    let det = 2.0 * k.c1_prime * (xi2 + k.f_norm * k.f_norm);
    let c = spec.constants.c;
    let sto = match spec.flag {
        ConditionFlag::F1 => 2.0 * c * k.iota0 * k.iota0 * k.g_norm * k.g_norm * weighted_decay_integral(k.nu, spec.beta, t),
        ConditionFlag::F2 => c * k.iota0 * k.iota0 * k.g_norm * k.g_norm * (-(-2.0 * k.nu * t).exp_m1()) / k.nu,
    };
    det + sto
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityReport {
    pub constants: RegularityConstants,
    pub times: Vec<f64>,
    pub second_moment: Vec<Estimate>,
    pub beta_moment: Vec<Estimate>,
    pub bound: Vec<f64>,
    pub moment_pass: bool,
    /// Ê max_k |A^β(X(t_{k+1}) − X(t_k))| at strides 1 and 2.
    pub max_jump_fine: f64,
    pub max_jump_coarse: f64,
    pub jumps_shrink: bool,
    pub kolmogorov: Option<KolmogorovFit>,
    pub exponent_pass: bool,
    /// (lag time, Ê|ΔI₂|², K·lag^{2β}) on dyadic lags, flag F1 only.
    pub increment_checks: Vec<(f64, Estimate, f64)>,
    pub increment_pass: bool,
    pub pass: bool,
}

pub fn regularity_report(spec: &AdditiveLinearSpec, grid: &TimeGrid, ensemble: &Ensemble, mode: NoiseMode) -> Result<RegularityReport> {
    let d = spec.d();
    let p = spec.p();
    let nodes = grid.steps + 1;
    let lags = IncrementStats::dyadic_lags(grid, 3, 7);
    let stats0 = IncrementStats::new(*grid, lags.clone(), p)?;
    let pw = spec.operator.power_factors(spec.beta);
    // Slots: |X|², |A^βX|², |ξ|², jumps (2), |ΔI₂|² per lag.
    let slots = 2 * nodes + 3 + lags.len();
    let (acc, stats) = ensemble.try_map_reduce(
        || (MomentAccumulator::new(slots), stats0.clone()),
        |(acc, stats), i| {
            let s = solve_linear_additive(spec, grid, ensemble.seed, i, mode)?;
            let mut row = Vec::with_capacity(slots);
            row.extend((0..nodes).map(|k| lp_norm(s.x.at(k), p).powi(2)));
            let ab: Vec<f64> = s.x.flat().iter().enumerate().map(|(j, v)| v * pw[j % d]).collect();
            row.extend((0..nodes).map(|k| lp_norm(&ab[k * d..(k + 1) * d], p).powi(2)));
            row.push(lp_norm(&s.xi, p).powi(2));
            let jump = |stride: usize| -> f64 {
                (0..nodes - stride)
                    .step_by(stride)
                    .map(|k| lp_diff_norm(&ab[(k + stride) * d..(k + stride + 1) * d], &ab[k * d..(k + 1) * d], p))
                    .fold(0.0, f64::max)
            };
            row.push(jump(1));
            row.push(jump(2));
            let lo = grid.index_at(grid.t_end / 4.0);
            for &h in &lags {
                row.push(lp_diff_norm(s.i2.at(lo + h), s.i2.at(lo), p).powi(2));
            }
            acc.push(&row);
            stats.add_path(s.x.flat(), d);
            Ok(())
        },
        |a, b| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        },
    )?;
    let constants = regularity_constants(spec, grid)?;
    let xi2 = acc.estimate(2 * nodes).mean;
    let times = grid.nodes();
    let second_moment: Vec<Estimate> = (0..nodes).map(|k| acc.estimate(k)).collect();
    let beta_moment: Vec<Estimate> = (0..nodes).map(|k| acc.estimate(nodes + k)).collect();
    let bound: Vec<f64> = times.iter().map(|&t| moment_bound(spec, &constants, xi2, t)).collect();
    let moment_pass = second_moment.iter().zip(&bound).all(|(m, b)| m.mean <= *b);
    let max_jump_fine = acc.estimate(2 * nodes + 1).mean;
    let max_jump_coarse = acc.estimate(2 * nodes + 2).mean;
    let kolmogorov = if spec.g.is_zero() { None } else { Some(kolmogorov_exponent(&stats)?) };
    let exponent_pass = kolmogorov.as_ref().map(|k| k.exponent >= spec.beta - 0.1).unwrap_or(true);
    let increment_checks: Vec<(f64, Estimate, f64)> = match constants.increment_k {
        Some(k) => lags
            .iter()
            .enumerate()
            .map(|(j, &h)| {
                let tau = h as f64 * grid.dt();
                (tau, acc.estimate(2 * nodes + 3 + j), k * tau.powf(2.0 * spec.beta))
            })
            .collect(),
        None => Vec::new(),
    };
    let increment_pass = increment_checks.iter().all(|(_, e, b)| e.mean <= *b);
    let jumps_shrink = max_jump_fine <= max_jump_coarse;
    Ok(RegularityReport {
        pass: moment_pass && exponent_pass && increment_pass && jumps_shrink,
        constants,
        times,
        second_moment,
        beta_moment,
        bound,
        moment_pass,
        max_jump_fine,
        max_jump_coarse,
        jumps_shrink,
        kolmogorov,
        exponent_pass,
        increment_checks,
        increment_pass,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub t: f64,
    pub variance: Estimate,
    pub oracle: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub pass: bool,
}

/// Marginal check of the first coordinate of I₂(t) against the covariance
/// oracle (exact-convolution mode, so the oracle is the target).
pub fn gaussianity_check(spec: &AdditiveLinearSpec, grid: &TimeGrid, ensemble: &Ensemble, t: f64) -> Result<GaussianityReport> {
    let k = grid.index_at(t);
    let acc = ensemble.try_map_reduce(
        || MomentAccumulator::new(4),
        |acc, i| {
            let w = sample_brownian(grid, ensemble.seed, i);
            let g = spec.g_steps(grid);
            let y = stochastic_convolution(&spec.operator, Integrand::Deterministic(&g), &w, NoiseMode::ExactGauss)?;
            let x = y.at(k)[0];
            acc.push(&[x, x * x, x * x * x, x * x * x * x]);
            Ok(())
        },
        |a, b| a.merge(&b),
    )?;
    let m: Vec<f64> = (0..4).map(|j| acc.mean(j)).collect();
    let var = m[1] - m[0] * m[0];
    let m3 = m[2] - 3.0 * m[0] * m[1] + 2.0 * m[0].powi(3);
    let m4 = m[3] - 4.0 * m[0] * m[2] + 6.0 * m[0] * m[0] * m[1] - 3.0 * m[0].powi(4);
    let skewness = m3 / var.powf(1.5);
    let excess_kurtosis = m4 / (var * var) - 3.0;
    let single = SpectralOperator::new(vec![spec.operator.eigenvalues()[0]])?;
    // Oracle for the frozen step values the scheme actually uses.
    let lam = single.eigenvalues()[0];
    let gs = spec.g_steps(grid);
    let tk = grid.node(k);
    let oracle: f64 = (0..k)
        .map(|j| {
            let g = gs.at(j)[0];
            let (a, b) = (grid.node(j), grid.node(j + 1));
            g * g * ((-2.0 * lam * (tk - b)).exp() - (-2.0 * lam * (tk - a)).exp()) / (2.0 * lam)
        })
        .sum();
    let variance = acc.estimate(1);
    Ok(GaussianityReport {
        t: tk,
        pass: skewness.abs() < 0.05 && excess_kurtosis.abs() < 0.1 && (variance.mean - oracle).abs() <= 3.0 * variance.se,
        variance,
        oracle,
        skewness,
        excess_kurtosis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(lambda: f64, f: Profile, g: Profile, beta: f64, flag: ConditionFlag) -> AdditiveLinearSpec {
        AdditiveLinearSpec::new(
            SpectralOperator::new(vec![lambda]).unwrap(),
            f,
            g,
            InitialLaw::zero(1),
            beta,
            beta / 2.0,
            flag,
            1.0,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn singular_forcing_value() {
        let spec = scalar(1.0, Profile::Power { coef: 1.0, exponent: -0.5 }, Profile::Zero, 0.5, ConditionFlag::F2);
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let s = solve_linear_additive(&spec, &grid, 0, 0, NoiseMode::Increment).unwrap();
        // ∫₀¹ e^{−(1−s)} s^{−1/2} ds = 2∫₀¹ e^{u²−1} du, by Simpson on u.
        let n = 20000;
        let h = 1.0 / n as f64;
        let f = |u: f64| 2.0 * (u * u - 1.0).exp();
        let simpson: f64 = (0..n)
            .map(|k| {
                let a = k as f64 * h;
                h / 6.0 * (f(a) + 4.0 * f(a + h / 2.0) + f(a + h))
            })
            .sum();
        assert!((simpson - 1.076159).abs() < 1e-6);
        assert!((s.x.at(1024)[0] - simpson).abs() < 1e-4);
    }

    #[test]
    fn zero_data_is_semigroup() {
        let mut spec = scalar(2.0, Profile::Zero, Profile::Zero, 0.5, ConditionFlag::F2);
        spec.initial = InitialLaw::Deterministic { value: vec![1.5] };
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let s = solve_linear_additive(&spec, &grid, 0, 0, NoiseMode::Increment).unwrap();
        for k in 0..=64 {
            assert!((s.x.at(k)[0] - 1.5 * (-2.0 * grid.node(k)).exp()).abs() < 1e-14);
        }
        let r = strict_residual(&spec, &s, 0.5, None).unwrap();
        assert!(r.residual_max < 1e-3);
    }

    #[test]
    fn covariance_oracle_values() {
        let a = SpectralOperator::new(vec![1.0]).unwrap();
        let v = convolution_covariance_oracle(&a, &Profile::Constant { value: 1.0 }, 1.0, 1e-10).unwrap();
        assert!((v - (1.0 - (-2f64).exp()) / 2.0).abs() < 1e-9);
        assert_eq!(convolution_covariance_oracle(&a, &Profile::Zero, 1.0, 1e-8).unwrap(), 0.0);
        let g = Profile::Power { coef: 1.0, exponent: -0.25 };
        let v = convolution_covariance_oracle(&a, &g, 1.0, 1e-10).unwrap();
        assert!((v - weighted_decay_integral(1.0, 0.25, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn weighted_decay_series_limit() {
        // ν → 0: t^{2β}/(2β).
        assert!((weighted_decay_integral(1e-12, 0.25, 2.0) - 2f64.sqrt() / 0.5).abs() < 1e-9);
    }

    #[test]
    fn as_constant_closed_form() {
        let a = SpectralOperator::new(vec![4.0]).unwrap();
        let c = as_bound_constant(&a, 0.5, 1.0);
        let t: f64 = 0.125;
        assert!((c - 4.0 * t.sqrt() * (-0.5f64).exp()).abs() < 1e-14);
        let fine = (1..100000)
            .map(|k| k as f64 * 1e-5)
            .map(|t| t.sqrt() * 4.0 * (-4.0 * t).exp())
            .fold(0.0, f64::max);
        assert!(c >= fine && c - fine < 1e-8);
    }

    #[test]
    fn flag_ranges() {
        let a = SpectralOperator::new(vec![1.0]).unwrap();
        let bad = AdditiveLinearSpec::new(
            a,
            Profile::Zero,
            Profile::Zero,
            InitialLaw::zero(1),
            0.75,
            0.25,
            ConditionFlag::F1,
            1.0,
            2.0,
        );
        assert!(bad.is_err());
    }
}
