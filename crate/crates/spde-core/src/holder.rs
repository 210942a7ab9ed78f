//! Weighted Hölder spaces F^{β,σ}((0,T]; E), the plain C^σ seminorm, and
//! Kolmogorov-type Hölder exponent estimation for process ensembles.
//!
//! All suprema are grid suprema. The t → 0 limit condition of F^{β,σ} can
//! only be observed as a trend, so it is read off the four smallest dyadic
//! windows t_2, t_4, t_8, t_16.

use crate::brownian::TimeGrid;
use crate::error::{invalid, Result, SpdeError};
use crate::state_space::{lp_diff_norm, lp_norm, VectorState};
use crate::stats::{linear_fit, MomentAccumulator};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct WeightedHolderSample {
    pub times: Vec<f64>,
    /// Node-major values, `d` per node.
    values: Vec<f64>,
    pub d: usize,
    pub beta: f64,
    pub sigma: f64,
    pub p: f64,
}

impl WeightedHolderSample {
    pub fn new(times: Vec<f64>, values: &[VectorState], beta: f64, sigma: f64, p: f64) -> Result<Self> {
        let d = values.first().map(|v| v.dim()).unwrap_or(1);
        let mut flat = Vec::with_capacity(values.len() * d);
        for v in values {
            if v.dim() != d {
                return Err(SpdeError::DimensionMismatch { expected: d, got: v.dim() });
            }
            flat.extend_from_slice(v.coords());
        }
        Self::from_flat(times, flat, d, beta, sigma, p)
    }

    pub fn from_flat(times: Vec<f64>, values: Vec<f64>, d: usize, beta: f64, sigma: f64, p: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < beta && beta <= 1.0) {
            return invalid(format!("need 0 < σ < β ≤ 1, got σ = {sigma}, β = {beta}"));
        }
        if times.len() < 2 || values.len() != times.len() * d {
            return invalid("sample needs at least two nodes and one value per node");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("sample times must be strictly increasing");
        }
        if times[0] < 0.0 || (times[0] == 0.0 && beta < 1.0) {
            return invalid("grid must start strictly after t = 0 when β < 1");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SpdeError::NonFinite("Hölder sample values".into()));
        }
        Ok(WeightedHolderSample {
            times,
            values,
            d,
            beta,
            sigma,
            p,
        })
    }

    /// Samples `f` on the nodes t_1, …, t_N of `grid`.
    pub fn from_fn(grid: &TimeGrid, d: usize, beta: f64, sigma: f64, p: f64, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let times: Vec<f64> = (1..=grid.steps).map(|k| grid.node(k)).collect();
        let mut values = Vec::with_capacity(times.len() * d);
        for &t in &times {
            let v = f(t);
            if v.len() != d {
                return Err(SpdeError::DimensionMismatch { expected: d, got: v.len() });
            }
            values.extend(v);
        }
        Self::from_flat(times, values, d, beta, sigma, p)
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn uniform_step(&self) -> Option<f64> {
        let h = self.times[1] - self.times[0];
        let ok = self
            .times
            .iter()
            .enumerate()
            .all(|(k, t)| (t - (self.times[0] + k as f64 * h)).abs() <= 1e-9 * h.max(*t));
        ok.then_some(h)
    }

    /// sup_{s < t_m} s^{1−β+σ}|f(t_m) − f(s)|/(t_m − s)^σ.
    fn defect_at(&self, m: usize) -> f64 {
        let e = 1.0 - self.beta + self.sigma;
        let fm = self.at(m);
        (0..m)
            .map(|j| {
                let s = self.times[j];
                s.powf(e) * lp_diff_norm(fm, self.at(j), self.p) / (self.times[m] - s).powf(self.sigma)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub weight_sup: f64,
    pub holder_sup: f64,
    pub limit_defect: f64,
    pub norm: f64,
    /// Number of grid nodes used.
    pub resolution: usize,
}

impl HolderReport {
    /// Flat key-value record for CSV/JSON export.
    pub fn record(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("weight_sup", self.weight_sup),
            ("holder_sup", self.holder_sup),
            ("limit_defect", self.limit_defect),
            ("norm", self.norm),
            ("resolution", self.resolution as f64),
        ]
    }
}

pub fn fbeta_sigma_norm(f: &WeightedHolderSample) -> HolderReport {
    let n = f.len();
    let wexp = 1.0 - f.beta;
    let weight_sup = (0..n).map(|k| f.times[k].powf(wexp) * lp_norm(f.at(k), f.p)).fold(0.0, f64::max);
    let e = 1.0 - f.beta + f.sigma;
    let sw: Vec<f64> = f.times.iter().map(|s| s.powf(e)).collect();
    let lag_pow: Option<Vec<f64>> = f
        .uniform_step()
        .map(|h| (0..n).map(|j| if j == 0 { 0.0 } else { (j as f64 * h).powf(-f.sigma) }).collect());
    let mut holder_sup: f64 = 0.0;
    for m in 1..n {
        let fm = f.at(m);
        for j in 0..m {
            let w = match &lag_pow {
                Some(tab) => tab[m - j],
                None => (f.times[m] - f.times[j]).powf(-f.sigma),
            };
            let v = sw[j] * lp_diff_norm(fm, f.at(j), f.p) * w;
            if v > holder_sup {
                holder_sup = v;
            }
        }
    }
    let limit_defect = if n > 1 { f.defect_at(1) } else { 0.0 };
    HolderReport {
        weight_sup,
        holder_sup,
        limit_defect,
        norm: weight_sup + holder_sup,
        resolution: n,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipReport {
    pub member: bool,
    /// t^{1−β}f(t) at the smallest node (estimate of the limit).
    pub limit_value: Vec<f64>,
    /// |g(t_{2^{j+1}}) − g(t_{2^j})| with g = t^{1−β}f, j = 0..3.
    pub cauchy_steps: Vec<f64>,
    pub cauchy_ok: bool,
    pub holder_finite: bool,
    /// Limit-condition sup at windows t_2, t_4, t_8, t_16.
    pub defect_trend: Vec<f64>,
    pub trend_ok: bool,
    pub report: HolderReport,
}

/// `small` belongs to a smaller window than `large`.
fn not_growing(small: f64, large: f64, tol: f64) -> bool {
    small <= large * (1.0 + tol) + tol
}

pub fn membership_check(f: &WeightedHolderSample, tolerance: f64) -> MembershipReport {
    let report = fbeta_sigma_norm(f);
    let wexp = 1.0 - f.beta;
    let g = |k: usize| -> Vec<f64> { f.at(k).iter().map(|v| v * f.times[k].powf(wexp)).collect() };
    let windows: Vec<usize> = (0..5).map(|j| (1usize << j) - 1).filter(|k| *k < f.len()).collect();
    let cauchy_steps: Vec<f64> = windows.windows(2).map(|w| lp_diff_norm(&g(w[1]), &g(w[0]), f.p)).collect();
    let cauchy_ok = cauchy_steps.windows(2).all(|w| not_growing(w[0], w[1], tolerance));
    let defect_trend: Vec<f64> = windows.iter().skip(1).map(|&k| f.defect_at(k)).collect();
    let trend_ok = defect_trend.windows(2).all(|w| not_growing(w[0], w[1], tolerance));
    let holder_finite = report.holder_sup.is_finite() && report.weight_sup.is_finite();
    MembershipReport {
        member: cauchy_ok && holder_finite && trend_ok,
        limit_value: g(0),
        cauchy_steps,
        cauchy_ok,
        holder_finite,
        defect_trend,
        trend_ok,
        report,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementReport {
    pub resolutions: Vec<usize>,
    pub holder_sups: Vec<f64>,
    /// Growth factors between successive refinements.
    pub ratios: Vec<f64>,
    pub diverges: bool,
}

/// Holder seminorm along a sequence of grid doublings. A jump of size J
/// between neighbouring nodes forces growth by 2^σ per doubling, whereas a
/// member of the space has ratios tending to 1. Divergence is declared when
/// every ratio stays above 2^{σ/2}.
pub fn refinement_divergence(samples: &[WeightedHolderSample]) -> Result<RefinementReport> {
    if samples.len() < 2 {
        return invalid("refinement study needs at least two samples");
    }
    let sigma = samples[0].sigma;
    let sups: Vec<f64> = samples.iter().map(|s| fbeta_sigma_norm(s).holder_sup).collect();
    let ratios: Vec<f64> = sups.windows(2).map(|w| w[1] / w[0]).collect();
    let threshold = 2f64.powf(sigma / 2.0);
    Ok(RefinementReport {
        resolutions: samples.iter().map(|s| s.len()).collect(),
        diverges: ratios.iter().all(|r| *r >= threshold),
        holder_sups: sups,
        ratios,
    })
}

/// sup over node pairs of |f(t) − f(s)|/(t − s)^σ.
pub fn holder_norm(times: &[f64], values: &[VectorState], sigma: f64, p: f64) -> Result<f64> {
    if times.len() < 2 || values.len() != times.len() {
        return invalid("Hölder seminorm needs at least two nodes");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("nodes must be strictly increasing");
    }
    let mut best: f64 = 0.0;
    for m in 1..times.len() {
        for j in 0..m {
            let v = lp_diff_norm(values[m].coords(), values[j].coords(), p) / (times[m] - times[j]).powf(sigma);
            best = best.max(v);
        }
    }
    Ok(best)
}

/// Streaming accumulator of squared increments Ê|ζ(t+h) − ζ(t)|² over the
/// interior window t, t+h ∈ [T/4, 3T/4].
#[derive(Clone, Debug)]
pub struct IncrementStats {
    pub grid: TimeGrid,
    /// Lags in grid steps.
    pub lags: Vec<usize>,
    pub p: f64,
    lo: usize,
    hi: usize,
    acc: MomentAccumulator,
}

impl IncrementStats {
    pub fn new(grid: TimeGrid, lags: Vec<usize>, p: f64) -> Result<Self> {
        if lags.len() < 2 {
            return invalid("Kolmogorov regression needs at least two lags");
        }
        let lo = grid.index_at(grid.t_end / 4.0);
        let hi = grid.index_at(3.0 * grid.t_end / 4.0);
        if lags.iter().any(|&h| h == 0 || lo + h > hi) {
            return invalid("every lag must be positive and fit inside [T/4, 3T/4]");
        }
        let n = lags.len();
        Ok(IncrementStats {
            grid,
            lags,
            p,
            lo,
            hi,
            acc: MomentAccumulator::new(n),
        })
    }

    /// Dyadic lags T·2^{−j}, j ∈ [j_min, j_max], converted to grid steps.
    pub fn dyadic_lags(grid: &TimeGrid, j_min: u32, j_max: u32) -> Vec<usize> {
        (j_min..=j_max)
            .map(|j| ((grid.steps as f64) / (1u64 << j) as f64).round() as usize)
            .filter(|h| *h >= 1)
            .collect()
    }

    /// Adds one path (node-major, d values per node).
    pub fn add_path(&mut self, data: &[f64], d: usize) {
        let mut row = Vec::with_capacity(self.lags.len());
        for &h in &self.lags {
            let mut s = 0.0;
            let mut c = 0usize;
            for k in self.lo..=(self.hi - h) {
                let a = &data[k * d..(k + 1) * d];
                let b = &data[(k + h) * d..(k + h + 1) * d];
                s += lp_diff_norm(b, a, self.p).powi(2);
                c += 1;
            }
            row.push(s / c as f64);
        }
        self.acc.push(&row);
    }

    pub fn merge(&mut self, other: &IncrementStats) {
        self.acc.merge(&other.acc);
    }

    pub fn paths(&self) -> u64 {
        self.acc.count
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KolmogorovFit {
    pub exponent: f64,
    pub exponent_se: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub lag_times: Vec<f64>,
    pub mean_sq_increments: Vec<f64>,
    pub paths: u64,
}

/// Regresses log Ê|Δζ|² on log h and returns slope/2.
pub fn kolmogorov_exponent(stats: &IncrementStats) -> Result<KolmogorovFit> {
    if stats.paths() < 1000 {
        return invalid(format!("ensemble of {} paths is below the minimum of 1000", stats.paths()));
    }
    let dt = stats.grid.dt();
    let x: Vec<f64> = stats.lags.iter().map(|&h| (h as f64 * dt).ln()).collect();
    let est = stats.acc.estimates();
    let y: Vec<f64> = est.iter().map(|e| e.mean.ln()).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return invalid("zero or non-finite increment moments; exponent undefined");
    }
    let fit = linear_fit(&x, &y);
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let mc_var: f64 = x
        .iter()
        .zip(&est)
        .map(|(xi, e)| ((xi - mx) / sxx).powi(2) * (e.se / e.mean).powi(2))
        .sum();
    let slope_se = (fit.slope_se.powi(2) + mc_var).sqrt();
    Ok(KolmogorovFit {
        exponent: fit.slope / 2.0,
        exponent_se: slope_se / 2.0,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        lag_times: stats.lags.iter().map(|&h| h as f64 * dt).collect(),
        mean_sq_increments: est.iter().map(|e| e.mean).collect(),
        paths: stats.paths(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn singular_weight_sup_is_one() {
        let f = WeightedHolderSample::from_fn(&grid(256), 1, 0.5, 0.25, 2.0, |t| vec![t.powf(-0.5)]).unwrap();
        let r = fbeta_sigma_norm(&f);
        assert!((r.weight_sup - 1.0).abs() < 1e-12);
        let m = membership_check(&f, 1e-9);
        assert!(m.member);
        assert!((m.limit_value[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_function() {
        let f = WeightedHolderSample::from_fn(&grid(64), 2, 0.5, 0.25, 2.0, |_| vec![0.0, 0.0]).unwrap();
        assert_eq!(fbeta_sigma_norm(&f).norm, 0.0);
    }

    #[test]
    fn rejects_zero_node() {
        let v = vec![VectorState::zeros(1), VectorState::zeros(1)];
        assert!(WeightedHolderSample::new(vec![0.0, 1.0], &v, 0.5, 0.25, 2.0).is_err());
        assert!(WeightedHolderSample::new(vec![0.0, 1.0], &v, 1.0, 0.25, 2.0).is_ok());
    }

    #[test]
    fn seminorm_examples() {
        let ts: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let c: Vec<VectorState> = ts.iter().map(|_| VectorState::new(vec![2.0]).unwrap()).collect();
        assert_eq!(holder_norm(&ts, &c, 0.5, 2.0).unwrap(), 0.0);
        let id: Vec<VectorState> = ts.iter().map(|t| VectorState::new(vec![*t]).unwrap()).collect();
        assert!((holder_norm(&ts, &id, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let sq: Vec<VectorState> = ts.iter().map(|t| VectorState::new(vec![t.sqrt()]).unwrap()).collect();
        assert!((holder_norm(&ts, &sq, 0.5, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(holder_norm(&ts[..1], &sq[..1], 0.5, 2.0).is_err());
    }

    #[test]
    fn too_few_lags() {
        assert!(IncrementStats::new(grid(64), vec![1], 2.0).is_err());
    }
}
