//! Time grids, seeded Brownian paths, step-process stochastic integrals and
//! stochastic convolutions ∫₀^t S(t−s)Φ(s) dw_s.
//!
//! On dyadic grids (N = 2^L) paths are built by Brownian-bridge refinement:
//! w(T) first, then midpoints level by level, each level drawing from the
//! same keystream in a fixed order. A grid at level L therefore reproduces
//! every coarser level bitwise at the shared nodes. Other grids draw direct
//! increments.

use crate::ensemble::Ensemble;
use crate::error::{invalid, Result, SpdeError};
use crate::rng::{GaussStream, StreamTag};
use crate::sectorial::SpectralOperator;
use crate::state_space::{lp_norm, TypeConstants, VectorState};
use crate::stats::{Estimate, RatioAccumulator};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid(format!("horizon T = {t_end} must be positive"));
        }
        if steps == 0 {
            return invalid("grid needs at least one step");
        }
        Ok(TimeGrid { t_end, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_end
        } else {
            k as f64 * self.t_end / self.steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// L with N = 2^L, if the grid is dyadic.
    pub fn dyadic_level(&self) -> Option<u32> {
        self.steps.is_power_of_two().then(|| self.steps.trailing_zeros())
    }

    pub fn refine(&self) -> TimeGrid {
        TimeGrid {
            t_end: self.t_end,
            steps: self.steps * 2,
        }
    }

    /// Index of the last node not exceeding t.
    pub fn index_at(&self, t: f64) -> usize {
        ((t / self.dt()) + 1e-9).floor().min(self.steps as f64).max(0.0) as usize
    }
}

#[derive(Clone, Debug)]
pub struct BrownianPath {
    pub grid: TimeGrid,
    pub seed: u64,
    pub path_index: u64,
    /// w(t_k), k = 0..N.
    values: Vec<f64>,
}

impl BrownianPath {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn increment(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn sample_brownian(grid: &TimeGrid, seed: u64, path_index: u64) -> BrownianPath {
    let n = grid.steps;
    let mut w = vec![0.0; n + 1];
    match grid.dyadic_level() {
        Some(levels) => {
            let mut g = GaussStream::new(seed, path_index, StreamTag::Bridge);
            let t = grid.t_end;
            w[n] = t.sqrt() * g.gaussian();
            for l in 1..=levels {
                let stride = n >> l;
                let sd = (t / (1u64 << (l + 1)) as f64).sqrt();
                for j in 0..(1usize << (l - 1)) {
                    let m = (2 * j + 1) * stride;
                    w[m] = 0.5 * (w[m - stride] + w[m + stride]) + sd * g.gaussian();
                }
            }
        }
        None => {
            let mut g = GaussStream::new(seed, path_index, StreamTag::Increments);
            let sd = grid.dt().sqrt();
            for k in 0..n {
                w[k + 1] = w[k] + sd * g.gaussian();
            }
        }
    }
    BrownianPath {
        grid: *grid,
        seed,
        path_index,
        values: w,
    }
}

/// A grid process with values X(t_0), …, X(t_N) stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedProcess {
    pub grid: TimeGrid,
    pub d: usize,
    data: Vec<f64>,
}

impl AdaptedProcess {
    pub fn zeros(grid: TimeGrid, d: usize) -> Self {
        AdaptedProcess {
            grid,
            d,
            data: vec![0.0; (grid.steps + 1) * d],
        }
    }

    pub fn from_flat(grid: TimeGrid, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (grid.steps + 1) * d {
            return Err(SpdeError::DimensionMismatch {
                expected: (grid.steps + 1) * d,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SpdeError::NonFinite("process values".into()));
        }
        Ok(AdaptedProcess { grid, d, data })
    }

    pub fn from_states(grid: TimeGrid, states: &[VectorState]) -> Result<Self> {
        let d = states.first().map(|s| s.dim()).unwrap_or(0);
        let mut data = Vec::with_capacity(states.len() * d);
        for s in states {
            if s.dim() != d {
                return Err(SpdeError::DimensionMismatch { expected: d, got: s.dim() });
            }
            data.extend_from_slice(s.coords());
        }
        AdaptedProcess::from_flat(grid, d, data)
    }

    /// Scalar process (d = 1) from node values.
    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        AdaptedProcess::from_flat(grid, 1, values)
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn at_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn states(&self) -> Vec<VectorState> {
        (0..=self.grid.steps)
            .map(|k| VectorState::new(self.at(k).to_vec()).expect("finite"))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.grid.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Σ_k f(t_k)(w(t_{k+1}) − w(t_k)).
pub fn integrate_step(f: &AdaptedProcess, w: &BrownianPath) -> Result<VectorState> {
    if f.grid != w.grid {
        return Err(SpdeError::GridMismatch);
    }
    let mut out = vec![0.0; f.d];
    for k in 0..f.grid.steps {
        let dw = w.increment(k);
        for (o, v) in out.iter_mut().zip(f.at(k)) {
            *o += v * dw;
        }
    }
    VectorState::new(out)
}

/// Partial sums I(t_k), k = 0..N; a discrete martingale.
pub fn integral_process(f: &AdaptedProcess, w: &BrownianPath) -> Result<AdaptedProcess> {
    if f.grid != w.grid {
        return Err(SpdeError::GridMismatch);
    }
    let mut out = AdaptedProcess::zeros(f.grid, f.d);
    for k in 0..f.grid.steps {
        let dw = w.increment(k);
        for i in 0..f.d {
            let v = out.at(k)[i] + f.at(k)[i] * dw;
            out.at_mut(k + 1)[i] = v;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Increment,
    ExactGauss,
}

/// Integrand of a stochastic convolution.
#[derive(Clone, Copy, Debug)]
pub enum Integrand<'a> {
    /// Adapted random process, evaluated at left nodes.
    Adapted(&'a AdaptedProcess),
    /// Deterministic step function: value on [t_k, t_{k+1}) stored at node k.
    Deterministic(&'a AdaptedProcess),
}

/// Per-mode step factors e^{−λ_iΔ} and sqrt((1 − e^{−2λ_iΔ})/(2λ_i)).
#[derive(Clone, Debug)]
pub(crate) struct StepFactors {
    pub decay: Vec<f64>,
    pub exact_sd: Vec<f64>,
}

impl StepFactors {
    pub fn new(a: &SpectralOperator, dt: f64) -> Self {
        StepFactors {
            decay: a.semigroup_factors(dt),
            exact_sd: a.eigenvalues().iter().map(|&l| (-(-2.0 * l * dt).exp_m1() / (2.0 * l)).sqrt()).collect(),
        }
    }
}

pub fn stochastic_convolution(a: &SpectralOperator, phi: Integrand<'_>, w: &BrownianPath, mode: NoiseMode) -> Result<AdaptedProcess> {
    let f = match (phi, mode) {
        (Integrand::Adapted(_), NoiseMode::ExactGauss) => {
            return Err(SpdeError::ModeMismatch("exact_gauss requires a deterministic integrand".into()))
        }
        (Integrand::Adapted(f), _) | (Integrand::Deterministic(f), _) => f,
    };
    if f.grid != w.grid {
        return Err(SpdeError::GridMismatch);
    }
    if f.d != a.dim() {
        return Err(SpdeError::DimensionMismatch { expected: a.dim(), got: f.d });
    }
    let grid = f.grid;
    let sf = StepFactors::new(a, grid.dt());
    let mut y = AdaptedProcess::zeros(grid, f.d);
    match mode {
        NoiseMode::Increment => {
            for k in 0..grid.steps {
                let dw = w.increment(k);
                for i in 0..f.d {
                    let v = sf.decay[i] * (y.at(k)[i] + f.at(k)[i] * dw);
                    y.at_mut(k + 1)[i] = v;
                }
            }
        }
        NoiseMode::ExactGauss => {
            let mut g = GaussStream::new(w.seed, w.path_index, StreamTag::ExactConvolution);
            for k in 0..grid.steps {
                for i in 0..f.d {
                    let z = g.gaussian();
                    let v = sf.decay[i] * y.at(k)[i] + f.at(k)[i] * sf.exact_sd[i] * z;
                    y.at_mut(k + 1)[i] = v;
                }
            }
        }
    }
    Ok(y)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegralInequalityReport {
    pub p: f64,
    /// Ê|I_T|² against c(E)·Ê∫|f|² ds.
    pub second_moment: Estimate,
    pub second_moment_bound: f64,
    pub second_moment_ratio: Estimate,
    /// Ê sup_t |I_t|^p.
    pub sup_moment: f64,
    /// (p/(p−1))^p c_p Ê(∫|f|² ds)^{p/2}.
    pub sup_moment_bound: f64,
    pub ratio: Estimate,
    pub pass: bool,
}

/// Checks E|I_T|² ≤ c(E)E∫|f|² and E sup|I|^p ≤ (p/(p−1))^p c_p E(∫|f|²)^{p/2}
/// over an ensemble; `make_f` builds the adapted integrand from each path.
pub fn integral_inequality_report<F>(
    ensemble: &Ensemble,
    grid: &TimeGrid,
    make_f: F,
    constants: &TypeConstants,
    p: f64,
) -> Result<IntegralInequalityReport>
where
    F: Fn(&BrownianPath) -> AdaptedProcess + Sync + Send,
{
    if !(p > 1.0) {
        return invalid("p must exceed 1");
    }
    #[derive(Default)]
    struct Acc {
        second: RatioAccumulator,
        sup: RatioAccumulator,
    }
    let dt = grid.dt();
    let acc = ensemble.try_map_reduce(
        Acc::default,
        |acc, i| {
            let w = sample_brownian(grid, ensemble.seed, i);
            let f = make_f(&w);
            let ip = integral_process(&f, &w)?;
            let mut sup: f64 = 0.0;
            for k in 0..=grid.steps {
                sup = sup.max(lp_norm(ip.at(k), p));
            }
            let qv: f64 = (0..grid.steps).map(|k| lp_norm(f.at(k), p).powi(2) * dt).sum();
            let end = lp_norm(ip.at(grid.steps), p).powi(2);
            acc.second.push(end, qv);
            acc.sup.push(sup.powf(p), qv.powf(p / 2.0));
            Ok(())
        },
        |a, b| {
            a.second.merge(&b.second);
            a.sup.merge(&b.sup);
        },
    )?;
    let sup_factor = (p / (p - 1.0)).powf(p) * constants.c_p;
    let r2 = acc.second.ratio();
    let rp = acc.sup.ratio();
    let ratio = Estimate {
        mean: rp.mean / sup_factor,
        se: rp.se / sup_factor,
    };
    let second_ratio = Estimate {
        mean: r2.mean / constants.c,
        se: r2.se / constants.c,
    };
    Ok(IntegralInequalityReport {
        p,
        second_moment: Estimate {
            mean: acc.second.numerator(),
            se: 0.0,
        },
        second_moment_bound: constants.c * acc.second.denominator(),
        second_moment_ratio: second_ratio,
        sup_moment: acc.sup.numerator(),
        sup_moment_bound: sup_factor * acc.sup.denominator(),
        pass: ratio.mean <= 1.0 + 3.0 * ratio.se && second_ratio.mean <= 1.0 + 3.0 * second_ratio.se,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero_and_reproducible() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let a = sample_brownian(&g, 9, 2);
        let b = sample_brownian(&g, 9, 2);
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn refinement_consistent() {
        let coarse = sample_brownian(&TimeGrid::new(1.0, 16).unwrap(), 5, 11);
        let fine = sample_brownian(&TimeGrid::new(1.0, 128).unwrap(), 5, 11);
        for k in 0..=16 {
            assert_eq!(coarse.values()[k].to_bits(), fine.values()[8 * k].to_bits());
        }
    }

    #[test]
    fn non_dyadic_grid() {
        let g = TimeGrid::new(2.0, 30).unwrap();
        let w = sample_brownian(&g, 1, 0);
        assert_eq!(w.values().len(), 31);
        assert_eq!(g.node(30), 2.0);
    }

    #[test]
    fn zero_integrand() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let w = sample_brownian(&g, 1, 0);
        let f = AdaptedProcess::zeros(g, 2);
        assert_eq!(integrate_step(&f, &w).unwrap(), VectorState::zeros(2));
        let a = SpectralOperator::new(vec![1.0, 2.0]).unwrap();
        for mode in [NoiseMode::Increment, NoiseMode::ExactGauss] {
            let y = stochastic_convolution(&a, Integrand::Deterministic(&f), &w, mode).unwrap();
            assert!(y.flat().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn constant_integrand_gives_endpoint() {
        let g = TimeGrid::new(1.0, 32).unwrap();
        let w = sample_brownian(&g, 3, 7);
        let f = AdaptedProcess::scalar(g, vec![1.0; 33]).unwrap();
        let i = integrate_step(&f, &w).unwrap();
        assert!((i.coords()[0] - w.values()[32]).abs() < 1e-12);
    }

    #[test]
    fn exact_mode_rejects_adapted() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let w = sample_brownian(&g, 3, 7);
        let f = AdaptedProcess::scalar(g, vec![1.0; 9]).unwrap();
        let a = SpectralOperator::new(vec![1.0]).unwrap();
        assert!(matches!(
            stochastic_convolution(&a, Integrand::Adapted(&f), &w, NoiseMode::ExactGauss),
            Err(SpdeError::ModeMismatch(_))
        ));
    }

    #[test]
    fn grid_mismatch() {
        let w = sample_brownian(&TimeGrid::new(1.0, 8).unwrap(), 3, 7);
        let f = AdaptedProcess::scalar(TimeGrid::new(1.0, 16).unwrap(), vec![1.0; 17]).unwrap();
        assert_eq!(integrate_step(&f, &w).unwrap_err(), SpdeError::GridMismatch);
    }
}
