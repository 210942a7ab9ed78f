//! Picard solver for dX + AX dt = F(X) dt + G(X) dw with state-dependent
//! coefficients, the truncation-based local solver, and the dependence and
//! time-increment experiments.
//!
//! Discretization is exponential Euler: on [t_k, t_{k+1}] the semigroup is
//! applied exactly and the coefficients are frozen at t_k. The discrete
//! Picard map on a window [t_a, t_b] is
//!
//! ```text
//! Z_a = X_a,   Z_{k+1} = S(Δ)(Z_k + F(Y_k)Δ + G(Y_k)Δw_k)
//! ```
//!
//! which unrolls to the left-point quadrature of S(t)ξ + Q₁(Y) + Q₂(Y). Node
//! k of the m-th iterate is final once m ≥ k − a + 1, so with `tol = 0` each
//! window ends on the exact discrete fixed point and the result does not
//! depend on how the horizon is cut into windows.
//!
//! Constants (M_T = 1 for a positive diagonal A, c = c(E), c_p = c_p(E)):
//!
//! ```text
//! contraction:  c₂ M √T̄ (√T̄ + p c_p^{1/p}/(p−1)) = ρ
//! moments:      K = (3c₁M)^p (2T)^{p−1} + (3c₁pM/(p−1))^p c_p T^{(p−2)/2} 2^{p−1}
//!               α = max(3^p M^p, K T) e^{K T}
//! dependence:   C₁ = 3M² exp(3(T + c) c_n² M² T)
//! increments:   C₂ = max(3, 6 c_n² M² (T + c)(1 + α₂)),  α₂ = α at p = 2
//! truncation:   Lip(F_n) ≤ c_{2n} + c̄_{2n}(2 + 1/n),  growth(F_n) ≤ c̄_{2n}
//! ```

use crate::brownian::{sample_brownian, AdaptedProcess, NoiseMode, StepFactors, TimeGrid};
use crate::ensemble::Ensemble;
use crate::error::{invalid, Result, SpdeError};
use crate::initial::InitialLaw;
use crate::rng::{GaussStream, StreamTag};
use crate::sectorial::SpectralOperator;
use crate::state_space::{lp_diff_norm, lp_norm, powq, NormSpec, TypeConstants};
use crate::stats::{Estimate, MomentAccumulator};
use serde::{Deserialize, Serialize};

/// Coordinatewise coefficient families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientFamily {
    Zero,
    /// The constant vector (v, …, v).
    Constant {
        value: f64,
    },
    /// rate · x.
    Linear {
        rate: f64,
    },
    /// amplitude · sin(x_i) + offset.
    Sine {
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
    /// coef · x_i², locally Lipschitz only.
    Square {
        coef: f64,
    },
}

/// Growth constant c₁ (|F(x)| ≤ c₁(1 + |x|)) and Lipschitz constant c₂.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    pub growth: f64,
    pub lipschitz: f64,
}

impl std::ops::Add for DeclaredConstants {
    type Output = DeclaredConstants;
    fn add(self, o: DeclaredConstants) -> DeclaredConstants {
        DeclaredConstants {
            growth: self.growth + o.growth,
            lipschitz: self.lipschitz + o.lipschitz,
        }
    }
}

impl CoefficientFamily {
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            CoefficientFamily::Zero => out.fill(0.0),
            CoefficientFamily::Constant { value } => out.fill(*value),
            CoefficientFamily::Linear { rate } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = rate * v;
                }
            }
            CoefficientFamily::Sine { amplitude, offset } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = amplitude * v.sin() + offset;
                }
            }
            CoefficientFamily::Square { coef } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = coef * v * v;
                }
            }
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, CoefficientFamily::Square { .. })
    }

    fn global_constants(&self, d: usize, p: f64) -> Option<DeclaredConstants> {
        let root = (d as f64).powf(1.0 / p);
        Some(match self {
            CoefficientFamily::Zero => DeclaredConstants { growth: 0.0, lipschitz: 0.0 },
            CoefficientFamily::Constant { value } => DeclaredConstants {
                growth: value.abs() * root,
                lipschitz: 0.0,
            },
            CoefficientFamily::Linear { rate } => DeclaredConstants {
                growth: rate.abs(),
                lipschitz: rate.abs(),
            },
            CoefficientFamily::Sine { amplitude, offset } => DeclaredConstants {
                growth: amplitude.abs().max(offset.abs() * root),
                lipschitz: amplitude.abs(),
            },
            CoefficientFamily::Square { .. } => return None,
        })
    }

    /// c̄_n (growth) and c_n (Lipschitz) on the ball |x| ≤ n.
    fn local_constants(&self, n: f64, d: usize, p: f64) -> DeclaredConstants {
        match self {
            CoefficientFamily::Square { coef } => DeclaredConstants {
                growth: coef.abs() * n,
                lipschitz: 2.0 * coef.abs() * n,
            },
            other => other.global_constants(d, p).expect("global family"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDescriptor {
    #[serde(flatten)]
    pub family: CoefficientFamily,
    /// Truncation level n: the family times (2 − |x|/n) on n < |x| ≤ 2n and
    /// zero beyond 2n.
    #[serde(default)]
    pub truncation: Option<f64>,
}

impl From<CoefficientFamily> for CoefficientDescriptor {
    fn from(family: CoefficientFamily) -> Self {
        CoefficientDescriptor { family, truncation: None }
    }
}

/// Cut-off factor of the truncation at level n.
pub fn truncation_factor(norm: f64, n: f64) -> f64 {
    if norm <= n {
        1.0
    } else if norm <= 2.0 * n {
        2.0 - norm / n
    } else {
        0.0
    }
}

impl CoefficientDescriptor {
    /// Writes the coefficient at x into `out`; `norm` is |x|_p.
    pub fn eval_into(&self, x: &[f64], norm: f64, out: &mut [f64]) {
        self.family.eval_into(x, out);
        if let Some(n) = self.truncation {
            let f = truncation_factor(norm, n);
            if f != 1.0 {
                for o in out.iter_mut() {
                    *o *= f;
                }
            }
        }
    }

    pub fn state_independent(&self) -> bool {
        self.truncation.is_none() && matches!(self.family, CoefficientFamily::Zero | CoefficientFamily::Constant { .. })
    }

    pub fn is_local(&self) -> bool {
        self.truncation.is_none() && self.family.is_local()
    }

    /// Global constants; truncated descriptors use the derived bounds.
    pub fn global_constants(&self, d: usize, p: f64) -> Option<DeclaredConstants> {
        match self.truncation {
            None => self.family.global_constants(d, p),
            Some(n) => {
                let c = self.family.local_constants(2.0 * n, d, p);
                Some(DeclaredConstants {
                    growth: c.growth,
                    lipschitz: c.lipschitz + c.growth * (2.0 + 1.0 / n),
                })
            }
        }
    }

    pub fn local_constants(&self, n: f64, d: usize, p: f64) -> DeclaredConstants {
        self.family.local_constants(n, d, p)
    }
}

/// (F_n, G_n) at level n.
pub fn truncate_coefficients(f: &CoefficientDescriptor, g: &CoefficientDescriptor, n: f64) -> Result<(CoefficientDescriptor, CoefficientDescriptor)> {
    if !(n > 0.0) || !n.is_finite() {
        return invalid("truncation level must be positive");
    }
    let cut = |c: &CoefficientDescriptor| CoefficientDescriptor {
        family: c.family.clone(),
        truncation: Some(n),
    };
    Ok((cut(f), cut(g)))
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub operator: SpectralOperator,
    pub f: CoefficientDescriptor,
    pub g: CoefficientDescriptor,
    pub initial: InitialLaw,
    pub t_end: f64,
    pub norm: NormSpec,
    pub constants: TypeConstants,
    /// sup_{t ≤ T} |S(t)|; 1 for a positive diagonal operator.
    pub m_t: f64,
}

impl ProblemSpec {
    pub fn new(
        operator: SpectralOperator,
        f: CoefficientDescriptor,
        g: CoefficientDescriptor,
        initial: InitialLaw,
        t_end: f64,
        p: f64,
    ) -> Result<Self> {
        if !(p >= 2.0) {
            return invalid("moment order p must be at least 2");
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid("horizon T must be positive");
        }
        let norm = NormSpec::new(p, operator.dim())?;
        initial.validate(operator.dim())?;
        Ok(ProblemSpec {
            constants: TypeConstants::default_for(&norm),
            operator,
            f,
            g,
            initial,
            t_end,
            norm,
            m_t: 1.0,
        })
    }

    pub fn d(&self) -> usize {
        self.norm.d
    }

    pub fn p(&self) -> f64 {
        self.norm.p
    }

    /// Combined c₁, c₂ of F and G, if both are globally Lipschitz.
    pub fn global_constants(&self) -> Option<DeclaredConstants> {
        let (d, p) = (self.d(), self.p());
        Some(self.f.global_constants(d, p)? + self.g.global_constants(d, p)?)
    }

    /// Combined c̄_n, c_n of F and G on the ball of radius n.
    pub fn local_constants(&self, n: f64) -> DeclaredConstants {
        let (d, p) = (self.d(), self.p());
        self.f.local_constants(n, d, p) + self.g.local_constants(n, d, p)
    }

    pub fn truncated(&self, n: f64) -> Result<ProblemSpec> {
        let (f, g) = truncate_coefficients(&self.f, &self.g, n)?;
        Ok(ProblemSpec { f, g, ..self.clone() })
    }

    /// Horizon of the contraction condition at safety ρ, capped at T.
    pub fn horizon(&self, rho: f64) -> Result<f64> {
        let c = self
            .global_constants()
            .ok_or_else(|| SpdeError::InvalidParameter("coefficients are only locally Lipschitz; truncate first".into()))?;
        Ok(contraction_horizon(c.lipschitz, self.m_t, self.p(), self.constants.c_p, rho)?.min(self.t_end))
    }
}

/// Largest T̄ with c₂M√T̄(√T̄ + pc_p^{1/p}/(p−1)) ≤ ρ. Infinite when c₂ = 0.
pub fn contraction_horizon(c2: f64, m_t: f64, p: f64, c_p: f64, rho: f64) -> Result<f64> {
    if !(c2 >= 0.0) || !(m_t > 0.0) || !(p > 1.0) || !(c_p > 0.0) {
        return invalid("contraction_horizon needs c₂ ≥ 0, M > 0, p > 1, c_p > 0");
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return invalid("safety factor ρ must lie in (0, 1]");
    }
    if c2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let k = p * c_p.powf(1.0 / p) / (p - 1.0);
    let q = rho / (c2 * m_t);
    let root = 2.0 * q / (k + (k * k + 4.0 * q).sqrt());
    Ok(root * root)
}

/// Contraction factor c₂M√T̄(√T̄ + pc_p^{1/p}/(p−1)) of a window of length t.
pub fn contraction_factor(c2: f64, m_t: f64, p: f64, c_p: f64, t: f64) -> f64 {
    let k = p * c_p.powf(1.0 / p) / (p - 1.0);
    c2 * m_t * t.sqrt() * (t.sqrt() + k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialIterate {
    /// X_0 = 0 after the initial node.
    Zero,
    /// X_0(t) = S(t − t_a)X(t_a).
    #[default]
    Semigroup,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PicardOptions {
    pub max_iter: usize,
    /// Stop when sup_k |Z_k − Y_k| ≤ tol; 0 demands exact reproduction.
    pub tol: f64,
    pub safety: f64,
    pub mode: NoiseMode,
    pub initial_iterate: InitialIterate,
    /// Iterations whose distances are kept for ensemble diagnostics.
    pub trace_iters: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            max_iter: 200,
            tol: 0.0,
            safety: 0.5,
            mode: NoiseMode::Increment,
            initial_iterate: InitialIterate::Semigroup,
            trace_iters: 8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WindowDiagnostics {
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    /// sup_k |X_{m+1}(t_k) − X_m(t_k)|_p^p per iteration.
    pub distances: Vec<f64>,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct PicardPath {
    pub process: AdaptedProcess,
    pub windows: Vec<WindowDiagnostics>,
    pub horizon: f64,
    pub window_steps: usize,
    pub converged: bool,
    /// Per window, per traced iteration, per window node: |ΔX|_p^p.
    pub(crate) trace: Vec<Vec<Vec<f64>>>,
}

/// Noise of one path in the form the stepping needs.
struct PathNoise {
    dw: Vec<f64>,
    /// N·d standard Gaussians for the exact-convolution mode.
    exact: Option<Vec<f64>>,
}

impl PathNoise {
    fn new(grid: &TimeGrid, seed: u64, path_index: u64, d: usize, mode: NoiseMode) -> Self {
        match mode {
            NoiseMode::Increment => PathNoise {
                dw: sample_brownian(grid, seed, path_index).increments(),
                exact: None,
            },
            NoiseMode::ExactGauss => {
                let mut g = GaussStream::new(seed, path_index, StreamTag::ExactConvolution);
                PathNoise {
                    dw: Vec::new(),
                    exact: Some((0..grid.steps * d).map(|_| g.gaussian()).collect()),
                }
            }
        }
    }
}

struct Stepper<'a> {
    problem: &'a ProblemSpec,
    sf: StepFactors,
    dt: f64,
    d: usize,
    p: f64,
    fbuf: Vec<f64>,
    gbuf: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(problem: &'a ProblemSpec, grid: &TimeGrid) -> Self {
        let d = problem.d();
        Stepper {
            problem,
            sf: StepFactors::new(&problem.operator, grid.dt()),
            dt: grid.dt(),
            d,
            p: problem.p(),
            fbuf: vec![0.0; d],
            gbuf: vec![0.0; d],
        }
    }

    /// next = S(Δ)(z + F(y)Δ + G(y)Δw_k), or the exact-convolution variant.
    #[inline]
    fn step(&mut self, k: usize, z: &[f64], y: &[f64], noise: &PathNoise, next: &mut [f64]) {
        let ny = lp_norm(y, self.p);
        self.problem.f.eval_into(y, ny, &mut self.fbuf);
        self.problem.g.eval_into(y, ny, &mut self.gbuf);
        match &noise.exact {
            None => {
                let dw = noise.dw[k];
                for i in 0..self.d {
                    next[i] = self.sf.decay[i] * (z[i] + self.fbuf[i] * self.dt + self.gbuf[i] * dw);
                }
            }
            Some(zs) => {
                let zk = &zs[k * self.d..(k + 1) * self.d];
                for i in 0..self.d {
                    next[i] = self.sf.decay[i] * (z[i] + self.fbuf[i] * self.dt) + self.gbuf[i] * self.sf.exact_sd[i] * zk[i];
                }
            }
        }
    }
}

fn check_mode(problem: &ProblemSpec, mode: NoiseMode) -> Result<()> {
    if mode == NoiseMode::ExactGauss && !problem.g.state_independent() {
        return Err(SpdeError::ModeMismatch("exact_gauss needs a state-independent noise coefficient".into()));
    }
    Ok(())
}

fn window_steps(horizon: f64, dt: f64, steps: usize) -> usize {
    if horizon.is_infinite() {
        return steps;
    }
    ((horizon / dt * (1.0 + 1e-12)).floor() as usize).clamp(1, steps)
}

/// Picard iteration on consecutive windows of length ≤ T̄ for one path, with
/// ξ replaced by `xi`.
fn picard_with_initial(problem: &ProblemSpec, grid: &TimeGrid, seed: u64, path_index: u64, xi: &[f64], opts: &PicardOptions) -> Result<PicardPath> {
    check_mode(problem, opts.mode)?;
    let d = problem.d();
    let p = problem.p();
    let horizon = problem.horizon(opts.safety)?;
    let ws = window_steps(horizon, grid.dt(), grid.steps);
    let noise = PathNoise::new(grid, seed, path_index, d, opts.mode);
    let mut st = Stepper::new(problem, grid);
    let mut x = vec![0.0; (grid.steps + 1) * d];
    x[..d].copy_from_slice(xi);
    let mut windows = Vec::new();
    let mut trace = Vec::new();
    let mut all_converged = true;
    let sg_table: Vec<Vec<f64>> = match opts.initial_iterate {
        InitialIterate::Semigroup => (1..=ws).map(|j| problem.operator.semigroup_factors(j as f64 * grid.dt())).collect(),
        InitialIterate::Zero => Vec::new(),
    };
    // A map that ignores its argument is at its fixed point after one pass.
    let constant_map = problem.f.state_independent() && problem.g.state_independent();
    let mut a = 0;
    while a < grid.steps {
        let b = (a + ws).min(grid.steps);
        let len = b - a;
        let mut y = vec![0.0; (len + 1) * d];
        y[..d].copy_from_slice(&x[a * d..(a + 1) * d]);
        for (j, fac) in sg_table.iter().take(len).enumerate() {
            for i in 0..d {
                y[(j + 1) * d + i] = fac[i] * x[a * d + i];
            }
        }
        let mut z = y.clone();
        let mut distances = Vec::new();
        let mut wtrace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            for j in 0..len {
                let (head, tail) = z.split_at_mut((j + 1) * d);
                st.step(a + j, &head[j * d..], &y[j * d..(j + 1) * d], &noise, &mut tail[..d]);
            }
            let node_dist: Vec<f64> = (0..=len)
                .map(|j| lp_diff_norm(&z[j * d..(j + 1) * d], &y[j * d..(j + 1) * d], p))
                .collect();
            let sup = node_dist.iter().copied().fold(0.0, f64::max);
            if !sup.is_finite() {
                return Err(SpdeError::NonFinite(format!("Picard iterate on window starting at node {a}")));
            }
            distances.push(powq(sup, p));
            if wtrace.len() < opts.trace_iters {
                wtrace.push(node_dist.iter().map(|v| powq(*v, p)).collect::<Vec<f64>>());
            }
            std::mem::swap(&mut y, &mut z);
            if sup <= opts.tol || constant_map {
                converged = true;
                break;
            }
        }
        while wtrace.len() < opts.trace_iters {
            wtrace.push(vec![0.0; len + 1]);
        }
        all_converged &= converged;
        x[(a + 1) * d..(b + 1) * d].copy_from_slice(&y[d..]);
        windows.push(WindowDiagnostics {
            start: a,
            end: b,
            iterations,
            distances,
            converged,
        });
        trace.push(wtrace);
        a = b;
    }
    Ok(PicardPath {
        process: AdaptedProcess::from_flat(*grid, d, x)?,
        windows,
        horizon,
        window_steps: ws,
        converged: all_converged,
        trace,
    })
}

/// Solves one path with ξ drawn from the problem's initial law.
pub fn solve_global_picard(problem: &ProblemSpec, grid: &TimeGrid, seed: u64, path_index: u64, opts: &PicardOptions) -> Result<PicardPath> {
    check_grid(problem, grid)?;
    let xi = problem.initial.sample(seed, path_index);
    picard_with_initial(problem, grid, seed, path_index, &xi, opts)
}

fn check_grid(problem: &ProblemSpec, grid: &TimeGrid) -> Result<()> {
    if (grid.t_end - problem.t_end).abs() > 1e-12 * problem.t_end {
        return Err(SpdeError::GridMismatch);
    }
    Ok(())
}

/// Plain exponential-Euler march (the discrete fixed point), for reference.
pub fn forward_march(problem: &ProblemSpec, grid: &TimeGrid, seed: u64, path_index: u64, mode: NoiseMode) -> Result<AdaptedProcess> {
    check_mode(problem, mode)?;
    check_grid(problem, grid)?;
    let d = problem.d();
    let noise = PathNoise::new(grid, seed, path_index, d, mode);
    let mut st = Stepper::new(problem, grid);
    let mut x = vec![0.0; (grid.steps + 1) * d];
    x[..d].copy_from_slice(&problem.initial.sample(seed, path_index));
    for k in 0..grid.steps {
        let (head, tail) = x.split_at_mut((k + 1) * d);
        let cur = &head[k * d..];
        st.step(k, cur, cur, &noise, &mut tail[..d]);
    }
    AdaptedProcess::from_flat(*grid, d, x)
}

/// max_k |X(t_k) − [S(t_k)ξ + Σ_{j<k} S(t_k − t_j)(F(X_j)Δ + G(X_j)Δw_j)]|_p,
/// the mild identity recomputed from scratch with the same noise
/// (increment mode).
pub fn mild_residual(problem: &ProblemSpec, x: &AdaptedProcess, seed: u64, path_index: u64) -> Result<f64> {
    let grid = x.grid;
    let d = problem.d();
    let p = problem.p();
    let dt = grid.dt();
    let dw = sample_brownian(&grid, seed, path_index).increments();
    let lam = problem.operator.eigenvalues();
    let mut fx = vec![0.0; grid.steps * d];
    let mut gx = vec![0.0; grid.steps * d];
    for j in 0..grid.steps {
        let xj = x.at(j);
        let n = lp_norm(xj, p);
        problem.f.eval_into(xj, n, &mut fx[j * d..(j + 1) * d]);
        problem.g.eval_into(xj, n, &mut gx[j * d..(j + 1) * d]);
    }
    let mut worst: f64 = 0.0;
    let mut r = vec![0.0; d];
    for k in 0..=grid.steps {
        let tk = grid.node(k);
        for i in 0..d {
            let mut v = (-lam[i] * tk).exp() * x.at(0)[i];
            for j in 0..k {
                v += (-lam[i] * (tk - grid.node(j))).exp() * (fx[j * d + i] * dt + gx[j * d + i] * dw[j]);
            }
            r[i] = x.at(k)[i] - v;
        }
        worst = worst.max(lp_norm(&r, p));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PicardWindowTrace {
    pub start: usize,
    pub end: usize,
    /// sup_k Ê|X_{m+1} − X_m|^p for m = 0, 1, …
    pub distances: Vec<Estimate>,
    /// (D_{m+1}/D_m)^{1/p}: contraction ratio in the norm sup_t (E|·|^p)^{1/p}.
    pub ratios: Vec<Estimate>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSolution {
    pub grid: TimeGrid,
    pub paths: u64,
    pub horizon: f64,
    pub window_steps: usize,
    /// Moment orders in `moments`.
    pub orders: Vec<f64>,
    /// Ê|X(t_k)|^q per order q and node k.
    pub moments: Vec<Vec<Estimate>>,
    /// Ê|ξ|^q per order.
    pub initial_moments: Vec<Estimate>,
    pub picard: Vec<PicardWindowTrace>,
    pub max_iterations: usize,
    pub all_converged: bool,
}

impl EnsembleSolution {
    pub fn moment(&self, q: f64) -> Option<&[Estimate]> {
        self.orders.iter().position(|o| *o == q).map(|i| self.moments[i].as_slice())
    }

    pub fn initial_moment(&self, q: f64) -> Option<Estimate> {
        self.orders.iter().position(|o| *o == q).map(|i| self.initial_moments[i])
    }

    /// Largest norm ratio over windows for each traced iteration.
    pub fn worst_ratios(&self) -> Vec<Estimate> {
        let n = self.picard.iter().map(|w| w.ratios.len()).max().unwrap_or(0);
        (0..n)
            .map(|m| {
                self.picard.iter().filter_map(|w| w.ratios.get(m).copied()).fold(
                    Estimate {
                        mean: f64::NEG_INFINITY,
                        se: 0.0,
                    },
                    |a, b| if b.mean > a.mean { b } else { a },
                )
            })
            .collect()
    }
}

struct SolveAcc {
    moments: Vec<MomentAccumulator>,
    initial: MomentAccumulator,
    trace: Vec<Vec<MomentAccumulator>>,
    max_iter: usize,
    converged: bool,
}

/// Solves an ensemble and reduces moments and Picard distances.
pub fn solve_ensemble(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    ensemble: &Ensemble,
    extra_orders: &[f64],
    opts: &PicardOptions,
) -> Result<EnsembleSolution> {
    check_grid(problem, grid)?;
    let mut orders = vec![2.0, problem.p()];
    orders.extend_from_slice(extra_orders);
    orders.sort_by(|a, b| a.total_cmp(b));
    orders.dedup();
    let p = problem.p();
    let horizon = problem.horizon(opts.safety)?;
    let ws = window_steps(horizon, grid.dt(), grid.steps);
    let layout: Vec<(usize, usize)> = (0..grid.steps).step_by(ws).map(|a| (a, (a + ws).min(grid.steps))).collect();
    let nodes = grid.steps + 1;
    let init = || SolveAcc {
        moments: orders.iter().map(|_| MomentAccumulator::new(nodes)).collect(),
        initial: MomentAccumulator::new(orders.len()),
        trace: layout
            .iter()
            .map(|(a, b)| (0..opts.trace_iters).map(|_| MomentAccumulator::new(b - a + 1)).collect())
            .collect(),
        max_iter: 0,
        converged: true,
    };
    let acc = ensemble.try_map_reduce(
        init,
        |acc, i| {
            let sol = solve_global_picard(problem, grid, ensemble.seed, i, opts)?;
            let norms: Vec<f64> = (0..nodes).map(|k| lp_norm(sol.process.at(k), p)).collect();
            let mut buf = vec![0.0; nodes];
            for (q, m) in orders.iter().zip(acc.moments.iter_mut()) {
                for (b, n) in buf.iter_mut().zip(&norms) {
                    *b = powq(*n, *q);
                }
                m.push(&buf);
            }
            let xi: Vec<f64> = orders.iter().map(|q| powq(norms[0], *q)).collect();
            acc.initial.push(&xi);
            for (w, tw) in acc.trace.iter_mut().zip(&sol.trace) {
                for (m, row) in w.iter_mut().zip(tw) {
                    m.push(row);
                }
            }
            acc.max_iter = acc.max_iter.max(sol.windows.iter().map(|w| w.iterations).max().unwrap_or(0));
            acc.converged &= sol.converged;
            Ok(())
        },
        |a, b| {
            for (x, y) in a.moments.iter_mut().zip(&b.moments) {
                x.merge(y);
            }
            a.initial.merge(&b.initial);
            for (wa, wb) in a.trace.iter_mut().zip(&b.trace) {
                for (x, y) in wa.iter_mut().zip(wb) {
                    x.merge(y);
                }
            }
            a.max_iter = a.max_iter.max(b.max_iter);
            a.converged &= b.converged;
        },
    )?;
    let mut picard = Vec::new();
    for ((a, b), w) in layout.iter().zip(&acc.trace) {
        let distances: Vec<Estimate> = w
            .iter()
            .map(|m| {
                m.estimates()
                    .into_iter()
                    .fold(Estimate { mean: 0.0, se: 0.0 }, |x, y| if y.mean > x.mean { y } else { x })
            })
            .collect();
        let mut ratios = Vec::new();
        for pair in distances.windows(2) {
            let (d0, d1) = (pair[0], pair[1]);
            if d0.mean <= 0.0 || d1.mean <= 0.0 {
                break;
            }
            let r = (d1.mean / d0.mean).powf(1.0 / p);
            let rel = ((d1.se / d1.mean).powi(2) + (d0.se / d0.mean).powi(2)).sqrt();
            ratios.push(Estimate { mean: r, se: r * rel / p });
        }
        if let Some(bad) = ratios.windows(3).find(|w| w.iter().all(|r| r.mean > 1.0)) {
            return Err(SpdeError::NonContraction { ratio: bad[2].mean });
        }
        picard.push(PicardWindowTrace {
            start: *a,
            end: *b,
            distances,
            ratios,
        });
    }
    Ok(EnsembleSolution {
        grid: *grid,
        paths: ensemble.paths,
        horizon,
        window_steps: ws,
        moments: acc.moments.iter().map(|m| m.estimates()).collect(),
        initial_moments: acc.initial.estimates(),
        orders,
        picard,
        max_iterations: acc.max_iter,
        all_converged: acc.converged,
    })
}

/// α of sup_t E|X(t)|^p ≤ α(1 + E|ξ|^p).
pub fn alpha_theory(c1: f64, p: f64, m_t: f64, t_end: f64, c_p: f64) -> f64 {
    let k = (3.0 * c1 * m_t).powf(p) * (2.0 * t_end).powf(p - 1.0)
        + (3.0 * c1 * p * m_t / (p - 1.0)).powf(p) * c_p * t_end.powf((p - 2.0) / 2.0) * 2f64.powf(p - 1.0);
    (3f64.powf(p) * m_t.powf(p)).max(k * t_end) * (k * t_end).exp()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub p: f64,
    pub alpha_theory: f64,
    pub alpha_empirical: Estimate,
    pub sup_moment: Estimate,
    pub initial_moment: Estimate,
    pub pass: bool,
}

pub fn moment_bound_report(problem: &ProblemSpec, sol: &EnsembleSolution) -> Result<MomentBoundReport> {
    let p = problem.p();
    let c = problem
        .global_constants()
        .ok_or_else(|| SpdeError::InvalidParameter("moment bound needs global constants".into()))?;
    let m = sol
        .moment(p)
        .ok_or_else(|| SpdeError::InvalidParameter("ensemble lacks the order-p moment".into()))?;
    let sup = m.iter().copied().fold(
        Estimate {
            mean: f64::NEG_INFINITY,
            se: 0.0,
        },
        |a, b| if b.mean > a.mean { b } else { a },
    );
    let xi = sol.initial_moment(p).expect("order p recorded");
    let denom = 1.0 + xi.mean;
    let alpha_empirical = Estimate {
        mean: sup.mean / denom,
        se: sup.se / denom,
    };
    let alpha = alpha_theory(c.growth, p, problem.m_t, problem.t_end, problem.constants.c_p);
    Ok(MomentBoundReport {
        p,
        alpha_theory: alpha,
        pass: alpha_empirical.mean <= alpha,
        alpha_empirical,
        sup_moment: sup,
        initial_moment: xi,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalSolutionPath {
    pub levels: Vec<f64>,
    /// Node index of τ_n per level; None when |X_n| ≤ n on the whole grid.
    pub tau_index: Vec<Option<usize>>,
    /// τ_n as a time (T when the level is never exceeded).
    pub tau: Vec<f64>,
    /// Nodes 0..=k_max of the glued path, k_max the last τ index.
    pub values: Vec<f64>,
    pub d: usize,
    pub blow_up: bool,
    /// Δτ_j / ln(n_j / n_{j−1}): constant for exponential growth, shrinking
    /// towards 0 before a blow-up.
    pub normalized_increments: Vec<f64>,
    /// Grid detection delays τ by at most one step.
    pub resolution: f64,
}

fn first_exceed(x: &AdaptedProcess, n: f64, p: f64) -> Option<usize> {
    (0..=x.grid.steps).find(|&k| lp_norm(x.at(k), p) > n)
}

/// Truncated solves per level with the gluing check. Gluing failures are
/// returned as [`SpdeError::GluingViolation`].
pub fn solve_local(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    seed: u64,
    path_index: u64,
    n_schedule: &[f64],
    opts: &PicardOptions,
) -> Result<LocalSolutionPath> {
    check_grid(problem, grid)?;
    if n_schedule.is_empty() || n_schedule.windows(2).any(|w| !(w[1] > w[0])) || n_schedule[0] <= 0.0 {
        return invalid("n_schedule must be positive and strictly increasing");
    }
    let d = problem.d();
    let p = problem.p();
    let xi = problem.initial.sample(seed, path_index);
    let xi_norm = lp_norm(&xi, p);
    let mut paths: Vec<AdaptedProcess> = Vec::new();
    let mut tau_index: Vec<Option<usize>> = Vec::new();
    let exact_opts = PicardOptions { tol: 0.0, ..opts.clone() };
    for &n in n_schedule {
        let level = problem.truncated(n)?;
        let xi_n: Vec<f64> = if xi_norm <= n { xi.clone() } else { vec![0.0; d] };
        let sol = picard_with_initial(&level, grid, seed, path_index, &xi_n, &exact_opts)?;
        if !sol.converged {
            return Err(SpdeError::NonContraction { ratio: f64::NAN });
        }
        let tau = first_exceed(&sol.process, n, p);
        for (j, lower) in paths.iter().enumerate() {
            let stop = tau_index[j].unwrap_or(grid.steps);
            for k in 0..=stop {
                let same = lower.at(k).iter().zip(sol.process.at(k)).all(|(a, b)| a.to_bits() == b.to_bits());
                if !same {
                    return Err(SpdeError::GluingViolation {
                        lower: n_schedule[j],
                        upper: n,
                        node: k,
                    });
                }
            }
        }
        paths.push(sol.process);
        tau_index.push(tau);
    }
    let tau: Vec<f64> = tau_index.iter().map(|t| t.map(|k| grid.node(k)).unwrap_or(grid.t_end)).collect();
    let normalized_increments: Vec<f64> = (1..n_schedule.len())
        .map(|j| (tau[j] - tau[j - 1]) / (n_schedule[j] / n_schedule[j - 1]).ln())
        .collect();
    let all_below = tau_index.iter().all(|t| t.is_some());
    // Grid detection moves each τ by less than Δ, so successive normalized
    // increments may wobble by up to 2Δ/ln(ratio).
    let slack: Vec<f64> = (1..n_schedule.len())
        .map(|j| 2.0 * grid.dt() / (n_schedule[j] / n_schedule[j - 1]).ln())
        .collect();
    let shrinking = normalized_increments.len() >= 2
        && normalized_increments
            .windows(2)
            .zip(slack.windows(2))
            .all(|(w, s)| w[1] <= w[0] + s[0].max(s[1]))
        && normalized_increments[normalized_increments.len() - 1] <= 0.75 * normalized_increments[0];
    let last = paths.last().expect("non-empty schedule");
    let k_max = tau_index.last().copied().flatten().unwrap_or(grid.steps);
    Ok(LocalSolutionPath {
        levels: n_schedule.to_vec(),
        tau_index,
        tau,
        values: last.flat()[..(k_max + 1) * d].to_vec(),
        d,
        blow_up: all_below && shrinking,
        normalized_increments,
        resolution: grid.dt(),
    })
}

/// First time the scalar ODE ẋ = coef·x² − λx started at x₀ > 0 reaches
/// level n (None if it never does).
pub fn riccati_crossing_time(coef: f64, lambda: f64, x0: f64, n: f64) -> Option<f64> {
    if !(n > x0) || coef <= 0.0 {
        return None;
    }
    // 1/x = c/λ + (1/x₀ − c/λ)e^{λt}, so e^{λt} = (c/λ − 1/n)/(c/λ − 1/x₀).
    let a = coef / lambda;
    let num = a - 1.0 / n;
    let den = a - 1.0 / x0;
    if den <= 0.0 || num <= 0.0 {
        return None;
    }
    Some((num / den).ln() / lambda)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DependenceReport {
    /// Ê|ξ − ξ̄|².
    pub initial_distance: Estimate,
    /// Ê|X(t_k∧τ) − X̄(t_k∧τ)|² per node.
    pub profile: Vec<Estimate>,
    pub c1_empirical: f64,
    pub c1_theory: f64,
    pub lipschitz: f64,
    pub pass: bool,
}

/// C₁ = 3M² exp(3(T + c)c_n²M²T).
pub fn dependence_constant(c_n: f64, m_t: f64, t_end: f64, c: f64) -> f64 {
    3.0 * m_t * m_t * (3.0 * (t_end + c) * c_n * c_n * m_t * m_t * t_end).exp()
}

fn stopped(x: &AdaptedProcess, stop: usize, k: usize) -> &[f64] {
    x.at(k.min(stop))
}

/// Coupled pairs (X, X̄) from laws `xi` and `xi_bar` with shared noise. With a
/// truncation level both are stopped at the first node where either exceeds n.
pub fn dependence_experiment(
    problem: &ProblemSpec,
    xi: &InitialLaw,
    xi_bar: &InitialLaw,
    grid: &TimeGrid,
    ensemble: &Ensemble,
    truncation: Option<f64>,
    opts: &PicardOptions,
) -> Result<DependenceReport> {
    check_grid(problem, grid)?;
    xi.validate(problem.d())?;
    xi_bar.validate(problem.d())?;
    let (prob, lipschitz) = match truncation {
        Some(n) => (problem.truncated(n)?, problem.local_constants(n).lipschitz),
        None => {
            let c = problem
                .global_constants()
                .ok_or_else(|| SpdeError::InvalidParameter("locally Lipschitz problem needs a truncation level".into()))?;
            (problem.clone(), c.lipschitz)
        }
    };
    let p = problem.p();
    let nodes = grid.steps + 1;
    let acc = ensemble.try_map_reduce(
        || (MomentAccumulator::new(nodes), MomentAccumulator::new(1)),
        |(prof, init), i| {
            let a = xi.sample(ensemble.seed, i);
            let b = xi_bar.sample(ensemble.seed, i);
            let x = picard_with_initial(&prob, grid, ensemble.seed, i, &a, opts)?.process;
            let y = picard_with_initial(&prob, grid, ensemble.seed, i, &b, opts)?.process;
            let stop = match truncation {
                Some(n) => first_exceed(&x, n, p)
                    .into_iter()
                    .chain(first_exceed(&y, n, p))
                    .min()
                    .unwrap_or(grid.steps),
                None => grid.steps,
            };
            let row: Vec<f64> = (0..nodes)
                .map(|k| lp_diff_norm(stopped(&x, stop, k), stopped(&y, stop, k), p).powi(2))
                .collect();
            prof.push(&row);
            init.push(&[lp_diff_norm(&a, &b, p).powi(2)]);
            Ok(())
        },
        |a, b| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        },
    )?;
    let profile = acc.0.estimates();
    let initial_distance = acc.1.estimate(0);
    let sup = profile.iter().map(|e| e.mean).fold(0.0, f64::max);
    if initial_distance.mean == 0.0 && sup > 0.0 {
        return Err(SpdeError::CouplingBug);
    }
    let c1_empirical = if initial_distance.mean == 0.0 {
        0.0
    } else {
        sup / initial_distance.mean
    };
    let c1_theory = dependence_constant(lipschitz, problem.m_t, problem.t_end, problem.constants.c);
    Ok(DependenceReport {
        initial_distance,
        profile,
        c1_empirical,
        c1_theory,
        lipschitz,
        pass: c1_empirical <= c1_theory,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IncrementCheck {
    pub s: f64,
    pub t: f64,
    pub lhs: Estimate,
    /// Ê|(S(t∧τ − s∧τ) − I)X(s∧τ)|².
    pub semigroup_term: Estimate,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeIncrementReport {
    pub c2_theory: f64,
    pub initial_second_moment: Estimate,
    pub checks: Vec<IncrementCheck>,
    pub pass: bool,
}

/// C₂ = max(3, 6c_n²M²(T + c)(1 + α₂)).
pub fn time_increment_constant(c_n: f64, cbar_n: f64, m_t: f64, t_end: f64, c: f64) -> f64 {
    let alpha2 = alpha_theory(cbar_n, 2.0, m_t, t_end, c);
    (6.0 * c_n * c_n * m_t * m_t * (t_end + c) * (1.0 + alpha2)).max(3.0)
}

pub fn time_increment_experiment(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    ensemble: &Ensemble,
    pairs: &[(f64, f64)],
    truncation: Option<f64>,
    opts: &PicardOptions,
) -> Result<TimeIncrementReport> {
    check_grid(problem, grid)?;
    if pairs.iter().any(|(s, t)| !(s <= t) || *s < 0.0 || *t > grid.t_end) {
        return invalid("time pairs need 0 ≤ s ≤ t ≤ T");
    }
    let (prob, consts) = match truncation {
        Some(n) => (problem.truncated(n)?, problem.local_constants(n)),
        None => (
            problem.clone(),
            problem
                .global_constants()
                .ok_or_else(|| SpdeError::InvalidParameter("locally Lipschitz problem needs a truncation level".into()))?,
        ),
    };
    let p = problem.p();
    let d = problem.d();
    let idx: Vec<(usize, usize)> = pairs.iter().map(|(s, t)| (grid.index_at(*s), grid.index_at(*t))).collect();
    let slots = 2 * pairs.len() + 1;
    let acc = ensemble.try_map_reduce(
        || MomentAccumulator::new(slots),
        |acc, i| {
            let x = solve_global_picard(&prob, grid, ensemble.seed, i, opts)?.process;
            let stop = truncation.and_then(|n| first_exceed(&x, n, p)).unwrap_or(grid.steps);
            let mut row = Vec::with_capacity(slots);
            let mut sg = Vec::with_capacity(pairs.len());
            for &(ks, kt) in &idx {
                let (ss, tt) = (ks.min(stop), kt.min(stop));
                row.push(lp_diff_norm(x.at(tt), x.at(ss), p).powi(2));
                let fac = problem.operator.semigroup_factors(grid.node(tt) - grid.node(ss));
                let xs = x.at(ss);
                let diff: Vec<f64> = (0..d).map(|j| (fac[j] - 1.0) * xs[j]).collect();
                sg.push(lp_norm(&diff, p).powi(2));
            }
            row.extend(sg);
            row.push(lp_norm(x.at(0), p).powi(2));
            acc.push(&row);
            Ok(())
        },
        |a, b| a.merge(&b),
    )?;
    let c2 = time_increment_constant(consts.lipschitz, consts.growth, problem.m_t, problem.t_end, problem.constants.c);
    let xi2 = acc.estimate(slots - 1);
    let checks: Vec<IncrementCheck> = pairs
        .iter()
        .enumerate()
        .map(|(j, &(s, t))| {
            let lhs = acc.estimate(j);
            let semigroup_term = acc.estimate(pairs.len() + j);
            let rhs = c2 * (semigroup_term.mean + (1.0 + xi2.mean) * (t - s));
            IncrementCheck {
                s,
                t,
                pass: lhs.mean <= rhs,
                lhs,
                semigroup_term,
                rhs,
            }
        })
        .collect();
    Ok(TimeIncrementReport {
        c2_theory: c2,
        initial_second_moment: xi2,
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou(lambda: f64, f: CoefficientFamily, g: f64) -> ProblemSpec {
        ProblemSpec::new(
            SpectralOperator::new(vec![lambda]).unwrap(),
            f.into(),
            CoefficientFamily::Constant { value: g }.into(),
            InitialLaw::zero(1),
            1.0,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn horizon_examples() {
        let t = contraction_horizon(1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        assert!((t - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-15);
        assert!((contraction_factor(1.0, 1.0, 2.0, 1.0, t) - 1.0).abs() < 1e-14);
        assert!(contraction_horizon(0.0, 1.0, 2.0, 1.0, 0.5).unwrap().is_infinite());
        // Doubling c₂ halves √T̄(√T̄ + K).
        let t2 = contraction_horizon(2.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let k = 2.0;
        let g = |t: f64| t.sqrt() * (t.sqrt() + k);
        assert!((g(t2) / g(t) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn truncation_factor_values() {
        let c = CoefficientDescriptor {
            family: CoefficientFamily::Square { coef: 1.0 },
            truncation: Some(2.0),
        };
        let mut out = [0.0];
        c.eval_into(&[1.5], 1.5, &mut out);
        assert_eq!(out[0], 2.25);
        c.eval_into(&[3.0], 3.0, &mut out);
        assert_eq!(out[0], 9.0 * 0.5);
        c.eval_into(&[4.0], 4.0, &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn zero_coefficients_give_semigroup() {
        let prob = ProblemSpec::new(
            SpectralOperator::new(vec![1.0, 3.0]).unwrap(),
            CoefficientFamily::Zero.into(),
            CoefficientFamily::Zero.into(),
            InitialLaw::Deterministic { value: vec![1.0, -2.0] },
            1.0,
            2.0,
        )
        .unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let sol = solve_global_picard(&prob, &grid, 1, 0, &PicardOptions::default()).unwrap();
        for k in 0..=32 {
            let t = grid.node(k);
            assert!((sol.process.at(k)[0] - (-t).exp()).abs() < 1e-13);
            assert!((sol.process.at(k)[1] + 2.0 * (-3.0 * t).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn picard_equals_forward_march() {
        let prob = ProblemSpec::new(
            SpectralOperator::new(vec![1.0, 2.0]).unwrap(),
            CoefficientFamily::Sine { amplitude: 1.0, offset: 0.0 }.into(),
            CoefficientFamily::Sine { amplitude: 0.5, offset: 1.0 }.into(),
            InitialLaw::Gaussian {
                mean: vec![0.3, 0.0],
                std: 0.5,
            },
            1.0,
            2.0,
        )
        .unwrap();
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let opts = PicardOptions::default();
        let a = solve_global_picard(&prob, &grid, 7, 3, &opts).unwrap();
        let b = forward_march(&prob, &grid, 7, 3, NoiseMode::Increment).unwrap();
        assert!(a.windows.len() > 1);
        assert_eq!(a.process, b);
        let zero = PicardOptions {
            initial_iterate: InitialIterate::Zero,
            ..opts
        };
        let c = solve_global_picard(&prob, &grid, 7, 3, &zero).unwrap();
        assert_eq!(a.process, c.process);
        assert!(mild_residual(&prob, &a.process, 7, 3).unwrap() < 1e-12);
    }

    #[test]
    fn exact_mode_rejects_state_dependent_noise() {
        let mut prob = ou(1.0, CoefficientFamily::Zero, 1.0);
        prob.g = CoefficientFamily::Linear { rate: 1.0 }.into();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let opts = PicardOptions {
            mode: NoiseMode::ExactGauss,
            ..Default::default()
        };
        assert!(matches!(solve_global_picard(&prob, &grid, 0, 0, &opts), Err(SpdeError::ModeMismatch(_))));
    }

    #[test]
    fn ou_rate_two_variance() {
        let prob = ou(1.0, CoefficientFamily::Linear { rate: -1.0 }, 1.0);
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let sol = solve_ensemble(&prob, &grid, &Ensemble::new(11, 20_000), &[], &PicardOptions::default()).unwrap();
        let m = sol.moment(2.0).unwrap()[256];
        let exact = (1.0 - (-4f64).exp()) / 4.0;
        // Left-point drift adds an O(Δ) bias of about 2·Δ·0.245.
        assert!((m.mean - exact).abs() < 3.0 * m.se + 0.004, "{m:?}");
    }

    #[test]
    fn riccati_oracle() {
        // λ → 0: crossing at 1/x₀ − 1/n.
        let t = riccati_crossing_time(1.0, 1e-9, 2.0, 4.0).unwrap();
        assert!((t - 0.25).abs() < 1e-6);
        assert!(riccati_crossing_time(1.0, 0.5, 0.1, 1.0).is_none());
    }

    #[test]
    fn identical_initial_data_give_zero_difference() {
        let prob = ou(1.0, CoefficientFamily::Sine { amplitude: 1.0, offset: 0.0 }, 1.0);
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let law = InitialLaw::Gaussian { mean: vec![0.0], std: 1.0 };
        let r = dependence_experiment(&prob, &law, &law, &grid, &Ensemble::new(1, 50), None, &PicardOptions::default()).unwrap();
        assert_eq!(r.c1_empirical, 0.0);
    }
}
