//! Semilinear equations dX + AX dt = [F₁(X) + F₂(t)] dt + G(t) dw with F₁
//! Lipschitz on D(A^η) and deterministic F₂, G.
//!
//! The mild map ΦY(t) = S(t)ξ + ∫₀^t S(t−s)[F₁(Y) + F₂] ds + ∫₀^t S(t−s)G dw
//! is discretized by exponential Euler with F₁ frozen at the left node:
//!
//! ```text
//! (ΦY)_{k+1} = e^{−AΔ}((ΦY)_k + F₁(Y_k)Δ) + P_k + N_k
//! ```
//!
//! P_k is the product-integrated F₂ panel and N_k the noise term of the
//! additive solver. Picard iterate m agrees bitwise with the forward march
//! on nodes 0..m, so the discrete fixed point is the forward march.
//!
//! Weighted norm on [0, S], with slots (θ_a, θ_b, w) = (η, β, η − β), or
//! (η, 0, η) in the critical case:
//!
//! ```text
//! |Y|²_Ξ = sup_{t>0} t^{2w} Ê|A^{θ_a}Y|² + sup_t Ê|A^{θ_b}Y|²
//! ```
//!
//! Certificate (ι_ν from `SpectralOperator::iota` on (0, T], c = c(E),
//! κ² = 2(1 + margin)·max(C₁, C₂), b = B(1+2β−2η, ·)):
//!
//! ```text
//! C₁   = 3ι_{η−β}² E|A^βξ|² + 6ι_η²|F₂|²B(β,1−η)² + 3cι_η²|G|²B(2β,1−2η)
//! C₂   = 3E|A^βξ|² + 6ι_β²|F₂|²B(β,1−β)² + 3cι_β²|G|²B(2β,1−2β)
//! P_θ  = 18ι_θ²c_F²κ² b(1−2θ) S^{2(1+β−2η)} + 18ι_θ²(c_F²κ² + E|F₁(0)|²) S^{2(1−β)}/(1−2θ)
//!        ≤ κ²/2 for θ ∈ {η, β}
//! L(S) = 2c_F²[ι_η² b(1−2η) + ι_β² b(1−2β) + (ι_η²/(1−2η) + ι_β²/(1−2β)) S^{2(η−β)}] S^{2(1−η)} < 1
//! ```
//!
//! L(S) bounds |ΦY₁ − ΦY₂|²_Ξ / |Y₁ − Y₂|²_Ξ, so measured norm ratios are
//! compared with √L(S). Critical case (|A^η·| + |·| Lipschitz, E|ξ|² only):
//!
//! ```text
//! C₁   = 3ι_η² E|ξ|² + [6ι_η²|F₂|²B(β,1−η)² + 3cι_η²|G|²B(2β,1−2η)] T^{2β}
//! C₂   = 3E|ξ|² + [6|F₂|²B(β,1)² + 3c|G|²B(2β,1)] T^{2β}
//! P_θ  = 18ι_θ²[c_F²κ² B(1−2η,1−2θ) S^{2(1−η)} + (c_F²κ² + E|F₁(0)|²) S²/(1−2θ)], θ ∈ {η, 0}
//! L(S) = 2c_F²[ι_η² B(1−2η,1−2η) + B(1−2η,1) + (ι_η²/(1−2η) + 1) S^{2η}] S^{2(1−η)}
//! ```
//!
//! Dependence on the data (D_ξ = Ê|ξ−ξ̄|², D_F = |F₂−F̄₂|², D_G = |G−Ḡ|²):
//! q(t) = t^{2η}Ê[|A^ηΔX|² + |A^βΔX|²] obeys q ≤ a(t) + k(t) sup_{s≤t} q(s)
//! with nondecreasing a, k, hence q ≤ a/(1−k) while k < 1;
//!
//! ```text
//! a(t) = 4(ι_β²t^{2(η−β)} + ι_η²)D_ξ + 4[ι_β²B(β,1−β)²t^{2η} + ι_η²B(β,1−η)²t^{2β}]D_F
//!        + 4c[ι_β²B(2β,1−2β)t^{2η} + ι_η²B(2β,1−2η)t^{2β}]D_G
//! k(t) = 8c_F²[ι_β²B(1−2η,1−2β)t^{2(1−β)} + ι_η²B(1−2η,1−2η)t^{2(1−η)}]
//! Ê|ΔX|² ≤ 4D_ξ + 4B(β,1)²t^{2β}D_F + 4cB(2β,1)t^{2β}D_G + 8c_F² t^{2(1−η)} sup q/(1−2η)
//! ```
//!
//! and the same argument for r(t) = t^{2(η−β)}Ê[|A^ηΔX|² + |A^βΔX|²] with
//! ι_{θ−β} on E|A^β(ξ−ξ̄)|² and k₂(t) = 8c_F²[ι_η² b(1−2η)t^{2(1−η)} + ι_β² b(1−2β)t^{2(1−β)}].

use crate::brownian::AdaptedProcess;
use crate::brownian::{sample_brownian, NoiseMode, StepFactors, TimeGrid};
use crate::ensemble::Ensemble;
use crate::error::{invalid, Result, SpdeError};
use crate::initial::InitialLaw;
use crate::linear::{moment_bound, regularity_constants, AdditiveLinearSpec, ConditionFlag};
use crate::profile::{difference_norm, Profile};
use crate::rng::{GaussStream, StreamTag};
use crate::sectorial::SpectralOperator;
use crate::special::{beta as beta_fn, bisect_last_true};
use crate::state_space::{lp_norm, NormSpec, TypeConstants};
use crate::stats::{linear_fit, Estimate, LinearFit, MomentAccumulator};
use serde::{Deserialize, Serialize};

/// Registry of F₁ nonlinearities, all acting coordinatewise in the
/// eigenbasis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Zero,
    /// amplitude·sin((A^η x)_i) + offset.
    SineEta {
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
    /// −c·A^β x; the solution is the additive one for A + cA^β.
    LinearBeta {
        c: f64,
    },
    /// amplitude·sin((A^η x)_i) + x_i.
    SineEtaPlusIdentity {
        amplitude: f64,
    },
}

impl Nonlinearity {
    pub fn is_zero(&self) -> bool {
        match *self {
            Nonlinearity::Zero => true,
            Nonlinearity::SineEta { amplitude, offset } => amplitude == 0.0 && offset == 0.0,
            Nonlinearity::LinearBeta { c } => c == 0.0,
            Nonlinearity::SineEtaPlusIdentity { .. } => false,
        }
    }

    /// Coordinate i of F₁(x) from x_i and the factors λ_i^η, λ_i^β.
    #[inline]
    pub fn eval_coord(&self, x: f64, eta_factor: f64, beta_factor: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::SineEta { amplitude, offset } => amplitude * (eta_factor * x).sin() + offset,
            Nonlinearity::LinearBeta { c } => -c * beta_factor * x,
            Nonlinearity::SineEtaPlusIdentity { amplitude } => amplitude * (eta_factor * x).sin() + x,
        }
    }

    /// Declared c_{F₁} against |A^η(x−y)| + |A^β(x−y)|, or against
    /// |A^η(x−y)| + |x−y| when `critical`.
    pub fn lipschitz(&self, critical: bool, lambda_min: f64, beta: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::SineEta { amplitude, .. } => amplitude.abs(),
            // λ^β ≤ λ^η + 1 covers the critical case with the same constant.
            Nonlinearity::LinearBeta { c } => c.abs(),
            Nonlinearity::SineEtaPlusIdentity { amplitude } => {
                if critical {
                    amplitude.abs().max(1.0)
                } else {
                    amplitude.abs().max(lambda_min.powf(-beta))
                }
            }
        }
    }

    /// |F₁(0)|² in ℓ^p.
    pub fn zero_value_sq(&self, d: usize, p: f64) -> f64 {
        match *self {
            Nonlinearity::SineEta { offset, .. } => offset * offset * (d as f64).powf(2.0 / p),
            _ => 0.0,
        }
    }
}

/// Exponents of the semilinear theory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub eta: f64,
    pub beta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl Exponents {
    pub fn validate(&self) -> Result<()> {
        let Exponents { eta, beta, sigma, gamma } = *self;
        if !(eta > 0.0 && eta < 0.5) {
            return invalid(format!("need 0 < η < 1/2, got η = {eta}"));
        }
        let lo = (2.0 * eta - 0.5).max(0.0);
        if !(beta > lo && beta < eta) {
            return invalid(format!("need max(0, 2η − 1/2) < β < η, got η = {eta}, β = {beta}"));
        }
        if !(sigma > 0.0 && sigma < beta) {
            return invalid(format!("need 0 < σ < β, got σ = {sigma}, β = {beta}"));
        }
        if let Some(g) = gamma {
            let lo = beta.max(0.5 - eta);
            if !(g > lo && g < 0.5) {
                return invalid(format!("need max(β, 1/2 − η) < γ < 1/2, got γ = {g}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SemilinearSpec {
    pub operator: SpectralOperator,
    pub f1: Nonlinearity,
    pub f2: Profile,
    pub g: Profile,
    pub initial: InitialLaw,
    pub exponents: Exponents,
    /// Lipschitz condition against |A^η·| + |·| instead of |A^η·| + |A^β·|.
    pub critical: bool,
    pub t_end: f64,
    pub norm: NormSpec,
    pub constants: TypeConstants,
}

/// Grid resolution used for data norms over (0, T].
pub const NORM_STEPS: usize = 1024;

impl SemilinearSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        operator: SpectralOperator,
        f1: Nonlinearity,
        f2: Profile,
        g: Profile,
        initial: InitialLaw,
        exponents: Exponents,
        critical: bool,
        t_end: f64,
        p: f64,
    ) -> Result<Self> {
        exponents.validate()?;
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid("horizon T must be positive");
        }
        if !(p >= 2.0) {
            return invalid("p must be at least 2");
        }
        let norm = NormSpec::new(p, operator.dim())?;
        initial.validate(operator.dim())?;
        let b = exponents.beta;
        let fw = exponents.gamma.unwrap_or(b);
        if !f2.weighted(0.0, fw).is_finite() {
            return invalid("F₂ violates the t^{β−1} growth allowance at 0");
        }
        if !g.weighted(0.0, b + 0.5).is_finite() {
            return invalid("G violates the t^{β−1/2} growth allowance at 0");
        }
        Ok(SemilinearSpec {
            constants: TypeConstants::default_for(&norm),
            operator,
            f1,
            f2,
            g,
            initial,
            exponents,
            critical,
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

    pub fn c_f1(&self) -> f64 {
        self.f1.lipschitz(self.critical, self.operator.min_eigenvalue(), self.exponents.beta)
    }

    /// (θ_a, θ_b, w) of the weighted norm.
    pub fn slots(&self) -> (f64, f64, f64) {
        let Exponents { eta, beta, .. } = self.exponents;
        if self.critical {
            (eta, 0.0, eta)
        } else {
            (eta, beta, eta - beta)
        }
    }

    /// The additive problem obtained by dropping F₁, on [0, t_end].
    pub fn linear_spec(&self, t_end: f64) -> Result<AdditiveLinearSpec> {
        AdditiveLinearSpec::new(
            self.operator.clone(),
            self.f2.clone(),
            self.g.clone(),
            self.initial.clone(),
            self.exponents.beta,
            self.exponents.sigma,
            ConditionFlag::F1,
            t_end,
            self.p(),
        )
    }

    fn norm_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_end, NORM_STEPS)
    }

    pub fn f2_norm(&self) -> Result<f64> {
        let Exponents { beta, sigma, .. } = self.exponents;
        self.f2.fbeta_norm(&self.norm_grid()?, self.d(), beta, sigma, self.p())
    }

    pub fn g_norm(&self) -> Result<f64> {
        let Exponents { beta, sigma, .. } = self.exponents;
        self.g.fbeta_norm(&self.norm_grid()?, self.d(), beta + 0.5, sigma, self.p())
    }

    /// E|A^βξ|², or E|ξ|² in the critical case.
    pub fn xi_sq(&self) -> f64 {
        let (_, tb, _) = self.slots();
        let w = self.operator.power_factors(tb);
        self.initial.moment_certificate(self.p(), 2.0, Some(&w))
    }

    pub fn certificate_inputs(&self) -> Result<CertificateInputs> {
        let mut c = CertificateInputs::from_operator(&self.operator, self.exponents.eta, self.exponents.beta, self.critical, self.t_end);
        c.c_f1 = self.c_f1();
        c.f2_norm = self.f2_norm()?;
        c.g_norm = self.g_norm()?;
        c.f1_zero_sq = self.f1.zero_value_sq(self.d(), self.p());
        c.xi_sq = self.xi_sq();
        c.c_e = self.constants.c;
        Ok(c)
    }

    pub fn certificate(&self) -> Result<HorizonCertificate> {
        Ok(kappa_and_horizon(&self.certificate_inputs()?))
    }
}

/// Scalar data of the κ/horizon certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub eta: f64,
    pub beta: f64,
    pub critical: bool,
    pub t_end: f64,
    pub iota_eta: f64,
    pub iota_beta: f64,
    pub iota_eta_beta: f64,
    pub c_f1: f64,
    pub f2_norm: f64,
    pub g_norm: f64,
    pub f1_zero_sq: f64,
    /// E|A^βξ|², or E|ξ|² in the critical case.
    pub xi_sq: f64,
    pub c_e: f64,
    pub margin: f64,
}

impl CertificateInputs {
    /// ι values of `a` on (0, T]; every data norm starts at zero.
    pub fn from_operator(a: &SpectralOperator, eta: f64, beta: f64, critical: bool, t_end: f64) -> Self {
        CertificateInputs {
            eta,
            beta,
            critical,
            t_end,
            iota_eta: a.iota(eta, t_end),
            iota_beta: a.iota(beta, t_end),
            iota_eta_beta: a.iota(eta - beta, t_end),
            c_f1: 0.0,
            f2_norm: 0.0,
            g_norm: 0.0,
            f1_zero_sq: 0.0,
            xi_sq: 0.0,
            c_e: 1.0,
            margin: 0.1,
        }
    }

    /// ι for the two slots (θ_a, θ_b).
    fn iotas(&self) -> (f64, f64) {
        if self.critical {
            (self.iota_eta, 1.0)
        } else {
            (self.iota_eta, self.iota_beta)
        }
    }

    pub fn c1_c2(&self) -> (f64, f64) {
        let (eta, beta) = (self.eta, self.beta);
        let (f2, g, c) = (self.f2_norm * self.f2_norm, self.g_norm * self.g_norm, self.c_e);
        let (ia, ib) = self.iotas();
        if self.critical {
            let tb = self.t_end.powf(2.0 * beta);
            let c1 = 3.0 * ia * ia * self.xi_sq
                + (6.0 * ia * ia * f2 * beta_fn(beta, 1.0 - eta).powi(2) + 3.0 * c * ia * ia * g * beta_fn(2.0 * beta, 1.0 - 2.0 * eta)) * tb;
            let c2 = 3.0 * self.xi_sq + (6.0 * f2 * beta_fn(beta, 1.0).powi(2) + 3.0 * c * g * beta_fn(2.0 * beta, 1.0)) * tb;
            (c1, c2)
        } else {
            let iab = self.iota_eta_beta;
            let c1 = 3.0 * iab * iab * self.xi_sq
                + 6.0 * ia * ia * f2 * beta_fn(beta, 1.0 - eta).powi(2)
                + 3.0 * c * ia * ia * g * beta_fn(2.0 * beta, 1.0 - 2.0 * eta);
            let c2 = 3.0 * self.xi_sq
                + 6.0 * ib * ib * f2 * beta_fn(beta, 1.0 - beta).powi(2)
                + 3.0 * c * ib * ib * g * beta_fn(2.0 * beta, 1.0 - 2.0 * beta);
            (c1, c2)
        }
    }

    /// Left sides of the κ-preservation inequalities for slots a and b.
    pub fn preservation(&self, kappa_sq: f64, s: f64) -> [f64; 2] {
        let (eta, beta) = (self.eta, self.beta);
        let cf = self.c_f1 * self.c_f1;
        let (ia, ib) = self.iotas();
        let rest = cf * kappa_sq + self.f1_zero_sq;
        let term = |iota: f64, theta: f64| -> f64 {
            if self.critical {
                18.0 * iota
                    * iota
                    * (cf * kappa_sq * beta_fn(1.0 - 2.0 * eta, 1.0 - 2.0 * theta) * s.powf(2.0 * (1.0 - eta)) + rest * s * s / (1.0 - 2.0 * theta))
            } else {
                18.0 * iota * iota * cf * kappa_sq * beta_fn(1.0 + 2.0 * beta - 2.0 * eta, 1.0 - 2.0 * theta) * s.powf(2.0 * (1.0 + beta - 2.0 * eta))
                    + 18.0 * iota * iota * rest * s.powf(2.0 * (1.0 - beta)) / (1.0 - 2.0 * theta)
            }
        };
        let tb = if self.critical { 0.0 } else { beta };
        [term(ia, eta), term(ib, tb)]
    }

    /// L(S), the squared Lipschitz constant of Φ in Ξ(S).
    pub fn contraction(&self, s: f64) -> f64 {
        let (eta, beta) = (self.eta, self.beta);
        let cf = self.c_f1 * self.c_f1;
        let (ia, ib) = self.iotas();
        let (tb, b0) = if self.critical { (0.0, 0.0) } else { (beta, beta) };
        let bracket = ia * ia * beta_fn(1.0 + 2.0 * b0 - 2.0 * eta, 1.0 - 2.0 * eta)
            + ib * ib * beta_fn(1.0 + 2.0 * b0 - 2.0 * eta, 1.0 - 2.0 * tb)
            + (ia * ia / (1.0 - 2.0 * eta) + ib * ib / (1.0 - 2.0 * tb)) * s.powf(2.0 * (eta - b0));
        2.0 * cf * bracket * s.powf(2.0 * (1.0 - eta))
    }

    pub fn conditions(&self, kappa_sq: f64, s: f64) -> ConditionValues {
        let preservation = self.preservation(kappa_sq, s);
        let contraction = self.contraction(s);
        let half = 0.5 * kappa_sq;
        ConditionValues {
            s,
            preservation,
            half_kappa_sq: half,
            contraction,
            hold: preservation[0] <= half && preservation[1] <= half && contraction < 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionValues {
    pub s: f64,
    pub preservation: [f64; 2],
    pub half_kappa_sq: f64,
    pub contraction: f64,
    pub hold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonCertificate {
    pub inputs: CertificateInputs,
    pub c1: f64,
    pub c2: f64,
    pub kappa: f64,
    pub kappa_sq: f64,
    pub t_local: f64,
    /// T_local = T: every inequality holds on the whole horizon.
    pub capped: bool,
    pub at_t_local: ConditionValues,
    /// Values at 1.1·T_local (absent when capped).
    pub beyond: Option<ConditionValues>,
    pub self_consistent: bool,
}

impl HorizonCertificate {
    /// √L(S), the contraction factor on the norm.
    pub fn factor(&self, s: f64) -> f64 {
        self.inputs.contraction(s).sqrt()
    }
}

/// Relative bisection tolerance on T_local.
pub const HORIZON_TOL: f64 = 1e-6;

pub fn kappa_and_horizon(inputs: &CertificateInputs) -> HorizonCertificate {
    let (c1, c2) = inputs.c1_c2();
    let kappa_sq = 2.0 * c1.max(c2) * (1.0 + inputs.margin);
    let ok = |s: f64| inputs.conditions(kappa_sq, s).hold;
    let t_local = bisect_last_true(ok, 0.0, inputs.t_end, HORIZON_TOL);
    let capped = t_local >= inputs.t_end;
    let at_t_local = inputs.conditions(kappa_sq, t_local);
    let beyond = (!capped).then(|| inputs.conditions(kappa_sq, 1.1 * t_local));
    let self_consistent = at_t_local.hold && beyond.as_ref().map(|b| !b.hold).unwrap_or(true);
    HorizonCertificate {
        inputs: inputs.clone(),
        c1,
        c2,
        kappa: kappa_sq.sqrt(),
        kappa_sq,
        t_local,
        capped,
        at_t_local,
        beyond,
        self_consistent,
    }
}

/// Terms of |Y|²_Ξ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedSolutionNorm {
    pub eta_term: f64,
    pub beta_term: f64,
    pub total: f64,
}

impl WeightedSolutionNorm {
    pub fn new(eta_term: f64, beta_term: f64) -> Self {
        WeightedSolutionNorm {
            eta_term,
            beta_term,
            total: (eta_term + beta_term).sqrt(),
        }
    }
}

/// Per-grid data shared by all paths: semigroup factors, F₂ panels and
/// G step values.
struct Scheme<'a> {
    spec: &'a SemilinearSpec,
    grid: TimeGrid,
    mode: NoiseMode,
    steps: StepFactors,
    eta_f: Vec<f64>,
    beta_f: Vec<f64>,
    /// Slot factors λ^{θ_a}, λ^{θ_b} and the weight exponent 2w.
    slot_a: Vec<f64>,
    slot_b: Vec<f64>,
    two_w: f64,
    panels: Vec<f64>,
    g: Vec<f64>,
}

struct Drive {
    xi: Vec<f64>,
    forcing: Vec<f64>,
}

impl<'a> Scheme<'a> {
    fn new(spec: &'a SemilinearSpec, grid: &TimeGrid, mode: NoiseMode) -> Result<Self> {
        if grid.t_end > spec.t_end * (1.0 + 1e-12) {
            return invalid("grid extends beyond the horizon T");
        }
        let d = spec.d();
        let lam = spec.operator.eigenvalues();
        let beta = spec.exponents.beta;
        let mut panels = vec![0.0; grid.steps * d];
        if !spec.f2.is_zero() {
            for k in 0..grid.steps {
                let (a, b) = (grid.node(k), grid.node(k + 1));
                for i in 0..d {
                    panels[k * d + i] = spec.f2.drift_panel(lam[i], a, b, beta);
                }
            }
        }
        if panels.iter().any(|v| !v.is_finite()) {
            return Err(SpdeError::NonFinite("F₂ panels".into()));
        }
        let g = if spec.g.is_zero() {
            Vec::new()
        } else {
            (0..grid.steps).map(|k| spec.g.step_value(grid.node(k), grid.node(k + 1))).collect()
        };
        let (ta, tb, w) = spec.slots();
        Ok(Scheme {
            spec,
            grid: *grid,
            mode,
            steps: StepFactors::new(&spec.operator, grid.dt()),
            eta_f: spec.operator.power_factors(spec.exponents.eta),
            beta_f: spec.operator.power_factors(beta),
            slot_a: spec.operator.power_factors(ta),
            slot_b: spec.operator.power_factors(tb),
            two_w: 2.0 * w,
            panels,
            g,
        })
    }

    fn d(&self) -> usize {
        self.spec.d()
    }

    fn nodes(&self) -> usize {
        self.grid.steps + 1
    }

    /// ξ and the per-step forcing P_k + N_k of one path.
    fn drive_with(&self, xi: Vec<f64>, seed: u64, path_index: u64) -> Drive {
        let d = self.d();
        let mut forcing = self.panels.clone();
        if !self.g.is_empty() {
            match self.mode {
                NoiseMode::Increment => {
                    let w = sample_brownian(&self.grid, seed, path_index);
                    for k in 0..self.grid.steps {
                        let gdw = self.g[k] * w.increment(k);
                        for i in 0..d {
                            forcing[k * d + i] += self.steps.decay[i] * gdw;
                        }
                    }
                }
                NoiseMode::ExactGauss => {
                    let mut z = GaussStream::new(seed, path_index, StreamTag::ExactConvolution);
                    for k in 0..self.grid.steps {
                        for i in 0..d {
                            forcing[k * d + i] += self.g[k] * self.steps.exact_sd[i] * z.gaussian();
                        }
                    }
                }
            }
        }
        Drive { xi, forcing }
    }

    fn drive(&self, seed: u64, path_index: u64) -> Drive {
        self.drive_with(self.spec.initial.sample(seed, path_index), seed, path_index)
    }

    /// Writes ΦY into `out` from node `start` (value `x0` there); with
    /// `y = None` F₁ is evaluated on `out` itself (forward march).
    fn apply(&self, drive: &Drive, start: usize, x0: &[f64], y: Option<&[f64]>, out: &mut [f64]) {
        let d = self.d();
        let dt = self.grid.dt();
        let f1 = &self.spec.f1;
        out[start * d..(start + 1) * d].copy_from_slice(x0);
        let zero = f1.is_zero();
        for k in start..self.grid.steps {
            for i in 0..d {
                let xk = out[k * d + i];
                let yk = match y {
                    Some(y) => y[k * d + i],
                    None => xk,
                };
                let f = if zero { 0.0 } else { f1.eval_coord(yk, self.eta_f[i], self.beta_f[i]) };
                out[(k + 1) * d + i] = self.steps.decay[i] * (xk + f * dt) + drive.forcing[k * d + i];
            }
        }
    }

    fn forward(&self, drive: &Drive) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes() * self.d()];
        self.apply(drive, 0, &drive.xi, None, &mut out);
        out
    }

    /// |A^{θ_a}v|² and |A^{θ_b}v|² at node k of a flat array.
    fn slot_terms(&self, v: &[f64], k: usize) -> (f64, f64) {
        let d = self.d();
        let p = self.spec.p();
        let x = &v[k * d..(k + 1) * d];
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        for i in 0..d {
            a[i] = self.slot_a[i] * x[i];
            b[i] = self.slot_b[i] * x[i];
        }
        (lp_norm(&a, p).powi(2), lp_norm(&b, p).powi(2))
    }

    fn weight(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.grid.node(k).powf(self.two_w)
        }
    }

    /// Single-path Ξ terms of a − b (or of a when b is None).
    fn path_norm(&self, a: &[f64], b: Option<&[f64]>) -> WeightedSolutionNorm {
        let diff: Vec<f64> = match b {
            Some(b) => a.iter().zip(b).map(|(x, y)| x - y).collect(),
            None => a.to_vec(),
        };
        let mut ea: f64 = 0.0;
        let mut eb: f64 = 0.0;
        for k in 0..self.nodes() {
            let (ta, tb) = self.slot_terms(&diff, k);
            ea = ea.max(self.weight(k) * ta);
            eb = eb.max(tb);
        }
        WeightedSolutionNorm::new(ea, eb)
    }

    /// Picard iteration from Y₀ = 0 on nodes start.. . `record(m, Y_m, Y_{m+1})`
    /// sees every iterate pair. Returns (fixed point, iterations, converged).
    fn picard(
        &self,
        drive: &Drive,
        start: usize,
        x0: &[f64],
        opts: &SemilinearOptions,
        mut record: impl FnMut(usize, &[f64], &[f64]),
    ) -> (Vec<f64>, usize, bool) {
        let n = self.nodes() * self.d();
        let mut y = vec![0.0; n];
        y[start * self.d()..(start + 1) * self.d()].copy_from_slice(x0);
        let mut next = vec![0.0; n];
        for m in 0..opts.max_iter {
            self.apply(drive, start, x0, Some(&y), &mut next);
            record(m, &y, &next);
            let done = if opts.tol == 0.0 {
                next == y
            } else {
                self.path_norm(&next, Some(&y)).total <= opts.tol
            };
            std::mem::swap(&mut y, &mut next);
            if done || self.spec.f1.is_zero() && m >= 1 {
                return (y, m + 1, true);
            }
        }
        (y, opts.max_iter, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemilinearOptions {
    pub max_iter: usize,
    /// Stop when the path Ξ-distance of consecutive iterates is ≤ tol;
    /// 0 means bitwise equality.
    pub tol: f64,
    pub mode: NoiseMode,
    /// Iterations recorded by ensemble traces.
    pub trace_iters: usize,
}

impl Default for SemilinearOptions {
    fn default() -> Self {
        SemilinearOptions {
            max_iter: 200,
            tol: 0.0,
            mode: NoiseMode::Increment,
            trace_iters: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SemilinearPath {
    pub x: AdaptedProcess,
    pub xi: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Single-path Ξ terms of Y_{m+1} − Y_m.
    pub distances: Vec<WeightedSolutionNorm>,
    pub seed: u64,
    pub path_index: u64,
}

/// Picard iteration of Φ for one path.
pub fn solve_semilinear(spec: &SemilinearSpec, grid: &TimeGrid, seed: u64, path_index: u64, opts: &SemilinearOptions) -> Result<SemilinearPath> {
    let scheme = Scheme::new(spec, grid, opts.mode)?;
    let drive = scheme.drive(seed, path_index);
    let mut distances = Vec::new();
    let (y, iterations, converged) = scheme.picard(&drive, 0, &drive.xi, opts, |_, a, b| distances.push(scheme.path_norm(b, Some(a))));
    if y.iter().any(|v| !v.is_finite()) {
        return Err(SpdeError::NonFinite("semilinear iterate".into()));
    }
    Ok(SemilinearPath {
        x: AdaptedProcess::from_flat(*grid, spec.d(), y)?,
        xi: drive.xi,
        iterations,
        converged,
        distances,
        seed,
        path_index,
    })
}

/// Picard iteration in the critical case.
pub fn solve_critical(spec: &SemilinearSpec, grid: &TimeGrid, seed: u64, path_index: u64, opts: &SemilinearOptions) -> Result<SemilinearPath> {
    if !spec.critical {
        return invalid("solve_critical needs the critical Lipschitz flag");
    }
    solve_semilinear(spec, grid, seed, path_index, opts)
}

/// The discrete fixed point by forward march.
pub fn forward_solution(spec: &SemilinearSpec, grid: &TimeGrid, seed: u64, path_index: u64, mode: NoiseMode) -> Result<AdaptedProcess> {
    let scheme = Scheme::new(spec, grid, mode)?;
    let x = scheme.forward(&scheme.drive(seed, path_index));
    AdaptedProcess::from_flat(*grid, spec.d(), x)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PicardEnsembleReport {
    pub certificate: HorizonCertificate,
    pub horizon: f64,
    pub within_certificate: bool,
    /// Ξ terms of Y_m, m = 0..=K.
    pub iterate_norms: Vec<WeightedSolutionNorm>,
    /// Ξ terms of Y_{m+1} − Y_m, m = 0..K.
    pub distances: Vec<WeightedSolutionNorm>,
    /// Norm ratios of consecutive distances, m = 1..K.
    pub ratios: Vec<Estimate>,
    /// √L(S) at the grid horizon.
    pub factor: f64,
    pub contraction_pass: bool,
    pub membership_pass: bool,
}

/// Ensemble norms from per-node estimates of the two slot terms.
fn ensemble_norm(scheme: &Scheme<'_>, a: &[Estimate], b: &[Estimate]) -> (WeightedSolutionNorm, f64) {
    let (mut ea, mut sa, mut eb, mut sb) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..a.len() {
        let w = scheme.weight(k);
        if w * a[k].mean > ea {
            ea = w * a[k].mean;
            sa = w * a[k].se;
        }
        if b[k].mean > eb {
            eb = b[k].mean;
            sb = b[k].se;
        }
    }
    (WeightedSolutionNorm::new(ea, eb), (sa * sa + sb * sb).sqrt())
}

/// Picard traces over an ensemble: Υ(S) membership of every iterate and
/// contraction of the Ξ(S) distances.
pub fn picard_ensemble(spec: &SemilinearSpec, grid: &TimeGrid, ensemble: &Ensemble, opts: &SemilinearOptions) -> Result<PicardEnsembleReport> {
    let certificate = spec.certificate()?;
    let scheme = Scheme::new(spec, grid, opts.mode)?;
    let nodes = scheme.nodes();
    let kk = opts.trace_iters.max(2);
    // Slots: iterates 0..=K (two terms per node), then distances 0..K.
    let it_off = |m: usize, s: usize| (2 * m + s) * nodes;
    let dist_base = 2 * (kk + 1) * nodes;
    let dist_off = |m: usize, s: usize| dist_base + (2 * m + s) * nodes;
    let slots = dist_base + 2 * kk * nodes;
    let trace_opts = SemilinearOptions {
        max_iter: kk,
        tol: -1.0,
        ..*opts
    };
    let acc = ensemble.try_map_reduce(
        || MomentAccumulator::new(slots),
        |acc, idx| {
            let drive = scheme.drive(ensemble.seed, idx);
            let mut row = vec![0.0; slots];
            let mut last = Vec::new();
            scheme.picard(&drive, 0, &drive.xi, &trace_opts, |m, y, next| {
                let diff: Vec<f64> = next.iter().zip(y).map(|(a, b)| a - b).collect();
                for k in 0..nodes {
                    let (a, b) = scheme.slot_terms(y, k);
                    row[it_off(m, 0) + k] = a;
                    row[it_off(m, 1) + k] = b;
                    let (a, b) = scheme.slot_terms(&diff, k);
                    row[dist_off(m, 0) + k] = a;
                    row[dist_off(m, 1) + k] = b;
                }
                last = next.to_vec();
            });
            for k in 0..nodes {
                let (a, b) = scheme.slot_terms(&last, k);
                row[it_off(kk, 0) + k] = a;
                row[it_off(kk, 1) + k] = b;
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(SpdeError::NonFinite("Picard trace".into()));
            }
            acc.push(&row);
            Ok(())
        },
        |a, b| a.merge(&b),
    )?;
    let est = |off: usize| -> Vec<Estimate> { (0..nodes).map(|k| acc.estimate(off + k)).collect() };
    let iterate_norms: Vec<WeightedSolutionNorm> = (0..=kk)
        .map(|m| ensemble_norm(&scheme, &est(it_off(m, 0)), &est(it_off(m, 1))).0)
        .collect();
    for (m, n) in iterate_norms.iter().enumerate() {
        for (term, value) in [("eta_term", n.eta_term), ("beta_term", n.beta_term)] {
            if value > certificate.kappa_sq {
                return Err(SpdeError::LeftAdmissibleSet {
                    iteration: m,
                    term: term.into(),
                    value,
                    bound: certificate.kappa_sq,
                });
            }
        }
    }
    let dist: Vec<(WeightedSolutionNorm, f64)> = (0..kk)
        .map(|m| ensemble_norm(&scheme, &est(dist_off(m, 0)), &est(dist_off(m, 1))))
        .collect();
    let distances: Vec<WeightedSolutionNorm> = dist.iter().map(|d| d.0).collect();
    let mut ratios = Vec::new();
    for m in 1..kk {
        let (num, sn) = (dist[m].0.total.powi(2), dist[m].1);
        let (den, sd) = (dist[m - 1].0.total.powi(2), dist[m - 1].1);
        // Ratios are meaningful only above the rounding floor.
        if num <= 1e-26 * iterate_norms[kk].total.powi(2) || den == 0.0 {
            break;
        }
        let r = (num / den).sqrt();
        let rel = 0.5 * ((sn / num).powi(2) + (sd / den).powi(2)).sqrt();
        ratios.push(Estimate { mean: r, se: r * rel });
    }
    let factor = certificate.factor(grid.t_end);
    let within_certificate = grid.t_end <= certificate.t_local * (1.0 + 1e-12);
    Ok(PicardEnsembleReport {
        contraction_pass: ratios.iter().all(|r| r.mean <= factor + 3.0 * r.se),
        membership_pass: true,
        certificate,
        horizon: grid.t_end,
        within_certificate,
        iterate_norms,
        distances,
        ratios,
        factor,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentProfileReport {
    pub certificate: HorizonCertificate,
    pub times: Vec<f64>,
    /// Ê|X|² + Ê|A^βX|² (Ê|X|² in the critical case).
    pub moment: Vec<Estimate>,
    pub moment_constant: f64,
    pub moment_pass: bool,
    /// Ê|A^ηX|² with its pointwise bound (empty in the critical case).
    pub eta_moment: Vec<Estimate>,
    pub eta_bound: Vec<f64>,
    pub eta_pass: bool,
    /// min over nodes of bound/empirical.
    pub moment_slack: f64,
    pub eta_slack: f64,
    pub pass: bool,
}

/// Per-node Ê|X|², Ê|A^βX|², Ê|A^ηX|², Ê|A^γX|² of the fixed point.
fn node_moments(spec: &SemilinearSpec, grid: &TimeGrid, ensemble: &Ensemble, mode: NoiseMode, gamma: f64) -> Result<Vec<Vec<Estimate>>> {
    let scheme = Scheme::new(spec, grid, mode)?;
    let (d, p, nodes) = (spec.d(), spec.p(), scheme.nodes());
    let factors = [
        vec![1.0; d],
        spec.operator.power_factors(spec.exponents.beta),
        spec.operator.power_factors(spec.exponents.eta),
        spec.operator.power_factors(gamma),
    ];
    let acc = ensemble.try_map_reduce(
        || MomentAccumulator::new(4 * nodes),
        |acc, idx| {
            let x = scheme.forward(&scheme.drive(ensemble.seed, idx));
            let mut row = vec![0.0; 4 * nodes];
            let mut buf = vec![0.0; d];
            for (j, f) in factors.iter().enumerate() {
                for k in 0..nodes {
                    for i in 0..d {
                        buf[i] = f[i] * x[k * d + i];
                    }
                    row[j * nodes + k] = lp_norm(&buf, p).powi(2);
                }
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(SpdeError::NonFinite("semilinear solution".into()));
            }
            acc.push(&row);
            Ok(())
        },
        |a, b| a.merge(&b),
    )?;
    Ok((0..4).map(|j| (0..nodes).map(|k| acc.estimate(j * nodes + k)).collect()).collect())
}

/// Moment bounds of the fixed point on [0, S] with S ≤ T_local.
pub fn moment_profile_check(spec: &SemilinearSpec, grid: &TimeGrid, ensemble: &Ensemble, mode: NoiseMode) -> Result<MomentProfileReport> {
    let certificate = spec.certificate()?;
    if grid.t_end > certificate.t_local * (1.0 + 1e-12) {
        return invalid(format!("grid horizon {} exceeds T_local = {}", grid.t_end, certificate.t_local));
    }
    let Exponents { eta, beta, .. } = spec.exponents;
    let inp = &certificate.inputs;
    let m = node_moments(spec, grid, ensemble, mode, eta)?;
    let lin = spec.linear_spec(spec.t_end)?;
    let lc = regularity_constants(&lin, &spec.norm_grid()?)?;
    let xi2 = spec.initial.moment_certificate(spec.p(), 2.0, None);
    let (cf, k2, f0, c) = (inp.c_f1 * inp.c_f1, certificate.kappa_sq, inp.f1_zero_sq, inp.c_e);
    let (f2, g) = (inp.f2_norm * inp.f2_norm, inp.g_norm * inp.g_norm);
    let (ie, ib) = (inp.iota_eta, inp.iota_beta);
    let b1 = beta_fn(1.0 + 2.0 * beta - 2.0 * eta, 1.0 - 2.0 * eta);
    let bb = beta_fn(1.0 + 2.0 * beta - 2.0 * eta, 1.0 - 2.0 * beta);
    let times = grid.nodes();
    let bound_at = |t: f64| -> f64 {
        let lin = 2.0 * moment_bound(&lin, &lc, xi2, t);
        if spec.critical {
            lin + 6.0 * cf * k2 * t.powf(2.0 * (1.0 - eta)) / (1.0 - 2.0 * eta) + 6.0 * (cf * k2 + f0) * t * t
        } else {
            lin + 6.0 * cf * k2 * t.powf(2.0 * (1.0 + beta - eta)) / (1.0 + 2.0 * beta - 2.0 * eta)
                + 6.0 * (cf * k2 + f0) * t * t
                + 4.0 * inp.xi_sq
                + 4.0 * ib * ib * f2 * beta_fn(beta, 1.0 - beta).powi(2)
                + 4.0 * c * ib * ib * g * beta_fn(2.0 * beta, 1.0 - 2.0 * beta)
                + 12.0 * ib * ib * (cf * k2 * bb * t.powf(2.0 * (1.0 - eta)) + (cf * k2 + f0) / (1.0 - 2.0 * beta) * t.powf(2.0 * (1.0 - beta)))
        }
    };
    let moment_constant = times.iter().map(|&t| bound_at(t)).fold(0.0, f64::max);
    let moment: Vec<Estimate> = (0..times.len())
        .map(|k| {
            if spec.critical {
                m[0][k]
            } else {
                Estimate {
                    mean: m[0][k].mean + m[1][k].mean,
                    se: m[0][k].se + m[1][k].se,
                }
            }
        })
        .collect();
    let moment_slack = moment.iter().map(|e| moment_constant / e.mean).fold(f64::INFINITY, f64::min);
    let moment_pass = moment.iter().all(|e| e.mean <= moment_constant);
    let (eta_moment, eta_bound) = if spec.critical {
        (Vec::new(), Vec::new())
    } else {
        let iab = inp.iota_eta_beta;
        let bound: Vec<f64> = times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return f64::INFINITY;
                }
                4.0 * iab * iab * inp.xi_sq * t.powf(-2.0 * (eta - beta))
                    + 4.0 * ie * ie * f2 * beta_fn(beta, 1.0 - eta).powi(2) * t.powf(2.0 * (beta - eta))
                    + 12.0
                        * ie
                        * ie
                        * (cf * k2 * b1 * t.powf(2.0 * (1.0 + beta - 2.0 * eta)) + (cf * k2 + f0) / (1.0 - 2.0 * eta) * t.powf(2.0 * (1.0 - eta)))
                    + 4.0 * c * ie * ie * g * beta_fn(2.0 * beta, 1.0 - 2.0 * eta) * t.powf(2.0 * (beta - eta))
            })
            .collect();
        (m[2].clone(), bound)
    };
    let eta_slack = eta_moment
        .iter()
        .zip(&eta_bound)
        .skip(1)
        .map(|(e, b)| b / e.mean)
        .fold(f64::INFINITY, f64::min);
    let eta_pass = eta_moment.iter().zip(&eta_bound).all(|(e, b)| e.mean <= *b);
    Ok(MomentProfileReport {
        pass: moment_pass && eta_pass,
        certificate,
        times,
        moment,
        moment_constant,
        moment_pass,
        eta_moment,
        eta_bound,
        eta_pass,
        moment_slack,
        eta_slack,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoreRegularReport {
    pub gamma: f64,
    /// ϱ = max{1 − η − γ, η − β}.
    pub varrho: f64,
    pub times: Vec<f64>,
    /// Ê|X|² + t^{2(γ−β)}Ê|A^γX|².
    pub gamma_profile: Vec<f64>,
    pub gamma_constant: f64,
    /// Log-log slope of the γ profile on the first eighth of the grid.
    pub gamma_slope: f64,
    pub eta_moment: Vec<Estimate>,
    /// Log-log slope of Ê|A^ηX|², to be ≥ −2ϱ.
    pub eta_slope: f64,
    pub gamma_pass: bool,
    pub eta_pass: bool,
    pub pass: bool,
}

/// Slope tolerance of the small-time profile fits.
pub const SLOPE_TOL: f64 = 0.05;

fn small_time_slope(times: &[f64], values: &[f64]) -> f64 {
    let hi = (times.len() / 8).max(4);
    let (x, y): (Vec<f64>, Vec<f64>) = (1..hi.min(times.len()))
        .filter(|&k| values[k] > 0.0)
        .map(|k| (times[k].ln(), values[k].ln()))
        .unzip();
    linear_fit(&x, &y).slope
}

/// Small-time profiles for data in F^{γ,σ} × D(A^γ).
pub fn more_regular_check(spec: &SemilinearSpec, grid: &TimeGrid, ensemble: &Ensemble, mode: NoiseMode) -> Result<MoreRegularReport> {
    let Exponents { eta, beta, gamma, .. } = spec.exponents;
    let gamma = match gamma {
        Some(g) => g,
        None => return invalid("more_regular_check needs the exponent γ"),
    };
    let varrho = (1.0 - eta - gamma).max(eta - beta);
    let m = node_moments(spec, grid, ensemble, mode, gamma)?;
    let times = grid.nodes();
    let gamma_profile: Vec<f64> = (0..times.len())
        .map(|k| {
            m[0][k].mean
                + if k == 0 {
                    0.0
                } else {
                    times[k].powf(2.0 * (gamma - beta)) * m[3][k].mean
                }
        })
        .collect();
    let gamma_constant = gamma_profile.iter().copied().fold(0.0, f64::max);
    let gamma_slope = small_time_slope(&times, &gamma_profile);
    let eta_values: Vec<f64> = m[2].iter().map(|e| e.mean).collect();
    let eta_slope = small_time_slope(&times, &eta_values);
    let gamma_pass = gamma_slope >= -SLOPE_TOL && gamma_constant.is_finite();
    let eta_pass = eta_slope >= -2.0 * varrho - SLOPE_TOL;
    Ok(MoreRegularReport {
        gamma,
        varrho,
        times,
        gamma_profile,
        gamma_constant,
        gamma_slope,
        eta_moment: m[2].clone(),
        eta_slope,
        gamma_pass,
        eta_pass,
        pass: gamma_pass && eta_pass,
    })
}

/// Radii of B₁ (F₂ in F^{β,σ}), B₂ (G in F^{β+1/2,σ}) and B_A (E|A^βξ|² ≤ r3²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Balls {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl Balls {
    pub fn check(&self, spec: &SemilinearSpec) -> Result<()> {
        let (f, g, x) = (spec.f2_norm()?, spec.g_norm()?, spec.xi_sq());
        if f > self.r1 {
            return Err(SpdeError::OutsideBall(format!("|F₂| = {f} > R₁ = {}", self.r1)));
        }
        if g > self.r2 {
            return Err(SpdeError::OutsideBall(format!("|G| = {g} > R₂ = {}", self.r2)));
        }
        if x > self.r3 * self.r3 {
            return Err(SpdeError::OutsideBall(format!("E|A^βξ|² = {x} > R₃² = {}", self.r3 * self.r3)));
        }
        Ok(())
    }
}

/// Bootstrap factors k(t) and k₂(t).
fn bootstrap_factors(inp: &CertificateInputs, t: f64) -> (f64, f64) {
    let (eta, beta) = (inp.eta, inp.beta);
    let cf = inp.c_f1 * inp.c_f1;
    let (ie, ib) = (inp.iota_eta, inp.iota_beta);
    let k = 8.0
        * cf
        * (ib * ib * beta_fn(1.0 - 2.0 * eta, 1.0 - 2.0 * beta) * t.powf(2.0 * (1.0 - beta))
            + ie * ie * beta_fn(1.0 - 2.0 * eta, 1.0 - 2.0 * eta) * t.powf(2.0 * (1.0 - eta)));
    let k2 = 8.0
        * cf
        * (ie * ie * beta_fn(1.0 + 2.0 * beta - 2.0 * eta, 1.0 - 2.0 * eta) * t.powf(2.0 * (1.0 - eta))
            + ib * ib * beta_fn(1.0 + 2.0 * beta - 2.0 * eta, 1.0 - 2.0 * beta) * t.powf(2.0 * (1.0 - beta)));
    (k, k2)
}

/// Largest bootstrap factor admitted on the dependence horizon.
pub const BOOTSTRAP_MAX: f64 = 0.5;

/// T_{B₁,B₂,B_A} from the ball radii, shortened so that k, k₂ ≤ 1/2.
pub fn dependence_horizon(spec: &SemilinearSpec, balls: &Balls) -> Result<(HorizonCertificate, f64)> {
    if spec.critical {
        return invalid("dependence bounds are stated for the noncritical case");
    }
    let mut inp = spec.certificate_inputs()?;
    inp.f2_norm = balls.r1;
    inp.g_norm = balls.r2;
    inp.xi_sq = balls.r3 * balls.r3;
    let cert = kappa_and_horizon(&inp);
    let ok = |t: f64| {
        let (k, k2) = bootstrap_factors(&inp, t);
        k <= BOOTSTRAP_MAX && k2 <= BOOTSTRAP_MAX
    };
    let s = bisect_last_true(ok, 0.0, cert.t_local, HORIZON_TOL);
    Ok((cert, s))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataDifferences {
    pub xi_sq: f64,
    pub xi_beta_sq: f64,
    pub f2_sq: f64,
    pub g_sq: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DependenceCheckReport {
    pub ball_horizon: f64,
    pub horizon: f64,
    pub bootstrap: (f64, f64),
    pub differences: DataDifferences,
    pub times: Vec<f64>,
    pub lhs22: Vec<f64>,
    pub rhs22: Vec<f64>,
    pub c22: f64,
    pub lhs23: Vec<f64>,
    pub rhs23: Vec<f64>,
    pub c23: f64,
    pub max_ratio22: f64,
    pub max_ratio23: f64,
    pub pass: bool,
}

fn same_problem(a: &SemilinearSpec, b: &SemilinearSpec) -> bool {
    a.operator.eigenvalues() == b.operator.eigenvalues()
        && a.f1 == b.f1
        && a.exponents == b.exponents
        && a.critical == b.critical
        && a.t_end == b.t_end
        && a.norm.p == b.norm.p
}

/// Per-node Ê|ΔX|², Ê|A^ηΔX|², Ê|A^βΔX|² of coupled solutions, then
/// Ê|Δξ|², Ê|A^βΔξ|².
fn coupled_differences(a: &SemilinearSpec, others: &[&SemilinearSpec], grid: &TimeGrid, ensemble: &Ensemble) -> Result<Vec<Vec<Estimate>>> {
    let sa = Scheme::new(a, grid, NoiseMode::Increment)?;
    let sb: Vec<Scheme<'_>> = others.iter().map(|s| Scheme::new(s, grid, NoiseMode::Increment)).collect::<Result<_>>()?;
    let (d, p, nodes) = (a.d(), a.p(), sa.nodes());
    let per = 3 * nodes + 2;
    let ef = a.operator.power_factors(a.exponents.eta);
    let bf = a.operator.power_factors(a.exponents.beta);
    let acc = ensemble.try_map_reduce(
        || MomentAccumulator::new(per * others.len()),
        |acc, idx| {
            let x = sa.forward(&sa.drive(ensemble.seed, idx));
            let xi = a.initial.sample(ensemble.seed, idx);
            let mut row = vec![0.0; per * others.len()];
            let mut buf = vec![0.0; d];
            let sq = |f: &[f64], v: &[f64], buf: &mut Vec<f64>| -> f64 {
                for i in 0..d {
                    buf[i] = f[i] * v[i];
                }
                lp_norm(buf, p).powi(2)
            };
            for (j, s) in sb.iter().enumerate() {
                let drive = s.drive(ensemble.seed, idx);
                let y = s.forward(&drive);
                let diff: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u - v).collect();
                let base = j * per;
                for k in 0..nodes {
                    let v = &diff[k * d..(k + 1) * d];
                    row[base + k] = lp_norm(v, p).powi(2);
                    row[base + nodes + k] = sq(&ef, v, &mut buf);
                    row[base + 2 * nodes + k] = sq(&bf, v, &mut buf);
                }
                let dxi: Vec<f64> = xi.iter().zip(&drive.xi).map(|(u, v)| u - v).collect();
                row[base + 3 * nodes] = lp_norm(&dxi, p).powi(2);
                row[base + 3 * nodes + 1] = sq(&bf, &dxi, &mut buf);
            }
            acc.push(&row);
            Ok(())
        },
        |x, y| x.merge(&y),
    )?;
    Ok((0..others.len()).map(|j| (0..per).map(|s| acc.estimate(j * per + s)).collect()).collect())
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// Both dependence inequalities on the grid for a coupled pair of problems
/// differing in (F₂, G, ξ).
pub fn dependence_check(
    spec: &SemilinearSpec,
    other: &SemilinearSpec,
    balls: &Balls,
    grid: &TimeGrid,
    ensemble: &Ensemble,
) -> Result<DependenceCheckReport> {
    if !same_problem(spec, other) {
        return invalid("dependence pair must share A, F₁, exponents, T and p");
    }
    balls.check(spec)?;
    balls.check(other)?;
    let (cert, ball_horizon) = dependence_horizon(spec, balls)?;
    if grid.t_end > ball_horizon * (1.0 + 1e-12) {
        return invalid(format!("grid horizon {} exceeds the dependence horizon {ball_horizon}", grid.t_end));
    }
    let inp = &cert.inputs;
    let Exponents { eta, beta, sigma, .. } = spec.exponents;
    let ng = spec.norm_grid()?;
    let (d, p) = (spec.d(), spec.p());
    let df = difference_norm(&spec.f2, &other.f2, &ng, d, beta, sigma, p)?.powi(2);
    let dg = difference_norm(&spec.g, &other.g, &ng, d, beta + 0.5, sigma, p)?.powi(2);
    let est = coupled_differences(spec, &[other], grid, ensemble)?.remove(0);
    let nodes = grid.steps + 1;
    let differences = DataDifferences {
        xi_sq: est[3 * nodes].mean,
        xi_beta_sq: est[3 * nodes + 1].mean,
        f2_sq: df,
        g_sq: dg,
    };
    let dx = differences.xi_sq;
    let dbx = differences.xi_beta_sq;
    if dx == 0.0 && df == 0.0 && dg == 0.0 && (0..3 * nodes).any(|s| est[s].mean != 0.0) {
        return Err(SpdeError::CouplingBug);
    }
    let c = inp.c_e;
    let cf = inp.c_f1 * inp.c_f1;
    let (ie, ib, iab) = (inp.iota_eta, inp.iota_beta, inp.iota_eta_beta);
    let bnd22 = |t: f64| -> f64 {
        let (k, _) = bootstrap_factors(inp, t);
        let a = 4.0 * (ib * ib * t.powf(2.0 * (eta - beta)) + ie * ie) * dx
            + 4.0
                * (ib * ib * beta_fn(beta, 1.0 - beta).powi(2) * t.powf(2.0 * eta) + ie * ie * beta_fn(beta, 1.0 - eta).powi(2) * t.powf(2.0 * beta))
                * df
            + 4.0
                * c
                * (ib * ib * beta_fn(2.0 * beta, 1.0 - 2.0 * beta) * t.powf(2.0 * eta)
                    + ie * ie * beta_fn(2.0 * beta, 1.0 - 2.0 * eta) * t.powf(2.0 * beta))
                * dg;
        let q = a / (1.0 - k);
        let plain = 4.0 * dx
            + 4.0 * beta_fn(beta, 1.0).powi(2) * t.powf(2.0 * beta) * df
            + 4.0 * c * beta_fn(2.0 * beta, 1.0) * t.powf(2.0 * beta) * dg
            + 8.0 * cf * t.powf(2.0 * (1.0 - eta)) * q / (1.0 - 2.0 * eta);
        q + plain
    };
    let bnd23 = |t: f64| -> f64 {
        let (_, k2) = bootstrap_factors(inp, t);
        let a = 4.0 * iab * iab * dbx
            + 4.0 * ie * ie * beta_fn(beta, 1.0 - eta).powi(2) * df
            + 4.0 * c * ie * ie * beta_fn(2.0 * beta, 1.0 - 2.0 * eta) * dg
            + t.powf(2.0 * (eta - beta))
                * (4.0 * dbx
                    + 4.0 * ib * ib * beta_fn(beta, 1.0 - beta).powi(2) * df
                    + 4.0 * c * ib * ib * beta_fn(2.0 * beta, 1.0 - 2.0 * beta) * dg);
        a / (1.0 - k2)
    };
    let times = grid.nodes();
    let br22 = |t: f64| dx + t.powf(2.0 * beta) * (df + dg);
    let br23 = dbx + df + dg;
    let sup_ratio = |f: &dyn Fn(f64) -> f64, g: &dyn Fn(f64) -> f64| -> f64 {
        times
            .iter()
            .skip(1)
            .map(|&t| if g(t) > 0.0 { f(t) / g(t) } else { 0.0 })
            .fold(0.0, f64::max)
    };
    let c22 = sup_ratio(&bnd22, &br22);
    let c23 = sup_ratio(&bnd23, &|_| br23);
    let weighted = |k: usize, e: f64| -> f64 {
        if k == 0 {
            0.0
        } else {
            times[k].powf(e) * (est[nodes + k].mean + est[2 * nodes + k].mean)
        }
    };
    let lhs22: Vec<f64> = (0..nodes).map(|k| weighted(k, 2.0 * eta) + est[k].mean).collect();
    let lhs23: Vec<f64> = (0..nodes).map(|k| weighted(k, 2.0 * (eta - beta))).collect();
    let rhs22: Vec<f64> = times.iter().map(|&t| c22 * br22(t)).collect();
    let rhs23: Vec<f64> = vec![c23 * br23; nodes];
    let max_ratio22 = lhs22.iter().zip(&rhs22).map(|(l, r)| ratio(*l, *r)).fold(0.0, f64::max);
    let max_ratio23 = lhs23.iter().zip(&rhs23).map(|(l, r)| ratio(*l, *r)).fold(0.0, f64::max);
    Ok(DependenceCheckReport {
        ball_horizon,
        horizon: grid.t_end,
        bootstrap: bootstrap_factors(inp, grid.t_end),
        differences,
        times,
        lhs22,
        rhs22,
        c22,
        lhs23,
        rhs23,
        c23,
        pass: max_ratio22 <= 1.0 && max_ratio23 <= 1.0,
        max_ratio22,
        max_ratio23,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub epsilons: Vec<f64>,
    /// sup_t of the left side of the first dependence inequality.
    pub response: Vec<f64>,
    pub fit: LinearFit,
    pub exponent: f64,
    pub pass: bool,
}

/// Tolerance on the linear-response exponent.
pub const SWEEP_TOL: f64 = 0.1;

/// Response of the solution to F₂ → (1 + ε)F₂ over a sweep of ε.
pub fn epsilon_sweep(spec: &SemilinearSpec, epsilons: &[f64], grid: &TimeGrid, ensemble: &Ensemble) -> Result<SweepReport> {
    if spec.f2.is_zero() {
        return invalid("the sweep needs a nonzero F₂");
    }
    if epsilons.len() < 2 || epsilons.iter().any(|e| !(*e > 0.0)) {
        return invalid("need at least two positive ε");
    }
    let perturbed: Vec<SemilinearSpec> = epsilons
        .iter()
        .map(|e| SemilinearSpec {
            f2: spec.f2.scaled(1.0 + e),
            ..spec.clone()
        })
        .collect();
    let refs: Vec<&SemilinearSpec> = perturbed.iter().collect();
    let est = coupled_differences(spec, &refs, grid, ensemble)?;
    let nodes = grid.steps + 1;
    let times = grid.nodes();
    let eta = spec.exponents.eta;
    let response: Vec<f64> = est
        .iter()
        .map(|e| {
            (0..nodes)
                .map(|k| {
                    e[k].mean
                        + if k == 0 {
                            0.0
                        } else {
                            times[k].powf(2.0 * eta) * (e[nodes + k].mean + e[2 * nodes + k].mean)
                        }
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let x: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = response.iter().map(|r| r.ln()).collect();
    let fit = linear_fit(&x, &y);
    Ok(SweepReport {
        epsilons: epsilons.to_vec(),
        exponent: fit.slope,
        pass: (fit.slope - 2.0).abs() <= SWEEP_TOL,
        response,
        fit,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainingReport {
    pub restart_node: usize,
    pub overlap_nodes: usize,
    pub iterations: (usize, usize),
    pub converged: bool,
    pub bitwise_equal: bool,
    pub max_abs_diff: f64,
}

/// Solves on the grid, restarts at the middle node from X there with the
/// same noise, and compares the two paths on the overlap.
pub fn chaining_check(spec: &SemilinearSpec, grid: &TimeGrid, seed: u64, path_index: u64, opts: &SemilinearOptions) -> Result<ChainingReport> {
    let scheme = Scheme::new(spec, grid, opts.mode)?;
    let opts = SemilinearOptions {
        tol: 0.0,
        max_iter: opts.max_iter.max(grid.steps + 2),
        ..*opts
    };
    let drive = scheme.drive(seed, path_index);
    let (x, it1, c1) = scheme.picard(&drive, 0, &drive.xi, &opts, |_, _, _| {});
    let d = spec.d();
    let k0 = grid.steps / 2;
    let x0 = x[k0 * d..(k0 + 1) * d].to_vec();
    let (y, it2, c2) = scheme.picard(&drive, k0, &x0, &opts, |_, _, _| {});
    let tail = k0 * d..x.len();
    let max_abs_diff = x[tail.clone()]
        .iter()
        .zip(&y[tail.clone()])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ChainingReport {
        restart_node: k0,
        overlap_nodes: grid.steps + 1 - k0,
        iterations: (it1, it2),
        converged: c1 && c2,
        bitwise_equal: x[tail.clone()] == y[tail],
        max_abs_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::solve_linear_additive;

    fn exps() -> Exponents {
        Exponents {
            eta: 0.4,
            beta: 0.35,
            sigma: 0.1,
            gamma: None,
        }
    }

    fn spec(f1: Nonlinearity, f2: Profile, g: Profile, xi: Vec<f64>, critical: bool) -> SemilinearSpec {
        let d = xi.len();
        let op = SpectralOperator::dirichlet_laplacian_1d(d, 1.0).unwrap();
        SemilinearSpec::new(op, f1, f2, g, InitialLaw::Deterministic { value: xi }, exps(), critical, 1.0, 2.0).unwrap()
    }

    #[test]
    fn exponent_chain() {
        let ok = |eta, beta, sigma, gamma| Exponents { eta, beta, sigma, gamma }.validate().is_ok();
        assert!(ok(0.4, 0.35, 0.1, None));
        assert!(!ok(0.4, 0.45, 0.1, None));
        assert!(!ok(0.45, 0.3, 0.1, None));
        assert!(!ok(0.4, 0.35, 0.36, None));
        assert!(ok(0.4, 0.35, 0.1, Some(0.45)));
        assert!(!ok(0.4, 0.35, 0.1, Some(0.5)));
    }

    #[test]
    fn zero_lipschitz_caps_horizon() {
        let a = SpectralOperator::new(vec![1.0]).unwrap();
        let mut inp = CertificateInputs::from_operator(&a, 0.4, 0.35, false, 1.0);
        inp.f2_norm = 1.0;
        inp.g_norm = 1.0;
        inp.xi_sq = 1.0;
        let cert = kappa_and_horizon(&inp);
        assert!(cert.capped && cert.self_consistent);
        assert_eq!(cert.t_local, 1.0);
    }

    #[test]
    fn horizon_shrinks_with_data() {
        let a = SpectralOperator::new(vec![1.0]).unwrap();
        let mut inp = CertificateInputs::from_operator(&a, 0.4, 0.35, false, 1.0);
        inp.c_f1 = 1.0;
        inp.f2_norm = 1.0;
        inp.g_norm = 1.0;
        inp.xi_sq = 1.0;
        let base = kappa_and_horizon(&inp);
        inp.xi_sq = 2.0;
        let more = kappa_and_horizon(&inp);
        assert!(more.c1 > base.c1 && more.c2 > base.c2 && more.kappa > base.kappa);
        assert!(more.t_local <= base.t_local * (1.0 + 2.0 * HORIZON_TOL));
        assert!(base.self_consistent && !base.capped);
    }

    #[test]
    fn zero_nonlinearity_matches_linear() {
        let s = spec(
            Nonlinearity::Zero,
            Profile::Power { coef: 1.0, exponent: -0.5 },
            Profile::Constant { value: 1.0 },
            vec![0.3, -0.2, 0.1],
            false,
        );
        let grid = TimeGrid::new(0.5, 256).unwrap();
        let path = solve_semilinear(&s, &grid, 11, 4, &SemilinearOptions::default()).unwrap();
        let lin = solve_linear_additive(&s.linear_spec(0.5).unwrap(), &grid, 11, 4, NoiseMode::Increment).unwrap();
        let diff = path.x.flat().iter().zip(lin.x.flat()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
        assert_eq!(path.iterations, 2);
    }

    #[test]
    fn picard_fixed_point_is_forward_march() {
        let s = spec(
            Nonlinearity::SineEta { amplitude: 1.0, offset: 0.0 },
            Profile::Zero,
            Profile::Constant { value: 1.0 },
            vec![0.5, 0.5],
            false,
        );
        let grid = TimeGrid::new(0.25, 64).unwrap();
        let path = solve_semilinear(&s, &grid, 3, 0, &SemilinearOptions::default()).unwrap();
        assert!(path.converged);
        let fwd = forward_solution(&s, &grid, 3, 0, NoiseMode::Increment).unwrap();
        assert_eq!(path.x.flat(), fwd.flat());
    }

    #[test]
    fn chaining_is_bitwise() {
        let s = spec(
            Nonlinearity::SineEta { amplitude: 1.0, offset: 0.2 },
            Profile::Sine {
                amplitude: 1.0,
                frequency: 2.0,
            },
            Profile::Constant { value: 0.5 },
            vec![0.5, 0.1],
            false,
        );
        let grid = TimeGrid::new(0.25, 64).unwrap();
        let r = chaining_check(&s, &grid, 5, 2, &SemilinearOptions::default()).unwrap();
        assert!(r.converged && r.bitwise_equal, "{r:?}");
    }

    #[test]
    fn critical_flag_required() {
        let s = spec(Nonlinearity::Zero, Profile::Zero, Profile::Zero, vec![1.0], false);
        let grid = TimeGrid::new(0.1, 8).unwrap();
        assert!(solve_critical(&s, &grid, 0, 0, &SemilinearOptions::default()).is_err());
    }
}
