//! The state space E = (R^d, ℓ^p) and its martingale type 2 constants.

use crate::ensemble::Ensemble;
use crate::error::{invalid, Result, SpdeError};
use crate::special::gaussian_abs_moment;
use crate::stats::{ratio_estimate, Estimate};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub p: f64,
    pub d: usize,
}

impl NormSpec {
    pub fn new(p: f64, d: usize) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return invalid(format!("norm exponent p = {p} must satisfy p >= 2"));
        }
        if d == 0 {
            return invalid("dimension d must be at least 1");
        }
        Ok(NormSpec { p, d })
    }
}

/// A point of E. Coordinates are finite by construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VectorState(Vec<f64>);

impl VectorState {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(SpdeError::NonFinite("vector coordinates".into()));
        }
        Ok(VectorState(coords))
    }

    pub fn zeros(d: usize) -> Self {
        VectorState(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for VectorState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        VectorState::new(v).map_err(serde::de::Error::custom)
    }
}

/// c(E) of the martingale type 2 inequality and c_p(E) of the
/// Burkholder-type moment inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeConstants {
    pub c: f64,
    pub c_p: f64,
}

impl TypeConstants {
    pub fn new(c: f64, c_p: f64) -> Result<Self> {
        if !(c > 0.0) || !(c_p > 0.0) {
            return invalid("type constants must be positive");
        }
        Ok(TypeConstants { c, c_p })
    }

    /// c = p − 1 and c_p = E|Z|^p · d^{(p−2)/2}. The second value bounds
    /// E|∫φ dw|_p^p by c_p (∫|φ|_p² ds)^{p/2} for deterministic φ, since
    /// |x|_2 ≤ d^{1/2−1/p}|x|_p.
    pub fn default_for(spec: &NormSpec) -> Self {
        TypeConstants {
            c: spec.p - 1.0,
            c_p: gaussian_abs_moment(spec.p) * (spec.d as f64).powf((spec.p - 2.0) / 2.0),
        }
    }
}

/// x^q with fast paths for the common orders 2 and 4.
#[inline]
pub(crate) fn powq(x: f64, q: f64) -> f64 {
    if q == 2.0 {
        x * x
    } else if q == 4.0 {
        (x * x) * (x * x)
    } else {
        x.powf(q)
    }
}

#[inline]
pub(crate) fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[inline]
pub(crate) fn lp_diff_norm(x: &[f64], y: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    } else {
        x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// (Σ|x_i|^p)^{1/p}.
pub fn norm(x: &VectorState, spec: &NormSpec) -> Result<f64> {
    if x.dim() != spec.d {
        return Err(SpdeError::DimensionMismatch {
            expected: spec.d,
            got: x.dim(),
        });
    }
    Ok(lp_norm(x.coords(), spec.p))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MtypeReport {
    pub samples: u64,
    pub steps: usize,
    /// sup_n Ê|M_n|².
    pub sup_second_moment: f64,
    /// Node attaining the supremum.
    pub argmax_step: usize,
    /// Σ_n Ê|M_n − M_{n−1}|².
    pub increment_sum: f64,
    pub ratio: Estimate,
    pub candidate: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
struct MtypeAcc {
    count: u64,
    // per node: Σa, Σa², Σab
    sa: Vec<f64>,
    saa: Vec<f64>,
    sab: Vec<f64>,
    sb: f64,
    sbb: f64,
}

impl MtypeAcc {
    fn new(steps: usize) -> Self {
        MtypeAcc {
            count: 0,
            sa: vec![0.0; steps + 1],
            saa: vec![0.0; steps + 1],
            sab: vec![0.0; steps + 1],
            sb: 0.0,
            sbb: 0.0,
        }
    }

    fn push(&mut self, path: &[VectorState], p: f64) {
        let b: f64 = path.windows(2).map(|w| lp_diff_norm(w[1].coords(), w[0].coords(), p).powi(2)).sum();
        self.count += 1;
        self.sb += b;
        self.sbb += b * b;
        for (n, m) in path.iter().enumerate() {
            let a = lp_norm(m.coords(), p).powi(2);
            self.sa[n] += a;
            self.saa[n] += a * a;
            self.sab[n] += a * b;
        }
    }

    fn merge(&mut self, o: MtypeAcc) {
        self.count += o.count;
        self.sb += o.sb;
        self.sbb += o.sbb;
        for n in 0..self.sa.len() {
            self.sa[n] += o.sa[n];
            self.saa[n] += o.saa[n];
            self.sab[n] += o.sab[n];
        }
    }

    fn report(&self, steps: usize, candidate: f64) -> MtypeReport {
        let n = self.count as f64;
        let (argmax, _) = self
            .sa
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (i, v)| if *v > best.1 { (i, *v) } else { best });
        let ratio = ratio_estimate(self.count, self.sa[argmax], self.sb, self.saa[argmax], self.sbb, self.sab[argmax]);
        MtypeReport {
            samples: self.count,
            steps,
            sup_second_moment: self.sa[argmax] / n,
            argmax_step: argmax,
            increment_sum: self.sb / n,
            pass: ratio.mean <= candidate + 3.0 * ratio.se,
            ratio,
            candidate,
        }
    }
}

fn check_path(path: &[VectorState], steps: usize, spec: &NormSpec) -> Result<()> {
    if path.len() != steps + 1 {
        return invalid(format!("martingale path has {} nodes, expected {}", path.len(), steps + 1));
    }
    for m in path {
        if m.dim() != spec.d {
            return Err(SpdeError::DimensionMismatch {
                expected: spec.d,
                got: m.dim(),
            });
        }
    }
    Ok(())
}

/// Empirical M-type 2 ratio over an explicit list of martingale paths
/// M_0, …, M_n (all of equal length).
pub fn mtype2_empirical(samples: &[Vec<VectorState>], spec: &NormSpec, candidate: f64) -> Result<MtypeReport> {
    let first = samples.first().ok_or(SpdeError::EmptyEnsemble)?;
    let steps = first.len().saturating_sub(1);
    let mut acc = MtypeAcc::new(steps);
    for s in samples {
        check_path(s, steps, spec)?;
        acc.push(s, spec.p);
    }
    Ok(acc.report(steps, candidate))
}

/// Streaming variant: `generate(path_index)` returns one martingale path.
pub fn mtype2_empirical_with<G>(ensemble: &Ensemble, steps: usize, spec: &NormSpec, candidate: f64, generate: G) -> Result<MtypeReport>
where
    G: Fn(u64) -> Vec<VectorState> + Sync + Send,
{
    let acc = ensemble.try_map_reduce(
        || MtypeAcc::new(steps),
        |acc, i| {
            let path = generate(i);
            check_path(&path, steps, spec)?;
            acc.push(&path, spec.p);
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    Ok(acc.report(steps, candidate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pythagoras() {
        let s = NormSpec::new(2.0, 2).unwrap();
        assert_eq!(norm(&VectorState::new(vec![3.0, 4.0]).unwrap(), &s).unwrap(), 5.0);
        assert_eq!(norm(&VectorState::zeros(2), &s).unwrap(), 0.0);
    }

    #[test]
    fn four_norm() {
        let s = NormSpec::new(4.0, 4).unwrap();
        let v = norm(&VectorState::new(vec![1.0; 4]).unwrap(), &s).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(VectorState::new(vec![f64::NAN]).is_err());
        assert!(NormSpec::new(1.5, 2).is_err());
        let s = NormSpec::new(2.0, 3).unwrap();
        assert!(matches!(norm(&VectorState::zeros(2), &s), Err(SpdeError::DimensionMismatch { .. })));
    }

    #[test]
    fn single_step_ratio_is_one() {
        let s = NormSpec::new(2.0, 1).unwrap();
        let samples: Vec<Vec<VectorState>> = (1..50)
            .map(|i| vec![VectorState::zeros(1), VectorState::new(vec![i as f64 * 0.1 - 2.0]).unwrap()])
            .collect();
        let r = mtype2_empirical(&samples, &s, 1.0).unwrap();
        assert!((r.ratio.mean - 1.0).abs() < 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn empty_ensemble() {
        let s = NormSpec::new(2.0, 1).unwrap();
        assert_eq!(mtype2_empirical(&[], &s, 1.0).unwrap_err(), SpdeError::EmptyEnsemble);
    }
}
