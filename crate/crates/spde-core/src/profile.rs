//! Deterministic time profiles used for the forcing F(t) and noise
//! coefficient G(t) of additive equations, with exact integrals and the
//! product-integration rule for s^{β−1}-singular integrands.

use crate::brownian::TimeGrid;
use crate::error::Result;
use crate::holder::{fbeta_sigma_norm, WeightedHolderSample};
use serde::{Deserialize, Serialize};

/// Scalar profile replicated in every coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    Constant {
        value: f64,
    },
    /// coef · t^exponent.
    Power {
        coef: f64,
        exponent: f64,
    },
    /// amplitude · sin(frequency · t).
    Sine {
        amplitude: f64,
        frequency: f64,
    },
}

/// b^q − a^q without cancellation for 0 ≤ a < b.
fn pow_diff(a: f64, b: f64, q: f64) -> f64 {
    if a == 0.0 {
        return b.powf(q);
    }
    a.powf(q) * (q * ((b - a) / a).ln_1p()).exp_m1()
}

impl Profile {
    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Constant { value } => *value == 0.0,
            Profile::Power { coef, .. } => *coef == 0.0,
            Profile::Sine { amplitude, .. } => *amplitude == 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Power { coef, exponent } => {
                if t == 0.0 && *exponent == 0.0 {
                    *coef
                } else {
                    coef * t.powf(*exponent)
                }
            }
            Profile::Sine { amplitude, frequency } => amplitude * (frequency * t).sin(),
        }
    }

    /// t^{1−β}·f(t), with its exact limit at t = 0.
    pub fn weighted(&self, t: f64, beta: f64) -> f64 {
        if t > 0.0 {
            return t.powf(1.0 - beta) * self.eval(t);
        }
        match self {
            Profile::Power { coef, exponent } => {
                let e = exponent + 1.0 - beta;
                if *coef == 0.0 || e > 0.0 {
                    0.0
                } else if e == 0.0 {
                    *coef
                } else {
                    f64::INFINITY
                }
            }
            _ if beta < 1.0 => 0.0,
            other => other.eval(0.0),
        }
    }

    pub fn scaled(&self, factor: f64) -> Profile {
        match self {
            Profile::Zero => Profile::Zero,
            Profile::Constant { value } => Profile::Constant { value: value * factor },
            Profile::Power { coef, exponent } => Profile::Power {
                coef: coef * factor,
                exponent: *exponent,
            },
            Profile::Sine { amplitude, frequency } => Profile::Sine {
                amplitude: amplitude * factor,
                frequency: *frequency,
            },
        }
    }

    /// ∫_a^b f(s) ds.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value * (b - a),
            Profile::Power { coef, exponent } => coef * pow_diff(a, b, exponent + 1.0) / (exponent + 1.0),
            Profile::Sine { amplitude, frequency } => {
                if *frequency == 0.0 {
                    0.0
                } else {
                    amplitude * ((frequency * a).cos() - (frequency * b).cos()) / frequency
                }
            }
        }
    }

    /// (1/(b−a)) ∫_a^b f(s)² ds.
    pub fn mean_square(&self, a: f64, b: f64) -> f64 {
        let h = b - a;
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value * value,
            Profile::Power { coef, exponent } => coef * coef * pow_diff(a, b, 2.0 * exponent + 1.0) / (2.0 * exponent + 1.0) / h,
            Profile::Sine { amplitude, frequency } => {
                if *frequency == 0.0 {
                    return 0.0;
                }
                let anti = |s: f64| s / 2.0 - (2.0 * frequency * s).sin() / (4.0 * frequency);
                amplitude * amplitude * (anti(b) - anti(a)) / h
            }
        }
    }

    /// Step value on [a, b): the root mean square with the sign of the
    /// profile at the midpoint. Exact for the second moment of ∫ f dw.
    pub fn step_value(&self, a: f64, b: f64) -> f64 {
        let rms = self.mean_square(a, b).sqrt();
        if self.eval(0.5 * (a + b)) < 0.0 {
            -rms
        } else {
            rms
        }
    }

    /// ∫_a^b e^{−λ(b−s)} f(s) ds by product integration: f = s^{β−1}h with
    /// h(s) = s^{1−β}f(s); the product e^{−λ(b−s)}h(s) is interpolated
    /// linearly and integrated exactly against s^{β−1}.
    pub fn drift_panel(&self, lambda: f64, a: f64, b: f64, beta: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let h = b - a;
        let m0 = pow_diff(a, b, beta) / beta;
        let m1 = (pow_diff(a, b, beta + 1.0) / (beta + 1.0) - a * m0) / h;
        let ga = (-lambda * h).exp() * self.weighted(a, beta);
        let gb = self.weighted(b, beta);
        ga * m0 + (gb - ga) * m1
    }

    /// Samples on t_1..t_N of `grid`, replicated over d coordinates.
    pub fn holder_sample(&self, grid: &TimeGrid, d: usize, beta: f64, sigma: f64, p: f64) -> Result<WeightedHolderSample> {
        WeightedHolderSample::from_fn(grid, d, beta, sigma, p, |t| vec![self.eval(t); d])
    }

    /// Grid value of |f|_{F^{β,σ}}.
    pub fn fbeta_norm(&self, grid: &TimeGrid, d: usize, beta: f64, sigma: f64, p: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        Ok(fbeta_sigma_norm(&self.holder_sample(grid, d, beta, sigma, p)?).norm)
    }

    /// sup_{0<t≤T} |f(t)|·d^{1/p} on the grid nodes.
    pub fn sup_norm(&self, grid: &TimeGrid, d: usize, p: f64) -> f64 {
        (1..=grid.steps).map(|k| self.eval(grid.node(k)).abs()).fold(0.0, f64::max) * (d as f64).powf(1.0 / p)
    }
}

/// Sampled difference of two profiles as an F^{β,σ} sample.
pub fn difference_norm(a: &Profile, b: &Profile, grid: &TimeGrid, d: usize, beta: f64, sigma: f64, p: f64) -> Result<f64> {
    let s = WeightedHolderSample::from_fn(grid, d, beta, sigma, p, |t| vec![a.eval(t) - b.eval(t); d])?;
    Ok(fbeta_sigma_norm(&s).norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_integrals() {
        let p = Profile::Power { coef: 2.0, exponent: -0.5 };
        assert!((p.integral(0.0, 1.0) - 4.0).abs() < 1e-14);
        let q = Profile::Power { coef: 2.0, exponent: -0.25 };
        assert!((q.mean_square(0.0, 1.0) - 8.0).abs() < 1e-13);
        let s = Profile::Sine {
            amplitude: 1.0,
            frequency: 1.0,
        };
        assert!((s.integral(0.0, std::f64::consts::PI) - 2.0).abs() < 1e-14);
        assert!((s.mean_square(0.0, std::f64::consts::PI) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn weighted_limits() {
        let p = Profile::Power { coef: 1.0, exponent: -0.5 };
        assert_eq!(p.weighted(0.0, 0.5), 1.0);
        assert_eq!(p.weighted(0.0, 0.75), f64::INFINITY);
        assert_eq!(p.weighted(0.0, 0.25), 0.0);
    }

    #[test]
    fn drift_panel_constant_weight() {
        // λ = 0, f = s^{β−1}: exact ∫ s^{β−1}.
        let p = Profile::Power { coef: 1.0, exponent: -0.5 };
        let v = p.drift_panel(0.0, 0.0, 0.25, 0.5);
        assert!((v - 1.0).abs() < 1e-14);
    }
}
