//! Streaming sample statistics used by every ensemble reduction.

use serde::{Deserialize, Serialize};

/// Mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Per-slot running sums of x and x². Slots are typically time nodes.
#[derive(Clone, Debug, Default)]
pub struct MomentAccumulator {
    pub count: u64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(slots: usize) -> Self {
        MomentAccumulator {
            count: 0,
            sum: vec![0.0; slots],
            sumsq: vec![0.0; slots],
        }
    }

    pub fn slots(&self) -> usize {
        self.sum.len()
    }

    /// Adds one sample for every slot.
    pub fn push(&mut self, xs: &[f64]) {
        debug_assert_eq!(xs.len(), self.sum.len());
        self.count += 1;
        for ((s, q), x) in self.sum.iter_mut().zip(self.sumsq.iter_mut()).zip(xs) {
            *s += x;
            *q += x * x;
        }
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
    }

    pub fn mean(&self, slot: usize) -> f64 {
        self.sum[slot] / self.count as f64
    }

    pub fn estimate(&self, slot: usize) -> Estimate {
        let n = self.count as f64;
        let mean = self.sum[slot] / n;
        let var = if self.count > 1 {
            ((self.sumsq[slot] - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate { mean, se: (var / n).sqrt() }
    }

    pub fn estimates(&self) -> Vec<Estimate> {
        (0..self.slots()).map(|k| self.estimate(k)).collect()
    }
}

/// Paired sums for a ratio of means a/b with a delta-method standard error.
#[derive(Clone, Debug, Default)]
pub struct RatioAccumulator {
    pub count: u64,
    sa: f64,
    sb: f64,
    saa: f64,
    sbb: f64,
    sab: f64,
}

impl RatioAccumulator {
    pub fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        self.sa += a;
        self.sb += b;
        self.saa += a * a;
        self.sbb += b * b;
        self.sab += a * b;
    }

    pub fn merge(&mut self, o: &RatioAccumulator) {
        self.count += o.count;
        self.sa += o.sa;
        self.sb += o.sb;
        self.saa += o.saa;
        self.sbb += o.sbb;
        self.sab += o.sab;
    }

    pub fn ratio(&self) -> Estimate {
        ratio_estimate(self.count, self.sa, self.sb, self.saa, self.sbb, self.sab)
    }

    pub fn numerator(&self) -> f64 {
        self.sa / self.count as f64
    }

    pub fn denominator(&self) -> f64 {
        self.sb / self.count as f64
    }
}

pub(crate) fn ratio_estimate(count: u64, sa: f64, sb: f64, saa: f64, sbb: f64, sab: f64) -> Estimate {
    let n = count as f64;
    let ma = sa / n;
    let mb = sb / n;
    let r = ma / mb;
    if count < 2 {
        return Estimate { mean: r, se: 0.0 };
    }
    let va = (saa / n - ma * ma) * n / (n - 1.0);
    let vb = (sbb / n - mb * mb) * n / (n - 1.0);
    let cab = (sab / n - ma * mb) * n / (n - 1.0);
    let var = (va / (mb * mb) - 2.0 * ma * cab / (mb * mb * mb) + ma * ma * vb / (mb * mb * mb * mb)) / n;
    Estimate {
        mean: r,
        se: var.max(0.0).sqrt(),
    }
}

/// Ordinary least squares fit y = a + b x, with the slope standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let slope_se = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    LinearFit {
        intercept,
        slope,
        slope_se,
        r_squared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_mean_and_se() {
        let mut acc = MomentAccumulator::new(1);
        for x in [1.0, 2.0, 3.0, 4.0] {
            acc.push(&[x]);
        }
        let e = acc.estimate(0);
        assert!((e.mean - 2.5).abs() < 1e-15);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn merge_matches_sequential() {
        let mut a = MomentAccumulator::new(2);
        let mut b = MomentAccumulator::new(2);
        let mut all = MomentAccumulator::new(2);
        for i in 0..10 {
            let x = [i as f64, (i * i) as f64];
            if i < 4 {
                a.push(&x)
            } else {
                b.push(&x)
            }
            all.push(&x);
        }
        a.merge(&b);
        assert_eq!(a.estimates(), all.estimates());
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_se < 1e-12);
    }
}
