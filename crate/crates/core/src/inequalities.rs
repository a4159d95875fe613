//! Monte-Carlo probes of the vector inequalities behind strong monotonicity
//! of `ξ ↦ |ξ|^{p-2} ξ`:
//!
//! * `p ≥ 2`: `(F(x) - F(y))·(x - y) ≥ c_p |x - y|^p`
//! * `1 < p < 2`: `(F(x) - F(y))·(x - y) ≥ c_p |x - y|² / (|x| + |y|)^{2-p}`
//! * all `p`: `|F(x) - F(y)| ≤ C_p (|x| + |y|)^{p-2} |x - y|`
//!
//! The constants are existential; the probe records the empirical infimum of
//! the lower ratio and supremum of the upper ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tolerance for the scale-invariance check of every ratio.
pub const SCALE_INVARIANCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub p: f64,
    pub samples: usize,
    pub seed: u64,
    /// `true` when the lower ratio uses `|x - y|^p` (`p ≥ 2`).
    pub superquadratic: bool,
    pub lower_infimum: f64,
    pub upper_supremum: f64,
    pub non_finite: usize,
    /// Largest relative change of any ratio under `(x, y) → (αx, αy)`.
    pub max_scale_deviation: f64,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.non_finite == 0
            && self.lower_infimum > 0.0
            && self.upper_supremum.is_finite()
            && self.max_scale_deviation <= SCALE_INVARIANCE_TOL
    }
}

fn map(p: f64, x: &[f64], out: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let factor = if norm == 0.0 {
        0.0
    } else if p == 2.0 {
        1.0
    } else {
        norm.powf(p - 2.0)
    };
    for (o, v) in out.iter_mut().zip(x) {
        *o = factor * v;
    }
}

/// `(lower ratio, upper ratio)` for one pair.
fn ratios(p: f64, x: &[f64], y: &[f64]) -> (f64, f64) {
    let d = x.len();
    let mut fx = [0.0; 3];
    let mut fy = [0.0; 3];
    map(p, x, &mut fx[..d]);
    map(p, y, &mut fy[..d]);
    let mut inner = 0.0;
    let mut diff2 = 0.0;
    let mut fdiff2 = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for k in 0..d {
        let dx = x[k] - y[k];
        let df = fx[k] - fy[k];
        inner += df * dx;
        diff2 += dx * dx;
        fdiff2 += df * df;
        nx += x[k] * x[k];
        ny += y[k] * y[k];
    }
    let dist = diff2.sqrt();
    let sum_norms = nx.sqrt() + ny.sqrt();
    let lower = if p >= 2.0 {
        if p == 2.0 {
            inner / diff2
        } else {
            inner / dist.powf(p)
        }
    } else {
        inner * sum_norms.powf(2.0 - p) / diff2
    };
    let upper = if p == 2.0 {
        fdiff2.sqrt() / dist
    } else {
        fdiff2.sqrt() / (sum_norms.powf(p - 2.0) * dist)
    };
    (lower, upper)
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    10f64.powf(rng.gen_range(-6.0..6.0))
}

fn direction(rng: &mut ChaCha8Rng, d: usize, out: &mut [f64]) {
    loop {
        let mut n2 = 0.0;
        for o in out.iter_mut().take(d) {
            *o = StandardNormal.sample(rng);
            n2 += *o * *o;
        }
        if n2 > 0.0 {
            let n = n2.sqrt();
            out.iter_mut().take(d).for_each(|o| *o /= n);
            return;
        }
    }
}

/// Samples pairs in dimensions 1–3 with magnitudes spanning `1e-6 … 1e6`.
///
/// Even samples share one scale (`x, y = α·g`, Gaussian `g`); odd samples draw
/// independent log-uniform magnitudes and directions.
pub fn monotonicity_check(p: f64, sample_count: usize, seed: u64) -> Result<MonotonicityReport> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid("p", "p must exceed 1"));
    }
    if sample_count == 0 {
        return Err(invalid("samples", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower_inf = f64::INFINITY;
    let mut upper_sup: f64 = 0.0;
    let mut non_finite = 0;
    let mut max_dev: f64 = 0.0;
    let mut x = [0.0; 3];
    let mut y = [0.0; 3];
    let mut taken = 0;
    while taken < sample_count {
        let d = rng.gen_range(1..=3);
        if taken % 2 == 0 {
            let a = log_uniform(&mut rng);
            for k in 0..d {
                let gx: f64 = StandardNormal.sample(&mut rng);
                let gy: f64 = StandardNormal.sample(&mut rng);
                x[k] = a * gx;
                y[k] = a * gy;
            }
        } else {
            direction(&mut rng, d, &mut x);
            direction(&mut rng, d, &mut y);
            let (a, b) = (log_uniform(&mut rng), log_uniform(&mut rng));
            x.iter_mut().take(d).for_each(|v| *v *= a);
            y.iter_mut().take(d).for_each(|v| *v *= b);
        }
        if x[..d] == y[..d] {
            continue;
        }
        taken += 1;
        let (lo, up) = ratios(p, &x[..d], &y[..d]);
        if !lo.is_finite() || !up.is_finite() {
            non_finite += 1;
            continue;
        }
        lower_inf = lower_inf.min(lo);
        upper_sup = upper_sup.max(up);

        let alpha = 10f64.powf(rng.gen_range(-3.0..3.0));
        let xs: Vec<f64> = x[..d].iter().map(|v| alpha * v).collect();
        let ys: Vec<f64> = y[..d].iter().map(|v| alpha * v).collect();
        let (lo2, up2) = ratios(p, &xs, &ys);
        let dev = ((lo2 - lo) / lo).abs().max(((up2 - up) / up).abs());
        max_dev = max_dev.max(if dev.is_finite() { dev } else { f64::INFINITY });
    }
    Ok(MonotonicityReport {
        p,
        samples: sample_count,
        seed,
        superquadratic: p >= 2.0,
        lower_infimum: lower_inf,
        upper_supremum: upper_sup,
        non_finite,
        max_scale_deviation: max_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_case_is_exact() {
        let r = monotonicity_check(2.0, 20_000, 1).unwrap();
        assert!((r.lower_infimum - 1.0).abs() < 1e-12);
        assert!((r.upper_supremum - 1.0).abs() < 1e-12);
        assert!(r.holds());
    }

    #[test]
    fn one_dimensional_extremes() {
        // y = -x in 1D: lower ratio 2·2|x|^{p-1}|x| / (2|x|)^p = 2^{2-p}
        let (lo, _) = ratios(4.0, &[1.0], &[-1.0]);
        assert!((lo - 0.25).abs() < 1e-15);
        let (lo, up) = ratios(1.5, &[3.0], &[3.0 + 1e-3]);
        assert!(lo > 0.0 && up.is_finite());
    }

    #[test]
    fn sub_and_superquadratic_bounds_hold() {
        for p in [1.2, 1.5, 3.0, 4.0] {
            let r = monotonicity_check(p, 50_000, 9).unwrap();
            assert!(r.holds(), "{r:?}");
        }
    }

    #[test]
    fn invalid_arguments() {
        assert!(monotonicity_check(1.0, 10, 0).is_err());
        assert!(monotonicity_check(3.0, 0, 0).is_err());
    }
}
