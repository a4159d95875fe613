//! Kernel weights `σ(x, y)` with ellipticity `λ ≤ σ ≤ 1/λ`.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridDomain;

/// Number of node pairs sampled when checking a closed-form coefficient.
pub const ELLIPTICITY_SAMPLES: usize = 10_000;

/// `γ(x) = base + amplitude · exp(-|x - center|² / width²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

impl Gamma {
    pub fn constant(value: f64) -> Self {
        Gamma {
            base: value,
            amplitude: 0.0,
            center: Vec::new(),
            width: 1.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.amplitude == 0.0 {
            return self.base;
        }
        let r2: f64 = x
            .iter()
            .zip(self.center.iter().chain(std::iter::repeat(&0.0)))
            .map(|(a, c)| (a - c).powi(2))
            .sum();
        self.base + self.amplitude * (-r2 / (self.width * self.width)).exp()
    }

    fn bounds(&self) -> (f64, f64) {
        (
            self.base + self.amplitude.min(0.0),
            self.base + self.amplitude.max(0.0),
        )
    }
}

/// Named coefficient families. `Tabulated` only records where a table lives;
/// it is loaded with [`PairTable::read_le`] and wrapped by [`Coefficient::tabulated`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CoefficientFamily {
    Constant {
        value: f64,
    },
    /// `γ(x)^{1/2} γ(y)^{1/2}`, whose diagonal is `γ`.
    Separable {
        gamma: Gamma,
    },
    /// `base + amplitude · sin(frequency·x₁) sin(frequency·y₁)`.
    Sinusoidal {
        base: f64,
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    /// `base(x, y) + shift`.
    Shifted {
        base: Box<CoefficientFamily>,
        shift: f64,
    },
    /// `base(x, y) + amplitude · (B(x - a)B(y - b) + B(y - a)B(x - b))` with
    /// `B(z) = exp(1 - 1/(1 - |z|²/radius²))` supported in the ball of `radius`.
    PairBump {
        base: Box<CoefficientFamily>,
        amplitude: f64,
        center_x: Vec<f64>,
        center_y: Vec<f64>,
        radius: f64,
    },
    Tabulated {
        path: String,
    },
}

fn unit_bump(z: &[f64], center: &[f64], radius: f64) -> f64 {
    let r2: f64 = z
        .iter()
        .zip(center.iter().chain(std::iter::repeat(&0.0)))
        .map(|(a, c)| (a - c).powi(2))
        .sum::<f64>()
        / (radius * radius);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

impl CoefficientFamily {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            CoefficientFamily::Constant { value } => *value,
            CoefficientFamily::Separable { gamma } => (gamma.eval(x) * gamma.eval(y)).sqrt(),
            CoefficientFamily::Sinusoidal {
                base,
                amplitude,
                frequency,
            } => base + amplitude * (frequency * x[0]).sin() * (frequency * y[0]).sin(),
            CoefficientFamily::Shifted { base, shift } => base.eval(x, y) + shift,
            CoefficientFamily::PairBump {
                base,
                amplitude,
                center_x,
                center_y,
                radius,
            } => {
                let b = unit_bump(x, center_x, *radius) * unit_bump(y, center_y, *radius)
                    + unit_bump(y, center_x, *radius) * unit_bump(x, center_y, *radius);
                base.eval(x, y) + amplitude * b
            }
            CoefficientFamily::Tabulated { .. } => f64::NAN,
        }
    }

    /// Analytic lower and upper bounds over all of `R^n × R^n`.
    pub fn bounds(&self) -> Result<(f64, f64)> {
        let b = match self {
            CoefficientFamily::Constant { value } => (*value, *value),
            CoefficientFamily::Separable { gamma } => gamma.bounds(),
            CoefficientFamily::Sinusoidal {
                base, amplitude, ..
            } => (base - amplitude.abs(), base + amplitude.abs()),
            CoefficientFamily::Shifted { base, shift } => {
                let (lo, hi) = base.bounds()?;
                (lo + shift, hi + shift)
            }
            CoefficientFamily::PairBump {
                base,
                amplitude,
                radius,
                ..
            } => {
                if !(*radius > 0.0) {
                    return Err(invalid("coefficient.radius", "must be positive"));
                }
                let (lo, hi) = base.bounds()?;
                (lo + 2.0 * amplitude.min(0.0), hi + 2.0 * amplitude.max(0.0))
            }
            CoefficientFamily::Tabulated { .. } => {
                return Err(invalid(
                    "coefficient",
                    "tabulated coefficients need a loaded table",
                ))
            }
        };
        if !(b.0 > 0.0) || !b.1.is_finite() {
            return Err(invalid(
                "coefficient",
                format!("family is not uniformly positive (bounds {:?})", b),
            ));
        }
        Ok(b)
    }
}

/// `σ` on ordered node pairs, row-major `M × M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    nodes: usize,
    values: Vec<f64>,
}

impl PairTable {
    pub fn new(nodes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nodes * nodes {
            return Err(Error::GridMismatch(format!(
                "table has {} entries, expected {}",
                values.len(),
                nodes * nodes
            )));
        }
        Ok(Self { nodes, values })
    }

    pub fn from_family(domain: &GridDomain, family: &CoefficientFamily) -> Self {
        let m = domain.len();
        let mut values = Vec::with_capacity(m * m);
        for i in 0..m {
            let x = domain.coord(i);
            for j in 0..m {
                values.push(family.eval(&x, &domain.coord(j)));
            }
        }
        Self { nodes: m, values }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nodes + j]
    }

    /// Raw little-endian `f64` array.
    pub fn write_le<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_le<R: Read>(nodes: usize, mut input: R) -> std::io::Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() != nodes * nodes * 8 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("expected {} bytes, found {}", nodes * nodes * 8, bytes.len()),
            ));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { nodes, values })
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Closed(CoefficientFamily),
    Tabulated(Arc<PairTable>),
}

/// An elliptic coefficient: `λ ≤ σ(x, y) ≤ 1/λ`.
///
/// Continuity of `σ(x, ·)` near the diagonal point used for reconstruction is
/// assumed, not checked.
#[derive(Debug, Clone)]
pub struct Coefficient {
    kind: Kind,
    lambda: f64,
}

fn lambda_from_bounds(lo: f64, hi: f64) -> f64 {
    lo.min(1.0 / hi).min(1.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(invalid("lambda", "must lie in (0, 1]"))
    }
}

fn check_value(v: f64, lambda: f64) -> Result<()> {
    // relative slack for values sitting exactly on a bound
    let lower = lambda * (1.0 - 1e-14);
    let upper = (1.0 / lambda) * (1.0 + 1e-14);
    if v.is_finite() && v >= lower && v <= upper {
        Ok(())
    } else {
        Err(Error::NotElliptic {
            value: v,
            lower: lambda,
            upper: 1.0 / lambda,
        })
    }
}

impl Coefficient {
    pub fn constant(value: f64) -> Result<Self> {
        Self::closed_form(CoefficientFamily::Constant { value }, None)
    }

    /// `lambda = None` derives `λ = min(inf σ, 1/sup σ)` from the family bounds.
    pub fn closed_form(family: CoefficientFamily, lambda: Option<f64>) -> Result<Self> {
        let (lo, hi) = family.bounds()?;
        let lambda = match lambda {
            Some(l) => {
                check_lambda(l)?;
                check_value(lo, l)?;
                check_value(hi, l)?;
                l
            }
            None => lambda_from_bounds(lo, hi),
        };
        Ok(Self {
            kind: Kind::Closed(family),
            lambda,
        })
    }

    /// Wraps a table, verifying ellipticity on every entry.
    pub fn tabulated(table: PairTable, domain: &GridDomain, lambda: Option<f64>) -> Result<Self> {
        if table.nodes() != domain.len() {
            return Err(Error::GridMismatch(format!(
                "table for {} nodes, grid has {}",
                table.nodes(),
                domain.len()
            )));
        }
        let (lo, hi) = table
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(*v), hi.max(*v))
            });
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::NotElliptic {
                value: if lo > 0.0 { hi } else { lo },
                lower: 0.0,
                upper: f64::INFINITY,
            });
        }
        let lambda = match lambda {
            Some(l) => {
                check_lambda(l)?;
                for v in table.values() {
                    check_value(*v, l)?;
                }
                l
            }
            None => lambda_from_bounds(lo, hi),
        };
        Ok(Self {
            kind: Kind::Tabulated(Arc::new(table)),
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn family(&self) -> Option<&CoefficientFamily> {
        match &self.kind {
            Kind::Closed(f) => Some(f),
            Kind::Tabulated(_) => None,
        }
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kind, Kind::Tabulated(_))
    }

    /// Checks `λ ≤ σ ≤ 1/λ`: a full scan for tables, [`ELLIPTICITY_SAMPLES`]
    /// random node pairs for closed forms.
    pub fn check_ellipticity(&self, domain: &GridDomain, seed: u64) -> Result<()> {
        match &self.kind {
            Kind::Tabulated(t) => t.values().iter().try_for_each(|v| check_value(*v, self.lambda)),
            Kind::Closed(_) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = domain.len();
                (0..ELLIPTICITY_SAMPLES).try_for_each(|_| {
                    let i = rng.gen_range(0..m);
                    let j = rng.gen_range(0..m);
                    check_value(self.pair(domain, i, j), self.lambda)
                })
            }
        }
    }

    #[inline]
    pub fn pair(&self, domain: &GridDomain, i: usize, j: usize) -> f64 {
        match &self.kind {
            Kind::Closed(f) => f.eval(&domain.coord(i), &domain.coord(j)),
            Kind::Tabulated(t) => t.get(i, j),
        }
    }

    /// `σ(x0, x0)`; tables are read at the nearest node.
    pub fn diagonal(&self, domain: &GridDomain, x0: &[f64]) -> f64 {
        match &self.kind {
            Kind::Closed(f) => f.eval(x0, x0),
            Kind::Tabulated(t) => {
                let i = domain.nearest_node(x0);
                t.get(i, i)
            }
        }
    }

    /// `true` for coefficients equal to one everywhere.
    pub fn is_unit(&self) -> bool {
        matches!(self.kind, Kind::Closed(CoefficientFamily::Constant { value }) if value == 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, Region};

    fn domain() -> GridDomain {
        build_domain(
            1,
            3.0,
            0.25,
            Region::interval(-1.0, 1.0),
            Region::interval(1.5, 2.5),
        )
        .unwrap()
    }

    #[test]
    fn sinusoidal_lambda() {
        let c = Coefficient::closed_form(
            CoefficientFamily::Sinusoidal {
                base: 2.0,
                amplitude: 1.0,
                frequency: 1.0,
            },
            None,
        )
        .unwrap();
        assert!((c.lambda() - 1.0 / 3.0).abs() < 1e-15);
        c.check_ellipticity(&domain(), 7).unwrap();
        let x0 = [2.5];
        assert!((c.diagonal(&domain(), &x0) - (2.0 + 2.5f64.sin().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn separable_diagonal_is_gamma() {
        let g = Gamma {
            base: 1.5,
            amplitude: 0.3,
            center: vec![2.0],
            width: 0.7,
        };
        let fam = CoefficientFamily::Separable { gamma: g.clone() };
        for x in [-1.0, 0.3, 2.2] {
            assert!((fam.eval(&[x], &[x]) - g.eval(&[x])).abs() < 1e-14);
        }
        let c = Coefficient::closed_form(fam, None).unwrap();
        assert!((c.lambda() - 1.0 / 1.8).abs() < 1e-15);
    }

    #[test]
    fn declared_lambda_too_large_rejected() {
        let err = Coefficient::closed_form(CoefficientFamily::Constant { value: 3.0 }, Some(0.5))
            .unwrap_err();
        assert!(matches!(err, Error::NotElliptic { .. }));
        assert!(Coefficient::constant(-1.0).is_err());
    }

    #[test]
    fn pair_bump_leaves_far_pairs_alone() {
        let fam = CoefficientFamily::PairBump {
            base: Box::new(CoefficientFamily::Constant { value: 2.0 }),
            amplitude: 0.5,
            center_x: vec![0.0],
            center_y: vec![2.0],
            radius: 0.5,
        };
        assert_eq!(fam.eval(&[2.0], &[2.0]), 2.0);
        assert!((fam.eval(&[0.0], &[2.0]) - 2.5).abs() < 1e-15);
        assert_eq!(fam.eval(&[0.0], &[2.0]), fam.eval(&[2.0], &[0.0]));
    }

    #[test]
    fn table_round_trip_and_scan() {
        let d = domain();
        let fam = CoefficientFamily::Sinusoidal {
            base: 2.0,
            amplitude: 1.0,
            frequency: 1.0,
        };
        let t = PairTable::from_family(&d, &fam);
        let mut buf = Vec::new();
        t.write_le(&mut buf).unwrap();
        let back = PairTable::read_le(d.len(), buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let c = Coefficient::tabulated(back, &d, None).unwrap();
        c.check_ellipticity(&d, 0).unwrap();
        assert_eq!(c.pair(&d, 3, 9), fam.eval(&d.coord(3), &d.coord(9)));

        let mut bad = t.values().to_vec();
        bad[5] = -0.1;
        let bad = PairTable::new(d.len(), bad).unwrap();
        assert!(Coefficient::tabulated(bad, &d, None).is_err());
    }
}
