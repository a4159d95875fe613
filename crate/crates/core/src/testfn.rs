//! Concentrating exterior data: tensor-product bumps `Ψ_N(x) = Ψ(N(x - x0)/r0)`
//! and their seminorm-normalized versions `Φ_N = Ψ_N / [Ψ_N]_{W^{s,p}}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridDomain, GridFunction};
use crate::quadrature::gagliardo_seminorm;

/// Minimum number of grid nodes per axis strictly inside a bump support.
pub const MIN_NODES_PER_AXIS: usize = 8;

/// One-dimensional profile `ψ`, smooth with support in `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpProfile {
    /// `exp(-1/(1 - t²))`
    #[default]
    Mollifier,
    /// `exp(-a/(1 - t²))`, more concentrated for larger `a`.
    Sharp { a: f64 },
    /// `(1 + t/2) exp(-1/(1 - t²))`, not symmetric.
    Skewed,
}

impl BumpProfile {
    pub fn eval(&self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - t * t;
        match *self {
            BumpProfile::Mollifier => (-1.0 / q).exp(),
            BumpProfile::Sharp { a } => (-a / q).exp(),
            BumpProfile::Skewed => (1.0 + 0.5 * t) * (-1.0 / q).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BumpProfile::Sharp { a } if !(a > 0.0 && a < 50.0) => {
                Err(invalid("profile.a", "sharpness must lie in (0, 50)"))
            }
            _ => Ok(()),
        }
    }
}

/// Parameters of the sequence `(Φ_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSequenceConfig {
    pub x0: Vec<f64>,
    pub n_list: Vec<u32>,
    pub s: f64,
    pub p: f64,
    /// Half width of the cube `Q_{r0}(x0)` carrying `Ψ = Ψ_1`.
    pub r0: f64,
}

impl TestSequenceConfig {
    pub fn validate(&self, domain: &GridDomain) -> Result<()> {
        if self.x0.len() != domain.dim() {
            return Err(invalid("x0", "coordinate count differs from the grid dimension"));
        }
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return Err(invalid("n_list", "needs positive entries"));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("n_list", "must be strictly increasing"));
        }
        if !(self.r0 > 0.0) {
            return Err(invalid("r0", "must be positive"));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid("s", "must lie in (0, 1)"));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid("p", "p must exceed 1"));
        }
        Ok(())
    }
}

/// Samples `Ψ_N` on the grid.
///
/// Fails if the support cube `Q_{r0/N}(x0)` leaves W or holds fewer than
/// [`MIN_NODES_PER_AXIS`] nodes per axis.
pub fn tensor_bump(
    profile: BumpProfile,
    x0: &[f64],
    r0: f64,
    n: u32,
    domain: &Arc<GridDomain>,
) -> Result<GridFunction> {
    profile.validate()?;
    let half = r0 / n as f64;
    if !domain.w_region().contains_cube(x0, half) {
        return Err(Error::SupportOutsideW { n });
    }
    let nodes = nodes_inside(domain.spacing(), half);
    if nodes < MIN_NODES_PER_AXIS {
        // nodes strictly inside an open interval of length 2·half is at least
        // ⌈2·half/h⌉ - 1, so h ≤ 2·half / (required + 1) always suffices
        return Err(Error::UnderResolved {
            n,
            nodes,
            required: MIN_NODES_PER_AXIS,
            max_spacing: 2.0 * half / (MIN_NODES_PER_AXIS as f64 + 1.0),
        });
    }
    let scale = n as f64 / r0;
    let dim = domain.dim();
    Ok(GridFunction::from_fn(domain, |x| {
        (0..dim)
            .map(|k| profile.eval(scale * (x[k] - x0[k])))
            .product()
    }))
}

/// Worst-case count of grid nodes strictly inside an interval of half width
/// `half` over all placements of its center.
fn nodes_inside(h: f64, half: f64) -> usize {
    let ratio = 2.0 * half / h;
    (ratio - 1e-9).ceil().max(1.0) as usize - 1
}

/// `Φ = Ψ / [Ψ]_{W^{s,p}}`.
pub fn normalize_phi(psi: &GridFunction, s: f64, p: f64) -> Result<GridFunction> {
    let norm = gagliardo_seminorm(psi, s, p);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroSeminorm);
    }
    Ok(psi.scaled(1.0 / norm))
}

/// One normalized `Φ_N` per entry of `config.n_list`.
pub fn make_sequence(
    config: &TestSequenceConfig,
    domain: &Arc<GridDomain>,
    profile: BumpProfile,
) -> Result<Vec<GridFunction>> {
    config.validate(domain)?;
    config
        .n_list
        .iter()
        .map(|&n| {
            let psi = tensor_bump(profile, &config.x0, config.r0, n, domain)?;
            normalize_phi(&psi, config.s, config.p)
        })
        .collect()
}
