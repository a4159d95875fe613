//! Uniform grids on the truncated box `[-R, R]^n` (n = 1 or 2), the interior
//! set Ω, the exterior measurement set W, and real-valued functions on nodes.
//!
//! Open regions are represented by the nodes whose coordinates lie strictly
//! inside the region.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point in the plane; for one-dimensional grids the second entry is zero.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Region {
    /// Open axis-aligned box `center ± half_widths`. In 1D this is an interval.
    Box {
        center: Vec<f64>,
        half_widths: Vec<f64>,
    },
    /// Open Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn interval(a: f64, b: f64) -> Self {
        Region::Box {
            center: vec![0.5 * (a + b)],
            half_widths: vec![0.5 * (b - a)],
        }
    }

    pub fn square(center: [f64; 2], half_width: f64) -> Self {
        Region::Box {
            center: center.to_vec(),
            half_widths: vec![half_width; 2],
        }
    }

    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Region::Box { center, .. } | Region::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self, name: &'static str, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(invalid(
                name,
                format!("region has {} coordinates, grid has {}", self.dim(), dim),
            ));
        }
        match self {
            Region::Box {
                center,
                half_widths,
            } => {
                if half_widths.len() != dim {
                    return Err(invalid(name, "half_widths length differs from dimension"));
                }
                if center.iter().chain(half_widths).any(|v| !v.is_finite())
                    || half_widths.iter().any(|&a| a <= 0.0)
                {
                    return Err(invalid(name, "box needs finite center and positive half widths"));
                }
            }
            Region::Ball { center, radius } => {
                if center.iter().any(|v| !v.is_finite()) || !(*radius > 0.0) || !radius.is_finite()
                {
                    return Err(invalid(name, "ball needs finite center and positive radius"));
                }
            }
        }
        Ok(())
    }

    /// Strict (open-set) membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box {
                center,
                half_widths,
            } => center
                .iter()
                .zip(half_widths)
                .zip(x)
                .all(|((c, a), xi)| (xi - c).abs() < *a),
            Region::Ball { center, radius } => {
                let d2: f64 = center.iter().zip(x).map(|(c, xi)| (xi - c).powi(2)).sum();
                d2 < radius * radius
            }
        }
    }

    /// Per-axis `(lo, hi)` of the bounding box.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Region::Box {
                center,
                half_widths,
            } => center
                .iter()
                .zip(half_widths)
                .map(|(c, a)| (c - a, c + a))
                .collect(),
            Region::Ball { center, radius } => {
                center.iter().map(|c| (c - radius, c + radius)).collect()
            }
        }
    }

    /// Does the closed cube `center ± half_width` lie in the closure of the region?
    pub fn contains_cube(&self, center: &[f64], half_width: f64) -> bool {
        const SLACK: f64 = 1e-12;
        match self {
            Region::Box {
                center: c,
                half_widths,
            } => c
                .iter()
                .zip(half_widths)
                .zip(center)
                .all(|((ci, a), x)| (x - ci).abs() + half_width <= a + SLACK),
            Region::Ball { center: c, radius } => {
                // farthest corner of the cube from the ball center
                let far: f64 = c
                    .iter()
                    .zip(center)
                    .map(|(ci, x)| ((x - ci).abs() + half_width).powi(2))
                    .sum();
                far.sqrt() <= radius + SLACK
            }
        }
    }

    /// Signed gap between two regions; non-positive when they overlap or touch.
    pub fn gap(&self, other: &Region) -> f64 {
        match (self, other) {
            (
                Region::Box {
                    center: c1,
                    half_widths: a1,
                },
                Region::Box {
                    center: c2,
                    half_widths: a2,
                },
            ) => {
                let per_axis: Vec<f64> = (0..c1.len())
                    .map(|k| (c1[k] - c2[k]).abs() - a1[k] - a2[k])
                    .collect();
                if per_axis.iter().all(|&g| g <= 0.0) {
                    per_axis.into_iter().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    per_axis
                        .iter()
                        .map(|g| g.max(0.0).powi(2))
                        .sum::<f64>()
                        .sqrt()
                }
            }
            (Region::Ball { center: c1, radius: r1 }, Region::Ball { center: c2, radius: r2 }) => {
                euclid(c1, c2) - r1 - r2
            }
            (Region::Box { center, half_widths }, Region::Ball { center: c, radius })
            | (Region::Ball { center: c, radius }, Region::Box { center, half_widths }) => {
                let d2: f64 = (0..c.len())
                    .map(|k| ((c[k] - center[k]).abs() - half_widths[k]).max(0.0).powi(2))
                    .sum();
                d2.sqrt() - radius
            }
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Omega,
    W,
    Other,
}

/// Serializable description of a grid, as found in run configs and sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    pub half_width: f64,
    pub spacing: f64,
    pub omega: Region,
    pub w: Region,
}

impl DomainSpec {
    pub fn build(&self) -> Result<Arc<GridDomain>> {
        build_domain(
            self.dim,
            self.half_width,
            self.spacing,
            self.omega.clone(),
            self.w.clone(),
        )
        .map(Arc::new)
    }
}

/// Immutable uniform grid with its Ω and W node sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    dim: usize,
    half_width: f64,
    spacing: f64,
    half_count: usize,
    per_axis: usize,
    omega_region: Region,
    w_region: Region,
    omega: Vec<usize>,
    w_set: Vec<usize>,
    class: Vec<NodeClass>,
    separation: f64,
}

/// Builds the grid covering `[-R, R]^dim` with nodes `x = k·h`, `|k| ≤ ⌊R/h⌋`.
pub fn build_domain(
    dim: usize,
    half_width: f64,
    spacing: f64,
    omega: Region,
    w: Region,
) -> Result<GridDomain> {
    if dim != 1 && dim != 2 {
        return Err(invalid("dim", "only dimensions 1 and 2 are supported"));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(invalid("half_width", "must be positive"));
    }
    if !(spacing > 0.0) || spacing > half_width {
        return Err(invalid("spacing", "must be positive and at most the half width"));
    }
    omega.validate("omega", dim)?;
    w.validate("w", dim)?;
    for (name, region) in [("omega", &omega), ("w", &w)] {
        let inside = region
            .bounds()
            .iter()
            .all(|&(lo, hi)| lo >= -half_width && hi <= half_width);
        if !inside {
            return Err(Error::OutsideBox { name, half_width });
        }
    }
    let gap = omega.gap(&w);
    if gap <= 0.0 {
        return Err(Error::Overlap { distance: gap.max(0.0) });
    }

    let half_count = (half_width / spacing + 1e-9).floor() as usize;
    let per_axis = 2 * half_count + 1;
    let total = per_axis.pow(dim as u32);
    let mut domain = GridDomain {
        dim,
        half_width,
        spacing,
        half_count,
        per_axis,
        omega_region: omega,
        w_region: w,
        omega: Vec::new(),
        w_set: Vec::new(),
        class: vec![NodeClass::Other; total],
        separation: gap,
    };
    for i in 0..total {
        let x = domain.coord(i);
        let x = &x[..dim];
        if domain.omega_region.contains(x) {
            domain.class[i] = NodeClass::Omega;
            domain.omega.push(i);
        } else if domain.w_region.contains(x) {
            domain.class[i] = NodeClass::W;
            domain.w_set.push(i);
        }
    }
    if domain.omega.is_empty() {
        return Err(Error::EmptyRegion {
            name: "omega",
            spacing,
        });
    }
    if domain.w_set.is_empty() {
        return Err(Error::EmptyRegion { name: "w", spacing });
    }
    Ok(domain)
}

impl GridDomain {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Nodes per axis, always odd.
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn w_set(&self) -> &[usize] {
        &self.w_set
    }

    pub fn omega_region(&self) -> &Region {
        &self.omega_region
    }

    pub fn w_region(&self) -> &Region {
        &self.w_region
    }

    pub fn class(&self, i: usize) -> NodeClass {
        self.class[i]
    }

    pub fn in_omega(&self, i: usize) -> bool {
        self.class[i] == NodeClass::Omega
    }

    /// dist(Ω, W) of the regions themselves, in length units.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Integer axis indices of node `i`, centered so the origin is `(0, 0)`.
    pub fn axis_indices(&self, i: usize) -> [i64; 2] {
        let m = self.half_count as i64;
        if self.dim == 1 {
            [i as i64 - m, 0]
        } else {
            let ix = (i % self.per_axis) as i64;
            let iy = (i / self.per_axis) as i64;
            [ix - m, iy - m]
        }
    }

    pub fn coord(&self, i: usize) -> Point {
        let [a, b] = self.axis_indices(i);
        [a as f64 * self.spacing, b as f64 * self.spacing]
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let m = self.half_count as i64;
        let idx = |v: f64| ((v / self.spacing).round() as i64).clamp(-m, m) + m;
        if self.dim == 1 {
            idx(x[0]) as usize
        } else {
            (idx(x[1]) * self.per_axis as i64 + idx(x[0])) as usize
        }
    }

    /// Absolute per-axis index offsets between two nodes.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> [usize; 2] {
        if self.dim == 1 {
            [i.abs_diff(j), 0]
        } else {
            let p = self.per_axis;
            [(i % p).abs_diff(j % p), (i / p).abs_diff(j / p)]
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let [a, b] = self.offset(i, j);
        self.spacing * ((a * a + b * b) as f64).sqrt()
    }
}

/// Real values on every node of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain)
            && self.values == other.values
    }
}

impl GridFunction {
    pub fn zeros(domain: &Arc<GridDomain>) -> Self {
        Self {
            domain: Arc::clone(domain),
            values: vec![0.0; domain.len()],
        }
    }

    pub fn from_values(domain: &Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                domain.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function values"));
        }
        Ok(Self {
            domain: Arc::clone(domain),
            values,
        })
    }

    pub fn from_fn(domain: &Arc<GridDomain>, mut f: impl FnMut(Point) -> f64) -> Self {
        let values = (0..domain.len()).map(|i| f(domain.coord(i))).collect();
        Self {
            domain: Arc::clone(domain),
            values,
        }
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Indices of nonzero nodes, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Zero on Ω.
    pub fn is_exterior_supported(&self) -> bool {
        self.domain.omega.iter().all(|&i| self.values[i] == 0.0)
    }

    /// Zero outside Ω (the discrete test space).
    pub fn is_test_space(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(i, v)| *v == 0.0 || self.domain.in_omega(i))
    }

    /// Values on the W nodes, in the order of [`GridDomain::w_set`].
    pub fn restrict_to_w(&self) -> Vec<f64> {
        self.domain.w_set.iter().map(|&i| self.values[i]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) || self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::GridMismatch("functions live on different grids".into()))
        }
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction {
            domain: Arc::clone(&self.domain),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.values.len(), other.values.len(), "grid size mismatch");
        GridFunction {
            domain: Arc::clone(&self.domain),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &GridFunction {
    type Output = GridFunction;
    fn mul(self, rhs: f64) -> GridFunction {
        self.scaled(rhs)
    }
}

/// Extends data given on the W nodes (in [`GridDomain::w_set`] order) by zero.
pub fn zero_extension(domain: &Arc<GridDomain>, on_w: &[f64]) -> Result<GridFunction> {
    if on_w.len() != domain.w_set.len() {
        return Err(Error::GridMismatch(format!(
            "{} values for {} W nodes",
            on_w.len(),
            domain.w_set.len()
        )));
    }
    let mut values = vec![0.0; domain.len()];
    for (&i, &v) in domain.w_set.iter().zip(on_w) {
        values[i] = v;
    }
    GridFunction::from_values(domain, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> GridDomain {
        build_domain(
            1,
            4.0,
            0.5,
            Region::interval(-1.0, 1.0),
            Region::interval(2.0, 3.0),
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_example() {
        let d = line();
        assert_eq!(d.len(), 17);
        assert_eq!(d.separation(), 1.0);
        assert_eq!(d.coord(8), [0.0, 0.0]);
        // strictly inside (-1, 1): -0.5, 0, 0.5
        assert_eq!(d.omega(), &[7, 8, 9]);
        // strictly inside (2, 3): 2.5
        assert_eq!(d.w_set(), &[13]);
    }

    #[test]
    fn overlap_and_touching_rejected() {
        let e = build_domain(
            1,
            4.0,
            0.5,
            Region::interval(-1.0, 1.0),
            Region::interval(0.5, 2.0),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Overlap { .. }));
        let e = build_domain(
            1,
            4.0,
            0.5,
            Region::interval(-1.0, 1.0),
            Region::interval(1.0, 2.0),
        )
        .unwrap_err();
        assert!(matches!(e, Error::Overlap { .. }));
    }

    #[test]
    fn region_leaving_box_rejected() {
        let e = build_domain(
            1,
            2.0,
            0.5,
            Region::interval(-1.0, 1.0),
            Region::interval(1.5, 2.5),
        )
        .unwrap_err();
        assert!(matches!(e, Error::OutsideBox { name: "w", .. }));
    }

    #[test]
    fn two_dimensional_membership_matches_brute_force() {
        let omega = Region::ball(&[0.0, 0.0], 0.5);
        let w = Region::square([1.25, 0.0], 0.25);
        let d = build_domain(2, 2.0, 0.25, omega, w).unwrap();
        assert_eq!(d.per_axis(), 17);
        assert_eq!(d.len(), 289);
        let mut om = Vec::new();
        let mut ws = Vec::new();
        for iy in 0..17 {
            for ix in 0..17 {
                let x = -2.0 + 0.25 * ix as f64;
                let y = -2.0 + 0.25 * iy as f64;
                let idx = iy * 17 + ix;
                if x * x + y * y < 0.25 {
                    om.push(idx);
                } else if (x - 1.25).abs() < 0.25 && y.abs() < 0.25 {
                    ws.push(idx);
                }
            }
        }
        assert_eq!(d.omega(), om.as_slice());
        assert_eq!(d.w_set(), ws.as_slice());
        // ball radius 0.5 on h = 0.25: (0,0), (±.25,0), (0,±.25), (±.25,±.25)
        assert_eq!(om.len(), 9);
        assert_eq!(ws.len(), 1);
        assert!((d.separation() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rebuilding_is_deterministic() {
        assert_eq!(line(), line());
    }

    #[test]
    fn zero_extension_examples() {
        let d = Arc::new(
            build_domain(
                1,
                4.0,
                0.25,
                Region::interval(-1.0, 1.0),
                Region::interval(2.0, 3.0),
            )
            .unwrap(),
        );
        assert_eq!(d.w_set().len(), 3);
        let f = zero_extension(&d, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(f.support().len(), 3);
        assert!(f.is_exterior_supported());
        let z = zero_extension(&d, &[0.0; 3]).unwrap();
        assert!(z.is_zero());
        assert!(zero_extension(&d, &[1.0]).is_err());
    }

    #[test]
    fn nearest_node_and_offsets() {
        let d = build_domain(
            2,
            1.0,
            0.25,
            Region::ball(&[0.0, 0.0], 0.3),
            Region::square([0.75, 0.75], 0.2),
        )
        .unwrap();
        let i = d.nearest_node(&[0.5, -0.25]);
        assert_eq!(d.coord(i), [0.5, -0.25]);
        let j = d.nearest_node(&[0.0, 0.5]);
        assert_eq!(d.offset(i, j), [2, 3]);
        assert!((d.distance(i, j) - 0.25 * 13f64.sqrt()).abs() < 1e-15);
    }
}
