//! Exterior-value problem for the weighted fractional p-Laplacian, solved by
//! minimizing the discrete energy
//!
//! ```text
//! E(v) = Σ_{i≠j} σ(x_i, x_j) |v_i - v_j|^p h^{2n} / |x_i - x_j|^{n+sp}
//! ```
//!
//! over grid functions with `v = f` outside Ω.
//!
//! For `1 < p < 2` the potential `|t|^p` is replaced by
//! `(t² + ε²)^{p/2} - ε^p` inside the optimizer; reported energies always use
//! `ε = 0`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{invalid, Error, Result};
use crate::grid::{GridDomain, GridFunction};
use crate::optimize::{minimize_bb, BbOptions};
use crate::quadrature::{gagliardo_seminorm, sobolev_norm, support_pair_sum, PairKernel};

fn default_grad_tol() -> f64 {
    1e-9
}

fn default_max_iter() -> usize {
    20_000
}

/// Fractional order `s`, integrability `p` and solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub s: f64,
    pub p: f64,
    /// Smoothing for `p < 2`; `None` selects `1e-6 · (max|f| + 1)`.
    #[serde(default)]
    pub epsilon_reg: Option<f64>,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl FracParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        let params = Self {
            s,
            p,
            epsilon_reg: None,
            grad_tol: default_grad_tol(),
            max_iter: default_max_iter(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid("s", "s must lie in (0, 1)"));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid("p", "p must exceed 1"));
        }
        match self.epsilon_reg {
            Some(e) if !(e >= 0.0) || !e.is_finite() => {
                return Err(invalid("epsilon_reg", "must be nonnegative"))
            }
            Some(e) if e > 0.0 && self.p >= 2.0 => {
                return Err(invalid("epsilon_reg", "must be zero when p >= 2"))
            }
            _ => {}
        }
        if !(self.grad_tol > 0.0) {
            return Err(invalid("grad_tol", "must be positive"));
        }
        Ok(())
    }

    /// Smoothing actually used for exterior data with `max|f| = data_scale`.
    pub fn effective_epsilon(&self, data_scale: f64) -> f64 {
        if self.p >= 2.0 {
            0.0
        } else {
            self.epsilon_reg.unwrap_or(1e-6 * (data_scale + 1.0))
        }
    }
}

/// `φ(t) = |t|^p` or its smoothed version, with `φ'`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Potential {
    p: f64,
    eps: f64,
    eps_p: f64,
}

impl Potential {
    pub(crate) fn new(p: f64, eps: f64) -> Self {
        Self {
            p,
            eps,
            eps_p: if eps > 0.0 { eps.powf(p) } else { 0.0 },
        }
    }

    #[inline]
    pub(crate) fn value_slope(&self, t: f64) -> (f64, f64) {
        if self.eps > 0.0 {
            let q = t * t + self.eps * self.eps;
            let a = q.powf(0.5 * (self.p - 2.0));
            (a * q - self.eps_p, self.p * a * t)
        } else if self.p == 2.0 {
            (t * t, 2.0 * t)
        } else if t == 0.0 {
            (0.0, 0.0)
        } else if self.p == 3.0 {
            let a = t.abs();
            (a * t * t, 3.0 * a * t)
        } else {
            let a = t.abs().powf(self.p - 2.0);
            (a * t * t, self.p * a * t)
        }
    }

    #[inline]
    pub(crate) fn value(&self, t: f64) -> f64 {
        self.value_slope(t).0
    }

    #[inline]
    pub(crate) fn slope(&self, t: f64) -> f64 {
        self.value_slope(t).1
    }
}

/// `|t|^{p-2} t`, zero at `t = 0`.
#[inline]
pub(crate) fn flux(p: f64, t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if p == 2.0 {
        t
    } else {
        t.abs().powf(p - 2.0) * t
    }
}

/// `φ_ε'(t) / p`: the flux of the potential the solver minimizes.
#[inline]
pub(crate) fn smoothed_flux(p: f64, eps: f64, t: f64) -> f64 {
    if eps > 0.0 {
        (t * t + eps * eps).powf(0.5 * (p - 2.0)) * t
    } else {
        flux(p, t)
    }
}

fn energy_with(v: &GridFunction, sigma: &Coefficient, s: f64, pot: Potential) -> f64 {
    let domain = v.domain();
    let kernel = PairKernel::new(domain, s * pot.p);
    let vals = v.values();
    let dom: &GridDomain = domain;
    support_pair_sum(&kernel, &v.support(), |i, j, w| {
        sigma.pair(dom, i, j) * pot.value(vals[i] - vals[j]) * w
    })
}

/// `E_{s,p,σ}(v)`.
pub fn energy(v: &GridFunction, sigma: &Coefficient, params: &FracParams) -> f64 {
    energy_with(v, sigma, params.s, Potential::new(params.p, 0.0))
}

/// The smoothed energy minimized for `p < 2` (equal to [`energy`] at `eps = 0`).
pub fn regularized_energy(v: &GridFunction, sigma: &Coefficient, params: &FracParams, eps: f64) -> f64 {
    energy_with(v, sigma, params.s, Potential::new(params.p, eps))
}

/// Derivative of the (smoothed) energy with respect to the values on Ω;
/// zero at every other node.
///
/// Component `k` is `Σ_{j≠k} (σ_kj + σ_jk) φ'(v_k - v_j) h^{2n} / |x_k - x_j|^{n+sp}`.
pub fn energy_gradient(
    v: &GridFunction,
    sigma: &Coefficient,
    params: &FracParams,
    eps: f64,
) -> Result<GridFunction> {
    let domain = v.domain();
    let dom: &GridDomain = domain;
    let kernel = PairKernel::new(domain, params.s * params.p);
    let pot = Potential::new(params.p, eps);
    let vals = v.values();
    let rows: Vec<f64> = domain
        .omega()
        .par_iter()
        .map(|&k| {
            let mut acc = 0.0;
            for j in 0..dom.len() {
                if j == k {
                    continue;
                }
                let sym = sigma.pair(dom, k, j) + sigma.pair(dom, j, k);
                acc += sym * pot.slope(vals[k] - vals[j]) * kernel.weight(k, j);
            }
            acc
        })
        .collect();
    if rows.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("energy gradient"));
    }
    let mut out = GridFunction::zeros(domain);
    for (&k, g) in domain.omega().iter().zip(rows) {
        out.values_mut()[k] = g;
    }
    Ok(out)
}

/// Energy restricted to the unknown values on Ω:
///
/// `J(x) = Σ_{k<l} c_kl φ(x_k - x_l) + Σ_k Σ_d b_kd φ(x_k - f_d) + Σ_k m_k φ(x_k)`
///
/// with `c`, `b` the symmetrized weights to other Ω nodes and to exterior nodes
/// carrying nonzero data, and `m_k` the total weight to exterior nodes where
/// the data vanishes.
struct InteriorProblem {
    size: usize,
    coupling: Vec<f64>,
    data: Vec<f64>,
    data_coupling: Vec<f64>,
    mass: Vec<f64>,
    pot: Potential,
}

impl InteriorProblem {
    fn assemble(sigma: &Coefficient, f: &GridFunction, s: f64, pot: Potential) -> Self {
        let domain = f.domain();
        let dom: &GridDomain = domain;
        let kernel = PairKernel::new(domain, s * pot.p);
        let omega = domain.omega();
        let fv = f.values();
        let data_nodes: Vec<usize> = (0..dom.len())
            .filter(|&j| !dom.in_omega(j) && fv[j] != 0.0)
            .collect();
        let mut is_data = vec![false; dom.len()];
        for &j in &data_nodes {
            is_data[j] = true;
        }
        let size = omega.len();
        let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = omega
            .par_iter()
            .map(|&k| {
                let sym = |j: usize| (sigma.pair(dom, k, j) + sigma.pair(dom, j, k)) * kernel.weight(k, j);
                let coupling: Vec<f64> = omega
                    .iter()
                    .map(|&l| if l == k { 0.0 } else { sym(l) })
                    .collect();
                let data: Vec<f64> = data_nodes.iter().map(|&j| sym(j)).collect();
                let mut mass = 0.0;
                for j in 0..dom.len() {
                    if j != k && !dom.in_omega(j) && !is_data[j] {
                        mass += sym(j);
                    }
                }
                (coupling, data, mass)
            })
            .collect();
        let mut coupling = Vec::with_capacity(size * size);
        let mut data_coupling = Vec::with_capacity(size * data_nodes.len());
        let mut mass = Vec::with_capacity(size);
        for (c, d, m) in rows {
            coupling.extend(c);
            data_coupling.extend(d);
            mass.push(m);
        }
        Self {
            size,
            coupling,
            data: data_nodes.iter().map(|&j| fv[j]).collect(),
            data_coupling,
            mass,
            pot,
        }
    }

    fn eval(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let n = self.size;
        let nd = self.data.len();
        let pot = self.pot;
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut value = 0.0;
        for k in 0..n {
            let row = &self.coupling[k * n..(k + 1) * n];
            let xk = x[k];
            let mut gk = 0.0;
            let mut vk = 0.0;
            for l in (k + 1)..n {
                let (v, d) = pot.value_slope(xk - x[l]);
                let c = row[l];
                vk += c * v;
                gk += c * d;
                g[l] -= c * d;
            }
            let drow = &self.data_coupling[k * nd..(k + 1) * nd];
            for (b, fd) in drow.iter().zip(&self.data) {
                let (v, d) = pot.value_slope(xk - fd);
                vk += b * v;
                gk += b * d;
            }
            let (v, d) = pot.value_slope(xk);
            vk += self.mass[k] * v;
            gk += self.mass[k] * d;
            g[k] += gk;
            value += vk;
        }
        value
    }
}

/// Output of [`solve_dirichlet`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Full-grid solution; equals the data outside Ω.
    pub u: GridFunction,
    /// Unsmoothed energy of `u`.
    pub energy: f64,
    pub iterations: usize,
    /// Sup norm of the (smoothed) first variation on Ω at exit.
    pub gradient_norm: f64,
    pub converged: bool,
    pub epsilon: f64,
    /// `‖u_ε - u_{ε/10}‖_{W^{s,p}} / ‖u_ε‖_{W^{s,p}}`, for smoothed solves.
    pub epsilon_sensitivity: Option<f64>,
    pub stalled: bool,
}

/// Solves the exterior-value problem with data `f` (values of `f` on Ω are
/// ignored), starting from the zero extension of the data.
pub fn solve_dirichlet(sigma: &Coefficient, f: &GridFunction, params: &FracParams) -> Result<SolveResult> {
    let start = vec![0.0; f.domain().omega().len()];
    solve_dirichlet_from(sigma, f, params, &start)
}

/// As [`solve_dirichlet`] with an explicit initial guess on the Ω nodes.
pub fn solve_dirichlet_from(
    sigma: &Coefficient,
    f: &GridFunction,
    params: &FracParams,
    initial: &[f64],
) -> Result<SolveResult> {
    params.validate()?;
    let domain = f.domain();
    if initial.len() != domain.omega().len() {
        return Err(Error::GridMismatch("initial guess must have one value per Ω node".into()));
    }
    if f.values().iter().chain(initial).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("exterior data"));
    }
    let mut exterior = f.clone();
    for &k in domain.omega() {
        exterior.values_mut()[k] = 0.0;
    }
    let eps = params.effective_epsilon(exterior.max_abs());
    let mut result = solve_smoothed(sigma, &exterior, params, eps, initial)?;
    if eps > 0.0 {
        let warm: Vec<f64> = domain.omega().iter().map(|&k| result.u.values()[k]).collect();
        let finer = solve_smoothed(sigma, &exterior, params, eps / 10.0, &warm)?;
        let base = sobolev_norm(&result.u, params.s, params.p);
        let diff = sobolev_norm(&(&result.u - &finer.u), params.s, params.p);
        result.epsilon_sensitivity = Some(if base > 0.0 { diff / base } else { diff });
    }
    Ok(result)
}

fn solve_smoothed(
    sigma: &Coefficient,
    exterior: &GridFunction,
    params: &FracParams,
    eps: f64,
    initial: &[f64],
) -> Result<SolveResult> {
    let domain = exterior.domain();
    let pot = Potential::new(params.p, eps);
    let problem = InteriorProblem::assemble(sigma, exterior, params.s, pot);
    // constant part of the energy: pairs with no endpoint in Ω
    let mut scratch = vec![0.0; problem.size];
    let offset = regularized_energy(exterior, sigma, params, eps)
        - problem.eval(&vec![0.0; problem.size], &mut scratch);
    let opts = BbOptions {
        max_iter: params.max_iter,
        grad_tol: params.grad_tol,
        value_offset: offset,
        ..BbOptions::default()
    };
    let out = minimize_bb(|x, g| problem.eval(x, g), initial.to_vec(), &opts);
    let mut u = exterior.clone();
    for (&k, v) in domain.omega().iter().zip(&out.x) {
        u.values_mut()[k] = *v;
    }
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("solver iterate"));
    }
    if !out.converged {
        log::warn!(
            "solve did not converge: {} iterations, ‖g‖∞ = {:e}{}",
            out.iterations,
            out.gradient_sup,
            if out.stalled { " (line search stalled)" } else { "" }
        );
    } else {
        log::debug!("solve converged in {} iterations, ‖g‖∞ = {:e}", out.iterations, out.gradient_sup);
    }
    Ok(SolveResult {
        energy: energy(&u, sigma, params),
        u,
        iterations: out.iterations,
        gradient_norm: out.gradient_sup,
        converged: out.converged,
        epsilon: eps,
        epsilon_sensitivity: None,
        stalled: out.stalled,
    })
}

/// Constant in Young's inequality `ab ≤ ε a^{p'} + C_ε b^p` with `p' = p/(p-1)`:
/// `C_ε = (p' ε)^{1-p} / p`.
pub fn young_constant(eps: f64, p: f64) -> f64 {
    let conj = p / (p - 1.0);
    (conj * eps).powf(1.0 - p) / p
}

/// `C(λ, p) = (2 C_{λ/2} λ^{-p} / λ)^{1/p}` in `[u] ≤ C [f]`.
pub fn solution_estimate_constant(lambda: f64, p: f64) -> f64 {
    (2.0 * young_constant(lambda / 2.0, p) * lambda.powf(-p) / lambda).powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub seminorm_u: f64,
    pub seminorm_f: f64,
    /// `None` when both seminorms vanish.
    pub ratio: Option<f64>,
    pub bound: f64,
    pub within_bound: bool,
    pub degenerate: bool,
}

/// Compares `[u]/[f]` with the a-priori constant; exceeding it only logs a warning.
pub fn check_solution_estimate(
    result: &SolveResult,
    f: &GridFunction,
    params: &FracParams,
    lambda: f64,
) -> EstimateReport {
    let su = gagliardo_seminorm(&result.u, params.s, params.p);
    let sf = gagliardo_seminorm(f, params.s, params.p);
    let bound = solution_estimate_constant(lambda, params.p);
    let (ratio, degenerate) = if sf == 0.0 {
        if su == 0.0 {
            (None, true)
        } else {
            (Some(f64::INFINITY), false)
        }
    } else {
        (Some(su / sf), false)
    };
    let within_bound = ratio.is_none_or(|r| r <= bound);
    if !within_bound {
        log::warn!("solution estimate exceeded: [u]/[f] = {:?} > {bound}", ratio);
    }
    EstimateReport {
        seminorm_u: su,
        seminorm_f: sf,
        ratio,
        bound,
        within_bound,
        degenerate,
    }
}

/// Convenience for building exterior data that lives on `domain`.
pub fn exterior_part(f: &GridFunction) -> GridFunction {
    let mut out = f.clone();
    let d: Arc<GridDomain> = Arc::clone(f.domain());
    for &k in d.omega() {
        out.values_mut()[k] = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::{CoefficientFamily, Gamma};
    use crate::grid::{build_domain, Region};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn domain(h: f64) -> Arc<GridDomain> {
        Arc::new(
            build_domain(
                1,
                3.0,
                h,
                Region::interval(-1.0, 1.0),
                Region::interval(1.5, 2.5),
            )
            .unwrap(),
        )
    }

    fn random_exterior(d: &Arc<GridDomain>, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = GridFunction::zeros(d);
        for &i in d.w_set() {
            f.values_mut()[i] = rng.gen_range(-1.0..1.0);
        }
        f
    }

    fn sinusoidal() -> Coefficient {
        Coefficient::closed_form(
            CoefficientFamily::Sinusoidal {
                base: 2.0,
                amplitude: 1.0,
                frequency: 1.0,
            },
            None,
        )
        .unwrap()
    }

    /// Dense p = 2 system, weights taken straight from the kernel formula.
    fn linear_oracle(sigma: &Coefficient, f: &GridFunction, s: f64) -> GridFunction {
        let d = f.domain();
        let n = d.dim() as f64;
        let h = d.spacing();
        let om = d.omega();
        let w = |i: usize, j: usize| {
            let r = ((d.coord(i)[0] - d.coord(j)[0]).powi(2) + (d.coord(i)[1] - d.coord(j)[1]).powi(2)).sqrt();
            (sigma.pair(d, i, j) + sigma.pair(d, j, i)) * h.powf(2.0 * n) / r.powf(n + 2.0 * s)
        };
        let mut a = DMatrix::zeros(om.len(), om.len());
        let mut b = DVector::zeros(om.len());
        for (r, &k) in om.iter().enumerate() {
            for j in 0..d.len() {
                if j == k {
                    continue;
                }
                let c = w(k, j);
                a[(r, r)] += c;
                if let Some(col) = om.iter().position(|&l| l == j) {
                    a[(r, col)] -= c;
                } else {
                    b[r] += c * f.values()[j];
                }
            }
        }
        let x = a.lu().solve(&b).unwrap();
        let mut u = exterior_part(f);
        for (r, &k) in om.iter().enumerate() {
            u.values_mut()[k] = x[r];
        }
        u
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(0.5, 1.0).unwrap_err().to_string().contains("p must exceed 1"));
        assert!(FracParams::new(1.0, 2.0).is_err());
        let mut p = FracParams::new(0.5, 3.0).unwrap();
        p.epsilon_reg = Some(1e-3);
        assert!(p.validate().is_err());
        let p = FracParams::new(0.5, 1.5).unwrap();
        assert_eq!(p.effective_epsilon(2.0), 3e-6);
    }

    #[test]
    fn energy_basics() {
        let d = domain(0.125);
        let params = FracParams::new(0.4, 2.5).unwrap();
        let c = GridFunction::from_fn(&d, |_| 0.0);
        assert_eq!(energy(&c, &sinusoidal(), &params), 0.0);
        let v = GridFunction::from_fn(&d, |x| (x[0] * 1.7).sin() * (-x[0] * x[0]).exp());
        let unit = Coefficient::constant(1.0).unwrap();
        let e1 = energy(&v, &unit, &params);
        let semi = crate::quadrature::seminorm_pow(&v, 0.4, 2.5);
        assert!((e1 - semi).abs() <= 1e-12 * semi);
        let sig = sinusoidal();
        let e = energy(&v, &sig, &params);
        assert!(sig.lambda() * semi <= e && e <= semi / sig.lambda());
    }

    fn fd_check(p: f64, eps: f64, exact_energy: bool, tol: f64) {
        let d = domain(0.0625);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = GridFunction::from_fn(&d, |x| if x[0].abs() < 2.6 { rng.gen_range(-1.0..1.0) } else { 0.0 });
        let mut dir = GridFunction::zeros(&d);
        for &k in d.omega() {
            dir.values_mut()[k] = rng.gen_range(-1.0..1.0);
        }
        let mut params = FracParams::new(0.5, p).unwrap();
        if p < 2.0 {
            params.epsilon_reg = Some(eps);
        }
        let sigma = sinusoidal();
        let g = energy_gradient(&v, &sigma, &params, eps).unwrap();
        let analytic: f64 = g.values().iter().zip(dir.values()).map(|(a, b)| a * b).sum();
        let step = 1e-6;
        let e = |w: &GridFunction| {
            if exact_energy {
                energy(w, &sigma, &params)
            } else {
                regularized_energy(w, &sigma, &params, eps)
            }
        };
        let plus = &v + &(&dir * step);
        let minus = &v - &(&dir * step);
        let fd = (e(&plus) - e(&minus)) / (2.0 * step);
        assert!((fd - analytic).abs() <= tol * analytic.abs(), "p={p}: fd {fd} analytic {analytic}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        fd_check(2.0, 0.0, true, 1e-5);
        fd_check(3.0, 0.0, true, 1e-5);
        fd_check(1.5, 1e-6, false, 1e-5);
        fd_check(1.5, 1e-6, true, 1e-4);
    }

    #[test]
    fn p2_gradient_is_matrix_vector_product() {
        let d = domain(0.125);
        let v = GridFunction::from_fn(&d, |x| (x[0] * 0.9).cos() * (-0.3 * x[0] * x[0]).exp());
        let params = FracParams::new(0.3, 2.0).unwrap();
        let unit = Coefficient::constant(1.0).unwrap();
        let g = energy_gradient(&v, &unit, &params, 0.0).unwrap();
        let h = d.spacing();
        for &k in d.omega() {
            let mut acc = 0.0;
            for j in 0..d.len() {
                if j != k {
                    let r = (d.coord(k)[0] - d.coord(j)[0]).abs();
                    acc += 2.0 * (v.values()[k] - v.values()[j]) * h * h / r.powf(1.0 + 0.6);
                }
            }
            // 2p Σ σ (v_k - v_j) w_kj with σ = 1, p = 2
            let expected = 2.0 * acc;
            assert!((g.values()[k] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn constant_and_zero_data() {
        let d = domain(0.125);
        let params = FracParams::new(0.5, 3.0).unwrap();
        let sigma = sinusoidal();
        let zero = solve_dirichlet(&sigma, &GridFunction::zeros(&d), &params).unwrap();
        assert!(zero.u.is_zero());
        assert_eq!(zero.energy, 0.0);
        // f ≡ c on the whole exterior; u ≡ c inside
        // p > 2 is degenerate near constants, so only p = 2 pins u tightly
        let c = GridFunction::from_fn(&d, |_| 0.75);
        for (p, tol) in [(2.0, 1e-8), (3.0, 1e-3)] {
            let params = FracParams::new(0.5, p).unwrap();
            let r = solve_dirichlet(&sigma, &c, &params).unwrap();
            assert!(r.converged);
            for &k in d.omega() {
                assert!((r.u.values()[k] - 0.75).abs() < tol, "p={p}");
            }
            assert!(r.energy < 1e-8);
        }
    }

    #[test]
    fn p2_solve_matches_linear_system() {
        let d = domain(1.0 / 32.0);
        let f = random_exterior(&d, 3);
        let mut params = FracParams::new(0.5, 2.0).unwrap();
        params.grad_tol = 1e-12;
        for sigma in [
            Coefficient::constant(1.0).unwrap(),
            Coefficient::closed_form(
                CoefficientFamily::Separable {
                    gamma: Gamma {
                        base: 1.5,
                        amplitude: 0.8,
                        center: vec![1.0],
                        width: 0.8,
                    },
                },
                None,
            )
            .unwrap(),
        ] {
            let r = solve_dirichlet(&sigma, &f, &params).unwrap();
            assert!(r.converged);
            let oracle = linear_oracle(&sigma, &f, 0.5);
            let err = sobolev_norm(&(&r.u - &oracle), 0.5, 2.0) / sobolev_norm(&oracle, 0.5, 2.0);
            assert!(err < 1e-8, "relative error {err}");
            assert!(r.energy <= energy(&f, &sigma, &params) + 1e-12);
        }
    }

    #[test]
    fn two_initializations_agree() {
        let d = domain(1.0 / 16.0);
        let f = random_exterior(&d, 5);
        let sigma = sinusoidal();
        for (p, tol) in [(3.0, 1e-6), (1.5, 1e-4)] {
            let params = FracParams::new(0.5, p).unwrap();
            let a = solve_dirichlet(&sigma, &f, &params).unwrap();
            let start: Vec<f64> = (0..d.omega().len()).map(|k| (k as f64 * 0.37).sin()).collect();
            let b = solve_dirichlet_from(&sigma, &f, &params, &start).unwrap();
            assert!(a.converged && b.converged);
            let diff = sobolev_norm(&(&a.u - &b.u), 0.5, p);
            assert!(diff <= tol, "p={p}: {diff}");
        }
    }

    #[test]
    fn data_inside_omega_is_ignored() {
        let d = domain(1.0 / 16.0);
        let f1 = random_exterior(&d, 8);
        let mut f2 = f1.clone();
        for &k in d.omega() {
            f2.values_mut()[k] = 3.0;
        }
        let params = FracParams::new(0.6, 2.5).unwrap();
        let sigma = sinusoidal();
        let a = solve_dirichlet(&sigma, &f1, &params).unwrap();
        let b = solve_dirichlet(&sigma, &f2, &params).unwrap();
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn solution_estimate() {
        assert!((solution_estimate_constant(1.0, 2.0) - 1.0).abs() < 1e-15);
        let d = domain(1.0 / 16.0);
        let f = random_exterior(&d, 9);
        let params = FracParams::new(0.5, 2.0).unwrap();
        let unit = Coefficient::constant(1.0).unwrap();
        let r = solve_dirichlet(&unit, &f, &params).unwrap();
        let rep = check_solution_estimate(&r, &f, &params, 1.0);
        assert!(rep.ratio.unwrap() <= 1.0 + 1e-8);
        let c = GridFunction::zeros(&d);
        let rc = solve_dirichlet(&unit, &c, &params).unwrap();
        let rep = check_solution_estimate(&rc, &c, &params, 1.0);
        assert!(rep.degenerate && rep.ratio.is_none());
    }

    #[test]
    fn convexity_probe() {
        let d = domain(0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = FracParams::new(0.5, 2.7).unwrap();
        let sigma = sinusoidal();
        let f = random_exterior(&d, 1);
        for _ in 0..10 {
            let mut v = f.clone();
            let mut w = f.clone();
            for &k in d.omega() {
                v.values_mut()[k] = rng.gen_range(-2.0..2.0);
                w.values_mut()[k] = rng.gen_range(-2.0..2.0);
            }
            let th: f64 = rng.gen_range(0.0..1.0);
            let mix = &(&v * th) + &(&w * (1.0 - th));
            let lhs = energy(&mix, &sigma, &params);
            let rhs = th * energy(&v, &sigma, &params) + (1.0 - th) * energy(&w, &sigma, &params);
            assert!(lhs <= rhs + 1e-10);
        }
    }
}
