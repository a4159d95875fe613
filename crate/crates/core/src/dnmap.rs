//! Dirichlet-to-Neumann pairing
//!
//! ```text
//! ⟨Λ_σ f, g⟩ = Σ_{i≠j} σ(x_i, x_j) |u_i - u_j|^{p-2}(u_i - u_j)(g_i - g_j) h^{2n} / |x_i - x_j|^{n+sp}
//! ```
//!
//! where `u` solves the exterior-value problem with data `f`. For `p < 2` the
//! flux is taken from the smoothed potential the solver used, so that the
//! pairing only depends on `g` outside Ω up to the solver tolerance.

use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::grid::{GridDomain, GridFunction};
use crate::quadrature::{gagliardo_seminorm, sobolev_norm, support_pair_sum, PairKernel};
use crate::solver::{energy, flux, smoothed_flux, solve_dirichlet, FracParams, SolveResult};

/// Solver state attached to a pairing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub epsilon: f64,
    pub epsilon_sensitivity: Option<f64>,
    pub energy: f64,
}

impl From<&SolveResult> for SolveDiagnostics {
    fn from(r: &SolveResult) -> Self {
        Self {
            iterations: r.iterations,
            gradient_norm: r.gradient_norm,
            converged: r.converged,
            epsilon: r.epsilon,
            epsilon_sensitivity: r.epsilon_sensitivity,
            energy: r.energy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingRecord {
    pub f_id: String,
    pub g_id: String,
    pub value: f64,
    pub diagnostics: SolveDiagnostics,
}

fn check_exterior(f: &GridFunction, what: &'static str) -> Result<()> {
    if !f.is_exterior_supported() {
        return Err(Error::Support(what));
    }
    Ok(())
}

/// The pairing of an already computed solution with `g`.
///
/// Only pairs touching `supp g` contribute, so the sum runs over those rows.
pub fn pairing_with_solution(
    sigma: &Coefficient,
    solution: &SolveResult,
    g: &GridFunction,
    params: &FracParams,
) -> Result<f64> {
    let u = &solution.u;
    let eps = solution.epsilon;
    u.same_grid(g)?;
    let domain = u.domain();
    let dom: &GridDomain = domain;
    let kernel = PairKernel::new(domain, params.s * params.p);
    let (uv, gv) = (u.values(), g.values());
    let p = params.p;
    let value = support_pair_sum(&kernel, &g.support(), |i, j, w| {
        sigma.pair(dom, i, j) * smoothed_flux(p, eps, uv[i] - uv[j]) * (gv[i] - gv[j]) * w
    });
    if !value.is_finite() {
        return Err(Error::NonFinite("pairing"));
    }
    Ok(value)
}

fn converged(result: &SolveResult) -> Result<()> {
    if !result.converged {
        return Err(Error::NonConvergence {
            iterations: result.iterations,
            gradient_norm: result.gradient_norm,
        });
    }
    Ok(())
}

/// `⟨Λ_σ f, g⟩` for exterior-supported `f`, `g`.
pub fn dn_pairing(
    sigma: &Coefficient,
    f: &GridFunction,
    g: &GridFunction,
    params: &FracParams,
    f_id: &str,
    g_id: &str,
) -> Result<PairingRecord> {
    check_exterior(f, "first pairing argument must vanish on Ω")?;
    check_exterior(g, "second pairing argument must vanish on Ω")?;
    f.same_grid(g)?;
    let result = solve_dirichlet(sigma, f, params)?;
    converged(&result)?;
    Ok(PairingRecord {
        f_id: f_id.to_string(),
        g_id: g_id.to_string(),
        value: pairing_with_solution(sigma, &result, g, params)?,
        diagnostics: SolveDiagnostics::from(&result),
    })
}

/// Empirical suprema of `|⟨Λf, g⟩| / (‖f‖^{p-1} ‖g‖)` over a sample set, in
/// the full `W^{s,p}` norm and in the seminorm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProbeReport {
    pub pairs: usize,
    pub sup_norm_ratio: f64,
    pub sup_seminorm_ratio: f64,
    /// `‖σ‖_∞`, the constant in `|⟨Λf, g⟩| ≤ ‖σ‖_∞ [f]^{p-1} [g]`.
    pub sigma_sup: f64,
}

impl NormProbeReport {
    pub fn bounded(&self) -> bool {
        self.sup_norm_ratio.is_finite()
            && self.sup_seminorm_ratio.is_finite()
            && self.sup_seminorm_ratio <= self.sigma_sup * (1.0 + 1e-9)
    }
}

/// Pairs every sample with every sample (one solve per first argument).
pub fn dn_norm_probe(
    sigma: &Coefficient,
    samples: &[GridFunction],
    params: &FracParams,
) -> Result<NormProbeReport> {
    let (s, p) = (params.s, params.p);
    let mut solutions = Vec::with_capacity(samples.len());
    for f in samples {
        check_exterior(f, "probe samples must vanish on Ω")?;
        if f.is_zero() {
            return Err(Error::ZeroFunction);
        }
        let r = solve_dirichlet(sigma, f, params)?;
        converged(&r)?;
        solutions.push(r);
    }
    let norms: Vec<(f64, f64)> = samples
        .iter()
        .map(|f| (sobolev_norm(f, s, p), gagliardo_seminorm(f, s, p)))
        .collect();
    let mut sup_norm: f64 = 0.0;
    let mut sup_semi: f64 = 0.0;
    for (a, u) in solutions.iter().enumerate() {
        for (b, g) in samples.iter().enumerate() {
            let v = pairing_with_solution(sigma, u, g, params)?.abs();
            sup_norm = sup_norm.max(v / (norms[a].0.powf(p - 1.0) * norms[b].0));
            sup_semi = sup_semi.max(v / (norms[a].1.powf(p - 1.0) * norms[b].1));
        }
    }
    let sigma_sup = match sigma.family() {
        Some(fam) => fam.bounds()?.1,
        None => f64::INFINITY,
    };
    Ok(NormProbeReport {
        pairs: samples.len() * samples.len(),
        sup_norm_ratio: sup_norm,
        sup_seminorm_ratio: sup_semi,
        sigma_sup,
    })
}

/// `⟨Λ_σ Φ, Φ⟩ = E(Φ) + correction` with the correction
/// `Σ σ (|δu|^{p-2}δu - |δΦ|^{p-2}δΦ) δΦ w` evaluated on its own (with the
/// smoothed flux for `δu` when `p < 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub pairing: f64,
    pub energy: f64,
    pub correction: f64,
    /// `‖u - Φ‖_{W^{s,p}}`
    pub u_minus_phi_norm: f64,
    /// `|pairing - energy - correction|`
    pub residual: f64,
    pub diagnostics: SolveDiagnostics,
}

/// Decomposes the self-pairing of `phi` using an existing solution `u`.
pub fn decompose_with_solution(
    sigma: &Coefficient,
    phi: &GridFunction,
    solution: &SolveResult,
    params: &FracParams,
) -> Result<Decomposition> {
    let u = &solution.u;
    let eps = solution.epsilon;
    u.same_grid(phi)?;
    let domain = u.domain();
    let dom: &GridDomain = domain;
    let kernel = PairKernel::new(domain, params.s * params.p);
    let (uv, fv) = (u.values(), phi.values());
    let p = params.p;
    let correction = support_pair_sum(&kernel, &phi.support(), |i, j, w| {
        let d = fv[i] - fv[j];
        sigma.pair(dom, i, j) * (smoothed_flux(p, eps, uv[i] - uv[j]) - flux(p, d)) * d * w
    });
    let pairing = pairing_with_solution(sigma, solution, phi, params)?;
    let e = energy(phi, sigma, params);
    Ok(Decomposition {
        pairing,
        energy: e,
        correction,
        u_minus_phi_norm: sobolev_norm(&(u - phi), params.s, p),
        residual: (pairing - e - correction).abs(),
        diagnostics: SolveDiagnostics::from(solution),
    })
}

/// Solves with data `phi` and decomposes its self-pairing.
pub fn pairing_decomposition(
    sigma: &Coefficient,
    phi: &GridFunction,
    params: &FracParams,
) -> Result<Decomposition> {
    check_exterior(phi, "test function must vanish on Ω")?;
    let result = solve_dirichlet(sigma, phi, params)?;
    converged(&result)?;
    decompose_with_solution(sigma, phi, &result, params)
}
