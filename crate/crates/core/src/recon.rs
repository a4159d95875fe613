//! Recovery of `σ(x0, x0)` from the self-pairings `⟨Λ_σ Φ_N, Φ_N⟩` of a
//! concentrating sequence, plus the two-coefficient comparisons built on it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::dnmap::decompose_with_solution;
use crate::error::{invalid, Result};
use crate::grid::GridDomain;
use crate::solver::{solve_dirichlet, FracParams};
use crate::testfn::{normalize_phi, tensor_bump, BumpProfile, TestSequenceConfig};

/// Relative tolerance of the identity `pairing = energy + correction`.
pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    #[serde(rename = "N")]
    pub n: u32,
    pub pairing: f64,
    pub energy: f64,
    pub correction: f64,
    pub u_minus_phi_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub epsilon_sensitivity: Option<f64>,
}

/// Richardson-type estimate of `lim a_N` from `a_N ≈ L + A N^{-q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    /// Fitted rate `q`; `None` when the tail is constant or the fit fell back.
    pub rate: Option<f64>,
    /// Set when the last three values were not monotone or admitted no rate,
    /// and the last value was used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordFlags {
    pub extrapolation_fallback: bool,
    pub inconsistent: bool,
    pub non_converged: bool,
}

impl RecordFlags {
    pub fn any(&self) -> bool {
        self.extrapolation_fallback || self.inconsistent || self.non_converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub x0: Vec<f64>,
    pub s: f64,
    pub p: f64,
    pub r0: f64,
    pub spacing: f64,
    pub profile: BumpProfile,
    pub rows: Vec<ExperimentRow>,
    /// `σ(x0, x0)`
    pub target: f64,
    pub pairing_limit: Option<Extrapolation>,
    pub energy_limit: Option<Extrapolation>,
    /// `|pairing_limit - target|`
    pub error: Option<f64>,
    pub flags: RecordFlags,
    /// Set when the sequence stopped early; rows hold what was computed.
    pub failure: Option<String>,
}

impl ExperimentRecord {
    pub fn limit(&self) -> Option<f64> {
        self.pairing_limit.map(|e| e.value)
    }

    pub fn relative_error(&self) -> Option<f64> {
        self.error.map(|e| e / self.target.abs())
    }

    pub fn pairings(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.pairing).collect()
    }
}

/// Extrapolates from the last three entries of `values` taken at `ns`.
///
/// Fewer than three entries give the last value with the fallback flag set.
pub fn extrapolate(ns: &[f64], values: &[f64]) -> Extrapolation {
    let last = |fallback| Extrapolation {
        value: *values.last().unwrap_or(&f64::NAN),
        rate: None,
        fallback,
    };
    let k = values.len();
    if k < 3 || ns.len() != k {
        return last(true);
    }
    let (n1, n2, n3) = (ns[k - 3], ns[k - 2], ns[k - 1]);
    let (a1, a2, a3) = (values[k - 3], values[k - 2], values[k - 1]);
    let (d1, d2) = (a2 - a1, a3 - a2);
    if d1 == 0.0 && d2 == 0.0 {
        return last(false);
    }
    if d1 * d2 <= 0.0 {
        return last(true);
    }
    // d1/d2 = (N1^{-q} - N2^{-q}) / (N2^{-q} - N3^{-q}), increasing in q
    let target = d1 / d2;
    let ratio = |q: f64| (n1.powf(-q) - n2.powf(-q)) / (n2.powf(-q) - n3.powf(-q));
    let (mut lo, mut hi) = (1e-6, 30.0);
    if target <= ratio(lo) || target >= ratio(hi) {
        return last(true);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let amp = d2 / (n3.powf(-q) - n2.powf(-q));
    Extrapolation {
        value: a3 - amp * n3.powf(-q),
        rate: Some(q),
        fallback: false,
    }
}

/// Runs the sequence `Φ_N` for every `N` in `seq.n_list` and extrapolates.
///
/// Invalid configurations are errors. Failures at a particular `N` (support
/// or resolution problems, non-convergence) end the sequence and are
/// recorded in `failure`, keeping the rows computed so far.
pub fn reconstruct_diagonal(
    sigma: &Coefficient,
    domain: &Arc<GridDomain>,
    profile: BumpProfile,
    seq: &TestSequenceConfig,
    params: &FracParams,
) -> Result<ExperimentRecord> {
    seq.validate(domain)?;
    params.validate()?;
    profile.validate()?;
    let mut record = ExperimentRecord {
        x0: seq.x0.clone(),
        s: params.s,
        p: params.p,
        r0: seq.r0,
        spacing: domain.spacing(),
        profile,
        rows: Vec::new(),
        target: sigma.diagonal(domain, &seq.x0),
        pairing_limit: None,
        energy_limit: None,
        error: None,
        flags: RecordFlags::default(),
        failure: None,
    };
    for &n in &seq.n_list {
        let phi = match tensor_bump(profile, &seq.x0, seq.r0, n, domain)
            .and_then(|psi| normalize_phi(&psi, params.s, params.p))
        {
            Ok(phi) => phi,
            Err(e) => {
                record.failure = Some(format!("N={n}: {e}"));
                break;
            }
        };
        let solution = solve_dirichlet(sigma, &phi, params)?;
        let dec = decompose_with_solution(sigma, &phi, &solution, params)?;
        log::info!(
            "N={n}: pairing {:.10} energy {:.10} correction {:.3e} ({} iterations)",
            dec.pairing,
            dec.energy,
            dec.correction,
            solution.iterations
        );
        if dec.residual > CONSISTENCY_TOL * dec.pairing.abs().max(1.0) {
            record.flags.inconsistent = true;
        }
        record.rows.push(ExperimentRow {
            n,
            pairing: dec.pairing,
            energy: dec.energy,
            correction: dec.correction,
            u_minus_phi_norm: dec.u_minus_phi_norm,
            iterations: solution.iterations,
            converged: solution.converged,
            gradient_norm: solution.gradient_norm,
            epsilon_sensitivity: solution.epsilon_sensitivity,
        });
        if !solution.converged {
            record.flags.non_converged = true;
            record.failure = Some(format!(
                "N={n}: solver did not converge ({} iterations, gradient {:e})",
                solution.iterations, solution.gradient_norm
            ));
            break;
        }
    }
    if !record.rows.is_empty() {
        let ns: Vec<f64> = record.rows.iter().map(|r| r.n as f64).collect();
        let pairing = extrapolate(&ns, &record.pairings());
        let energies: Vec<f64> = record.rows.iter().map(|r| r.energy).collect();
        record.energy_limit = Some(extrapolate(&ns, &energies));
        record.flags.extrapolation_fallback = pairing.fallback;
        record.error = Some((pairing.value - record.target).abs());
        record.pairing_limit = Some(pairing);
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminationRow {
    pub x0: Vec<f64>,
    pub limit_1: Option<f64>,
    pub limit_2: Option<f64>,
    pub limit_difference: Option<f64>,
    /// `|Σ₁(x0) - Σ₂(x0)|` from the coefficients themselves.
    pub diagonal_difference: f64,
    pub max_pairing_difference: f64,
    pub pairings_agree: bool,
    /// False only when the pairings agree but the limits do not.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminationReport {
    pub tolerance: f64,
    pub rows: Vec<DeterminationRow>,
    pub records: Vec<(ExperimentRecord, ExperimentRecord)>,
}

impl DeterminationReport {
    pub fn consistent(&self) -> bool {
        self.rows.iter().all(|r| r.consistent)
    }
}

/// Reconstructs both diagonals at every probe point (`seq.x0` is replaced).
#[allow(clippy::too_many_arguments)]
pub fn exterior_determination(
    sigma_1: &Coefficient,
    sigma_2: &Coefficient,
    probes: &[Vec<f64>],
    domain: &Arc<GridDomain>,
    profile: BumpProfile,
    seq: &TestSequenceConfig,
    params: &FracParams,
    tolerance: f64,
) -> Result<DeterminationReport> {
    let mut rows = Vec::with_capacity(probes.len());
    let mut records = Vec::with_capacity(probes.len());
    for x0 in probes {
        let cfg = TestSequenceConfig {
            x0: x0.clone(),
            ..seq.clone()
        };
        let a = reconstruct_diagonal(sigma_1, domain, profile, &cfg, params)?;
        let b = reconstruct_diagonal(sigma_2, domain, profile, &cfg, params)?;
        let max_pairing_difference = a
            .rows
            .iter()
            .zip(&b.rows)
            .map(|(r, t)| (r.pairing - t.pairing).abs())
            .fold(0.0, f64::max);
        let complete = a.rows.len() == b.rows.len() && a.failure.is_none() && b.failure.is_none();
        let pairings_agree = complete && max_pairing_difference <= tolerance;
        let (l1, l2) = (a.limit(), b.limit());
        let limit_difference = l1.zip(l2).map(|(x, y)| (x - y).abs());
        rows.push(DeterminationRow {
            x0: x0.clone(),
            limit_1: l1,
            limit_2: l2,
            limit_difference,
            diagonal_difference: (a.target - b.target).abs(),
            max_pairing_difference,
            pairings_agree,
            consistent: !pairings_agree || limit_difference.is_some_and(|d| d <= tolerance),
        });
        records.push((a, b));
    }
    Ok(DeterminationReport {
        tolerance,
        rows,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `(N, |⟨(Λ₁ - Λ₂)Φ_N, Φ_N⟩|)`; each entry is a lower bound for the
    /// operator norm of `Λ₁ - Λ₂` on the normalized sequence.
    pub differences: Vec<(u32, f64)>,
    pub extrapolated: Extrapolation,
    /// `|σ₁(x0, x0) - σ₂(x0, x0)|`
    pub target: f64,
    pub relative_error: f64,
    pub records: (ExperimentRecord, ExperimentRecord),
}

impl StabilityReport {
    pub fn within(&self, tolerance: f64) -> bool {
        self.relative_error <= tolerance
    }
}

pub fn stability_probe(
    sigma_1: &Coefficient,
    sigma_2: &Coefficient,
    domain: &Arc<GridDomain>,
    profile: BumpProfile,
    seq: &TestSequenceConfig,
    params: &FracParams,
) -> Result<StabilityReport> {
    let a = reconstruct_diagonal(sigma_1, domain, profile, seq, params)?;
    let b = reconstruct_diagonal(sigma_2, domain, profile, seq, params)?;
    let differences: Vec<(u32, f64)> = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(r, t)| (r.n, (r.pairing - t.pairing).abs()))
        .collect();
    if differences.is_empty() {
        return Err(invalid(
            "sequence",
            format!(
                "no pairing rows to compare ({})",
                a.failure.as_deref().or(b.failure.as_deref()).unwrap_or("empty N list")
            ),
        ));
    }
    let ns: Vec<f64> = differences.iter().map(|d| d.0 as f64).collect();
    let vals: Vec<f64> = differences.iter().map(|d| d.1).collect();
    let extrapolated = extrapolate(&ns, &vals);
    let target = (a.target - b.target).abs();
    let relative_error = if target > 0.0 {
        (extrapolated.value - target).abs() / target
    } else {
        extrapolated.value.abs()
    };
    Ok(StabilityReport {
        differences,
        extrapolated,
        target,
        relative_error,
        records: (a, b),
    })
}
