//! Executes a run config and persists its records.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use fracdn::dnmap::{pairing_with_solution, PairingRecord, SolveDiagnostics};
use fracdn::quadrature::{gagliardo_seminorm, gagliardo_seminorm_far_field, lp_norm};
use fracdn::recon::{exterior_determination, stability_probe};
use fracdn::solver::check_solution_estimate;
use fracdn::{
    monotonicity_check, normalize_phi, reconstruct_diagonal, solve_dirichlet, tensor_bump,
    CoefficientFamily, GridDomain, GridFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DataSpec, Experiment, RunConfig};
use crate::error::{CliError, EXIT_OK};
use crate::records::{RunRecords, ScalingRow, SolveSummary, Summary};
use crate::store::{normalized_config, output_root, run_id, sha256_hex, ResultsStore};

#[derive(Debug, Clone)]
pub enum RunOutcome {
    /// Identical config already stored; nothing was computed.
    Skipped { run_id: String, dir: PathBuf },
    Completed {
        run_id: String,
        dir: PathBuf,
        summary: Summary,
    },
}

impl RunOutcome {
    pub fn run_id(&self) -> &str {
        match self {
            RunOutcome::Skipped { run_id, .. } | RunOutcome::Completed { run_id, .. } => run_id,
        }
    }

    pub fn dir(&self) -> &Path {
        match self {
            RunOutcome::Skipped { dir, .. } | RunOutcome::Completed { dir, .. } => dir,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunOutcome::Skipped { .. } => EXIT_OK,
            RunOutcome::Completed { summary, .. } => summary.exit_code,
        }
    }
}

struct RunLog(Vec<String>);

impl RunLog {
    fn line(&mut self, s: impl Into<String>) {
        let s = s.into();
        log::info!("{s}");
        self.0.push(s);
    }
}

fn random_exterior(domain: &Arc<GridDomain>, seed: u64, amplitude: f64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; domain.len()];
    for &i in domain.w_set() {
        values[i] = amplitude * rng.gen_range(-1.0..1.0);
    }
    GridFunction::from_values(domain, values).expect("length matches the grid")
}

fn data_function(
    config: &RunConfig,
    domain: &Arc<GridDomain>,
    spec: &DataSpec,
) -> Result<(String, GridFunction), CliError> {
    match spec {
        DataSpec::Bump { n, normalize } => {
            let seq = config
                .sequence
                .as_ref()
                .ok_or_else(|| CliError::Config {
                    key: "sequence".into(),
                    reason: "bump data needs a sequence".into(),
                })?;
            let psi = tensor_bump(seq.profile, &seq.x0, seq.r0, *n, domain)?;
            let f = if *normalize {
                normalize_phi(&psi, config.params.s, config.params.p)?
            } else {
                psi
            };
            Ok((format!("{}{n}", if *normalize { "phi" } else { "psi" }), f))
        }
        DataSpec::RandomExterior { seed, amplitude } => Ok((
            format!("random{seed}"),
            random_exterior(domain, *seed, *amplitude),
        )),
    }
}

/// Computes the records of `config` without touching the store.
pub fn execute(config: &RunConfig, base_dir: &Path) -> Result<(RunRecords, Vec<String>), CliError> {
    config.validate()?;
    let mut log = RunLog(Vec::new());
    let started = Instant::now();
    let kind = config.experiment.name();
    if let Experiment::VerifyInequalities { samples } = &config.experiment {
        let report = monotonicity_check(config.params.p, *samples, config.seed)?;
        log.line(format!(
            "p={} samples={} lower inf {:e} upper sup {:e} scale deviation {:e}",
            report.p, report.samples, report.lower_infimum, report.upper_supremum, report.max_scale_deviation
        ));
        return Ok((RunRecords::VerifyInequalities { report }, log.0));
    }
    let domain = config.build_domain()?;
    log.line(format!(
        "{kind}: {} nodes, {} in Ω, {} in W, spacing {}",
        domain.len(),
        domain.omega().len(),
        domain.w_set().len(),
        domain.spacing()
    ));
    let coef = |id: &str| config.coefficient(id, &domain, base_dir);
    let params = &config.params;
    let records = match &config.experiment {
        Experiment::SeminormCheck { t_values } => {
            let seq = config.test_sequence().expect("validated");
            seq.validate(&domain)?;
            let n_dim = domain.dim() as f64;
            let mut rows = Vec::new();
            let mut first: Vec<Option<f64>> = vec![None; t_values.len()];
            for &n in &seq.n_list {
                let psi = tensor_bump(config.profile(), &seq.x0, seq.r0, n, &domain)?;
                let phi = normalize_phi(&psi, params.s, params.p)?;
                let normalization_error = (gagliardo_seminorm(&phi, params.s, params.p) - 1.0).abs();
                for (k, &t) in t_values.iter().enumerate() {
                    let value = if t == 0.0 {
                        lp_norm(&psi, params.p)
                    } else {
                        gagliardo_seminorm_far_field(&psi, t, params.p)
                    };
                    let base = *first[k].get_or_insert(value);
                    let ratio_n = n as f64 / seq.n_list[0] as f64;
                    rows.push(ScalingRow {
                        n,
                        t,
                        value,
                        ratio: value / base,
                        expected: ratio_n.powf(t - n_dim / params.p),
                        normalization_error,
                    });
                }
                log.line(format!("N={n}: |[Φ_N] - 1| = {normalization_error:e}"));
            }
            RunRecords::SeminormCheck { rows }
        }
        Experiment::Solve { coefficient, data } => {
            let sigma = coef(coefficient)?;
            let (_, f) = data_function(config, &domain, data)?;
            let r = solve_dirichlet(&sigma, &f, params)?;
            let est = check_solution_estimate(&r, &f, params, sigma.lambda());
            log.line(format!(
                "energy {} after {} iterations (gradient {:e}, converged {})",
                r.energy, r.iterations, r.gradient_norm, r.converged
            ));
            RunRecords::Solve {
                summary: SolveSummary {
                    coefficient: coefficient.clone(),
                    energy: r.energy,
                    iterations: r.iterations,
                    gradient_norm: r.gradient_norm,
                    converged: r.converged,
                    epsilon: r.epsilon,
                    epsilon_sensitivity: r.epsilon_sensitivity,
                    estimate_ratio: est.ratio,
                    estimate_bound: est.bound,
                    nodes: (0..domain.len()).map(|i| domain.coord(i)).collect(),
                    u: r.u.values().to_vec(),
                },
            }
        }
        Experiment::Pair { coefficient, f, g } => {
            let sigma = coef(coefficient)?;
            let (f_id, fv) = data_function(config, &domain, f)?;
            let (g_id, gv) = data_function(config, &domain, g)?;
            let r = solve_dirichlet(&sigma, &fv, params)?;
            let value = pairing_with_solution(&sigma, &r, &gv, params)?;
            log.line(format!("⟨Λ {f_id}, {g_id}⟩ = {value}"));
            RunRecords::Pair {
                record: PairingRecord {
                    f_id,
                    g_id,
                    value,
                    diagnostics: SolveDiagnostics::from(&r),
                },
            }
        }
        Experiment::Reconstruct { coefficient } => {
            let sigma = coef(coefficient)?;
            let seq = config.test_sequence().expect("validated");
            let record = reconstruct_diagonal(&sigma, &domain, config.profile(), &seq, params)?;
            for row in &record.rows {
                log.line(format!(
                    "N={}: pairing {} energy {} correction {:e} iterations {}",
                    row.n, row.pairing, row.energy, row.correction, row.iterations
                ));
            }
            RunRecords::Reconstruct { record }
        }
        Experiment::Determine {
            coefficient_1,
            coefficient_2,
            probes,
            tolerance,
        } => {
            let (a, b) = (coef(coefficient_1)?, coef(coefficient_2)?);
            let seq = config.test_sequence().expect("validated");
            let report = exterior_determination(
                &a,
                &b,
                probes,
                &domain,
                config.profile(),
                &seq,
                params,
                *tolerance,
            )?;
            for row in &report.rows {
                log.line(format!(
                    "x0={:?}: limits {:?} / {:?}, |Σ₁ - Σ₂| = {}",
                    row.x0, row.limit_1, row.limit_2, row.diagonal_difference
                ));
            }
            RunRecords::Determine { report }
        }
        Experiment::Stability {
            coefficient_1,
            coefficient_2,
        } => {
            let (a, b) = (coef(coefficient_1)?, coef(coefficient_2)?);
            let seq = config.test_sequence().expect("validated");
            let report = stability_probe(&a, &b, &domain, config.profile(), &seq, params)?;
            log.line(format!(
                "extrapolated difference {} vs {}",
                report.extrapolated.value, report.target
            ));
            RunRecords::Stability { report }
        }
        Experiment::VerifyInequalities { .. } => unreachable!("handled above"),
    };
    log.line(format!("finished in {:.3} s", started.elapsed().as_secs_f64()));
    Ok((records, log.0))
}

/// Content digests of every tabulated coefficient, keyed by registry id.
fn table_digests(config: &RunConfig, base_dir: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (id, spec) in &config.coefficients {
        if let CoefficientFamily::Tabulated { path } = &spec.family {
            let p = base_dir.join(path);
            let bytes = std::fs::read(&p).map_err(|e| CliError::io(&p, e))?;
            out.push((id.clone(), sha256_hex(&bytes)));
        }
    }
    Ok(out)
}

/// Loads, hashes, executes and stores a config file.
pub fn run_file(path: &Path, force: bool) -> Result<RunOutcome, CliError> {
    let config = RunConfig::load(path)?;
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    run_config(&config, &base_dir, force)
}

pub fn run_config(config: &RunConfig, base_dir: &Path, force: bool) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let normalized = normalized_config(config, &table_digests(config, base_dir)?);
    let id = run_id(&normalized);
    let store = ResultsStore::new(output_root(&config.output_dir));
    if store.contains(&id) && !force {
        log::info!("run {id} already stored; use --force to recompute");
        return Ok(RunOutcome::Skipped {
            dir: store.run_dir(&id),
            run_id: id,
        });
    }
    let (records, log) = execute(config, base_dir)?;
    let summary = store.save(&id, &normalized, &records, &(log.join("\n") + "\n"))?;
    Ok(RunOutcome::Completed {
        dir: store.run_dir(&id),
        run_id: id,
        summary,
    })
}
