//! Run configuration: one JSON document describing the grid, a registry of
//! named coefficients, solver parameters and the experiment to run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fracdn::{
    BumpProfile, Coefficient, CoefficientFamily, DomainSpec, FracParams, GridDomain, PairTable,
    TestSequenceConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_n_list() -> Vec<u32> {
    vec![1, 2, 4, 8]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_t_values() -> Vec<f64> {
    vec![0.0]
}

/// A coefficient registry entry: a family plus an optional ellipticity
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub family: CoefficientFamily,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub x0: Vec<f64>,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<u32>,
    pub r0: f64,
    #[serde(default)]
    pub profile: BumpProfile,
}

/// Exterior data for `solve` and `pair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSpec {
    /// `Φ_N` (or `Ψ_N` when `normalize` is false) of the run's sequence.
    Bump {
        n: u32,
        #[serde(default = "yes")]
        normalize: bool,
    },
    /// Independent uniform values in `[-amplitude, amplitude]` on W.
    RandomExterior {
        seed: u64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
}

fn yes() -> bool {
    true
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    /// Norms of `Ψ_N` along the sequence and the unit seminorm of `Φ_N`.
    SeminormCheck {
        #[serde(default = "default_t_values")]
        t_values: Vec<f64>,
    },
    Solve {
        coefficient: String,
        data: DataSpec,
    },
    Pair {
        coefficient: String,
        f: DataSpec,
        g: DataSpec,
    },
    Reconstruct {
        coefficient: String,
    },
    Determine {
        coefficient_1: String,
        coefficient_2: String,
        probes: Vec<Vec<f64>>,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Stability {
        coefficient_1: String,
        coefficient_2: String,
    },
    VerifyInequalities {
        samples: usize,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SeminormCheck { .. } => "seminorm-check",
            Experiment::Solve { .. } => "solve",
            Experiment::Pair { .. } => "pair",
            Experiment::Reconstruct { .. } => "reconstruct",
            Experiment::Determine { .. } => "determine",
            Experiment::Stability { .. } => "stability",
            Experiment::VerifyInequalities { .. } => "verify-inequalities",
        }
    }

    fn coefficient_ids(&self) -> Vec<(&'static str, &str)> {
        match self {
            Experiment::Solve { coefficient, .. }
            | Experiment::Pair { coefficient, .. }
            | Experiment::Reconstruct { coefficient } => vec![("experiment.coefficient", coefficient)],
            Experiment::Determine {
                coefficient_1,
                coefficient_2,
                ..
            }
            | Experiment::Stability {
                coefficient_1,
                coefficient_2,
            } => vec![
                ("experiment.coefficient_1", coefficient_1),
                ("experiment.coefficient_2", coefficient_2),
            ],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub domain: DomainSpec,
    #[serde(default)]
    pub coefficients: BTreeMap<String, CoefficientSpec>,
    pub params: FracParams,
    #[serde(default)]
    pub sequence: Option<SequenceSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

/// Sidecar next to a tabulated coefficient: the grid the table was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSidecar {
    pub grid: DomainSpec,
    pub nodes: usize,
}

/// Sidecar path for a binary table: `table.bin` → `table.bin.json`.
pub fn sidecar_path(table: &Path) -> PathBuf {
    let mut s = table.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes a table and its sidecar.
pub fn write_table(path: &Path, table: &PairTable, grid: &DomainSpec) -> Result<(), CliError> {
    let out = File::create(path).map_err(|e| CliError::io(path, e))?;
    table
        .write_le(std::io::BufWriter::new(out))
        .map_err(|e| CliError::io(path, e))?;
    let side = TableSidecar {
        grid: grid.clone(),
        nodes: table.nodes(),
    };
    let sp = sidecar_path(path);
    std::fs::write(&sp, serde_json::to_vec_pretty(&side).expect("sidecar serializes"))
        .map_err(|e| CliError::io(&sp, e))
}

fn config_err(key: impl Into<String>, reason: impl std::fmt::Display) -> CliError {
    CliError::Config {
        key: key.into(),
        reason: reason.to_string(),
    }
}

/// Maps a core validation error onto the config key it came from.
fn core_err(prefix: &str, e: fracdn::Error) -> CliError {
    match e {
        fracdn::Error::InvalidParameter { name, reason } => {
            config_err(format!("{prefix}.{name}"), reason)
        }
        other => config_err(prefix, other),
    }
}

impl RunConfig {
    /// Parses JSON, reporting the path of the first offending key.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(if path == "." { "<root>".into() } else { path }, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Range and reference checks that need no heavy computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| core_err("params", e))?;
        for (key, id) in self.experiment.coefficient_ids() {
            if !self.coefficients.contains_key(id) {
                return Err(config_err(key, format!("unknown coefficient id `{id}`")));
            }
        }
        for (id, spec) in &self.coefficients {
            if !matches!(spec.family, CoefficientFamily::Tabulated { .. }) {
                spec.family
                    .bounds()
                    .map_err(|e| core_err(&format!("coefficients.{id}"), e))?;
            }
        }
        let needs_sequence = !matches!(
            self.experiment,
            Experiment::VerifyInequalities { .. }
                | Experiment::Solve {
                    data: DataSpec::RandomExterior { .. },
                    ..
                }
        );
        match &self.sequence {
            Some(seq) => {
                seq.profile.validate().map_err(|e| core_err("sequence", e))?;
                if !(seq.r0 > 0.0) {
                    return Err(config_err("sequence.r0", "must be positive"));
                }
                if seq.x0.len() != self.domain.dim {
                    return Err(config_err("sequence.x0", "coordinate count differs from domain.dim"));
                }
                if seq.n_list.is_empty() || seq.n_list[0] == 0 || seq.n_list.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(config_err("sequence.n_list", "must be strictly increasing positive integers"));
                }
            }
            None if needs_sequence => return Err(config_err("sequence", "required for this experiment")),
            None => {}
        }
        match &self.experiment {
            Experiment::SeminormCheck { t_values } => {
                if t_values.iter().any(|t| !(*t >= 0.0 && *t < 1.0)) {
                    return Err(config_err("experiment.t_values", "entries must lie in [0, 1)"));
                }
            }
            Experiment::Determine {
                probes, tolerance, ..
            } => {
                if probes.is_empty() || probes.iter().any(|x| x.len() != self.domain.dim) {
                    return Err(config_err("experiment.probes", "need points with domain.dim coordinates"));
                }
                if !(*tolerance > 0.0) {
                    return Err(config_err("experiment.tolerance", "must be positive"));
                }
            }
            Experiment::VerifyInequalities { samples } if *samples == 0 => {
                return Err(config_err("experiment.samples", "must be positive"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn build_domain(&self) -> Result<Arc<GridDomain>, CliError> {
        self.domain.build().map_err(|e| core_err("domain", e))
    }

    pub fn test_sequence(&self) -> Option<TestSequenceConfig> {
        self.sequence.as_ref().map(|s| TestSequenceConfig {
            x0: s.x0.clone(),
            n_list: s.n_list.clone(),
            s: self.params.s,
            p: self.params.p,
            r0: s.r0,
        })
    }

    pub fn profile(&self) -> BumpProfile {
        self.sequence.as_ref().map(|s| s.profile).unwrap_or_default()
    }

    /// Builds a registry coefficient; tables are resolved relative to `base_dir`.
    pub fn coefficient(
        &self,
        id: &str,
        domain: &GridDomain,
        base_dir: &Path,
    ) -> Result<Coefficient, CliError> {
        let key = format!("coefficients.{id}");
        let spec = self
            .coefficients
            .get(id)
            .ok_or_else(|| config_err(&key, "unknown coefficient id"))?;
        let coef = match &spec.family {
            CoefficientFamily::Tabulated { path } => {
                let table = load_table(&base_dir.join(path), &self.domain, &key)?;
                Coefficient::tabulated(table, domain, spec.lambda)
            }
            family => Coefficient::closed_form(family.clone(), spec.lambda),
        }
        .map_err(|e| core_err(&key, e))?;
        coef.check_ellipticity(domain, self.seed)
            .map_err(|e| core_err(&key, e))?;
        Ok(coef)
    }
}

/// Reads a binary table after checking that its sidecar matches `grid`.
pub fn load_table(path: &Path, grid: &DomainSpec, key: &str) -> Result<PairTable, CliError> {
    let sp = sidecar_path(path);
    let text = std::fs::read_to_string(&sp).map_err(|e| CliError::io(&sp, e))?;
    let side: TableSidecar =
        serde_json::from_str(&text).map_err(|e| config_err(format!("{key}.sidecar"), e))?;
    if &side.grid != grid {
        return Err(config_err(
            format!("{key}.sidecar.grid"),
            "table was built for a different grid",
        ));
    }
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    PairTable::read_le(side.nodes, BufReader::new(file)).map_err(|e| config_err(format!("{key}.path"), e))
}
