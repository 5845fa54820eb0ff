//! Fully resolved settings of one command-line run.  Written next to the
//! outputs as `resolved_config.json`; feeding that file back reproduces the
//! run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issue, Result};
use crate::exact::Limits;
use crate::fixtures::{fixture, random_tiny};
use crate::instance::{pretty, read, write, Instance};
use crate::lagrangian::SolveConfig;
use crate::phases::PolicyDoc;

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Scaffold,
    #[default]
    Solve,
    Oracle,
    ExportMilp,
    Validate,
    Moe,
    Bench,
}

/// Which transition rule to run under.  `Semi` and `Groups` take their
/// sequences or blocks from the scenario's `phases.json`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    Full,
    Semi,
    Groups,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: Command,
    /// Fixture to scaffold; `random` uses `seed`.
    pub fixture: Option<String>,
    pub scenario: Option<PathBuf>,
    /// Plan document for `validate` and `moe`.
    pub plan: Option<PathBuf>,
    pub policy: Option<PolicyMode>,
    pub rho_y: Option<f64>,
    pub delta: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub solve: SolveConfig,
    pub limits: Limits,
    pub max_cols: usize,
    pub bench_workers: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::default(),
            fixture: None,
            scenario: None,
            plan: None,
            policy: None,
            rho_y: None,
            delta: None,
            seed: 0,
            out: PathBuf::from("out"),
            solve: SolveConfig::default(),
            limits: Limits::default(),
            max_cols: 2_000_000,
            bench_workers: vec![1, 2, 4, 8],
        }
    }
}

fn invalid(location: &str, message: impl Into<String>) -> Error {
    Error::Scenario(vec![Issue::new(location, message)])
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read(path)?).map_err(|source| Error::Parse { doc: "resolved_config.json", source })
    }

    pub fn write(&self) -> Result<PathBuf> {
        let path = self.out.join(RESOLVED_CONFIG_FILE);
        write(&path, &pretty(self))?;
        Ok(path)
    }

    /// The scaffold source: a named fixture or a seeded random instance.
    pub fn fixture_instance(&self) -> Result<Instance> {
        match self.fixture.as_deref() {
            Some("random") => Ok(random_tiny(self.seed)),
            Some(name) => fixture(name),
            None => Err(invalid("fixture", "no fixture named")),
        }
    }

    /// Loads the scenario directory and applies the factor and policy
    /// overrides.
    pub fn instance(&self) -> Result<Instance> {
        let dir = self.scenario.as_deref().ok_or_else(|| invalid("scenario", "no scenario directory given"))?;
        let base = Instance::load_dir(dir)?;
        let (_, _, mut doc) = base.docs();
        if let Some(r) = self.rho_y {
            doc.rho_y = r;
        }
        if let Some(d) = self.delta {
            doc.delta = d;
        }
        let policy = match (self.policy, &doc.policy) {
            (None, _) => None,
            (Some(PolicyMode::Full), _) => Some(PolicyDoc::Full),
            (Some(PolicyMode::Semi), p @ PolicyDoc::Semi { .. }) | (Some(PolicyMode::Groups), p @ PolicyDoc::Groups { .. }) => {
                Some(p.clone())
            }
            (Some(mode), _) => {
                return Err(Error::Phases(vec![Issue::new(
                    "policy",
                    format!("{mode:?} requested but phases.json defines no such policy block"),
                )]))
            }
        };
        Instance::new(base.scenario, doc, policy.as_ref())
    }
}
