//! A scenario together with its phase configuration, loaded from or written
//! to a directory of JSON documents.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{derive_path_aux, load_scenario, NetworkDoc, PathAux, Scenario, VehiclesDoc};
use crate::phases::{parse_phases, PhaseConfig, PhasesDoc, PolicyDoc};

pub const NETWORK_FILE: &str = "network.json";
pub const VEHICLES_FILE: &str = "vehicles.json";
pub const PHASES_FILE: &str = "phases.json";

#[derive(Debug, Clone)]
pub struct Instance {
    pub scenario: Scenario,
    pub aux: PathAux,
    pub phases: PhaseConfig,
    pub phases_doc: PhasesDoc,
}

pub(crate) fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

impl Instance {
    pub fn new(scenario: Scenario, phases_doc: PhasesDoc, policy: Option<&PolicyDoc>) -> Result<Self> {
        let phases = phases_doc.build(&scenario.network, policy)?;
        let aux = derive_path_aux(&scenario);
        Ok(Self { scenario, aux, phases, phases_doc })
    }

    pub fn from_docs(network: &str, vehicles: &str, phases: &str) -> Result<Self> {
        let scenario = load_scenario(network, vehicles)?;
        Self::new(scenario, parse_phases(phases)?, None)
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load_dir_with(dir, None)
    }

    pub fn load_dir_with(dir: &Path, policy: Option<&PolicyDoc>) -> Result<Self> {
        let scenario = load_scenario(&read(&dir.join(NETWORK_FILE))?, &read(&dir.join(VEHICLES_FILE))?)?;
        Self::new(scenario, parse_phases(&read(&dir.join(PHASES_FILE))?)?, policy)
    }

    pub fn docs(&self) -> (NetworkDoc, VehiclesDoc, PhasesDoc) {
        let (n, v) = self.scenario.to_docs();
        (n, v, self.phases_doc.clone())
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let (n, v, p) = self.docs();
        write(&dir.join(NETWORK_FILE), &pretty(&n))?;
        write(&dir.join(VEHICLES_FILE), &pretty(&v))?;
        write(&dir.join(PHASES_FILE), &pretty(&p))
    }

    pub fn horizon(&self) -> u32 {
        self.scenario.network.horizon
    }
}

/// Pretty JSON with a trailing newline.
pub fn pretty<T: serde::Serialize>(x: &T) -> String {
    let mut s = serde_json::to_string_pretty(x).expect("documents serialize");
    s.push('\n');
    s
}
