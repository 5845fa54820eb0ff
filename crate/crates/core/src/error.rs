use std::fmt;
use std::path::PathBuf;

/// A single validation finding with the document location it refers to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

impl Issue {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { location: location.into(), message: message.into() }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to parse {doc}: {source}")]
    Parse {
        doc: &'static str,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid scenario ({} issue(s)):\n{}", .0.len(), join_issues(.0))]
    Scenario(Vec<Issue>),

    #[error("invalid phase configuration ({} issue(s)):\n{}", .0.len(), join_issues(.0))]
    Phases(Vec<Issue>),

    #[error("no feasible signal plan reaches the sink within horizon {horizon}")]
    NoFeasiblePlan { horizon: u32 },

    #[error("phase-time arc [{tau}, {h}) lies outside horizon {horizon}")]
    ArcOutsideHorizon { tau: u32, h: u32, horizon: u32 },

    #[error("signal plan does not partition the horizon: {0}")]
    PlanCoverage(String),

    #[error("loading exhausted horizon {horizon} with {} vehicle(s) still in the network: {stuck:?}", .stuck.len())]
    HorizonExhausted { horizon: u32, stuck: Vec<u32> },

    #[error("instance exceeds limits: {0}")]
    LimitsExceeded(String),

    #[error("cannot encode solution: {0}")]
    Encoding(String),

    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
