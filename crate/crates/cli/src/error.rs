use std::fmt;

use polarstar::analysis::AnalysisError;
use polarstar::design::DesignError;
use polarstar::factor::FactorError;
use polarstar::graph::FormatError;
use polarstar::sim::{CampaignError, SimError, TopologyError, TrafficError};
use polarstar::star::StarError;

/// Exit code 1 for bad input, 2 when a constructed object breaks a
/// guaranteed property.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }

    pub fn missing(flag: &str, what: &str) -> Self {
        CliError::Validation(format!("MissingParameter: {flag} is required for {what}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Invariant(m) => f.write_str(m),
        }
    }
}

impl From<FactorError> for CliError {
    fn from(e: FactorError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<StarError> for CliError {
    fn from(e: StarError) -> Self {
        match e {
            StarError::DiameterViolation { .. } | StarError::DegreeViolation { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<TopologyError> for CliError {
    fn from(e: TopologyError) -> Self {
        match e {
            TopologyError::Star(s) => s.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::VCDeadlockDetected { .. } => CliError::Invariant(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TrafficError> for CliError {
    fn from(e: TrafficError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::Topology(t) => t.into(),
            CampaignError::Sim(s) => s.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("IoError: {e}"))
    }
}
