//! Deployment backends: the cluster simulator and the shell-out to a real
//! cluster CLI.

mod profiles;
mod quantity;
mod shell;
mod simulator;

use thiserror::Error;

pub use profiles::{extract_resources, ResourceDefaults, SystemProfile, SystemProfiles};
pub use quantity::{format_cpu, format_memory, parse_quantity, QuantityError, QuantityKind};
pub use shell::ShellBackend;
pub use simulator::{
    apply, run_workload, BenchmarkResultDyn, ClusterFile, ClusterModel, DeploymentOutcome, NodeCapacity,
    ResourceSpec, Workload, DEFAULT_CPU_RATE, DEFAULT_MEM_RATE,
};

use crate::config::ConfigDocument;

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("no resource path profile for system {0:?}")]
    UnknownSystemProfile(String),
    #[error(transparent)]
    Quantity(#[from] QuantityError),
    #[error("invalid resource request: {0}")]
    InvalidResource(String),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("deployment backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("cluster file: {0}")]
    ClusterFile(String),
    #[error("system profile file: {0}")]
    ProfileFile(String),
}

/// Result of one deployment. `resources` is known when the backend read
/// the spec itself (the simulator does, the shell backend does not).
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub outcome: DeploymentOutcome,
    pub resources: Option<ResourceSpec>,
}

pub trait DeployBackend: Send + Sync {
    fn name(&self) -> &str;

    fn deploy(&self, config: &ConfigDocument, system: &str) -> Result<Deployment, DeployError>;

    fn benchmark(&self, deployment: &Deployment, workload: &Workload) -> Result<BenchmarkResultDyn, DeployError>;
}

/// Backend wrapping [`apply`] and [`run_workload`].
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: ClusterModel,
    pub profiles: SystemProfiles,
}

impl Simulator {
    pub fn new(model: ClusterModel) -> Self {
        Self {
            model,
            profiles: SystemProfiles::builtin(),
        }
    }
}

impl DeployBackend for Simulator {
    fn name(&self) -> &str {
        "simulator"
    }

    fn deploy(&self, config: &ConfigDocument, system: &str) -> Result<Deployment, DeployError> {
        let (spec, notes) = extract_resources(config, system, &self.profiles)?;
        let mut outcome = apply(&self.model, &spec);
        if !notes.is_empty() {
            let mut logs = notes.join("\n");
            if !outcome.logs.is_empty() {
                logs.push('\n');
                logs.push_str(&outcome.logs);
            }
            outcome.logs = logs;
        }
        Ok(Deployment {
            outcome,
            resources: Some(spec),
        })
    }

    fn benchmark(&self, deployment: &Deployment, workload: &Workload) -> Result<BenchmarkResultDyn, DeployError> {
        if !deployment.outcome.success {
            return Err(DeployError::InvalidWorkload("deployment did not succeed".into()));
        }
        let spec = deployment
            .resources
            .ok_or_else(|| DeployError::InvalidWorkload("deployment has no resource spec".into()))?;
        run_workload(&self.model, &spec, workload)
    }
}
