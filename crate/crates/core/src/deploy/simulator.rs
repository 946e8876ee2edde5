//! Desk-scale cluster: first-fit placement plus a serial/parallel runtime
//! model with per-core and per-GiB hourly pricing.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::quantity::{format_cpu, format_memory, parse_quantity, QuantityKind};
use super::DeployError;

pub const DEFAULT_CPU_RATE: f64 = 0.04;
pub const DEFAULT_MEM_RATE: f64 = 0.004;
const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub cpu_millicores: u64,
    pub memory_bytes: u64,
    pub replicas: u32,
}

impl ResourceSpec {
    /// Total cores across replicas.
    pub fn total_cores(&self) -> f64 {
        self.replicas as f64 * self.cpu_millicores as f64 / 1000.0
    }

    pub fn total_memory_gib(&self) -> f64 {
        self.replicas as f64 * self.memory_bytes as f64 / GIB
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCapacity {
    pub cpu_millicores: u64,
    pub memory_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub nodes: Vec<NodeCapacity>,
    /// Dollars per core-hour.
    pub cpu_rate: f64,
    /// Dollars per GiB-hour.
    pub mem_rate: f64,
}

impl ClusterModel {
    pub fn new(nodes: Vec<NodeCapacity>) -> Result<Self, DeployError> {
        Self::with_rates(nodes, DEFAULT_CPU_RATE, DEFAULT_MEM_RATE)
    }

    pub fn with_rates(nodes: Vec<NodeCapacity>, cpu_rate: f64, mem_rate: f64) -> Result<Self, DeployError> {
        let model = Self {
            nodes,
            cpu_rate,
            mem_rate,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), DeployError> {
        if self.nodes.is_empty() {
            return Err(DeployError::ClusterFile("cluster has no nodes".into()));
        }
        if self.nodes.iter().any(|n| n.cpu_millicores == 0 || n.memory_bytes == 0) {
            return Err(DeployError::ClusterFile("node capacities must be positive".into()));
        }
        if !(self.cpu_rate >= 0.0 && self.mem_rate >= 0.0) {
            return Err(DeployError::ClusterFile("rates must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentOutcome {
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    /// `placed[i]` is the node index of replica `i`.
    pub placed: Vec<usize>,
    pub logs: String,
}

/// First-fit-decreasing placement. Replicas of one spec share a demand, so
/// the decreasing order is the replica order; nodes are tried in declared
/// order against their remaining capacity.
pub fn apply(model: &ClusterModel, spec: &ResourceSpec) -> DeploymentOutcome {
    let mut free: Vec<NodeCapacity> = model.nodes.clone();
    let mut placed = Vec::new();
    let mut logs = Vec::new();
    for replica in 0..spec.replicas {
        let slot = free
            .iter()
            .position(|n| n.cpu_millicores >= spec.cpu_millicores && n.memory_bytes >= spec.memory_bytes);
        match slot {
            Some(i) => {
                free[i].cpu_millicores -= spec.cpu_millicores;
                free[i].memory_bytes -= spec.memory_bytes;
                placed.push(i);
                logs.push(format!(
                    "INFO replica {replica} placed on node {i} (free cpu {}, free memory {})",
                    format_cpu(free[i].cpu_millicores),
                    format_memory(free[i].memory_bytes)
                ));
            }
            None => {
                let memory_everywhere = free.iter().all(|n| n.memory_bytes < spec.memory_bytes);
                let reason = if memory_everywhere {
                    "insufficient memory"
                } else {
                    "insufficient cpu"
                };
                let max_cpu = free.iter().map(|n| n.cpu_millicores).max().unwrap_or(0);
                let max_mem = free.iter().map(|n| n.memory_bytes).max().unwrap_or(0);
                logs.push(format!(
                    "ERROR replica {replica} unschedulable: {reason} (requested cpu {}, memory {}; largest free cpu {}, memory {})",
                    format_cpu(spec.cpu_millicores),
                    format_memory(spec.memory_bytes),
                    format_cpu(max_cpu),
                    format_memory(max_mem)
                ));
                return DeploymentOutcome {
                    success: false,
                    failure_reason: Some(reason.to_string()),
                    placed,
                    logs: logs.join("\n"),
                };
            }
        }
    }
    DeploymentOutcome {
        success: true,
        failure_reason: None,
        placed,
        logs: logs.join("\n"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub serial_seconds: f64,
    pub parallel_core_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResultDyn {
    pub completion_seconds: f64,
    pub cost_dollars: f64,
    pub resources: ResourceSpec,
}

/// `time = t_s + t_p / R` and
/// `cost = time/3600 * (cpu_rate * R + mem_rate * total GiB)`, where `R` is
/// the total core count.
pub fn run_workload(model: &ClusterModel, spec: &ResourceSpec, workload: &Workload) -> Result<BenchmarkResultDyn, DeployError> {
    if !(workload.serial_seconds > 0.0) || !(workload.parallel_core_seconds >= 0.0) {
        return Err(DeployError::InvalidWorkload(format!(
            "need serial_seconds > 0 and parallel_core_seconds >= 0, got {} and {}",
            workload.serial_seconds, workload.parallel_core_seconds
        )));
    }
    let cores = spec.total_cores();
    if cores <= 0.0 {
        return Err(DeployError::InvalidWorkload("deployment has zero cores".into()));
    }
    let completion_seconds = workload.serial_seconds + workload.parallel_core_seconds / cores;
    let hourly = model.cpu_rate * cores + model.mem_rate * spec.total_memory_gib();
    Ok(BenchmarkResultDyn {
        completion_seconds,
        cost_dollars: completion_seconds / 3600.0 * hourly,
        resources: *spec,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum QuantityValue {
    Integer(u64),
    Real(f64),
    Text(String),
}

impl QuantityValue {
    fn parse(&self, kind: QuantityKind) -> Result<u64, DeployError> {
        let text = match self {
            QuantityValue::Integer(i) => i.to_string(),
            QuantityValue::Real(r) => r.to_string(),
            QuantityValue::Text(t) => t.clone(),
        };
        Ok(parse_quantity(&text, kind)?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeSpec {
    cpu: QuantityValue,
    memory: QuantityValue,
    #[serde(default = "one")]
    count: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatesSpec {
    #[serde(default = "default_cpu_rate")]
    cpu_per_core_hour: f64,
    #[serde(default = "default_mem_rate")]
    mem_per_gib_hour: f64,
}

fn default_cpu_rate() -> f64 {
    DEFAULT_CPU_RATE
}

fn default_mem_rate() -> f64 {
    DEFAULT_MEM_RATE
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterFileSpec {
    nodes: Vec<NodeSpec>,
    #[serde(default)]
    rates: Option<RatesSpec>,
    #[serde(default)]
    workloads: BTreeMap<String, Workload>,
}

/// Cluster model file:
///
/// ```yaml
/// nodes:
///   - { cpu: "4", memory: 16Gi, count: 2 }
/// rates: { cpu_per_core_hour: 0.04, mem_per_gib_hour: 0.004 }
/// workloads:
///   dask: { serial_seconds: 10, parallel_core_seconds: 100 }
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFile {
    pub model: ClusterModel,
    pub workloads: BTreeMap<String, Workload>,
}

impl ClusterFile {
    pub fn from_yaml_str(text: &str) -> Result<Self, DeployError> {
        let spec: ClusterFileSpec =
            serde_yaml::from_str(text).map_err(|e| DeployError::ClusterFile(e.to_string()))?;
        let mut nodes = Vec::new();
        for node in &spec.nodes {
            let capacity = NodeCapacity {
                cpu_millicores: node.cpu.parse(QuantityKind::Cpu)?,
                memory_bytes: node.memory.parse(QuantityKind::Memory)?,
            };
            nodes.extend(std::iter::repeat_n(capacity, node.count));
        }
        let (cpu_rate, mem_rate) = spec
            .rates
            .map(|r| (r.cpu_per_core_hour, r.mem_per_gib_hour))
            .unwrap_or((DEFAULT_CPU_RATE, DEFAULT_MEM_RATE));
        Ok(Self {
            model: ClusterModel::with_rates(nodes, cpu_rate, mem_rate)?,
            workloads: spec.workloads,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DeployError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DeployError::ClusterFile(format!("{}: {e}", path.display())))?;
        Self::from_yaml_str(&text).map_err(|e| DeployError::ClusterFile(format!("{}: {e}", path.display())))
    }
}
