//! Real-cluster backend: writes the canonical YAML to a temporary file and
//! runs `<cli> [--context <ctx>] apply -f <file>`.

use std::io::Write;
use std::process::Command;
use std::sync::Mutex;

use super::{DeployBackend, DeployError, Deployment, DeploymentOutcome};
use crate::chain::filter_logs;
use crate::config::ConfigDocument;
use crate::deploy::{BenchmarkResultDyn, Workload};

#[derive(Debug)]
pub struct ShellBackend {
    program: String,
    context: Option<String>,
    opted_in: bool,
    // One apply at a time against a given context.
    lock: Mutex<()>,
}

impl ShellBackend {
    /// `opted_in` must be set explicitly; without it nothing is ever run.
    pub fn new(program: impl Into<String>, context: Option<String>, opted_in: bool) -> Self {
        Self {
            program: program.into(),
            context,
            opted_in,
            lock: Mutex::new(()),
        }
    }

    pub fn shell_deploy(&self, config: &ConfigDocument) -> Result<DeploymentOutcome, DeployError> {
        if !self.opted_in {
            return Err(DeployError::BackendUnavailable(
                "shell backend requires explicit opt-in".into(),
            ));
        }
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());

        let mut file = tempfile::Builder::new()
            .prefix("lads-")
            .suffix(".yaml")
            .tempfile()
            .map_err(|e| DeployError::BackendUnavailable(format!("temp file: {e}")))?;
        file.write_all(config.to_yaml().as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| DeployError::BackendUnavailable(format!("temp file: {e}")))?;

        let mut cmd = Command::new(&self.program);
        if let Some(ctx) = &self.context {
            cmd.arg("--context").arg(ctx);
        }
        cmd.arg("apply").arg("-f").arg(file.path());
        let output = cmd.output().map_err(|e| {
            DeployError::BackendUnavailable(format!("cannot run {}: {e}", self.program))
        })?;

        let stdout = String::from_utf8_lossy(&output.stdout);
        let stderr = String::from_utf8_lossy(&output.stderr);
        let logs = match (stdout.trim().is_empty(), stderr.trim().is_empty()) {
            (_, true) => stdout.trim_end().to_string(),
            (true, false) => stderr.trim_end().to_string(),
            (false, false) => format!("{}\n{}", stdout.trim_end(), stderr.trim_end()),
        };
        if output.status.success() {
            return Ok(DeploymentOutcome {
                success: true,
                failure_reason: None,
                placed: Vec::new(),
                logs,
            });
        }
        let reason = filter_logs(&stderr)
            .into_iter()
            .next()
            .or_else(|| stderr.lines().find(|l| !l.trim().is_empty()).map(str::to_string))
            .unwrap_or_else(|| format!("{} exited with {}", self.program, output.status));
        Ok(DeploymentOutcome {
            success: false,
            failure_reason: Some(reason),
            placed: Vec::new(),
            logs,
        })
    }
}

impl DeployBackend for ShellBackend {
    fn name(&self) -> &str {
        "shell"
    }

    fn deploy(&self, config: &ConfigDocument, _system: &str) -> Result<Deployment, DeployError> {
        Ok(Deployment {
            outcome: self.shell_deploy(config)?,
            resources: None,
        })
    }

    fn benchmark(&self, _deployment: &Deployment, _workload: &Workload) -> Result<BenchmarkResultDyn, DeployError> {
        Err(DeployError::BackendUnavailable(
            "the shell backend does not run benchmarks".into(),
        ))
    }
}
