//! Report envelope shared by the CLI commands.

use serde::Serialize;

use crate::instance::ProblemInstance;

pub const TOOL: &str = "qeq";

/// A command's payload with enough context to reproduce it. There is no
/// timestamp, so equal inputs give byte-identical files.
#[derive(Clone, Debug, Serialize)]
pub struct ReportFile<T> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub instance: String,
    pub input_hash: String,
    pub seed: u64,
    pub report: T,
}

impl<T: Serialize> ReportFile<T> {
    pub fn new(command: &str, inst: &ProblemInstance, seed: u64, report: T) -> Self {
        ReportFile {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            instance: inst.name.clone(),
            input_hash: inst.input_hash(),
            seed,
            report,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}
