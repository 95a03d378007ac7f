//! Result file: the engine result plus provenance of the run.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use liftinv::engine::InvariantSetResult;
use serde::{Deserialize, Serialize};

use crate::problem::ProblemFile;

pub const TOOL: &str = "liftinv";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub tool: String,
    pub version: String,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, f64>,
    /// The problem as solved, with command-line overrides applied.
    pub problem: ProblemFile,
    pub result: InvariantSetResult,
}

impl ResultFile {
    pub fn new(problem: ProblemFile, result: InvariantSetResult, timings: Stopwatch) -> Self {
        ResultFile {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timings_ms: timings.stages,
            problem,
            result,
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let r: ResultFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if r.tool != TOOL {
            anyhow::bail!("{} was not written by {TOOL}", path.display());
        }
        Ok(r)
    }
}

/// Collects per-stage wall-clock times.
#[derive(Debug)]
pub struct Stopwatch {
    last: Instant,
    stages: BTreeMap<String, f64>,
}

impl Default for Stopwatch {
    fn default() -> Self {
        Stopwatch {
            last: Instant::now(),
            stages: BTreeMap::new(),
        }
    }
}

impl Stopwatch {
    /// Charges the time since the previous lap to `stage`.
    pub fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        *self.stages.entry(stage.into()).or_default() += (now - self.last).as_secs_f64() * 1e3;
        self.last = now;
    }
}

/// Writes `text` to `path`, or to stdout without one.
pub fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}
