//! Shared helpers for the acceptance run.

use std::path::PathBuf;

use liftinv_cli::problem::ProblemFile;

/// A problem file shipped with the command-line crate.
pub fn fixture(name: &str) -> ProblemFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/fixtures").join(name);
    ProblemFile::load(&path).unwrap_or_else(|e| panic!("{name}: {e:#}"))
}
