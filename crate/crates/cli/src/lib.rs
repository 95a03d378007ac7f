//! Batch front end for `liftinv`: problem files in, result files, grids and
//! reports out.

pub mod commands;
pub mod grid;
pub mod output;
pub mod problem;

use liftinv::Error;

/// Every way the binary can terminate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    /// Unparseable or invalid input (also used by clap for usage errors).
    InvalidInput = 2,
    NonConvergence = 3,
    /// The stability assumption could not be certified.
    NotStable = 4,
    /// `verify` found counterexamples.
    Violations = 5,
    /// LP/SDP failure or an enumeration budget was hit.
    Solver = 6,
    Io = 7,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Maps an error chain to its exit code; the first recognised cause wins.
    pub fn classify(err: &anyhow::Error) -> Exit {
        for cause in err.chain() {
            if let Some(e) = cause.downcast_ref::<Error>() {
                return match e {
                    Error::NonConvergence { .. } => Exit::NonConvergence,
                    Error::NotStable { .. } => Exit::NotStable,
                    Error::LpFailure(_) | Error::SdpFailure(_) | Error::EnumerationBudget { .. } => Exit::Solver,
                    Error::DimensionMismatch { .. }
                    | Error::NotSquare { .. }
                    | Error::InvalidInput(_)
                    | Error::ConstantConstraint { .. }
                    | Error::ConstantTerm { .. }
                    | Error::NonUnitRhs { .. }
                    | Error::OriginNotInterior { .. }
                    | Error::BoxTooSmall { .. } => Exit::InvalidInput,
                };
            }
            if cause.downcast_ref::<serde_json::Error>().is_some() {
                return Exit::InvalidInput;
            }
            if cause.downcast_ref::<std::io::Error>().is_some() {
                return Exit::Io;
            }
            if cause.downcast_ref::<commands::Violations>().is_some() {
                return Exit::Violations;
            }
        }
        Exit::InvalidInput
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let all = [
            Exit::Ok,
            Exit::InvalidInput,
            Exit::NonConvergence,
            Exit::NotStable,
            Exit::Violations,
            Exit::Solver,
            Exit::Io,
        ];
        let mut codes: Vec<i32> = all.iter().map(|e| e.code()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), all.len());
    }

    #[test]
    fn classification_looks_through_context() {
        let e = anyhow::Error::new(Error::NotStable { upper: 1.2, depth: 8 }).context("solving");
        assert_eq!(Exit::classify(&e), Exit::NotStable);
        let e = anyhow::Error::new(std::io::Error::other("disk")).context("writing");
        assert_eq!(Exit::classify(&e), Exit::Io);
        let e = anyhow::Error::new(Error::NonConvergence { max_iter: 3, trace: vec![] });
        assert_eq!(Exit::classify(&e), Exit::NonConvergence);
        assert_eq!(Exit::classify(&anyhow::anyhow!("bad flag")), Exit::InvalidInput);
    }
}
