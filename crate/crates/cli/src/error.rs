use std::process::ExitCode;

use dnarate::Error;

/// A failure with the exit status it maps to.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_BUDGET: u8 = 5;

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    pub fn missing(flag: &str) -> Self {
        Self::validation(format!("missing --{flag}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

/// Flag that sets a parameter named in a core error.
fn flag_for(name: &str) -> &str {
    match name {
        "R_ix" => "rix",
        "R_in" => "rin",
        "R_out" => "rout",
        "rin_grid" => "rin-grid",
        "rho * L" => "rho",
        other => other,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::EnumerationTooLarge { .. } => EXIT_INFEASIBLE,
            Error::BudgetExceeded { .. } => EXIT_BUDGET,
            Error::Io(_) | Error::MalformedDump(_) => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        let message = match &e {
            Error::CrossoverOutOfRange(_) => format!("--p: {e}"),
            Error::OutOfRange { name, .. } => format!("--{}: {e}", flag_for(name)),
            Error::IndexOverhead { .. } => format!("--rix: {e}"),
            Error::EnumerationTooLarge { .. } => format!("{e} (`--method mc`)"),
            _ => e.to_string(),
        };
        Self { code, message }
    }
}
