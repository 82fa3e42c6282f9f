//! Library surface of the CLI: Matrix Market I/O, problem resolution, and
//! report rendering. The binary in `main.rs` wires these to the subcommands.

pub mod matrix_market;
pub mod problem;
pub mod report;

/// CLI failure, split by the exit-code class it maps to: 64 for usage, 66
/// for unreadable or malformed input, 73 for unwritable output.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Input(_) => 66,
            CliError::Output(_) => 73,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Output(m) => m,
        }
    }
}
