use thiserror::Error;

/// Process exit status of a command.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const BUDGET: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("projected {projected:e} cell updates exceed the budget of {budget:e}")]
    Budget { projected: f64, budget: f64 },

    #[error(transparent)]
    Core(#[from] ewlab_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use ewlab_core::Error as E;
        match self {
            CliError::Budget { .. } | CliError::Core(E::MemoryBudget { .. }) => exit::BUDGET,
            // the blow-up monitor firing is a failed check, not a bad input
            CliError::Core(E::BlowUp { .. }) => exit::CHECK_FAILURE,
            _ => exit::CONFIG,
        }
    }
}
