use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}:{line}:{column}: parse error: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numerical(#[from] jetflow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use jetflow::Error as E;
        match self {
            CliError::Numerical(
                E::OffConstraint { .. } | E::Config(_) | E::Expr(_) | E::Shape(_) | E::Partition(_),
            ) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }

    /// Attaches a field name to a library error raised while building it.
    pub(crate) fn at(field: &str) -> impl FnOnce(jetflow::Error) -> CliError + '_ {
        move |e| CliError::Validation {
            field: field.to_string(),
            message: e.to_string(),
        }
    }
}
