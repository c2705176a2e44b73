use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}line {line}, column {column}: {message}", file_prefix(.file))]
    Parse {
        file: Option<PathBuf>,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("run failed at {point}: {source}")]
    Run {
        point: String,
        #[source]
        source: privnet_core::Error,
    },
    #[error("no rows to write to {}", .0.display())]
    EmptyRows(PathBuf),
}

fn file_prefix(file: &Option<PathBuf>) -> String {
    file.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default()
}

impl CliError {
    /// 1 for configuration problems, 2 for everything that went wrong while
    /// running or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 1,
            _ => 2,
        }
    }

    /// Individual diagnostics, one per violated invariant.
    pub fn messages(&self) -> Vec<String> {
        match self {
            CliError::Validation(v) => v.clone(),
            other => vec![other.to_string()],
        }
    }

    pub(crate) fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            CliError::Parse { line, column, message, .. } => CliError::Parse {
                file: Some(path.to_path_buf()),
                line,
                column,
                message,
            },
            other => other,
        }
    }
}
