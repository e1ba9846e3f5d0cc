use std::path::PathBuf;

use thiserror::Error;

use crate::config::Stage;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage} adapter: {message}{}", stderr_suffix(.stderr))]
    Adapter {
        stage: Stage,
        message: String,
        stderr: String,
    },
    #[error("{context}: {message}")]
    Core { context: String, message: String },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn stderr_suffix(stderr: &str) -> String {
    let trimmed = stderr.trim();
    if trimmed.is_empty() {
        String::new()
    } else {
        format!("\n--- adapter stderr ---\n{trimmed}")
    }
}

impl PipelineError {
    /// Process exit status: 2 for configuration and invocation problems,
    /// 3 for adapter failures, 4 for data rejected by the core.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) | PipelineError::Io { .. } => 2,
            PipelineError::Adapter { .. } => 3,
            PipelineError::Core { .. } => 4,
        }
    }

    pub fn core(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        PipelineError::Core {
            context: context.into(),
            message: err.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

pub fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

pub fn write(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}
