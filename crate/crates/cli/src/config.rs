use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Failure classes mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 2.
    Argument(String),
    /// Anything that failed while running: exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Argument(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Argument(m) => write!(f, "argument error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<curate::CurateError> for CliError {
    fn from(e: curate::CurateError) -> Self {
        match e {
            curate::CurateError::Argument(_) => CliError::Argument(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Settings from a JSON file, or the defaults when no file is given.
pub fn load<S: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<S> {
    let Some(path) = path else { return Ok(S::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Argument(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Argument(format!("{}: {e}", path.display())))
}

/// Writes the resolved settings to stderr.
pub fn echo<S: Serialize>(command: &str, settings: &S) -> CliResult<()> {
    eprintln!("{command} config: {}", serde_json::to_string(settings)?);
    Ok(())
}

/// Pretty JSON to `out`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(value: &T, out: Option<&PathBuf>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit_text(&text, out)
}

pub fn emit_text(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Copies every `Some` flag over the matching settings field.
#[macro_export]
macro_rules! override_with {
    ($settings:expr, $args:expr; $($field:ident),* $(,)?) => {
        $( if let Some(v) = $args.$field.clone() { $settings.$field = v; } )*
    };
}
