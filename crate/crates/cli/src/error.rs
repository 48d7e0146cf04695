use std::path::PathBuf;

use serde_json::json;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: no observations", path.display())]
    NoObservations { path: PathBuf },
    #[error("{}: x outside domain: {values:?}", path.display())]
    OutOfDomain { path: PathBuf, values: Vec<f64> },
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("{module} (config field `{field}`): {source}")]
    Module {
        module: &'static str,
        field: &'static str,
        #[source]
        source: grevf_core::Error,
    },
    #[error("result `{0}` is not finite")]
    NonFinite(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::NoObservations { .. } => "no-observations",
            Self::OutOfDomain { .. } => "domain",
            Self::Config { .. } => "config",
            Self::Module { source, .. } => source.category(),
            Self::NonFinite(_) => "numeric",
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({ "error": self.category(), "message": self.to_string() });
        if let Self::Module { module, field, .. } = self {
            v["module"] = json!(module);
            v["field"] = json!(field);
        }
        if let Self::Config { field, .. } = self {
            v["field"] = json!(field);
        }
        v.to_string()
    }
}

/// Attaches the responsible module and config field to a core error.
pub(crate) trait Context<T> {
    fn at(self, module: &'static str, field: &'static str) -> Result<T>;
}

impl<T> Context<T> for grevf_core::Result<T> {
    fn at(self, module: &'static str, field: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Module {
            module,
            field,
            source,
        })
    }
}
