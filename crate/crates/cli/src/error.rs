use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("scenario `{scenario}` is invalid:\n  - {}", problems.join("\n  - "))]
    Invalid { scenario: String, problems: Vec<String> },

    #[error("no shipped scenario named `{0}`")]
    UnknownScenario(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("scenario `{scenario}`, {stage}: {source}")]
    Core {
        scenario: String,
        stage: String,
        #[source]
        source: dysonchain::Error,
    },
}
