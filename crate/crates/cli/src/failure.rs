use serde_json::{json, Value};

/// A run-ending error with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

pub const EXIT_ARGUMENT: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_DIMENSION: u8 = 4;

impl Failure {
    pub fn argument(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_ARGUMENT,
            kind: "argument",
            message: message.into(),
            details: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut body = json!({
            "kind": self.kind,
            "code": self.code,
            "message": self.message,
        });
        if let Some(d) = &self.details {
            body["details"] = d.clone();
        }
        json!({ "error": body }).to_string()
    }
}

impl From<papis::Error> for Failure {
    fn from(e: papis::Error) -> Self {
        use papis::Error as E;
        let (code, kind) = match &e {
            E::Argument(_) => (EXIT_ARGUMENT, "argument"),
            E::Dimension(_) => (EXIT_DIMENSION, "dimension"),
            E::Io { .. } => (EXIT_INPUT, "io"),
            E::Format(_) => (EXIT_INPUT, "format"),
            E::Parse { .. } => (EXIT_INPUT, "parse"),
            E::Conflict { .. } => (EXIT_INPUT, "conflict"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
            details: None,
        }
    }
}

impl From<clap::Error> for Failure {
    fn from(e: clap::Error) -> Self {
        let text = e.render().to_string();
        let message = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("invalid arguments")
            .trim_start_matches("error: ")
            .to_string();
        Self::argument(message)
    }
}

pub fn io_failure(what: &str, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_INPUT,
        kind: "io",
        message: format!("{what}: {e}"),
        details: None,
    }
}
