use std::fmt;
use std::path::Path;

use aggtruth::eval::EvalError;
use aggtruth::model::ModelError;
use aggtruth::select::SelectError;
use aggtruth::synth::SynthError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn json(path: &Path, e: serde_json::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

fn is_config(e: &aggtruth::Error) -> bool {
    use aggtruth::Error;
    match e {
        Error::Eval(EvalError::Config(_)) => true,
        Error::Eval(EvalError::Stage { source, .. } | EvalError::Load { source, .. }) => {
            is_config(source)
        }
        Error::Select(
            SelectError::InvalidConfig(_) | SelectError::Model(ModelError::InvalidConfig(_)),
        ) => true,
        Error::Model(ModelError::InvalidConfig(_)) => true,
        _ => false,
    }
}

impl From<aggtruth::Error> for CliError {
    fn from(e: aggtruth::Error) -> Self {
        if is_config(&e) {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        aggtruth::Error::Eval(e).into()
    }
}

impl From<SelectError> for CliError {
    fn from(e: SelectError) -> Self {
        aggtruth::Error::Select(e).into()
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        aggtruth::Error::Model(e).into()
    }
}

impl From<aggtruth::trace_io::TraceError> for CliError {
    fn from(e: aggtruth::trace_io::TraceError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<aggtruth::aggregate::AggregateError> for CliError {
    fn from(e: aggtruth::aggregate::AggregateError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<aggtruth::dataset::DatasetError> for CliError {
    fn from(e: aggtruth::dataset::DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors_are_usage_and_the_rest_data() {
        let bad_cfg: CliError = EvalError::Config("x".into()).into();
        assert_eq!(bad_cfg.exit_code(), 1);
        let nested: CliError = SelectError::Model(ModelError::InvalidConfig("x".into())).into();
        assert_eq!(nested.exit_code(), 1);
        let data: CliError = ModelError::SingleClass.into();
        assert_eq!(data.exit_code(), 2);
        assert_eq!(CliError::Internal("x".into()).exit_code(), 3);
    }
}
