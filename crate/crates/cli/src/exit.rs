//! Process exit codes.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Code {
    Ok = 0,
    /// The checked flow has error-severity violations.
    FlowErrors = 1,
    /// Bad config, arguments or input files.
    Usage = 2,
    Solver = 3,
    /// Layer assignment or chip packing failed.
    Layout = 4,
    /// Every fit in the batch failed.
    AllFitsFailed = 5,
    Statistics = 6,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub error: anyhow::Error,
}

pub trait OrExit<T> {
    fn or_exit(self, code: Code) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: Code) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

pub fn fail(code: Code, msg: impl Into<String>) -> Failure {
    Failure {
        code,
        error: anyhow::anyhow!(msg.into()),
    }
}
