use std::path::PathBuf;

/// Errors raised anywhere in the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid patch grid: {0}")]
    Grid(String),

    #[error("image error: {0}")]
    Image(String),

    #[error("patch rectangle {rect:?} exceeds {width}x{height} frame")]
    OutOfBounds {
        rect: (u32, u32, u32, u32),
        width: u32,
        height: u32,
    },

    #[error("feature store: {0}")]
    Store(String),

    #[error("feature store truncated at byte offset {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: u64,
        expected: u64,
        found: u64,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: u64, col: usize },

    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("frame ({clip_id}, {frame_index}) is missing from the store")]
    MissingFrame { clip_id: String, frame_index: u32 },

    #[error("frame ({clip_id}, {frame_index}) is not part of split {split}")]
    ExtraFrame {
        clip_id: String,
        frame_index: u32,
        split: String,
    },

    #[error("frame ({clip_id}, {frame_index}) appears more than once")]
    DuplicateFrame { clip_id: String, frame_index: u32 },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("not fitted: {0}")]
    NotFitted(String),

    #[error("unknown {kind} '{name}' (registered: {known})")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}

/// Attach a pipeline stage name to an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
