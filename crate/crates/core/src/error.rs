use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("topology has no devices")]
    NoDevices,

    #[error("could not place {placed} of {wanted} small cells without coverage overlap after {attempts} attempts")]
    Placement {
        placed: usize,
        wanted: usize,
        attempts: usize,
    },

    #[error("unknown device id {0}")]
    UnknownDevice(usize),

    #[error("unknown station id {0}")]
    UnknownStation(usize),

    #[error("station {station} is not a small cell")]
    NotSmallCell { station: usize },

    #[error("device {device} is outside the coverage of station {station}")]
    OutOfCoverage { device: usize, station: usize },

    #[error("device {device} is co-located with station {station} (zero distance)")]
    ZeroDistance { device: usize, station: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("device {device} offloads {bits} bits over a zero-rate link")]
    ZeroRate { device: usize, bits: f64 },

    #[error("missing decision for device {0}")]
    MissingDecision(usize),

    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("action is not refined: device {device} row is not one-hot")]
    Unrefined { device: usize },

    #[error("no matching covers every device (device {device} left unmatched)")]
    NoCompleteMatching { device: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("enumeration needs {required} assignments, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    #[error("empty reward trace")]
    EmptyTrace,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("config serialization: {0}")]
    ConfigWrite(#[from] toml::ser::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
