use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: cannot decode image: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: unsupported pixel format {format}")]
    PixelFormat { path: PathBuf, format: String },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: missing or invalid meta field `{field}`")]
    MissingMeta { path: PathBuf, field: &'static str },

    #[error("{path}: unknown semantic code {code}")]
    UnknownCode { path: PathBuf, code: u8 },

    #[error("dimension mismatch: {left} is {lh}x{lw}, {right} is {rh}x{rw}")]
    DimensionMismatch {
        left: String,
        lh: usize,
        lw: usize,
        right: String,
        rh: usize,
        rw: usize,
    },

    #[error("degenerate grid")]
    DegenerateGrid,

    #[error("invalid value {value} at ({y}, {x})")]
    InvalidValue { y: usize, x: usize, value: f64 },

    #[error("invalid grid container: {0}")]
    Container(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("insufficient anatomy: {class}, found {found}")]
    InsufficientAnatomy { class: &'static str, found: usize },

    #[error("non-contiguous selection for {class}: unselected region between selected instances")]
    NonContiguous { class: &'static str },

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("spinal cord absent")]
    SpinalCordAbsent,

    #[error("edge line of {vertebra} never intersects the spinal cord")]
    EdgeMissesCord { vertebra: &'static str },

    #[error("reference degenerate: {0}")]
    DegenerateReference(String),

    #[error("herniation rows outside profile at {level}")]
    OutsideProfile { level: String },

    #[error("missing anatomy: {0}")]
    MissingAnatomy(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("zero mean signal in span {0}")]
    ZeroMean(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("single-class input: ROC needs both positive and negative labels")]
    SingleClass,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("phantom geometry overflow: {0}")]
    GeometryOverflow(String),
}

impl Error {
    /// Stable short code for the error kind, surfaced in reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Image { .. } => "image_decode",
            Error::PixelFormat { .. } => "pixel_format",
            Error::Json { .. } => "json",
            Error::MissingMeta { .. } => "missing_meta",
            Error::UnknownCode { .. } => "unknown_code",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DegenerateGrid => "degenerate_grid",
            Error::InvalidValue { .. } => "invalid_value",
            Error::Container(_) => "container",
            Error::Schema(_) => "schema",
            Error::InsufficientAnatomy { .. } => "insufficient_anatomy",
            Error::NonContiguous { .. } => "non_contiguous",
            Error::DegenerateRegion(_) => "degenerate_region",
            Error::SpinalCordAbsent => "spinal_cord_absent",
            Error::EdgeMissesCord { .. } => "edge_misses_cord",
            Error::DegenerateReference(_) => "degenerate_reference",
            Error::OutsideProfile { .. } => "outside_profile",
            Error::MissingAnatomy(_) => "missing_anatomy",
            Error::InsufficientSamples(_) => "insufficient_samples",
            Error::ZeroMean(_) => "zero_mean",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::SingleClass => "single_class",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::GeometryOverflow(_) => "geometry_overflow",
        }
    }

    /// True for errors caused by missing or unusable anatomy rather than IO.
    pub fn is_anatomical(&self) -> bool {
        matches!(
            self,
            Error::InsufficientAnatomy { .. }
                | Error::NonContiguous { .. }
                | Error::DegenerateRegion(_)
                | Error::SpinalCordAbsent
                | Error::EdgeMissesCord { .. }
                | Error::DegenerateReference(_)
                | Error::OutsideProfile { .. }
                | Error::MissingAnatomy(_)
                | Error::InsufficientSamples(_)
                | Error::ZeroMean(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
