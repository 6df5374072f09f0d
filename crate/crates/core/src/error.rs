use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("degenerate geometry: anchor and target positions coincide")]
    DegenerateGeometry,
    #[error("singular geometry: anchor matrix is rank deficient")]
    SingularGeometry,
    #[error("not enough anchors: need {needed}, got {got}")]
    TooFewAnchors { needed: usize, got: usize },
    #[error("no anchors available")]
    NoAnchors,
    #[error("no trusted anchor: every reputation-weighted anchor weight is zero")]
    NoTrustedAnchor,
}
