use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid color {0:?}: expected #RRGGBB")]
pub struct ColorParseError(pub String);

/// Problems with the shape of a document tree or its nested-set encoding.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("node {0:?} is reachable more than once (cycle or shared child)")]
    Cycle(String),
    #[error("node {parent:?} references unknown child {child:?}")]
    UnknownChild { parent: String, child: String },
    #[error("malformed nested-set indices: {0}")]
    MalformedIndices(String),
    #[error("document has {count} nodes, capacity is {max}")]
    Capacity { count: usize, max: usize },
    #[error("unsupported document schema {0:?}")]
    Schema(String),
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("image decode failed: {0}")]
    Image(#[from] image::ImageError),
    #[error("annotation bbox {index} ({x},{y},{w},{h}) lies outside the {width}x{height} image")]
    AnnotationOutOfBounds {
        index: usize,
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
    #[error("annotation group refers to data element {0} which does not exist")]
    BadGroupMember(usize),
    #[error("raster has {pixels} pixels, expected {width}x{height}")]
    RasterSize {
        width: u32,
        height: u32,
        pixels: usize,
    },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("feature vector width {got} does not match expected {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("feature vector layout does not match the model layout")]
    LayoutMismatch,
    #[error("spatial features were already removed")]
    AlreadyStripped,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint format {0:?} is not supported")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreferenceError {
    #[error("unknown word {word:?}; nearest known words: {}", suggestions.join(", "))]
    UnknownWord {
        word: String,
        suggestions: Vec<String>,
    },
    #[error("node {0:?} does not exist in the document")]
    UnknownNode(String),
    #[error("node {0:?} cannot carry a color")]
    NotColorable(String),
    #[error("node {0:?} has both an exact color and a vague word")]
    Conflicting(String),
    #[error("node {0:?} appears in more than one binding set")]
    OverlappingBindings(String),
    #[error("binding set [{0}] pins different exact colors")]
    BindingConflict(String),
    #[error("vague preferences must be expanded before building a request")]
    NotConcrete,
    #[error("lexicon entry {0:?} is invalid: {1}")]
    BadLexicon(String, String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error("imputation list is empty")]
    NoImputations,
    #[error(transparent)]
    Model(#[from] ModelError),
}
