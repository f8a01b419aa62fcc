use thiserror::Error;

/// Errors raised across the library.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error("polynomials live in different spaces: {0}")]
    DimensionMismatch(String),
    #[error("photon power {power} exceeds cap {cap}")]
    PhotonOverflow { power: u32, cap: u32 },
    #[error("exponent has nonzero constant term {0}; factor it out first")]
    NonzeroConstant(String),
    #[error("vacuum amplitude vanishes; nilpotential undefined (apply local operations first)")]
    ZeroVacuum,
    #[error("atom index {index} out of range for {num_atoms} atoms")]
    AtomOutOfRange { index: usize, num_atoms: usize },
    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),
    #[error("polynomial is not symmetric within each part (deviation {0:e})")]
    Asymmetric(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("linear system is singular (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("{unknowns} adjustable windows cannot fit {targets} targeted coefficients")]
    RankDeficient { unknowns: usize, targets: usize },
    #[error("Gaussian normalization is degenerate: condition number of M is {condition:e}")]
    DegenerateNorm { condition: f64 },
    #[error("resonance collision: n = {n} equals omega_L / kappa")]
    ResonanceCollision { n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outcome has zero probability ({0:e})")]
    ImpossibleOutcome(f64),
    #[error("Fock cutoff {cutoff} too small: top-level population {population:e}")]
    CutoffInadequate { cutoff: usize, population: f64 },
    #[error("propagator lost unitarity: deviation {0:e}")]
    UnitarityBreach(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
