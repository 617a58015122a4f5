use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported partial wave L = {0}, closed forms exist only for L = 0 and L = 1")]
    UnsupportedPartialWave(u32),

    #[error("eigensolver did not converge at R = {r} bohr")]
    Eigensolver { r: f64 },

    #[error("barrier not resolved by the sampling grid near R = {r} bohr")]
    Resolution { r: f64 },

    #[error("unitarity violated: |S| = {modulus}")]
    Unitarity { modulus: f64 },

    #[error("S = -1 has no finite scattering length")]
    SingularConversion,

    #[error("matching radius {r_match} bohr is not deep in the classically allowed region")]
    MatchingRadius { r_match: f64 },

    #[error("radial grid: {0}")]
    Grid(String),

    #[error("phase calibration failed: {0}")]
    Calibration(String),

    #[error("value out of domain: {0}")]
    OutOfDomain(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("propagation failed at d = {dipole} a.u., E = {energy} hartree, channel (L={l}, M={m}): {source}")]
    Scan {
        dipole: f64,
        energy: f64,
        l: u32,
        m: i32,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
