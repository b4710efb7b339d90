//! Certificates of affine quadratic stability, guaranteed decay rates and L2-gain bounds
//! for linear parameter-varying systems with affine parameter dependence and bounded
//! parameter rates.
//!
//! The pipeline is: describe the system ([`LpvSystem`]) and the scheduling boxes
//! ([`ParamBox`]), assemble a finite set of vertex LMIs ([`assemble`]), solve them
//! ([`sdp`]), and wrap the result into a checked certificate ([`certify`]). The
//! [`oracle`] module re-verifies certificates by dense gridding and simulation.

// Links the system BLAS/LAPACK used by the SDP solver.
use openblas_src as _;

pub mod assemble;
pub mod benchmark;
pub mod certify;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod oracle;
pub mod sdp;
pub mod system;

pub use assemble::{AssemblyOptions, DecayRate, GammaSpec};
pub use certify::{CertVerdict, CertifyOptions, LyapunovCertificate, Method, Outcome};
pub use error::{LpvError, Result};
pub use sdp::{SdpResult, SdpStatus, SolverOptions};
pub use system::{AffineMatrixFamily, LpvSystem, ParamBox, SymmetricAffineFamily, TimeDomain};
