//! The p-Douglas identity on the interval, the unit disk and the unit ball:
//! interior p-energies, the Bregman boundary form, and independent checks of
//! the identities relating them.

pub mod convergence;
pub mod error;
pub mod forms;
pub mod harmonic;
pub mod identities;
pub mod kernels;
pub mod montecarlo;
pub mod quadrature;

pub use convergence::{convergence, ConvergenceRow, ConvergenceTable, StudyKind};
pub use error::{Error, Result};
pub use forms::{FormValue, QuadratureGrid};
pub use harmonic::{BoundaryFunction, FourierTable, HarmonicDiskFunction, Preset, SphereFunction};
pub use identities::{CheckOptions, IdentityReport, SmoothField};
pub use kernels::{DomainSpec, Exponent, KernelSet};
pub use montecarlo::{McConfig, McEstimate};
