//! Finite-element laboratory for the Schrödinger operator −Δ − λ/|x|² with
//! the potential singular at a boundary point.
//!
//! The crate discretizes case-C1 geometries (domains in the upper half-space
//! with the origin on the boundary), verifies the sharp Hardy inequalities
//! and the Pohozaev/multiplier identities on the discrete spaces, integrates
//! the associated wave and Schrödinger flows conservatively, and computes
//! HUM boundary controls from the Γ₀ = {x·ν ≥ 0} control region for every
//! coupling λ ≤ λ(N) = N²/4.

pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod hum;
pub mod linalg;
pub mod mesh;
pub mod operator;
pub mod quadrature;
pub mod report;
pub mod semilinear;
pub mod spectral;

pub use error::{Error, Result};
pub use mesh::{build_domain, generate_mesh, DomainKind, DomainSpec, Mesh, MeshOptions};
pub use operator::{AssemblyOptions, FluxWeight, OperatorSet};
pub use report::IdentityReport;
