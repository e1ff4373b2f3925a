//! Numerics for singular solutions of `(-Laplace)^sigma u = u^p` in the
//! subcritical range: the asymptotic constant, the extension picture, the
//! monotone energy, Kelvin transforms and moving spheres.
//!
//! Every routine is generic over [`Real`]; the aliases at the crate root fix
//! the scalar to `f64`.

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod energy;
pub mod extension;
pub mod fracops;
pub mod io;
pub mod kelvin;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod specfun;

pub use model::{derived_constants, exponent_window, validate_params, ParamError};
pub use scalar::Real;

pub type Params = model::Params<f64>;
pub type DerivedConstants = model::DerivedConstants<f64>;
pub type QuadRule = quadrature::QuadRule<f64>;
pub type RadialTrace = fracops::RadialTrace<f64>;
pub type AxiField = extension::AxiField<f64>;
pub type EnergyCurve = energy::EnergyCurve<f64>;
pub type MovingSphereReport = kelvin::MovingSphereReport<f64>;
pub type BlowupEstimate = kelvin::BlowupEstimate<f64>;
