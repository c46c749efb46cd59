//! Generator of a polynomial diffusion and the moment formula built on it.

mod bounds;
mod diffusion;
mod expm;
mod matrix;
mod validate;

pub use bounds::{rational_bounds, RationalBounds, DEFAULT_REFINE};
pub use diffusion::{DiffusionSpec, StateBox};
pub use expm::expm;
pub use matrix::{
    apply_generator, build_generator, conditional_expectation, conditional_expectation_path, propagate,
    GeneratorMatrix,
};
pub use validate::{validate_state_space, validate_state_space_with, Condition, ValidationReport, Violation};
