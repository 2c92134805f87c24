//! Spatial discretization: grid, stencils, packed state and generator.

pub mod generator;
pub mod grid;
pub mod operators;
#[cfg(test)]
mod properties;
pub mod sparse;
pub mod state;

pub use generator::{assemble_generator, Generator};
pub use grid::Grid;
pub use operators::{build_operators, Operators};
pub use sparse::CsrMatrix;
pub use state::{inner_product_h, Layout, State};
