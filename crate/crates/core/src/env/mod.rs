//! Environment definition, random generation, and structural
//! validation.

pub mod generate;
pub mod model;
pub mod partition;
