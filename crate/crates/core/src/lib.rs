pub mod advisory;
pub mod evalharness;
pub mod evolution;
pub mod frontends;
pub mod predicates;
pub mod rules;
pub mod span;
pub mod taxonomy;
