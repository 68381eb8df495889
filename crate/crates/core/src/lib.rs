//! Sampling-based certification and refutation of generalized convexity
//! (pseudo-, quasi- and semistrict quasi-convexity/concavity/linearity) for
//! real functions on convex regions of R^n.

pub mod characterize;
pub mod cli;
pub mod campaign;
pub mod corpus;
pub mod dsl;
pub mod function;
pub mod nonsmooth;
pub mod point;
pub mod region;
pub mod report;
