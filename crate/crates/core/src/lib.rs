//! Finite-size certification of device-independent randomness and key rates.
//!
//! The pipeline runs from click counts to certified rates:
//!
//! 1. [`ingest`] turns a data configuration and `.dat` files into counts and a behavior.
//! 2. [`expr`] parses Bell expressions used as certificates.
//! 3. [`npa`] builds moment relaxations, [`solver`] solves them.
//! 4. [`tradeoff`] turns dual solutions into affine min-tradeoff functions.
//! 5. [`eat`] evaluates the finite-size entropy bound and sweeps protocol parameters.

pub mod eat;
pub mod edq;
pub mod expr;
pub mod ingest;
pub mod npa;
pub mod quadrature;
pub mod scenario;
pub mod sdp;
pub mod solver;
pub mod tradeoff;

pub use expr::{parse_expression, BellAtom, BellExpression, ExprError};
pub use scenario::{Behavior, MarginalSet, Scenario, ScenarioError};
