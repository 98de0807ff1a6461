//! Magic pentagram game: classical and quantum values, reflection strategies,
//! rigidity certificates, and perturbation studies of the `O(√ε)` law.

pub mod cli;
pub mod game;
pub mod optimizer;
pub mod rigidity;
pub mod strategy;
pub mod tensor;
