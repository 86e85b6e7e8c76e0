//! Networked SIR epidemics: exact and Monte Carlo evaluation of the expected
//! number of infections, certified upper bounds from a positive comparison
//! system, and budgeted allocation of prevention, recovery and isolation
//! resources by geometric programming.

pub mod allocator;
pub mod bound;
pub mod cli;
pub mod exact_oracle;
pub mod gp;
pub mod graph;
pub mod linalg;
pub mod phase_type;
pub mod simulator;
