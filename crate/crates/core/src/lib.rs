//! In-building fog placement over a point-to-point PON: topology, joint
//! power/delay MILP, embedded branch-and-bound solver, brute-force oracle
//! and scenario sweeps.

pub mod catalog;
pub mod delay_approx;
pub mod solver;
pub mod topology;
pub mod model;
pub mod oracle;
pub mod harness;
