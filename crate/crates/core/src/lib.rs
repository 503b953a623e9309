//! Two-qubit entanglement convertibility: states, measures, separable
//! channels, conversion decisions with constructive protocols, and a
//! randomized oracle that checks them.

pub mod channels;
pub mod cli;
pub mod convertibility;
pub mod exec;
pub mod measures;
pub mod oracle;
pub mod qmat;
pub mod states;

pub use channels::{Atom, Protocol, SeparableChannel};
pub use convertibility::{decide, DecideOptions, Reason, Verdict};
pub use exec::Exec;
pub use states::{DensityMatrix, FamilyTag};
