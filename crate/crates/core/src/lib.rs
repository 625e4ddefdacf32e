//! Desk-scale simulator for a rational two-party quantum private set
//! intersection protocol.
//!
//! The crate executes the key-generation subroutine and the main protocol as
//! explicit statevector computations, injects the catalogued deviations and
//! channel attacks, and verifies the probability bounds, strict-Nash,
//! fairness, correctness and communication-complexity claims by Monte-Carlo
//! estimation against closed forms.

pub mod game;
pub mod keygen;
pub mod protocol;
pub mod qosmdp;
pub mod statevec;
pub mod stats;
pub mod strategies;
pub mod transcript;

pub use statevec::{BitTable, MeasurementBasis, MeasurementOutcome, Statevector};
