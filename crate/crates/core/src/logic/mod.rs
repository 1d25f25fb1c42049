//! Terms, bit-level circuits, the SAT oracle, and reference checkers.

pub mod aig;
pub mod bits;
pub mod bmc;
pub mod check;
pub mod explicit;
pub mod sat;
pub mod term;

pub use aig::{Aig, AigLit, Blaster, Word};
pub use bits::{BitLit, BitSystem, Cube, Tseitin};
pub use bmc::bmc;
pub use check::{check_sat, check_sat_with, Model, ResourceError, SatResult};
pub use explicit::{explicit_reachable, Reachability, DEFAULT_STATE_BUDGET};
pub use term::{mask, Formula, Kind, Op, Term, VarId};
