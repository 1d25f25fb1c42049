//! Verification and fence repair for speculative-execution leaks.
//!
//! A program in the mini IR is compiled to a speculative transition system
//! whose bad states are vulnerable instructions reached while speculating.
//! A PDR engine either proves the system safe or produces a leaking trace,
//! and the repair loop activates fences until no trace remains.

pub mod bench;
pub mod certificate;
pub mod encode;
pub mod ir;
pub mod logic;
pub mod pdr;
pub mod repair;
pub mod threat;
