//! The mini intermediate representation: a numbered list of instructions over
//! fixed-width scalar variables and constant-length arrays.

mod ast;
mod parse;
mod print;
mod validate;

pub use ast::*;
pub use parse::{parse_program, parse_unvalidated};
pub use print::pretty_print;
pub use validate::{canonical_index_width, index_width, natural_width, validate, MAX_ARRAY_LEN, MAX_WIDTH};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum IrError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("validation error: {msg}")]
    Validation { label: Option<Label>, msg: String },
}

/// The running example: a bounds check guarding a nested array read.
pub const FIG1_SOURCE: &str = "\
program fig1
input i : u8
var k : u8
var tmp : u8
array a[4] : u8
array b[64] : u8
L0: br (i < 4) L1 L3
L1: k := load a[i]
L2: tmp := load b[k]
L3: halt
";
