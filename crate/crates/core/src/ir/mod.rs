//! SSA mini intermediate representation: types, text format, validation
//! and the control-flow checksum used by fingerprinting.

mod checksum;
mod parser;
mod printer;
mod types;
mod validate;

pub use checksum::cfg_checksum;
pub use parser::{parse_module, SyntaxError};
pub use printer::{print_function, print_module};
pub use types::*;
pub use validate::{validate_module, Diagnostic, DiagnosticCode};
