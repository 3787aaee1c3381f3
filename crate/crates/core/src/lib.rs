//! Large-application layout laboratory.
//!
//! * [`ir`]: SSA mini-IR with parser, printer and validator.
//! * [`icf`]: semantic identical-function folding.
//! * [`profile`]: time-profile counters and function ordering.
//! * [`pagesim`]: cold-start page-read simulation with read-ahead.
//! * [`elf`]: SysV/GNU symbol hash tables and relocation accounting.

pub mod elf;
pub mod fnv;
pub mod icf;
pub mod ir;
pub mod pagesim;
pub mod profile;
pub mod ratio;
