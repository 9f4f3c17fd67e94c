//! Mini-C frontend: parser, control-flow graphs, and interprocedural
//! constraint generation for both context modes.

pub mod ast;
pub mod cfg;
pub mod parser;
pub mod system;
pub mod transfer;

pub use cfg::AssertSite;
pub use parser::{parse, FrontendError, Procedure, Program};
pub use system::{check_asserts, AssertVerdict, ProgramSystem};
pub use transfer::ContextMode;
