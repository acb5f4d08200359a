//! Symbolic expressions over named real variables: parsing, printing,
//! exact differentiation, simplification and fast evaluation.

mod compiled;
mod complex;
mod diff;
mod multi_index;
mod node;
mod parse;
mod rewrite;
mod var;

pub use compiled::{evaluate, CompiledExpr, EvalError};
pub use complex::{CExpr, CompiledCExpr};
pub use diff::{diff, diff_multi, diff_multi_limited, DiffError, MAX_ORDER};
pub use multi_index::MultiIndex;
pub use node::{BinaryOp, Expr, Node, UnaryOp};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use rewrite::{rename_block, simplify, substitute};
pub use var::{Block, Point, Var, VarNameError, MAX_DIM, SLOT_COUNT};
