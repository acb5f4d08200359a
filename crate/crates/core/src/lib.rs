//! Calculus engine and numerical laboratory for global Fourier integral
//! operators in dimension one and two.

pub mod expr;

pub use expr::{parse, CExpr, Expr, MultiIndex, Point, Var};
pub mod classes;
pub mod composer;
pub mod oscoracle;
pub mod gridquant;
pub mod smoothlab;
pub mod report;
pub mod acceptance;

pub use classes::{AmplitudeSpec, DecayFlags, DecayReport, OrderPair, OrderTriple, PhaseProfile, PhaseSpec, SamplePlan, SymbolSpec};
pub use composer::{ExpandOptions, ExpansionKind, ExpansionSeries};
pub use gridquant::{Grid, GridField, LinearOp};
pub use oscoracle::{OracleValue, QuadPlan};
pub use report::{report_schema_version, SCHEMA_VERSION};
pub use smoothlab::DispersionSpec;
