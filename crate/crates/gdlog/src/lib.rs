//! A Generative Datalog engine with a Monte Carlo possible-worlds layer.
//!
//! Rules may carry parameterized distribution terms in their heads; the
//! chase fires each rule instantiation at most once, drawing every sampled
//! value from randomness keyed by what is being fired rather than when, so
//! results are reproducible and independent of scheduling. On top of that
//! sit probabilistic tables, per-world relational queries, and Monte Carlo
//! estimation of event probabilities and aggregate moments with confidence
//! intervals.

pub mod ast;
pub mod chase;
pub mod dist;
pub mod event;
pub mod fact;
pub mod io;
pub mod lex;
pub mod mc;
pub mod parser;
pub mod program;
pub mod query;
pub mod rng;
pub mod schema;
pub mod value;

pub use chase::{
    run_chase, run_chase_traced, run_deterministic_datalog, ChaseError, DatalogError, FiringKey,
    Policy, TraceRecord, WorldResult, WorldStatus,
};
pub use dist::{cdf, sample, DistError, DistSpec};
pub use event::{event_holds, multiplicity, parse_event, EventError, EventExpr};
pub use fact::{make_fact, Fact, Instance, InstanceMode};
pub use mc::{
    estimate_event, estimate_group_moments, sample_world, wilson_interval, Estimate,
    EventEstimate, McError, MomentsReport, ProbCell, ProbRow, ProbTable, SourceKind,
    TableRelation, WorldSource,
};
pub use parser::parse_program;
pub use program::{validate_program, Program, ValidateError};
pub use query::{eval_query, parse_query, Query, QueryError};
pub use schema::{AttrSchema, RelationKind, RelationSchema, Schema, SchemaError};
pub use value::{AttrType, Value};
