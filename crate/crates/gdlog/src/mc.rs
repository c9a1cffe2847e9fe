//! Monte Carlo possible-worlds layer: sample worlds from probabilistic
//! tables or generative programs, push each world through an optional query,
//! and estimate event probabilities and per-group moments.
//!
//! Censored worlds (budget exhausted before fixpoint) carry the probability
//! mass the source failed to define, so a single probability would
//! overclaim. Three numbers are reported instead: conditional on
//! termination, pessimistic (censored worlds counted as event-false) and
//! optimistic (counted as event-true). They coincide when nothing is
//! censored and always satisfy pessimistic <= conditional <= optimistic.
//! Failed worlds (runtime distribution errors) indicate a modeling bug and
//! are excluded from all three, but reported as a fraction.
//!
//! All table randomness is keyed by (seed, world, relation, row, cell), so
//! worlds are reproducible and independent of evaluation order. Moment
//! accumulation is Welford's algorithm per group, sequentially over worlds.

use std::collections::BTreeMap;

use crate::chase::{run_chase, ChaseError, Policy, WorldResult, WorldStatus};
use crate::dist::{inv_std_normal_cdf, sample, validate_params, DistError, DistSpec};
use crate::event::{event_holds, EventExpr};
use crate::fact::{Fact, Instance};
use crate::program::Program;
use crate::query::{eval_query, Query, QueryError};
use crate::rng::KeyBuilder;
use crate::schema::{RelationKind, Schema, SchemaError};
use crate::value::{AttrType, Value};

/// Estimates based on fewer effective worlds than this are refused.
pub const MIN_EFFECTIVE: u64 = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum McError {
    #[error("all {n} worlds were censored or failed (censored {censored}, failed {failed}); no estimate is possible")]
    AllWorldsCensored { n: u64, censored: u64, failed: u64 },
    #[error("only {n_effective} of {n} worlds reached fixpoint, fewer than the required {minimum}")]
    TooFewEffectiveWorlds { n_effective: u64, n: u64, minimum: u64 },
    #[error("world {world} produced more than one row for group ({group})")]
    DuplicateGroupRow { world: u64, group: String },
    #[error("attribute {0} is not in the query output")]
    UnknownOutputAttribute(String),
    #[error("moment estimation needs a numeric attribute, {attr} is {ty}")]
    NonNumericValueAttribute { attr: String, ty: AttrType },
    #[error(transparent)]
    Chase(#[from] ChaseError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("existence probability {got} of row {row} in {relation} is outside (0, 1]")]
    BadExistenceProbability { relation: String, row: usize, got: f64 },
    #[error("row {row} of {relation} has {got} cells, schema has {expected} attributes")]
    RowArityMismatch { relation: String, row: usize, expected: usize, got: usize },
    #[error("cell {cell} of {relation} row {row}: expected {expected}, got {got}")]
    CellTypeMismatch {
        relation: String,
        row: usize,
        cell: usize,
        expected: AttrType,
        got: AttrType,
    },
    #[error("cell {cell} of {relation} row {row}: {source}")]
    CellDistribution {
        relation: String,
        row: usize,
        cell: usize,
        source: DistError,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("table relation {0} is not extensional")]
    NotExtensional(String),
}

/// One table cell: a constant or an independent draw with constant
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbCell {
    Const(Value),
    Dist { spec: DistSpec, params: Vec<Value> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbRow {
    pub exists_p: f64,
    pub cells: Vec<ProbCell>,
}

impl ProbRow {
    pub fn certain(cells: Vec<ProbCell>) -> ProbRow {
        ProbRow { exists_p: 1.0, cells }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRelation {
    pub relation: String,
    pub rows: Vec<ProbRow>,
}

/// Rows with independent existence flags and independent cell
/// distributions, across one or more relations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbTable {
    pub relations: Vec<TableRelation>,
}

impl ProbTable {
    /// Checks every row against the schema and widens integer constants
    /// sitting in real cells.
    pub fn check(&mut self, schema: &Schema) -> Result<(), TableError> {
        for table in &mut self.relations {
            let rel = schema.require_relation(&table.relation).map_err(TableError::Schema)?;
            if rel.kind != RelationKind::Extensional {
                return Err(TableError::NotExtensional(table.relation.clone()));
            }
            for (ri, row) in table.rows.iter_mut().enumerate() {
                if !(row.exists_p > 0.0 && row.exists_p <= 1.0) {
                    return Err(TableError::BadExistenceProbability {
                        relation: table.relation.clone(),
                        row: ri,
                        got: row.exists_p,
                    });
                }
                if row.cells.len() != rel.arity() {
                    return Err(TableError::RowArityMismatch {
                        relation: table.relation.clone(),
                        row: ri,
                        expected: rel.arity(),
                        got: row.cells.len(),
                    });
                }
                for (ci, (cell, attr)) in row.cells.iter_mut().zip(&rel.attrs).enumerate() {
                    match cell {
                        ProbCell::Const(v) => {
                            if attr.ty == AttrType::Real {
                                if let Value::Integer(i) = v {
                                    *v = Value::Real(*i as f64);
                                }
                            }
                            if v.type_of() != attr.ty {
                                return Err(TableError::CellTypeMismatch {
                                    relation: table.relation.clone(),
                                    row: ri,
                                    cell: ci,
                                    expected: attr.ty,
                                    got: v.type_of(),
                                });
                            }
                        }
                        ProbCell::Dist { spec, params } => {
                            validate_params(spec, params).map_err(|source| {
                                TableError::CellDistribution {
                                    relation: table.relation.clone(),
                                    row: ri,
                                    cell: ci,
                                    source,
                                }
                            })?;
                            let support = spec.support_type();
                            let fits = support == attr.ty
                                || (attr.ty == AttrType::Real && support == AttrType::Integer);
                            if !fits {
                                return Err(TableError::CellTypeMismatch {
                                    relation: table.relation.clone(),
                                    row: ri,
                                    cell: ci,
                                    expected: attr.ty,
                                    got: support,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    Table(ProbTable),
    Generative { program: Program, edb: Instance },
    Composed { table: ProbTable, program: Program },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSource {
    pub kind: SourceKind,
    pub schema: Schema,
    pub budget: u64,
    pub policy: Policy,
}

impl WorldSource {
    pub fn table(schema: Schema, mut table: ProbTable) -> Result<WorldSource, TableError> {
        table.check(&schema)?;
        Ok(WorldSource {
            kind: SourceKind::Table(table),
            schema,
            budget: 1,
            policy: Policy::First,
        })
    }

    pub fn generative(
        program: Program,
        edb: Instance,
        budget: u64,
        policy: Policy,
    ) -> WorldSource {
        let schema = program.schema.clone();
        WorldSource { kind: SourceKind::Generative { program, edb }, schema, budget, policy }
    }

    pub fn composed(
        program: Program,
        mut table: ProbTable,
        budget: u64,
        policy: Policy,
    ) -> Result<WorldSource, TableError> {
        table.check(&program.schema)?;
        let schema = program.schema.clone();
        Ok(WorldSource { kind: SourceKind::Composed { table, program }, schema, budget, policy })
    }
}

fn widen(v: Value, ty: AttrType) -> Value {
    match (ty, v) {
        (AttrType::Real, Value::Integer(i)) => Value::Real(i as f64),
        (_, v) => v,
    }
}

fn sample_table(
    table: &ProbTable,
    schema: &Schema,
    global_seed: u64,
    world_index: u64,
) -> Result<Instance, DistError> {
    let mut instance = Instance::bag();
    for rel_table in &table.relations {
        let rel = schema
            .relation(&rel_table.relation)
            .expect("table was checked against the schema");
        for (ri, row) in rel_table.rows.iter().enumerate() {
            if row.exists_p < 1.0 {
                let mut stream = KeyBuilder::new(b"texi")
                    .u64(global_seed)
                    .u64(world_index)
                    .str(&rel_table.relation)
                    .u64(ri as u64)
                    .stream();
                if stream.next_unit() >= row.exists_p {
                    continue;
                }
            }
            let mut values = Vec::with_capacity(row.cells.len());
            for (ci, (cell, attr)) in row.cells.iter().zip(&rel.attrs).enumerate() {
                let v = match cell {
                    ProbCell::Const(v) => v.clone(),
                    ProbCell::Dist { spec, params } => {
                        let mut stream = KeyBuilder::new(b"tcel")
                            .u64(global_seed)
                            .u64(world_index)
                            .str(&rel_table.relation)
                            .u64(ri as u64)
                            .u64(ci as u64)
                            .stream();
                        sample(spec, params, &mut stream)?
                    }
                };
                values.push(widen(v, attr.ty));
            }
            instance.insert(Fact::new(rel_table.relation.clone(), values));
        }
    }
    Ok(instance)
}

/// Draws one possible world. Identical (source, seed, world index) always
/// produce the identical world.
pub fn sample_world(
    source: &WorldSource,
    global_seed: u64,
    world_index: u64,
) -> Result<WorldResult, McError> {
    match &source.kind {
        SourceKind::Table(table) => {
            match sample_table(table, &source.schema, global_seed, world_index) {
                Ok(instance) => {
                    Ok(WorldResult { instance, status: WorldStatus::Fixpoint, firings: 0 })
                }
                Err(e) => Ok(WorldResult {
                    instance: Instance::bag(),
                    status: WorldStatus::Failed(e),
                    firings: 0,
                }),
            }
        }
        SourceKind::Generative { program, edb } => Ok(run_chase(
            program,
            edb,
            global_seed,
            world_index,
            source.budget,
            source.policy,
        )?),
        SourceKind::Composed { table, program } => {
            match sample_table(table, &source.schema, global_seed, world_index) {
                Ok(instance) => Ok(run_chase(
                    program,
                    &instance.to_set(),
                    global_seed,
                    world_index,
                    source.budget,
                    source.policy,
                )?),
                Err(e) => Ok(WorldResult {
                    instance: Instance::bag(),
                    status: WorldStatus::Failed(e),
                    firings: 0,
                }),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    Probability,
    Moment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundsMode {
    Conditional,
    PessimisticLow,
    OptimisticHigh,
}

impl BoundsMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundsMode::Conditional => "conditional",
            BoundsMode::PessimisticLow => "pessimistic-low",
            BoundsMode::OptimisticHigh => "optimistic-high",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub kind: EstimateKind,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_effective: u64,
    pub censored_fraction: f64,
    pub failed_fraction: f64,
    pub bounds_mode: BoundsMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventEstimate {
    pub n: u64,
    pub conditional: Estimate,
    pub pessimistic: Estimate,
    pub optimistic: Estimate,
}

/// Standard Wilson score interval, clamped to [0, 1].
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    assert!(confidence > 0.0 && confidence < 1.0);
    let z = inv_std_normal_cdf((1.0 + confidence) / 2.0);
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

struct WorldTally {
    n: u64,
    censored: u64,
    failed: u64,
}

impl WorldTally {
    fn effective(&self) -> u64 {
        self.n - self.censored - self.failed
    }

    fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.n as f64
    }

    fn failed_fraction(&self) -> f64 {
        self.failed as f64 / self.n as f64
    }

    fn require_effective(&self) -> Result<(), McError> {
        let eff = self.effective();
        if eff == 0 {
            return Err(McError::AllWorldsCensored {
                n: self.n,
                censored: self.censored,
                failed: self.failed,
            });
        }
        if eff < MIN_EFFECTIVE {
            return Err(McError::TooFewEffectiveWorlds {
                n_effective: eff,
                n: self.n,
                minimum: MIN_EFFECTIVE,
            });
        }
        Ok(())
    }
}

/// Estimates the probability that the event holds in a world, pushing each
/// world through `view` first when one is given.
pub fn estimate_event(
    source: &WorldSource,
    view: Option<&Query>,
    event: &EventExpr,
    n: u64,
    global_seed: u64,
    confidence: f64,
) -> Result<EventEstimate, McError> {
    assert!(n >= 1);
    let mut tally = WorldTally { n, censored: 0, failed: 0 };
    let mut k = 0u64;
    for world_index in 0..n {
        let world = sample_world(source, global_seed, world_index)?;
        match world.status {
            WorldStatus::Fixpoint => {
                let holds = match view {
                    Some(q) => event_holds(&eval_query(q, &world.instance)?, event),
                    None => event_holds(&world.instance, event),
                };
                if holds {
                    k += 1;
                }
            }
            WorldStatus::Censored => tally.censored += 1,
            WorldStatus::Failed(_) => tally.failed += 1,
        }
    }
    tally.require_effective()?;

    let eff = tally.effective();
    let not_failed = tally.n - tally.failed;
    let base = Estimate {
        kind: EstimateKind::Probability,
        point: 0.0,
        ci_low: 0.0,
        ci_high: 0.0,
        n_effective: eff,
        censored_fraction: tally.censored_fraction(),
        failed_fraction: tally.failed_fraction(),
        bounds_mode: BoundsMode::Conditional,
    };
    let make = |k: u64, n: u64, mode: BoundsMode| {
        let (lo, hi) = wilson_interval(k, n, confidence);
        Estimate {
            point: k as f64 / n as f64,
            ci_low: lo,
            ci_high: hi,
            bounds_mode: mode,
            ..base.clone()
        }
    };
    Ok(EventEstimate {
        n,
        conditional: make(k, eff, BoundsMode::Conditional),
        pessimistic: make(k, not_failed, BoundsMode::PessimisticLow),
        optimistic: make(k + tally.censored, not_failed, BoundsMode::OptimisticHigh),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMoments {
    pub group: Vec<Value>,
    pub count: u64,
    pub mean: Estimate,
    pub variance: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentsReport {
    pub n: u64,
    pub n_effective: u64,
    pub censored_fraction: f64,
    pub failed_fraction: f64,
    pub groups: Vec<GroupMoments>,
}

impl MomentsReport {
    pub fn group(&self, key: &[Value]) -> Option<&GroupMoments> {
        self.groups.iter().find(|g| g.group == key)
    }
}

/// Per-group sample mean and unbiased sample variance of one query output
/// attribute across worlds, with normal-approximation confidence intervals
/// (exact for the mean up to CLT error; the variance interval additionally
/// assumes near-normal values).
pub fn estimate_group_moments(
    source: &WorldSource,
    view: &Query,
    value_attr: &str,
    n: u64,
    global_seed: u64,
    confidence: f64,
) -> Result<MomentsReport, McError> {
    assert!(n >= 1);
    let value_col = view
        .output
        .attr_index(value_attr)
        .ok_or_else(|| McError::UnknownOutputAttribute(value_attr.to_string()))?;
    let ty = view.output.attrs[value_col].ty;
    if !matches!(ty, AttrType::Real | AttrType::Integer) {
        return Err(McError::NonNumericValueAttribute { attr: value_attr.to_string(), ty });
    }
    let group_cols: Vec<usize> =
        (0..view.output.attrs.len()).filter(|&i| i != value_col).collect();

    let mut tally = WorldTally { n, censored: 0, failed: 0 };
    let mut acc: BTreeMap<Vec<Value>, (u64, f64, f64)> = BTreeMap::new();
    for world_index in 0..n {
        let world = sample_world(source, global_seed, world_index)?;
        match world.status {
            WorldStatus::Fixpoint => {
                let rows = eval_query(view, &world.instance)?;
                let mut seen: Vec<Vec<Value>> = Vec::new();
                for fact in rows.support() {
                    let key: Vec<Value> =
                        group_cols.iter().map(|&c| fact.values[c].clone()).collect();
                    if seen.contains(&key) {
                        return Err(McError::DuplicateGroupRow {
                            world: world_index,
                            group: format_group(&key),
                        });
                    }
                    let x = fact.values[value_col]
                        .as_f64()
                        .expect("value attribute is numeric");
                    let entry = acc.entry(key.clone()).or_insert((0, 0.0, 0.0));
                    entry.0 += 1;
                    let delta = x - entry.1;
                    entry.1 += delta / entry.0 as f64;
                    entry.2 += delta * (x - entry.1);
                    seen.push(key);
                }
            }
            WorldStatus::Censored => tally.censored += 1,
            WorldStatus::Failed(_) => tally.failed += 1,
        }
    }
    tally.require_effective()?;

    let z = inv_std_normal_cdf((1.0 + confidence) / 2.0);
    let base = Estimate {
        kind: EstimateKind::Moment,
        point: 0.0,
        ci_low: 0.0,
        ci_high: 0.0,
        n_effective: tally.effective(),
        censored_fraction: tally.censored_fraction(),
        failed_fraction: tally.failed_fraction(),
        bounds_mode: BoundsMode::Conditional,
    };
    let groups = acc
        .into_iter()
        .map(|(group, (m, mean, m2))| {
            let var = if m > 1 { m2 / (m - 1) as f64 } else { 0.0 };
            let mean_half = z * (var / m as f64).sqrt();
            let var_half = if m > 1 { z * var * (2.0 / (m - 1) as f64).sqrt() } else { 0.0 };
            GroupMoments {
                group,
                count: m,
                mean: Estimate {
                    point: mean,
                    ci_low: mean - mean_half,
                    ci_high: mean + mean_half,
                    ..base.clone()
                },
                variance: Estimate {
                    point: var,
                    ci_low: (var - var_half).max(0.0),
                    ci_high: var + var_half,
                    ..base.clone()
                },
            }
        })
        .collect();
    Ok(MomentsReport {
        n,
        n_effective: tally.effective(),
        censored_fraction: tally.censored_fraction(),
        failed_fraction: tally.failed_fraction(),
        groups,
    })
}

fn format_group(key: &[Value]) -> String {
    let parts: Vec<String> = key.iter().map(|v| v.to_string()).collect();
    parts.join(", ")
}
