//! The fixpoint engine: repeatedly fire applicable rule instantiations until
//! nothing new can fire or the firing budget runs out.
//!
//! Each (rule occurrence, head-variable instantiation) pair fires at most
//! once per run, identified by a [`FiringKey`]. Every distribution node in a
//! fired head draws from a random stream keyed only by (global seed, world
//! index, occurrence id, head signature, site index), never by firing order.
//! Because applicability is monotone and sampled values ignore scheduling,
//! any two policies that both reach a fixpoint produce bit-identical
//! instances, which the tests check directly instead of arguing about
//! distributions.
//!
//! Applicable keys are maintained incrementally: a full enumeration at
//! start, then after each inserted fact only body matches that use the new
//! fact are enumerated. Monotonicity makes this equal to recomputing from
//! scratch, and a test compares the two.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::dist::{apply_fn, sample, DistError};
use crate::fact::{make_fact, Fact, Instance};
use crate::program::{CArg, CTerm, CompiledRule, Program, RuleOccurrence};
use crate::rng::{stable_hash64, KeyBuilder};
use crate::schema::{RelationKind, SchemaError};
use crate::value::{AttrType, Value};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChaseError {
    #[error("input fact {fact} does not fit the schema: {source}")]
    EdbFactMismatch { fact: String, source: SchemaError },
    #[error("input fact {fact} belongs to intensional relation {relation}")]
    EdbIntensionalFact { fact: String, relation: String },
}

/// Identifies one potential firing: a rule occurrence plus the canonical
/// signature of its head-variable instantiation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiringKey {
    pub occurrence: u64,
    pub signature: Vec<u8>,
}

impl FiringKey {
    pub fn signature_hex(&self) -> String {
        let mut s = String::with_capacity(self.signature.len() * 2);
        for b in &self.signature {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

/// Chooses the next key to fire from the sorted applicable list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    First,
    Last,
    Shuffled(u64),
}

impl Policy {
    /// `keys` must be nonempty and sorted; `firings` is the number of
    /// firings so far, so the shuffled policy varies from step to step.
    pub fn choose<'a>(&self, keys: &'a [FiringKey], firings: u64) -> &'a FiringKey {
        match self {
            Policy::First => &keys[0],
            Policy::Last => &keys[keys.len() - 1],
            Policy::Shuffled(seed) => keys
                .iter()
                .min_by_key(|k| {
                    let mut bytes = Vec::with_capacity(16 + k.signature.len());
                    bytes.extend_from_slice(&seed.to_be_bytes());
                    bytes.extend_from_slice(&firings.to_be_bytes());
                    bytes.extend_from_slice(&k.signature);
                    stable_hash64(&bytes)
                })
                .expect("keys nonempty"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorldStatus {
    Fixpoint,
    Censored,
    Failed(DistError),
}

impl WorldStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            WorldStatus::Fixpoint => "fixpoint",
            WorldStatus::Censored => "censored",
            WorldStatus::Failed(_) => "failed",
        }
    }

    pub fn is_fixpoint(&self) -> bool {
        matches!(self, WorldStatus::Fixpoint)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldResult {
    pub instance: Instance,
    pub status: WorldStatus,
    pub firings: u64,
}

/// One line of the firing trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub world: u64,
    pub step: u64,
    pub occurrence: u64,
    pub signature_hex: String,
    pub fact: Fact,
    pub new: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ChaseContext {
    pub global_seed: u64,
    pub world_index: u64,
}

#[derive(Debug)]
pub struct ChaseState<'a> {
    program: &'a Program,
    instance: Instance,
    by_relation: HashMap<String, Vec<Vec<Value>>>,
    pending: BTreeMap<FiringKey, Vec<Value>>,
    fired: HashSet<FiringKey>,
    firings: u64,
    status: Option<WorldStatus>,
}

impl<'a> ChaseState<'a> {
    pub fn new(program: &'a Program, edb: &Instance) -> Result<ChaseState<'a>, ChaseError> {
        let mut instance = Instance::set();
        let mut by_relation: HashMap<String, Vec<Vec<Value>>> = HashMap::new();
        for fact in edb.support() {
            if let Some(rel) = program.schema.relation(&fact.relation) {
                if rel.kind == RelationKind::Intensional {
                    return Err(ChaseError::EdbIntensionalFact {
                        fact: fact.to_string(),
                        relation: fact.relation.clone(),
                    });
                }
            }
            if let Err(source) =
                make_fact(&program.schema, &fact.relation, fact.values.clone())
            {
                return Err(ChaseError::EdbFactMismatch { fact: fact.to_string(), source });
            }
            if instance.insert(fact.clone()) {
                by_relation
                    .entry(fact.relation.clone())
                    .or_default()
                    .push(fact.values.clone());
            }
        }

        let mut state = ChaseState {
            program,
            instance,
            by_relation,
            pending: BTreeMap::new(),
            fired: HashSet::new(),
            firings: 0,
            status: None,
        };
        for occ in &state.program.occurrences {
            let mut found = Vec::new();
            match_assignments(&state.by_relation, &occ.compiled, None, |env| {
                found.push(head_values(occ, env));
            });
            for values in found {
                state.add_pending(occ, values);
            }
        }
        Ok(state)
    }

    fn add_pending(&mut self, occ: &RuleOccurrence, values: Vec<Value>) {
        let signature =
            crate::program::encode_signature(occ.id, values.iter().map(|v| v as &Value));
        let key = FiringKey { occurrence: occ.id, signature };
        if !self.fired.contains(&key) {
            self.pending.entry(key).or_insert(values);
        }
    }

    /// All unfired applicable keys, sorted.
    pub fn applicable_keys(&self) -> Vec<FiringKey> {
        self.pending.keys().cloned().collect()
    }

    pub fn has_applicable(&self) -> bool {
        !self.pending.is_empty()
    }

    pub fn firings(&self) -> u64 {
        self.firings
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    fn pick(&self, policy: Policy) -> FiringKey {
        match policy {
            Policy::First => self.pending.keys().next().expect("pending nonempty").clone(),
            Policy::Last => self.pending.keys().next_back().expect("pending nonempty").clone(),
            Policy::Shuffled(_) => {
                let keys = self.applicable_keys();
                policy.choose(&keys, self.firings).clone()
            }
        }
    }

    /// Fires one pending key: samples the head's distribution nodes, inserts
    /// the resulting fact, and extends the pending set with body matches
    /// that use it.
    pub fn fire(
        &mut self,
        key: &FiringKey,
        ctx: ChaseContext,
        mut trace: Option<&mut dyn FnMut(TraceRecord)>,
    ) {
        let values = self.pending.remove(key).expect("fired key must be applicable");
        let occ = &self.program.occurrences[key.occurrence as usize];
        self.fired.insert(key.clone());
        self.firings += 1;

        let mut env: Vec<Option<Value>> = vec![None; occ.compiled.var_names.len()];
        for (j, &vi) in occ.compiled.head_vars.iter().enumerate() {
            env[vi] = Some(values[j].clone());
        }

        let mut tuple = Vec::with_capacity(occ.compiled.head_terms.len());
        for (term, &ty) in occ.compiled.head_terms.iter().zip(&occ.compiled.head_attr_types) {
            match eval_term(term, &env, ctx, key) {
                Ok(v) => tuple.push(widen(v, ty)),
                Err(e) => {
                    self.status = Some(WorldStatus::Failed(e));
                    return;
                }
            }
        }
        let fact = Fact::new(occ.compiled.head_relation.clone(), tuple);
        let grew = self.instance.insert(fact.clone());
        if let Some(t) = trace.as_mut() {
            t(TraceRecord {
                world: ctx.world_index,
                step: self.firings,
                occurrence: key.occurrence,
                signature_hex: key.signature_hex(),
                fact: fact.clone(),
                new: grew,
            });
        }
        if grew {
            self.by_relation
                .entry(fact.relation.clone())
                .or_default()
                .push(fact.values.clone());
            let mut found = Vec::new();
            for occ in &self.program.occurrences {
                for (i, atom) in occ.compiled.body.iter().enumerate() {
                    if atom.relation == fact.relation {
                        match_assignments(
                            &self.by_relation,
                            &occ.compiled,
                            Some((i, &fact.values)),
                            |env| found.push((occ.id, head_values(occ, env))),
                        );
                    }
                }
            }
            for (occ_id, values) in found {
                self.add_pending(&self.program.occurrences[occ_id as usize], values);
            }
        }
    }
}

fn widen(v: Value, ty: AttrType) -> Value {
    match (ty, v) {
        (AttrType::Real, Value::Integer(i)) => Value::Real(i as f64),
        (_, v) => v,
    }
}

fn head_values(occ: &RuleOccurrence, env: &[Option<Value>]) -> Vec<Value> {
    occ.compiled
        .head_vars
        .iter()
        .map(|&vi| env[vi].clone().expect("body match binds every variable"))
        .collect()
}

/// Enumerates all assignments satisfying the rule body. When `pinned` is
/// given, the atom at that position is matched only against the given tuple,
/// which is how new matches are found after an insertion.
pub(crate) fn match_assignments(
    by_relation: &HashMap<String, Vec<Vec<Value>>>,
    rule: &CompiledRule,
    pinned: Option<(usize, &[Value])>,
    mut on_match: impl FnMut(&[Option<Value>]),
) {
    let mut env: Vec<Option<Value>> = vec![None; rule.var_names.len()];
    descend(by_relation, rule, pinned, 0, &mut env, &mut on_match);
}

fn descend(
    by_relation: &HashMap<String, Vec<Vec<Value>>>,
    rule: &CompiledRule,
    pinned: Option<(usize, &[Value])>,
    atom_idx: usize,
    env: &mut Vec<Option<Value>>,
    on_match: &mut impl FnMut(&[Option<Value>]),
) {
    if atom_idx == rule.body.len() {
        on_match(env);
        return;
    }
    let atom = &rule.body[atom_idx];
    let empty: Vec<Vec<Value>> = Vec::new();
    let candidates: &[Vec<Value>] = match pinned {
        Some((i, tuple)) if i == atom_idx => {
            return try_tuple(by_relation, rule, pinned, atom_idx, tuple, env, on_match);
        }
        _ => by_relation.get(&atom.relation).unwrap_or(&empty),
    };
    for tuple in candidates {
        try_tuple(by_relation, rule, pinned, atom_idx, tuple, env, on_match);
    }
}

fn try_tuple(
    by_relation: &HashMap<String, Vec<Vec<Value>>>,
    rule: &CompiledRule,
    pinned: Option<(usize, &[Value])>,
    atom_idx: usize,
    tuple: &[Value],
    env: &mut Vec<Option<Value>>,
    on_match: &mut impl FnMut(&[Option<Value>]),
) {
    let atom = &rule.body[atom_idx];
    let mut bound_here = Vec::new();
    let mut ok = true;
    for (arg, v) in atom.args.iter().zip(tuple) {
        match arg {
            CArg::Const(c) => {
                if c != v {
                    ok = false;
                    break;
                }
            }
            CArg::Var(i) => match &env[*i] {
                Some(b) => {
                    if b != v {
                        ok = false;
                        break;
                    }
                }
                None => {
                    env[*i] = Some(v.clone());
                    bound_here.push(*i);
                }
            },
        }
    }
    if ok {
        descend(by_relation, rule, pinned, atom_idx + 1, env, on_match);
    }
    for i in bound_here {
        env[i] = None;
    }
}

fn eval_term(
    term: &CTerm,
    env: &[Option<Value>],
    ctx: ChaseContext,
    key: &FiringKey,
) -> Result<Value, DistError> {
    match term {
        CTerm::Const(v) => Ok(v.clone()),
        CTerm::Var(i) => Ok(env[*i].clone().expect("head variables are bound")),
        CTerm::Fn(op, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_term(a, env, ctx, key)?);
            }
            apply_fn(*op, &vals)
        }
        CTerm::Dist { spec, params, site } => {
            let mut vals = Vec::with_capacity(params.len());
            for p in params {
                vals.push(eval_term(p, env, ctx, key)?);
            }
            let mut stream = KeyBuilder::new(b"site")
                .u64(ctx.global_seed)
                .u64(ctx.world_index)
                .u64(key.occurrence)
                .bytes(&key.signature)
                .u64(*site)
                .stream();
            sample(spec, &vals, &mut stream)
        }
    }
}

fn finish(state: ChaseState, status: WorldStatus) -> WorldResult {
    let schema = &state.program.schema;
    let instance = state.instance.filter_relations(|r| {
        schema
            .relation(r)
            .map(|rel| rel.kind == RelationKind::Intensional)
            .unwrap_or(false)
    });
    WorldResult { instance, status, firings: state.firings }
}

/// Runs the chase to fixpoint, censoring at `budget` firings. The returned
/// instance is the intensional part of the final state.
pub fn run_chase(
    program: &Program,
    edb: &Instance,
    global_seed: u64,
    world_index: u64,
    budget: u64,
    policy: Policy,
) -> Result<WorldResult, ChaseError> {
    run_chase_traced(program, edb, global_seed, world_index, budget, policy, None)
}

pub fn run_chase_traced(
    program: &Program,
    edb: &Instance,
    global_seed: u64,
    world_index: u64,
    budget: u64,
    policy: Policy,
    mut trace: Option<&mut dyn FnMut(TraceRecord)>,
) -> Result<WorldResult, ChaseError> {
    let ctx = ChaseContext { global_seed, world_index };
    let mut state = ChaseState::new(program, edb)?;
    loop {
        if let Some(status) = state.status.clone() {
            return Ok(finish(state, status));
        }
        if !state.has_applicable() {
            return Ok(finish(state, WorldStatus::Fixpoint));
        }
        if state.firings >= budget {
            return Ok(finish(state, WorldStatus::Censored));
        }
        let key = state.pick(policy);
        let t = trace.as_mut().map(|t| &mut **t as &mut dyn FnMut(TraceRecord));
        state.fire(&key, ctx, t);
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatalogError {
    #[error("program contains distribution terms; deterministic evaluation requires none")]
    NondeterministicProgram,
    #[error("no fixpoint within {budget} firings")]
    Censored { budget: u64 },
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

/// Fixpoint of a distribution-free program. The firing order cannot matter,
/// so no seed or policy is taken; divergence is cut off at `budget`.
pub fn run_deterministic_datalog(
    program: &Program,
    edb: &Instance,
    budget: u64,
) -> Result<Instance, DatalogError> {
    if !program.is_deterministic() {
        return Err(DatalogError::NondeterministicProgram);
    }
    let result = run_chase(program, edb, 0, 0, budget, Policy::First)?;
    match result.status {
        WorldStatus::Fixpoint => Ok(result.instance),
        WorldStatus::Censored => Err(DatalogError::Censored { budget }),
        WorldStatus::Failed(_) => unreachable!("no distribution sites, so sampling cannot fail"),
    }
}
