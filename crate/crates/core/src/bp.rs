//! Deterministic k-way branching programs: representation, validation and
//! simulation.
//!
//! Variable labels are an opaque type parameter so the same core serves the
//! dag-evaluation programs (labels `l_u`, `f_u(a..)`) and the GEN programs
//! (labels `(x,y)`); the problem modules supply the label spaces and the
//! input oracles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::report::ValidationReport;

pub type StateId = usize;

/// YES/NO outcome of a decision program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Decision::Yes => write!(f, "YES"),
            Decision::No => write!(f, "NO"),
        }
    }
}

/// Variable labels must serialize to a stable token for the JSON format.
pub trait VarLabel: Clone + Eq + Ord + Debug {
    fn token(&self) -> String;
    fn parse_token(s: &str) -> Result<Self, Error>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum State<V> {
    Query {
        var: V,
        /// Answer in 1..=k to successor state.
        edges: BTreeMap<usize, StateId>,
    },
    Output(Decision),
}

/// Deterministic k-way branching program. Edge labels are answers in 1..=k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchingProgram<V> {
    pub k: usize,
    pub start: StateId,
    pub states: BTreeMap<StateId, State<V>>,
}

/// `full`: every query state carries exactly k edges. `pruned`: any subset
/// with distinct labels, as produced mid-flight by the edge-deletion
/// transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    Full,
    Pruned,
}

/// `strict`: output values pairwise distinct. `relaxed`: duplicate-valued
/// output states permitted (multiple reject states).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    Relaxed,
}

/// One simulation step: state visited, variable queried, answer taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep<V> {
    pub state: StateId,
    pub var: V,
    pub answer: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationTrace<V> {
    pub steps: Vec<TraceStep<V>>,
    pub terminal_state: StateId,
    pub terminal: Decision,
}

/// Answers queries for a fixed input.
pub trait Oracle<V> {
    fn answer(&self, var: &V) -> Result<usize, Error>;
}

impl<V, F> Oracle<V> for F
where
    F: Fn(&V) -> Result<usize, Error>,
{
    fn answer(&self, var: &V) -> Result<usize, Error> {
        self(var)
    }
}

impl<V: VarLabel> BranchingProgram<V> {
    /// Number of states, output states included.
    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, id: StateId) -> Option<&State<V>> {
        self.states.get(&id)
    }

    pub fn validate(&self, mode: EdgeMode, strictness: Strictness) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.k == 0 {
            report.violation("k must be >= 1");
        }
        if !self.states.contains_key(&self.start) {
            report.violation(format!("start state {} does not exist", self.start));
            return report;
        }
        let mut in_degree: BTreeMap<StateId, usize> = self.states.keys().map(|&id| (id, 0)).collect();
        for (&id, state) in &self.states {
            if let State::Query { edges, .. } = state {
                if matches!(mode, EdgeMode::Full) && edges.len() != self.k {
                    report.violation(format!("state {id} has {} edges, expected {}", edges.len(), self.k));
                }
                for (&label, &target) in edges {
                    if label == 0 || label > self.k {
                        report.violation(format!("state {id}: edge label {label} outside 1..={}", self.k));
                    }
                    match in_degree.get_mut(&target) {
                        Some(d) => *d += 1,
                        None => report.violation(format!("state {id}: edge to missing state {target}")),
                    }
                }
            }
        }
        if in_degree.get(&self.start).copied().unwrap_or(0) != 0 {
            report.violation("start state has incoming edges");
        }
        for (&id, &d) in &in_degree {
            if id != self.start && d == 0 {
                report.violation(format!("state {id} is a second in-degree-0 state"));
            }
        }
        if matches!(strictness, Strictness::Strict) {
            let mut seen = BTreeSet::new();
            for (&id, state) in &self.states {
                if let State::Output(v) = state {
                    if !seen.insert(*v) {
                        report.violation(format!("duplicate output value {v} at state {id}"));
                    }
                }
            }
        }
        if self.has_cycle() {
            report.violation("program graph must be acyclic");
        }
        report
    }

    fn has_cycle(&self) -> bool {
        let mut indeg: BTreeMap<StateId, usize> = self.states.keys().map(|&id| (id, 0)).collect();
        for state in self.states.values() {
            if let State::Query { edges, .. } = state {
                for &t in edges.values() {
                    if let Some(d) = indeg.get_mut(&t) {
                        *d += 1;
                    }
                }
            }
        }
        let mut queue: Vec<StateId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        let mut seen = 0;
        while let Some(id) = queue.pop() {
            seen += 1;
            if let Some(State::Query { edges, .. }) = self.states.get(&id) {
                for &t in edges.values() {
                    let d = indeg.get_mut(&t).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push(t);
                    }
                }
            }
        }
        seen != self.states.len()
    }

    /// Runs the program on an input and records the computation path.
    pub fn run(&self, input: &dyn Oracle<V>) -> Result<ComputationTrace<V>, Error> {
        let mut steps = Vec::new();
        let mut current = self.start;
        // A deterministic acyclic program visits each state at most once.
        let cap = self.states.len() + 1;
        loop {
            if steps.len() >= cap {
                return Err(Error::InvalidProgram("computation path exceeds state count; program is cyclic".into()));
            }
            match self.states.get(&current) {
                None => return Err(Error::InvalidProgram(format!("dangling state id {current}"))),
                Some(State::Output(v)) => {
                    return Ok(ComputationTrace { steps, terminal_state: current, terminal: *v });
                }
                Some(State::Query { var, edges }) => {
                    let answer = input.answer(var)?;
                    if answer == 0 || answer > self.k {
                        return Err(Error::AnswerOutOfRange { var: var.token(), answer, k: self.k });
                    }
                    let Some(&next) = edges.get(&answer) else {
                        return Err(Error::MissingEdge { state: current, label: answer });
                    };
                    steps.push(TraceStep { state: current, var: var.clone(), answer });
                    current = next;
                }
            }
        }
    }

    /// States reachable from the start state.
    pub fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.start];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(State::Query { edges, .. }) = self.states.get(&id) {
                for &t in edges.values() {
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// Drops states unreachable from the start state.
    pub fn prune_unreachable(&mut self) {
        let keep = self.reachable();
        self.states.retain(|id, _| keep.contains(id));
    }
}

// ---------------------------------------------------------------------------
// JSON format:
// {"k": int, "start": id,
//  "states": [{"id": int, "var": token, "edges": {"<label>": id}}
//             | {"id": int, "output": "YES"|"NO"}]}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BpFile {
    k: usize,
    start: StateId,
    states: Vec<StateFile>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    id: StateId,
    #[serde(skip_serializing_if = "Option::is_none")]
    var: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<BTreeMap<String, StateId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<Decision>,
}

impl<V: VarLabel> BranchingProgram<V> {
    pub fn to_json(&self) -> serde_json::Value {
        let states = self
            .states
            .iter()
            .map(|(&id, state)| match state {
                State::Query { var, edges } => StateFile {
                    id,
                    var: Some(var.token()),
                    edges: Some(edges.iter().map(|(&l, &t)| (l.to_string(), t)).collect()),
                    output: None,
                },
                State::Output(v) => StateFile { id, var: None, edges: None, output: Some(*v) },
            })
            .collect();
        serde_json::to_value(BpFile { k: self.k, start: self.start, states }).unwrap()
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, Error> {
        let file: BpFile = serde_json::from_value(value.clone())?;
        let mut states = BTreeMap::new();
        for s in file.states {
            let state = match (s.var, s.output) {
                (Some(var), None) => {
                    let mut edges = BTreeMap::new();
                    for (label, target) in s.edges.unwrap_or_default() {
                        let l: usize = label
                            .parse()
                            .map_err(|_| Error::InvalidProgram(format!("bad edge label {label:?}")))?;
                        edges.insert(l, target);
                    }
                    State::Query { var: V::parse_token(&var)?, edges }
                }
                (None, Some(v)) => State::Output(v),
                _ => return Err(Error::InvalidProgram(format!("state {} must have exactly one of var/output", s.id))),
            };
            if states.insert(s.id, state).is_some() {
                return Err(Error::InvalidProgram(format!("duplicate state id {}", s.id)));
            }
        }
        Ok(BranchingProgram { k: file.k, start: file.start, states })
    }
}
