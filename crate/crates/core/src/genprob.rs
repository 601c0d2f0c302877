//! The GEN problem: instances, closure decision procedure, and the
//! semantic-incremental checker for GEN branching programs.
//!
//! An instance is a total binary operation `T` on `[m]`; it is a YES
//! instance iff `m` lies in the closure of `{1}` under `T`. The
//! incrementality checker is semantic: it inspects only the computation
//! paths actually taken by a supplied input family, never raw graph paths.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bp::{BranchingProgram, Decision, Oracle, State, VarLabel};
use crate::error::Error;
use crate::report::CheckReport;

/// A GEN variable `(x, y)`; its value is `T(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GenVar {
    pub x: usize,
    pub y: usize,
}

impl VarLabel for GenVar {
    fn token(&self) -> String {
        format!("{},{}", self.x, self.y)
    }

    fn parse_token(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidProgram(format!("bad GEN variable token {s:?}"));
        let (x, y) = s.split_once(',').ok_or_else(bad)?;
        Ok(GenVar { x: x.trim().parse().map_err(|_| bad())?, y: y.trim().parse().map_err(|_| bad())? })
    }
}

/// One GEN[m] instance: the operation table in row-major order, entry
/// `(x, y)` at index `(x-1)*m + (y-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenInstance {
    m: usize,
    table: Vec<usize>,
}

impl GenInstance {
    pub fn new(m: usize, table: Vec<usize>) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        if table.len() != m * m {
            return Err(Error::InvalidInstance(format!("table has {} entries, expected {}", table.len(), m * m)));
        }
        if let Some(&bad) = table.iter().find(|&&v| v == 0 || v > m) {
            return Err(Error::InvalidInstance(format!("table entry {bad} outside 1..={m}")));
        }
        Ok(Self { m, table })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, x: usize, y: usize) -> usize {
        self.table[(x - 1) * self.m + (y - 1)]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    /// Least set containing 1 and closed under the operation, computed by a
    /// worklist over newly added elements.
    pub fn closure(&self) -> BTreeSet<usize> {
        let mut closed: BTreeSet<usize> = [1].into();
        let mut frontier: Vec<usize> = vec![1];
        while let Some(x) = frontier.pop() {
            // Pair the new element with everything already present, both ways.
            let members: Vec<usize> = closed.iter().copied().collect();
            for &y in &members {
                for v in [self.get(x, y), self.get(y, x)] {
                    if closed.insert(v) {
                        frontier.push(v);
                    }
                }
            }
        }
        closed
    }

    /// Number of worklist rounds until fixpoint when closing level by level;
    /// at most `m - 1` since each round must add an element.
    pub fn closure_rounds(&self) -> usize {
        let mut closed: BTreeSet<usize> = [1].into();
        let mut rounds = 0;
        loop {
            let mut next = closed.clone();
            for &x in &closed {
                for &y in &closed {
                    next.insert(self.get(x, y));
                }
            }
            if next == closed {
                return rounds;
            }
            closed = next;
            rounds += 1;
        }
    }

    pub fn decide(&self) -> crate::bp::Decision {
        if self.closure().contains(&self.m) {
            crate::bp::Decision::Yes
        } else {
            crate::bp::Decision::No
        }
    }
}

impl Oracle<GenVar> for GenInstance {
    fn answer(&self, var: &GenVar) -> Result<usize, Error> {
        if var.x == 0 || var.x > self.m || var.y == 0 || var.y > self.m {
            return Err(Error::OracleDomain(var.token()));
        }
        Ok(self.get(var.x, var.y))
    }
}

/// Checks the semantic-incremental property of `b` over an explicit family:
/// on every computation path, each queried coordinate must be 1 or must
/// have appeared earlier on that path as an edge label. A missing edge
/// during simulation of a pruned program is reported as the input being
/// outside the supported family, distinct from an incrementality violation.
pub fn check_semantic_incremental(
    b: &BranchingProgram<GenVar>,
    family: &[GenInstance],
) -> Result<CheckReport, Error> {
    let mut count = 0usize;
    for (index, input) in family.iter().enumerate() {
        let trace = match b.run(input) {
            Ok(t) => t,
            Err(Error::MissingEdge { state, label }) => {
                return Ok(CheckReport::Violation {
                    input_index: index,
                    location: format!("state {state}"),
                    detail: format!("input outside supported family: no edge labeled {label}"),
                });
            }
            Err(e) => return Err(e),
        };
        let mut generated: BTreeSet<usize> = BTreeSet::new();
        for (step_no, step) in trace.steps.iter().enumerate() {
            for z in [step.var.x, step.var.y] {
                if z != 1 && !generated.contains(&z) {
                    return Ok(CheckReport::Violation {
                        input_index: index,
                        location: format!("state {} (step {})", step.state, step_no + 1),
                        detail: format!("coordinate {z} of variable ({}) was never generated", step.var.token()),
                    });
                }
            }
            generated.insert(step.answer);
        }
        count += 1;
    }
    Ok(CheckReport::Ok { inputs_checked: count })
}

/// Correctness of a GEN program over an explicit family.
pub fn check_decides_gen(b: &BranchingProgram<GenVar>, family: &[GenInstance]) -> Result<CheckReport, Error> {
    let mut count = 0usize;
    for (index, input) in family.iter().enumerate() {
        let trace = b.run(input)?;
        if trace.terminal != input.decide() {
            return Ok(CheckReport::Violation {
                input_index: index,
                location: format!("output state {}", trace.terminal_state),
                detail: format!("program answers {} but the instance is {}", trace.terminal, input.decide()),
            });
        }
        count += 1;
    }
    Ok(CheckReport::Ok { inputs_checked: count })
}

/// A deliberately non-incremental negative control: an m = 6 program whose
/// start state queries coordinate 5 before anything can have generated it,
/// together with a one-instance family that reaches the offense.
pub fn non_incremental_example() -> (BranchingProgram<GenVar>, Vec<GenInstance>) {
    let m = 6;
    let edges: std::collections::BTreeMap<usize, crate::bp::StateId> = (1..=m).map(|a| (a, 1)).collect();
    let b = BranchingProgram {
        k: m,
        start: 0,
        states: [
            (0, State::Query { var: GenVar { x: 5, y: 1 }, edges }),
            (1, State::Output(Decision::No)),
        ]
        .into(),
    };
    let family = vec![GenInstance::new(m, vec![1; m * m]).unwrap()];
    (b, family)
}

// ---------------------------------------------------------------------------
// JSON: {"m": int, "T": [row-major array of length m*m]}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GenFile {
    m: usize,
    #[serde(rename = "T")]
    table: Vec<usize>,
}

impl GenInstance {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GenFile { m: self.m, table: self.table.clone() }).unwrap()
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, Error> {
        let file: GenFile = serde_json::from_value(value.clone())?;
        GenInstance::new(file.m, file.table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::{Decision, State};
    use proptest::prelude::*;

    #[test]
    fn constant_two_table() {
        let t = GenInstance::new(2, vec![2; 4]).unwrap();
        assert_eq!(t.closure(), [1, 2].into());
        assert_eq!(t.decide(), Decision::Yes);
    }

    #[test]
    fn constant_one_table() {
        let t = GenInstance::new(3, vec![1; 9]).unwrap();
        assert_eq!(t.closure(), [1].into());
        assert_eq!(t.decide(), Decision::No);
    }

    #[test]
    fn two_step_chase() {
        let mut table = vec![1usize; 9];
        table[0] = 2; // T(1,1) = 2
        table[4] = 3; // T(2,2) = 3
        let t = GenInstance::new(3, table).unwrap();
        assert_eq!(t.closure(), [1, 2, 3].into());
        assert_eq!(t.decide(), Decision::Yes);
    }

    fn program(start_var: GenVar, m: usize) -> BranchingProgram<GenVar> {
        let mut edges = std::collections::BTreeMap::new();
        for a in 1..=m {
            edges.insert(a, if a == m { 1 } else { 2 });
        }
        BranchingProgram {
            k: m,
            start: 0,
            states: [
                (0, State::Query { var: start_var, edges }),
                (1, State::Output(Decision::Yes)),
                (2, State::Output(Decision::No)),
            ]
            .into(),
        }
    }

    #[test]
    fn start_query_of_ungenerated_coordinate_flagged() {
        let b = program(GenVar { x: 5, y: 1 }, 6);
        let family = vec![GenInstance::new(6, vec![1; 36]).unwrap()];
        match check_semantic_incremental(&b, &family).unwrap() {
            CheckReport::Violation { location, detail, .. } => {
                assert!(location.contains("step 1"));
                assert!(detail.contains("coordinate 5"));
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn start_query_of_one_one_never_flagged() {
        let b = program(GenVar { x: 1, y: 1 }, 6);
        let family = vec![GenInstance::new(6, vec![1; 36]).unwrap()];
        assert!(check_semantic_incremental(&b, &family).unwrap().ok());
    }

    #[test]
    fn semantic_not_syntactic() {
        // State 3 violates incrementality on its face ((5,5) never
        // generated) but sits behind an answer no family input produces, so
        // the semantic checker must not flag it.
        let m = 6;
        let mut start_edges = std::collections::BTreeMap::new();
        for a in 1..=m {
            // answer 4 leads to the offending state; family answers are all 1
            start_edges.insert(a, if a == 4 { 3 } else { 1 });
        }
        let mut bad_edges = std::collections::BTreeMap::new();
        for a in 1..=m {
            bad_edges.insert(a, 1);
        }
        let b: BranchingProgram<GenVar> = BranchingProgram {
            k: m,
            start: 0,
            states: [
                (0, State::Query { var: GenVar { x: 1, y: 1 }, edges: start_edges }),
                (3, State::Query { var: GenVar { x: 5, y: 5 }, edges: bad_edges }),
                (1, State::Output(Decision::No)),
            ]
            .into(),
        };
        let family = vec![GenInstance::new(m, vec![1; 36]).unwrap()];
        assert!(check_semantic_incremental(&b, &family).unwrap().ok());
    }

    #[test]
    fn missing_edge_reported_as_outside_family() {
        let mut b = program(GenVar { x: 1, y: 1 }, 3);
        if let Some(State::Query { edges, .. }) = b.states.get_mut(&0) {
            edges.remove(&2);
        }
        let mut table = vec![1usize; 9];
        table[0] = 2;
        let family = vec![GenInstance::new(3, table).unwrap()];
        match check_semantic_incremental(&b, &family).unwrap() {
            CheckReport::Violation { detail, .. } => assert!(detail.contains("outside supported family")),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let t = GenInstance::new(3, vec![1, 2, 3, 1, 1, 1, 3, 2, 1]).unwrap();
        assert_eq!(GenInstance::from_json(&t.to_json()).unwrap(), t);
    }

    proptest! {
        /// Raising entries that currently equal 1 (the "unused" marker of
        /// the reduction) never shrinks the closure, and the level-by-level
        /// fixpoint arrives within m-1 rounds.
        #[test]
        fn closure_monotone_under_raising_unused_entries(
            entries in proptest::collection::vec(1usize..=4, 16),
            raises in proptest::collection::vec((0usize..16, 2usize..=4), 0..6),
        ) {
            let m = 4;
            let t = GenInstance::new(m, entries.clone()).unwrap();
            prop_assert!(t.closure_rounds() <= m - 1);
            let mut raised = entries;
            for (pos, v) in raises {
                if raised[pos] == 1 {
                    raised[pos] = v;
                }
            }
            let t2 = GenInstance::new(m, raised).unwrap();
            prop_assert!(t.closure().is_subset(&t2.closure()));
        }
    }
}
