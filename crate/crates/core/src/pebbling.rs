//! Black pebbling game: sequence validation and an exact minimum-cost
//! solver.
//!
//! Moves: (1) place a pebble on `u` when all children of `u` are pebbled,
//! simultaneously removing any subset of `u`'s children; (2) remove a single
//! pebble. Identity steps are also accepted by the validator because the
//! trace-to-pebbling assignment in the analysis module produces them.
//!
//! The solver runs iterative deepening on the pebble budget, breadth-first
//! over the reachable configuration graph within each budget, so the
//! returned witness is exact.

use std::collections::{BTreeSet, HashMap};

use crate::dag::RootedDag;
use crate::error::Error;
use crate::report::ValidationReport;

/// One pebbling configuration: the set of pebbled nodes.
pub type PebbleConfig = BTreeSet<usize>;

/// A sequence of configurations, one per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PebbleSequence {
    pub configs: Vec<PebbleConfig>,
}

impl PebbleSequence {
    pub fn new(configs: Vec<PebbleConfig>) -> Self {
        Self { configs }
    }

    /// Max number of simultaneously pebbled nodes.
    pub fn cost(&self) -> usize {
        self.configs.iter().map(|c| c.len()).max().unwrap_or(0)
    }
}

/// Classifies the transition `from -> to` as a legal move.
fn legal_transition(dag: &RootedDag, from: &PebbleConfig, to: &PebbleConfig) -> Result<(), String> {
    let added: Vec<usize> = to.difference(from).copied().collect();
    let removed: Vec<usize> = from.difference(to).copied().collect();
    match added.as_slice() {
        [] if removed.is_empty() => Ok(()), // identity
        [] if removed.len() == 1 => Ok(()), // move 2
        [] => Err(format!("removed {} pebbles in one step without a placement", removed.len())),
        [u] => {
            let children: BTreeSet<usize> = dag.children(*u).iter().copied().collect();
            if !children.iter().all(|c| from.contains(c)) {
                return Err(format!("placement on {u} with unpebbled children"));
            }
            if let Some(bad) = removed.iter().find(|r| !children.contains(r)) {
                return Err(format!("placement on {u} removed non-child {bad}"));
            }
            Ok(())
        }
        _ => Err(format!("placed {} pebbles in one step", added.len())),
    }
}

/// Checks that `s` is a complete pebbling sequence for `dag`: starts empty,
/// every transition legal, and the root pebbled in the final configuration.
pub fn is_valid_complete_sequence(dag: &RootedDag, s: &PebbleSequence) -> ValidationReport {
    let mut report = ValidationReport::new();
    let Some(first) = s.configs.first() else {
        report.violation("sequence is empty");
        return report;
    };
    if !first.is_empty() {
        report.violation("first configuration must be empty");
    }
    for config in &s.configs {
        if let Some(&u) = config.iter().find(|&&u| u == 0 || u > dag.node_count()) {
            report.violation(format!("pebbled node {u} out of range"));
            return report;
        }
    }
    for (t, window) in s.configs.windows(2).enumerate() {
        if let Err(reason) = legal_transition(dag, &window[0], &window[1]) {
            report.violation(format!("illegal transition at step {t}: {reason}"));
            return report;
        }
    }
    if !s.configs.last().unwrap().contains(&dag.root()) {
        report.violation("root not pebbled in the final configuration");
    }
    report
}

type Mask = u64;

fn mask_to_config(mask: Mask, n: usize) -> PebbleConfig {
    (1..=n).filter(|&u| mask >> (u - 1) & 1 == 1).collect()
}

/// Finds the exact black pebbling cost of `dag`, trying budgets `1..=cap`,
/// together with a witness sequence attaining it.
pub fn min_pebbling_cost(dag: &RootedDag, cap: usize) -> Result<(usize, PebbleSequence), Error> {
    if cap == 0 {
        return Err(Error::InvalidParameter("pebble budget cap must be >= 1".into()));
    }
    let n = dag.node_count();
    if n > 60 {
        return Err(Error::InvalidParameter(format!("solver limited to 60 nodes, got {n}")));
    }
    for budget in 1..=cap {
        if let Some(seq) = search_with_budget(dag, budget) {
            return Ok((budget, seq));
        }
    }
    Err(Error::BudgetExhausted { cap })
}

/// Breadth-first search over configurations of size <= `budget`. Returns a
/// complete sequence if the root becomes pebblable within the budget.
fn search_with_budget(dag: &RootedDag, budget: usize) -> Option<PebbleSequence> {
    let n = dag.node_count();
    let root_bit: Mask = 1 << (dag.root() - 1);
    let mut parent: HashMap<Mask, Mask> = HashMap::new();
    let mut queue = std::collections::VecDeque::new();
    parent.insert(0, 0);
    queue.push_back(0 as Mask);
    while let Some(mask) = queue.pop_front() {
        if mask & root_bit != 0 {
            // Reconstruct the path back to the empty configuration.
            let mut path = vec![mask];
            let mut cur = mask;
            while cur != 0 {
                cur = parent[&cur];
                path.push(cur);
            }
            path.reverse();
            let configs = path.into_iter().map(|m| mask_to_config(m, n)).collect();
            return Some(PebbleSequence::new(configs));
        }
        let push = |next: Mask, parent_map: &mut HashMap<Mask, Mask>, queue: &mut std::collections::VecDeque<Mask>| {
            if !parent_map.contains_key(&next) {
                parent_map.insert(next, mask);
                queue.push_back(next);
            }
        };
        // Move 1: place on u, removing any subset of its children.
        for u in 1..=n {
            let bit = 1 << (u - 1);
            if mask & bit != 0 {
                continue;
            }
            let child_mask: Mask = dag.children(u).iter().map(|&c| (1 as Mask) << (c - 1)).sum();
            if mask & child_mask != child_mask {
                continue;
            }
            // Enumerate subsets of child_mask to remove.
            let mut sub = child_mask;
            loop {
                let next = (mask | bit) & !sub;
                if (next.count_ones() as usize) <= budget {
                    push(next, &mut parent, &mut queue);
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & child_mask;
            }
        }
        // Move 2: remove one pebble.
        let mut rest = mask;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            push(mask & !bit, &mut parent, &mut queue);
            rest &= rest - 1;
        }
    }
    None
}
