//! The lower-bound machinery as executable procedures: assigning a pebbling
//! sequence to each computation path of a thrifty program, critical states
//! and bottleneck nodes, the two-player advice protocol, the critical-state
//! partition bound, and the matching upper-bound constructor that turns a
//! pebbling sequence into a thrifty program.
//!
//! The pebbling assignment walks the computation path of an input up to the
//! state immediately following the first root query. A pebble placed on a
//! node is retained exactly while some later state queries one of its
//! parents with no intervening re-query of the node; the lookahead runs
//! over the full path so the advice decoder can rely on it beyond the
//! truncation point.

use std::collections::{BTreeMap, BTreeSet};

use crate::bp::{BranchingProgram, ComputationTrace, Decision, State, StateId};
use crate::dag::RootedDag;
use crate::dageval::{BdeVar, Caps, DagEvalInstance};
use crate::error::Error;
use crate::pebbling::{min_pebbling_cost, PebbleConfig, PebbleSequence};

const INF: usize = usize::MAX;

/// Pebbling configurations extracted from one input's computation path.
#[derive(Debug, Clone)]
pub struct PebblingAnnotation {
    /// Full computation path of the input (to its output state).
    pub trace: ComputationTrace<BdeVar>,
    /// Index (into the visited-state sequence) of the state immediately
    /// following the first root query; the annotation stops there.
    pub truncation_index: usize,
    /// One configuration per visited state up to the truncation point.
    pub configs: PebbleSequence,
    /// Max pebbles over the assigned configurations.
    pub max_pebbles: usize,
    /// Earliest index attaining `max_pebbles`.
    pub critical_index: usize,
    /// State visited at the critical index.
    pub critical_state: StateId,
    /// Nodes pebbled at the critical index.
    pub bottleneck: BTreeSet<usize>,
}

/// Advice produced by the encoder: the critical state plus one value word
/// per node the decoder cannot deduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdvicePackage {
    pub critical_state: StateId,
    pub words: Vec<usize>,
}

/// Bookkeeping from an encode walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeStats {
    /// Words consumed while walking to the output state.
    pub walk_words: usize,
    /// Node values deduced from thrifty queries during the walk.
    pub deduced: usize,
}

impl EncodeStats {
    pub fn learned_on_walk(&self) -> usize {
        self.walk_words + self.deduced
    }
}

/// The node whose variable a step queries, with a thriftiness check: a
/// function query off the children's true values is an error here.
fn step_node(dag: &RootedDag, values: &[usize], step: &crate::bp::TraceStep<BdeVar>) -> Result<usize, Error> {
    match &step.var {
        BdeVar::Leaf(u) => Ok(*u),
        BdeVar::Func(u, args) => {
            let expected: Vec<usize> = dag.children(*u).iter().map(|&c| values[c]).collect();
            if *args != expected {
                return Err(Error::ThriftyViolation {
                    state: step.state,
                    var: crate::bp::VarLabel::token(&step.var),
                    node: *u,
                    expected,
                });
            }
            Ok(*u)
        }
    }
}

/// Assigns a pebbling sequence to the computation path of `input` through
/// the thrifty program `b`.
pub fn annotate_pebbling(b: &BranchingProgram<BdeVar>, input: &DagEvalInstance) -> Result<PebblingAnnotation, Error> {
    let dag = input.dag().clone();
    let n = dag.node_count();
    let values = input.node_values();
    let trace = b.run(input)?;
    let nodes: Vec<usize> = trace
        .steps
        .iter()
        .map(|s| step_node(&dag, &values, s))
        .collect::<Result<_, _>>()?;
    let root_query = nodes
        .iter()
        .position(|&u| u == dag.root())
        .ok_or(Error::MissingRootQuery)?;

    // next_query[v][t]: earliest step index >= t querying node v, over the
    // full path; the retention rule looks beyond the truncation point.
    let steps_total = nodes.len();
    let mut next_query = vec![vec![INF; steps_total + 1]; n + 1];
    for t in (0..steps_total).rev() {
        for v in 1..=n {
            next_query[v][t] = next_query[v][t + 1];
        }
        next_query[nodes[t]][t] = t;
    }
    // True iff some parent of `v` is queried at or after step `t`, before
    // any re-query of `v` itself.
    let keep_pebble = |v: usize, t: usize| -> bool {
        let parent_next = dag.parents(v).iter().map(|&w| next_query[w][t]).min().unwrap_or(INF);
        parent_next != INF && next_query[v][t] > parent_next
    };

    let mut configs: Vec<PebbleConfig> = vec![PebbleConfig::new()];
    for t in 0..=root_query {
        let u = nodes[t];
        let current = configs.last().unwrap().clone();
        if current.contains(&u) {
            return Err(Error::AnnotationInvariant { step: t, reason: format!("queried node {u} already pebbled") });
        }
        let mut next = current.clone();
        if u == dag.root() {
            // Final move: pebble the root, clear its children.
            for &v in dag.children(u) {
                if !current.contains(&v) {
                    return Err(Error::AnnotationInvariant {
                        step: t,
                        reason: format!("child {v} of root unpebbled at the root query"),
                    });
                }
                next.remove(&v);
            }
            next.insert(u);
        } else {
            if !dag.is_leaf(u) {
                for &v in dag.children(u) {
                    if !current.contains(&v) {
                        return Err(Error::AnnotationInvariant {
                            step: t,
                            reason: format!("child {v} of queried node {u} unpebbled"),
                        });
                    }
                    if !keep_pebble(v, t + 1) {
                        next.remove(&v);
                    }
                }
            }
            if keep_pebble(u, t + 1) {
                next.insert(u);
            }
        }
        configs.push(next);
    }

    let configs = PebbleSequence::new(configs);
    let max_pebbles = configs.cost();
    let critical_index = configs
        .configs
        .iter()
        .position(|c| c.len() == max_pebbles)
        .expect("max is attained");
    // Visited-state sequence: one state per step, then the state after the
    // root query (the next query state or the output state).
    let state_at = |idx: usize| -> StateId {
        if idx < trace.steps.len() {
            trace.steps[idx].state
        } else {
            trace.terminal_state
        }
    };
    let critical_state = state_at(critical_index);
    let bottleneck = configs.configs[critical_index].clone();
    Ok(PebblingAnnotation {
        trace,
        truncation_index: root_query + 1,
        configs,
        max_pebbles,
        critical_index,
        critical_state,
        bottleneck,
    })
}

/// Checks, on an annotation, that every pebbled non-root node has a later
/// parent query with no intervening re-query of the node itself.
pub fn check_retention_fact(dag: &RootedDag, input: &DagEvalInstance, ann: &PebblingAnnotation) -> Result<(), Error> {
    let values = input.node_values();
    let nodes: Vec<usize> = ann
        .trace
        .steps
        .iter()
        .map(|s| step_node(dag, &values, s))
        .collect::<Result<_, _>>()?;
    for (t, config) in ann.configs.configs.iter().enumerate() {
        for &u in config {
            if u == dag.root() {
                continue;
            }
            // Look for a parent query at or after the state carrying this
            // configuration, with no re-query of u in between (inclusive).
            let later = nodes.iter().enumerate().skip(t).find(|&(_, &q)| q == u || dag.parents(u).contains(&q));
            match later {
                Some((_, &q)) if dag.parents(u).contains(&q) => {}
                _ => {
                    return Err(Error::AnnotationInvariant {
                        step: t,
                        reason: format!("pebbled node {u} has no later parent query before a re-query"),
                    })
                }
            }
        }
    }
    Ok(())
}

/// Builds a thrifty program for `(G, k)` from a complete pebbling sequence:
/// states are keyed by (placement step, values of the currently pebbled
/// nodes), so the program's size is the sum of `k^(pebbles before each
/// placement)` plus the two output states.
pub fn build_thrifty_from_pebbling(
    dag: &std::sync::Arc<RootedDag>,
    k: usize,
    seq: &PebbleSequence,
) -> Result<BranchingProgram<BdeVar>, Error> {
    let report = crate::pebbling::is_valid_complete_sequence(dag, seq);
    if !report.ok() {
        return Err(Error::InvalidParameter(format!("pebbling sequence invalid: {report}")));
    }
    if k < 2 {
        return Err(Error::InvalidParameter("k must be >= 2".into()));
    }
    // Placements up to and including the first placement onto the root.
    // `before` is the configuration right before the placement, as a sorted
    // node list; the placed node's value is what the spawned states query.
    struct Placement {
        node: usize,
        before: Vec<usize>,
        after: Vec<usize>,
    }
    let mut placements: Vec<Placement> = Vec::new();
    for window in seq.configs.windows(2) {
        let added: Vec<usize> = window[1].difference(&window[0]).copied().collect();
        if let [u] = added.as_slice() {
            placements.push(Placement {
                node: *u,
                before: window[0].iter().copied().collect(),
                after: window[1].iter().copied().collect(),
            });
            if *u == dag.root() {
                break;
            }
        }
    }
    if placements.last().map(|p| p.node) != Some(dag.root()) {
        return Err(Error::InvalidParameter("sequence never places a pebble on the root".into()));
    }

    // State ids: per placement j, one state per valuation of `before[j]` in
    // lexicographic order; outputs take the last two ids.
    let mut offsets = Vec::with_capacity(placements.len());
    let mut next_id = 0usize;
    for p in &placements {
        offsets.push(next_id);
        next_id += k.pow(p.before.len() as u32);
    }
    let yes_id = next_id;
    let no_id = next_id + 1;

    let index_of = |j: usize, assignment: &BTreeMap<usize, usize>, domain: &[usize]| -> StateId {
        let mut idx = 0usize;
        for v in domain {
            idx = idx * k + (assignment[v] - 1);
        }
        offsets[j] + idx
    };

    let mut states: BTreeMap<StateId, State<BdeVar>> = BTreeMap::new();
    states.insert(yes_id, State::Output(Decision::Yes));
    states.insert(no_id, State::Output(Decision::No));
    for (j, p) in placements.iter().enumerate() {
        let domain = &p.before;
        // Every valuation of the pebbled nodes.
        let mut digits = vec![1usize; domain.len()];
        loop {
            let assignment: BTreeMap<usize, usize> = domain.iter().copied().zip(digits.iter().copied()).collect();
            let var = if dag.is_leaf(p.node) {
                BdeVar::Leaf(p.node)
            } else {
                BdeVar::Func(p.node, dag.children(p.node).iter().map(|&c| assignment[&c]).collect())
            };
            let mut edges = BTreeMap::new();
            for answer in 1..=k {
                let target = if p.node == dag.root() {
                    if answer == 1 {
                        yes_id
                    } else {
                        no_id
                    }
                } else {
                    let next = &placements[j + 1];
                    let mut next_assignment = BTreeMap::new();
                    for &v in &next.before {
                        next_assignment.insert(v, if v == p.node { answer } else { assignment[&v] });
                    }
                    index_of(j + 1, &next_assignment, &next.before)
                };
                edges.insert(answer, target);
            }
            states.insert(index_of(j, &assignment, domain), State::Query { var, edges });
            // Advance the odometer.
            let mut pos = digits.len();
            loop {
                if pos == 0 {
                    digits.clear();
                    break;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] <= k {
                    break;
                }
                digits[pos] = 1;
            }
            if digits.is_empty() {
                break;
            }
        }
        let _ = &p.after;
    }
    Ok(BranchingProgram { k, start: offsets[0], states })
}

/// Encodes the advice for `input`: walks from the critical state to the
/// output, emitting a word exactly when the decoder could not deduce the
/// queried node, then appends the never-learned node values in ascending
/// node order.
pub fn encode_advice(
    b: &BranchingProgram<BdeVar>,
    input: &DagEvalInstance,
) -> Result<(AdvicePackage, EncodeStats), Error> {
    let dag = input.dag().clone();
    let values = input.node_values();
    let ann = annotate_pebbling(b, input)?;
    let mut known: BTreeMap<usize, usize> = BTreeMap::new();
    let mut deduced = 0usize;
    let mut words = Vec::new();
    for step in &ann.trace.steps[ann.critical_index..] {
        let u = step_node(&dag, &values, step)?;
        if let BdeVar::Func(_, args) = &step.var {
            for (&v, &a) in dag.children(u).iter().zip(args.iter()) {
                if !known.contains_key(&v) {
                    if a != values[v] {
                        return Err(Error::ProtocolInvariant(format!(
                            "deduced value {a} for node {v} disagrees with the true value {}",
                            values[v]
                        )));
                    }
                    known.insert(v, a);
                    deduced += 1;
                }
            }
        }
        match known.get(&u) {
            Some(&a) => {
                if a != step.answer {
                    return Err(Error::ProtocolInvariant(format!(
                        "known value {a} of node {u} disagrees with the edge taken ({})",
                        step.answer
                    )));
                }
            }
            None => {
                words.push(step.answer);
                known.insert(u, step.answer);
            }
        }
    }
    let walk_words = words.len();
    for u in dag.nodes() {
        if !known.contains_key(&u) {
            words.push(values[u]);
        }
    }
    Ok((AdvicePackage { critical_state: ann.critical_state, words }, EncodeStats { walk_words, deduced }))
}

/// Replays the walk from the advice alone, deducing child values at each
/// function query and consuming a word whenever the queried node is still
/// unknown; recovers all node values.
pub fn decode_advice(
    b: &BranchingProgram<BdeVar>,
    dag: &RootedDag,
    pkg: &AdvicePackage,
) -> Result<Vec<usize>, Error> {
    let mut known: BTreeMap<usize, usize> = BTreeMap::new();
    let mut next_word = 0usize;
    let mut current = pkg.critical_state;
    loop {
        match b.state(current) {
            None => return Err(Error::ProtocolInvariant(format!("walk reached dangling state {current}"))),
            Some(State::Output(_)) => break,
            Some(State::Query { var, edges }) => {
                let u = match var {
                    BdeVar::Leaf(u) => *u,
                    BdeVar::Func(u, args) => {
                        for (&v, &a) in dag.children(*u).iter().zip(args.iter()) {
                            known.entry(v).or_insert(a);
                        }
                        *u
                    }
                };
                let answer = match known.get(&u) {
                    Some(&a) => a,
                    None => {
                        let Some(&w) = pkg.words.get(next_word) else {
                            return Err(Error::ProtocolInvariant("advice underflow during walk".into()));
                        };
                        next_word += 1;
                        known.insert(u, w);
                        w
                    }
                };
                let Some(&next) = edges.get(&answer) else {
                    return Err(Error::ProtocolInvariant(format!("state {current} lacks edge {answer}")));
                };
                current = next;
            }
        }
    }
    let mut values = vec![0usize; dag.node_count() + 1];
    for u in dag.nodes() {
        match known.get(&u) {
            Some(&a) => values[u] = a,
            None => {
                let Some(&w) = pkg.words.get(next_word) else {
                    return Err(Error::ProtocolInvariant("advice underflow in the residual".into()));
                };
                next_word += 1;
                values[u] = w;
            }
        }
    }
    if next_word != pkg.words.len() {
        return Err(Error::ProtocolInvariant(format!(
            "advice overflow: {} words unused",
            pkg.words.len() - next_word
        )));
    }
    Ok(values)
}

/// Result of grouping the hard inputs by critical state.
#[derive(Debug, Clone)]
pub struct PartitionReport {
    pub pebbling_cost: usize,
    pub hard_inputs: usize,
    /// Critical state -> number of hard inputs with that critical state.
    pub groups: BTreeMap<StateId, usize>,
    pub max_group: usize,
    pub group_bound: usize,
    pub required_groups: usize,
    pub program_size: usize,
    pub failures: Vec<String>,
}

impl PartitionReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "p": self.pebbling_cost,
            "hard_inputs": self.hard_inputs,
            "groups": self.groups.len(),
            "histogram": self.groups.iter().map(|(s, c)| (s.to_string(), c)).collect::<BTreeMap<_, _>>(),
            "max_group": self.max_group,
            "group_bound": self.group_bound,
            "required_groups": self.required_groups,
            "size": self.program_size,
            "pass": self.pass(),
            "failures": self.failures,
        })
    }
}

/// Groups the hard inputs by critical state and checks the counting
/// argument: every group has at most `k^(n-p)` inputs, so there are at
/// least `k^p` groups, and the program has at least `k^p` states.
pub fn verify_partition_bound(
    b: &BranchingProgram<BdeVar>,
    dag: &std::sync::Arc<RootedDag>,
    k: usize,
    caps: &Caps,
) -> Result<PartitionReport, Error> {
    let n = dag.node_count();
    let (p, _) = min_pebbling_cost(dag, 16)?;
    let mut groups: BTreeMap<StateId, usize> = BTreeMap::new();
    let mut hard_inputs = 0usize;
    let mut failures = Vec::new();
    for (index, input) in crate::dageval::enumerate_hard_inputs(dag, k, caps)?.enumerate() {
        let ann = annotate_pebbling(b, &input)?;
        if ann.max_pebbles < p {
            failures.push(format!("input #{index}: assigned sequence uses {} < p = {p} pebbles", ann.max_pebbles));
        }
        *groups.entry(ann.critical_state).or_insert(0) += 1;
        hard_inputs += 1;
    }
    let group_bound = k.pow((n - p) as u32);
    let required_groups = k.pow(p as u32);
    let max_group = groups.values().copied().max().unwrap_or(0);
    if max_group > group_bound {
        failures.push(format!("a critical-state group has {max_group} inputs, above the bound {group_bound}"));
    }
    if groups.len() < required_groups {
        failures.push(format!("only {} critical states, need at least {required_groups}", groups.len()));
    }
    if b.size() < required_groups {
        failures.push(format!("program size {} is below k^p = {required_groups}", b.size()));
    }
    Ok(PartitionReport {
        pebbling_cost: p,
        hard_inputs,
        groups,
        max_group,
        group_bound,
        required_groups,
        program_size: b.size(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bp::{EdgeMode, Strictness};
    use crate::dag::{make_complete_binary_tree, make_path, make_pyramid};
    use crate::dageval::{check_decides, check_thrifty, enumerate_hard_inputs, Family};
    use crate::pebbling::is_valid_complete_sequence;
    use std::sync::Arc;

    fn thrifty_for(dag: &Arc<RootedDag>, k: usize) -> BranchingProgram<BdeVar> {
        let (_, seq) = min_pebbling_cost(dag, 16).unwrap();
        build_thrifty_from_pebbling(dag, k, &seq).unwrap()
    }

    #[test]
    fn constructed_program_decides_all_t2_inputs() {
        let dag = Arc::new(make_complete_binary_tree(2).unwrap());
        let b = thrifty_for(&dag, 2);
        assert!(b.validate(EdgeMode::Full, Strictness::Strict).ok());
        let caps = Caps::default();
        assert!(check_decides(&b, &dag, 2, &Family::All, &caps).unwrap().ok());
        assert!(check_thrifty(&b, &dag, 2, &Family::All, &caps).unwrap().ok());
        assert!(b.size() >= 4); // k^p with p = 2
    }

    #[test]
    fn constructed_size_within_counting_bound() {
        let dag = Arc::new(make_complete_binary_tree(2).unwrap());
        let (_, seq) = min_pebbling_cost(&dag, 16).unwrap();
        let b = build_thrifty_from_pebbling(&dag, 2, &seq).unwrap();
        let k = 2usize;
        let bound: usize = seq.configs.iter().map(|c| k.pow(c.len() as u32)).sum::<usize>() + 2;
        assert!(b.size() <= bound);
    }

    #[test]
    fn annotation_validates_and_exceeds_pebbling_cost() {
        let dag = Arc::new(make_complete_binary_tree(2).unwrap());
        let b = thrifty_for(&dag, 2);
        let caps = Caps::default();
        for input in enumerate_hard_inputs(&dag, 2, &caps).unwrap() {
            let ann = annotate_pebbling(&b, &input).unwrap();
            assert!(ann.max_pebbles >= 2);
            let report = is_valid_complete_sequence(&dag, &ann.configs);
            assert!(report.ok(), "{report}");
            check_retention_fact(&dag, &input, &ann).unwrap();
            // The critical state is a query state, never an output.
            assert!(matches!(b.state(ann.critical_state), Some(State::Query { .. })));
        }
    }

    #[test]
    fn missing_root_query_detected() {
        // A program that answers from the leaves alone never queries the
        // root's function variable.
        let dag = Arc::new(make_path(2).unwrap());
        let b: BranchingProgram<BdeVar> = BranchingProgram {
            k: 2,
            start: 0,
            states: [
                (0, State::Query { var: BdeVar::Leaf(1), edges: [(1, 1), (2, 2)].into() }),
                (1, State::Output(Decision::Yes)),
                (2, State::Output(Decision::No)),
            ]
            .into(),
        };
        let mut values = vec![0usize; 3];
        values[1] = 1;
        values[2] = 1;
        let input = crate::dageval::hard_input_from_values(&dag, 2, &values).unwrap();
        assert!(matches!(annotate_pebbling(&b, &input), Err(Error::MissingRootQuery)));
    }

    #[test]
    fn advice_round_trip_t2() {
        let dag = Arc::new(make_complete_binary_tree(2).unwrap());
        let b = thrifty_for(&dag, 2);
        let caps = Caps::default();
        for input in enumerate_hard_inputs(&dag, 2, &caps).unwrap() {
            let values = input.node_values();
            let (pkg, stats) = encode_advice(&b, &input).unwrap();
            assert!(pkg.words.len() <= 1); // n - p = 3 - 2
            assert!(stats.learned_on_walk() >= stats.walk_words + 2);
            let decoded = decode_advice(&b, &dag, &pkg).unwrap();
            assert_eq!(decoded[1..], values[1..]);
        }
    }

    #[test]
    fn partition_bound_t2() {
        let dag = Arc::new(make_complete_binary_tree(2).unwrap());
        let b = thrifty_for(&dag, 2);
        let report = verify_partition_bound(&b, &dag, 2, &Caps::default()).unwrap();
        assert!(report.pass(), "{:?}", report.failures);
        assert_eq!(report.hard_inputs, 8);
        assert!(report.groups.len() >= 4);
        assert!(report.max_group <= 2);
    }

    #[test]
    fn partition_bound_path3() {
        let dag = Arc::new(make_path(3).unwrap());
        let b = thrifty_for(&dag, 2);
        let report = verify_partition_bound(&b, &dag, 2, &Caps::default()).unwrap();
        assert!(report.pass(), "{:?}", report.failures);
        assert_eq!(report.pebbling_cost, 1);
        assert!(report.groups.len() >= 2);
    }

    #[test]
    fn partition_bound_pyramid3() {
        let dag = Arc::new(make_pyramid(3).unwrap());
        let b = thrifty_for(&dag, 2);
        let report = verify_partition_bound(&b, &dag, 2, &Caps::default()).unwrap();
        assert!(report.pass(), "{:?}", report.failures);
    }
}
