//! Program transformations between the two worlds: a forward constructor
//! turning a thrifty dag-evaluation program into a semantic-incremental GEN
//! program over the reduction image, and the reverse transformation that
//! specializes a GEN program to the image inputs, deletes the edges no
//! image input can take, bypasses the resulting chain states and renames
//! the survivors into dag-evaluation variables.
//!
//! The reverse direction only deletes and renames, so the output is never
//! larger than the input; the forward direction exists to generate
//! round-trip test material and makes no size claim.

use std::collections::{BTreeMap, BTreeSet};

use crate::bp::{BranchingProgram, Decision, State, StateId};
use crate::dageval::BdeVar;
use crate::error::Error;
use crate::genprob::{GenInstance, GenVar};
use crate::reduction::{reduce_instance, ElementNaming, GenVarType};

/// The GEN instances `T^I` for every hard input `I` of `(G, k)`.
pub fn reduction_image(naming: &ElementNaming, caps: &crate::dageval::Caps) -> Result<Vec<GenInstance>, Error> {
    crate::dageval::enumerate_hard_inputs(naming.dag(), naming.k(), caps)?
        .map(|input| reduce_instance(naming, &input))
        .collect()
}

struct GenBuilder {
    m: usize,
    states: BTreeMap<StateId, State<GenVar>>,
    next_id: StateId,
    yes: StateId,
    no: StateId,
}

impl GenBuilder {
    fn new(m: usize) -> Self {
        let mut states = BTreeMap::new();
        states.insert(0, State::Output(Decision::Yes));
        states.insert(1, State::Output(Decision::No));
        GenBuilder { m, states, next_id: 2, yes: 0, no: 1 }
    }

    /// Adds a query state with the given meaningful edges; every other
    /// label is routed to the reject output so the program stays m-way.
    fn query(&mut self, x: usize, y: usize, routed: BTreeMap<usize, StateId>) -> StateId {
        let id = self.next_id;
        self.next_id += 1;
        let mut edges = BTreeMap::new();
        for label in 1..=self.m {
            edges.insert(label, *routed.get(&label).unwrap_or(&self.no));
        }
        self.states.insert(id, State::Query { var: GenVar { x, y }, edges });
        id
    }

    fn output(&self, d: Decision) -> StateId {
        match d {
            Decision::Yes => self.yes,
            Decision::No => self.no,
        }
    }
}

/// Converts a thrifty dag-evaluation program into an m-way GEN program that
/// is correct and semantic-incremental on the reduction image.
///
/// A prefix chain queries `(1,1) .. (1,n)` to surface the plain elements.
/// Each source query is then emulated: a leaf query walks the leaf chain
/// from its head, branching on each revealed leaf value until the target
/// leaf is reached; a function query issues the two propagation queries for
/// its in-arcs and then the combining query, branching on the node value it
/// reveals.
pub fn thrifty_to_incremental(
    b: &BranchingProgram<BdeVar>,
    naming: &ElementNaming,
) -> Result<BranchingProgram<GenVar>, Error> {
    let dag = naming.dag().clone();
    let n = dag.node_count();
    let k = naming.k();
    if b.k != k {
        return Err(Error::InvalidParameter(format!("program is {}-way but the naming has k = {k}", b.k)));
    }
    let leaves = naming.leaf_order();
    // A constant program needs no chain and no gadgets.
    if let Some(State::Output(d)) = b.state(b.start) {
        return Ok(BranchingProgram { k: naming.m(), start: 0, states: [(0, State::Output(*d))].into() });
    }
    let mut builder = GenBuilder::new(naming.m());

    // Emulation gadgets are built bottom-up over the acyclic source program.
    fn gadget(
        b: &BranchingProgram<BdeVar>,
        naming: &ElementNaming,
        leaves: &[usize],
        builder: &mut GenBuilder,
        memo: &mut BTreeMap<StateId, StateId>,
        q: StateId,
    ) -> Result<StateId, Error> {
        if let Some(&id) = memo.get(&q) {
            return Ok(id);
        }
        let n = naming.dag().node_count();
        let k = naming.k();
        let entry = match b.state(q).ok_or_else(|| Error::InvalidProgram(format!("dangling state {q}")))? {
            State::Output(d) => builder.output(*d),
            State::Query { var, edges } => {
                let mut successor = |answer: usize| -> Result<StateId, Error> {
                    let target = edges
                        .get(&answer)
                        .ok_or_else(|| Error::MissingEdge { state: q, label: answer })?;
                    gadget(b, naming, leaves, builder, memo, *target)
                };
                match var {
                    BdeVar::Leaf(w) => {
                        let position = leaves
                            .iter()
                            .position(|&x| x == *w)
                            .ok_or_else(|| Error::InvalidProgram(format!("state {q} queries non-leaf {w} as a leaf")))?;
                        // Build the chain walk backwards from the target
                        // depth: at depth `position` the revealed element is
                        // NodeHasValue(w, b) and we branch into the source
                        // successors.
                        let mut finals = BTreeMap::new();
                        for value in 1..=k {
                            finals.insert(naming.node_has_value(*w, value), successor(value)?);
                        }
                        // Walk back through leaves w_position .. w_1.
                        let mut routed = finals;
                        for depth in (0..position).rev() {
                            let prev_leaf = leaves[depth];
                            let mut next_routed = BTreeMap::new();
                            for revealed in 1..=k {
                                // After learning leaf `prev_leaf` = revealed,
                                // continue the chain keyed on that element.
                                let key = naming.node_has_value(prev_leaf, revealed);
                                let id = builder.query(1, key, routed.clone());
                                next_routed.insert(key, id);
                            }
                            routed = next_routed;
                        }
                        // Head of the chain: (1, n+1) reveals leaf w_1.
                        builder.query(1, n + 1, routed)
                    }
                    BdeVar::Func(u, args) => {
                        let children = naming.dag().children(*u);
                        if children.len() != 2 || args.len() != 2 {
                            return Err(Error::InvalidProgram(format!(
                                "state {q} queries node {u} which does not have two children"
                            )));
                        }
                        let (v1, v2) = (children[0], children[1]);
                        let (b1, b2) = (args[0], args[1]);
                        let mut combine_edges = BTreeMap::new();
                        for value in 1..=k {
                            combine_edges.insert(naming.node_has_value(*u, value), successor(value)?);
                        }
                        let combine = builder.query(
                            naming.edge_has_value(v1, *u, b1),
                            naming.edge_has_value(v2, *u, b2),
                            combine_edges,
                        );
                        let right = builder.query(
                            naming.node_element(*u),
                            naming.node_has_value(v2, b2),
                            [(naming.edge_has_value(v2, *u, b2), combine)].into(),
                        );
                        builder.query(
                            naming.node_element(*u),
                            naming.node_has_value(v1, b1),
                            [(naming.edge_has_value(v1, *u, b1), right)].into(),
                        )
                    }
                }
            }
        };
        memo.insert(q, entry);
        Ok(entry)
    }

    let mut memo = BTreeMap::new();
    let entry = gadget(b, naming, &leaves, &mut builder, &mut memo, b.start)?;
    // Prefix chain surfacing the plain elements 2..=n+1.
    let mut next = entry;
    for u in (1..=n).rev() {
        next = builder.query(1, u, [(naming.node_element(u), next)].into());
    }
    let mut program = BranchingProgram { k: naming.m(), start: next, states: builder.states };
    program.prune_unreachable();
    Ok(program)
}

/// What the reverse transformation did, for auditing.
#[derive(Debug, Clone, Default)]
pub struct TransformAudit {
    /// Edges `(state, label)` deleted in the specialization step.
    pub deleted_edges: BTreeSet<(StateId, usize)>,
    /// States converted to reject because specialization left them with no
    /// out-edges; never expected for full-mode inputs.
    pub reject_conversions: usize,
    /// States bypassed and deleted.
    pub bypassed: usize,
}

/// Specializes a GEN program to the reduction image and renames it into a
/// dag-evaluation program, without ever adding a state.
pub fn incremental_to_thrifty(
    program: &BranchingProgram<GenVar>,
    naming: &ElementNaming,
) -> Result<(BranchingProgram<BdeVar>, TransformAudit), Error> {
    incremental_to_thrifty_with_order(program, naming, |candidates| candidates[0])
}

/// Same, with an injectable choice of bypass order; the contraction is
/// confluent, which the tests assert by randomizing this choice.
pub fn incremental_to_thrifty_with_order(
    program: &BranchingProgram<GenVar>,
    naming: &ElementNaming,
    mut pick: impl FnMut(&[StateId]) -> StateId,
) -> Result<(BranchingProgram<BdeVar>, TransformAudit), Error> {
    let k = naming.k();
    let mut audit = TransformAudit::default();
    let mut states: BTreeMap<StateId, State<GenVar>> = program.states.clone();
    let mut start = program.start;

    // Specialize: keep only the edges an image input can take.
    let mut types: BTreeMap<StateId, GenVarType> = BTreeMap::new();
    for (&id, state) in states.iter_mut() {
        let State::Query { var, edges } = state else { continue };
        let ty = naming.classify(var.x, var.y)?;
        types.insert(id, ty);
        let keep: BTreeSet<usize> = match ty {
            GenVarType::Unused => [1].into(),
            GenVarType::DummyNodeIntro { u } => [naming.node_element(u)].into(),
            GenVarType::LeafChain { next_leaf } => (1..=k).map(|b| naming.node_has_value(next_leaf, b)).collect(),
            GenVarType::DummyPropagate { u, v, b } => [naming.edge_has_value(v, u, b)].into(),
            GenVarType::InternalCompute { u, .. } => (1..=k).map(|a| naming.node_has_value(u, a)).collect(),
        };
        edges.retain(|label, _| {
            let kept = keep.contains(label);
            if !kept {
                audit.deleted_edges.insert((id, *label));
            }
            kept
        });
    }

    // Any query state stripped of all its edges becomes a reject state.
    for (_, state) in states.iter_mut() {
        if matches!(state, State::Query { edges, .. } if edges.is_empty()) {
            *state = State::Output(Decision::No);
            audit.reject_conversions += 1;
        }
    }

    // Bypass out-degree-1 states until none remain.
    loop {
        let candidates: Vec<StateId> = states
            .iter()
            .filter(|(_, s)| matches!(s, State::Query { edges, .. } if edges.len() == 1))
            .map(|(&id, _)| id)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let id = pick(&candidates);
        let State::Query { edges, .. } = &states[&id] else { unreachable!() };
        let successor = *edges.values().next().unwrap();
        if successor == id {
            return Err(Error::InvalidProgram(format!("state {id} loops on itself")));
        }
        for (_, state) in states.iter_mut() {
            if let State::Query { edges, .. } = state {
                for target in edges.values_mut() {
                    if *target == id {
                        *target = successor;
                    }
                }
            }
        }
        if start == id {
            start = successor;
        }
        states.remove(&id);
        audit.bypassed += 1;
    }

    // Rename the surviving branch states into dag-evaluation variables and
    // relabel their edges by the value coordinate.
    let mut renamed: BTreeMap<StateId, State<BdeVar>> = BTreeMap::new();
    for (&id, state) in &states {
        let new_state = match state {
            State::Output(d) => State::Output(*d),
            State::Query { edges, .. } => {
                let (var, relabel): (BdeVar, Box<dyn Fn(usize) -> Option<usize>>) = match types[&id] {
                    GenVarType::LeafChain { next_leaf } => (
                        BdeVar::Leaf(next_leaf),
                        Box::new(move |label| match naming.name_of(label) {
                            Ok(crate::reduction::ElementName::NodeHasValue { node, a }) if node == next_leaf => Some(a),
                            _ => None,
                        }),
                    ),
                    GenVarType::InternalCompute { u, b1, b2 } => (
                        BdeVar::Func(u, vec![b1, b2]),
                        Box::new(move |label| match naming.name_of(label) {
                            Ok(crate::reduction::ElementName::NodeHasValue { node, a }) if node == u => Some(a),
                            _ => None,
                        }),
                    ),
                    other => {
                        return Err(Error::InvalidProgram(format!(
                            "state {id} of type {other:?} survived the bypass with {} edges",
                            edges.len()
                        )))
                    }
                };
                let mut new_edges = BTreeMap::new();
                for (&label, &target) in edges {
                    let value = relabel(label).ok_or_else(|| {
                        Error::InvalidProgram(format!("state {id}: surviving edge label {label} has no value coordinate"))
                    })?;
                    if new_edges.insert(value, target).is_some() {
                        return Err(Error::InvalidProgram(format!("state {id}: relabeling is not injective")));
                    }
                }
                if new_edges.len() != k || new_edges.keys().any(|&v| v == 0 || v > k) {
                    return Err(Error::InvalidProgram(format!("state {id}: relabeled edges are not a bijection onto 1..={k}")));
                }
                State::Query { var, edges: new_edges }
            }
        };
        renamed.insert(id, new_state);
    }

    let mut out = BranchingProgram { k, start, states: renamed };
    out.prune_unreachable();
    Ok((out, audit))
}

/// Edge labels actually traversed by the image inputs, for the audit that
/// no deleted edge was ever taken.
pub fn edges_used_by_family(
    program: &BranchingProgram<GenVar>,
    family: &[GenInstance],
) -> Result<BTreeSet<(StateId, usize)>, Error> {
    let mut used = BTreeSet::new();
    for input in family {
        let trace = program.run(input)?;
        for step in trace.steps {
            used.insert((step.state, step.answer));
        }
    }
    Ok(used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_thrifty_from_pebbling;
    use crate::bp::{EdgeMode, Strictness};
    use crate::dag::make_complete_binary_tree;
    use crate::dageval::{check_thrifty, enumerate_hard_inputs, Caps, Family};
    use crate::genprob::check_semantic_incremental;
    use crate::pebbling::min_pebbling_cost;
    use crate::reduction::build_naming;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn setup() -> (Arc<crate::dag::RootedDag>, ElementNaming, BranchingProgram<BdeVar>) {
        let dag = Arc::new(make_complete_binary_tree(2).unwrap());
        let naming = build_naming(&dag, 2).unwrap();
        let (_, seq) = min_pebbling_cost(&dag, 8).unwrap();
        let b = build_thrifty_from_pebbling(&dag, 2, &seq).unwrap();
        (dag, naming, b)
    }

    #[test]
    fn constant_program_maps_to_constant_program() {
        let dag = Arc::new(make_complete_binary_tree(2).unwrap());
        let naming = build_naming(&dag, 2).unwrap();
        let b: BranchingProgram<BdeVar> = BranchingProgram {
            k: 2,
            start: 0,
            states: [(0, State::Output(Decision::No))].into(),
        };
        let forward = thrifty_to_incremental(&b, &naming).unwrap();
        assert_eq!(forward.size(), 1);
        let trace = forward.run(&GenInstance::new(naming.m(), vec![1; naming.m() * naming.m()]).unwrap()).unwrap();
        assert_eq!(trace.terminal, Decision::No);
    }

    #[test]
    fn forward_program_is_incremental_and_correct_on_the_image() {
        let (dag, naming, b) = setup();
        let caps = Caps::default();
        let forward = thrifty_to_incremental(&b, &naming).unwrap();
        assert!(forward.validate(EdgeMode::Full, Strictness::Strict).ok());
        let image = reduction_image(&naming, &caps).unwrap();
        assert_eq!(image.len(), 8);
        let report = check_semantic_incremental(&forward, &image).unwrap();
        assert!(report.ok(), "{report}");
        // Decisions agree with the source program input by input.
        for (input, reduced) in enumerate_hard_inputs(&dag, 2, &caps).unwrap().zip(&image) {
            let source = b.run(&input).unwrap().terminal;
            let target = forward.run(reduced).unwrap().terminal;
            assert_eq!(source, target);
            assert_eq!(target, reduced.decide());
        }
    }

    #[test]
    fn round_trip_preserves_decisions() {
        let (dag, naming, b) = setup();
        let caps = Caps::default();
        let forward = thrifty_to_incremental(&b, &naming).unwrap();
        let (back, audit) = incremental_to_thrifty(&forward, &naming).unwrap();
        assert!(back.size() <= forward.size());
        assert_eq!(audit.reject_conversions, 0);
        assert!(back.validate(EdgeMode::Full, Strictness::Relaxed).ok());
        assert!(check_thrifty(&back, &dag, 2, &Family::Hard, &caps).unwrap().ok());
        for input in enumerate_hard_inputs(&dag, 2, &caps).unwrap() {
            assert_eq!(b.run(&input).unwrap().terminal, back.run(&input).unwrap().terminal);
        }
    }

    #[test]
    fn no_image_input_takes_a_deleted_edge() {
        let (_, naming, b) = setup();
        let caps = Caps::default();
        let forward = thrifty_to_incremental(&b, &naming).unwrap();
        let image = reduction_image(&naming, &caps).unwrap();
        let used = edges_used_by_family(&forward, &image).unwrap();
        let (_, audit) = incremental_to_thrifty(&forward, &naming).unwrap();
        assert!(used.is_disjoint(&audit.deleted_edges));
    }

    #[test]
    fn bypass_order_is_irrelevant() {
        let (_, naming, b) = setup();
        let forward = thrifty_to_incremental(&b, &naming).unwrap();
        let (reference, _) = incremental_to_thrifty(&forward, &naming).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let (other, _) = incremental_to_thrifty_with_order(&forward, &naming, |candidates| {
                *candidates.choose(&mut rng).unwrap()
            })
            .unwrap();
            assert_eq!(reference, other);
        }
    }

    #[test]
    fn traces_are_step_isomorphic() {
        let (dag, naming, b) = setup();
        let caps = Caps::default();
        let forward = thrifty_to_incremental(&b, &naming).unwrap();
        let (back, _) = incremental_to_thrifty(&forward, &naming).unwrap();
        for input in enumerate_hard_inputs(&dag, 2, &caps).unwrap() {
            let reduced = reduce_instance(&naming, &input).unwrap();
            // Project the GEN trace to its branching (type ii / iv) steps,
            // mapped into renamed variables and value answers.
            let mut projected = Vec::new();
            for step in forward.run(&reduced).unwrap().steps {
                match naming.classify(step.var.x, step.var.y).unwrap() {
                    GenVarType::LeafChain { next_leaf } => {
                        if let Ok(crate::reduction::ElementName::NodeHasValue { node, a }) = naming.name_of(step.answer)
                        {
                            assert_eq!(node, next_leaf);
                            projected.push((BdeVar::Leaf(next_leaf), a));
                        }
                    }
                    GenVarType::InternalCompute { u, b1, b2 } => {
                        if let Ok(crate::reduction::ElementName::NodeHasValue { node, a }) = naming.name_of(step.answer)
                        {
                            assert_eq!(node, u);
                            projected.push((BdeVar::Func(u, vec![b1, b2]), a));
                        }
                    }
                    _ => {}
                }
            }
            let direct: Vec<(BdeVar, usize)> = back
                .run(&input)
                .unwrap()
                .steps
                .into_iter()
                .map(|s| (s.var, s.answer))
                .collect();
            assert_eq!(projected, direct);
        }
    }
}
