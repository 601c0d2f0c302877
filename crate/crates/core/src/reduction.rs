//! The dag-evaluation-to-GEN instance map `I -> T^I`, its element naming
//! scheme, and the variable-type classifier driving the program
//! transformation.
//!
//! For a dag with n nodes whose non-leaves all have exactly two children,
//! the target universe has `m = 3kn + n + 1` elements:
//!
//! * elements `1..=n+1` are plain; node `u` is represented by element `u+1`
//! * `EdgeHasValue(arc_j, a)` occupies `n+1 + (j-1)k + a`, arcs enumerated
//!   per parent node in ascending order, left child before right
//! * `NodeHasValue(u, a)` occupies the top `nk` elements `m-nk+1..=m` in
//!   `(u, a)` lexicographic order, except `NodeHasValue(root, 1)` is swapped
//!   onto `m` so that the reduced instance is a YES instance of GEN[m]
//!   exactly when the root evaluates to 1
//! * anything left between the edge block and the node block is an
//!   unassigned residue that no reduced instance ever generates
//!
//! The layout is fixed so reduced instances are byte-stable on disk.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::dag::RootedDag;
use crate::dageval::DagEvalInstance;
use crate::error::Error;
use crate::genprob::GenInstance;

/// Mnemonic name of a GEN element under a fixed naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElementName {
    /// Raw element `1..=n+1`; node `u` sits at `u+1`.
    Plain(usize),
    /// Generated iff the child endpoint of the arc evaluates to `a`.
    EdgeHasValue { child: usize, parent: usize, a: usize },
    /// Generated iff node `node` evaluates to `a`.
    NodeHasValue { node: usize, a: usize },
    /// Residue element never assigned a name and never generated.
    Unassigned,
}

impl std::fmt::Display for ElementName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ElementName::Plain(j) => write!(f, "plain({j})"),
            ElementName::EdgeHasValue { child, parent, a } => write!(f, "edge({child}->{parent},{a})"),
            ElementName::NodeHasValue { node, a } => write!(f, "node({node},{a})"),
            ElementName::Unassigned => write!(f, "unassigned"),
        }
    }
}

/// The four used-variable forms of the reduction, plus unused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum GenVarType {
    /// `(1, u)`: introduces the plain element of node `u`.
    DummyNodeIntro { u: usize },
    /// `(1, n+1)` or `(1, NodeHasValue(w_t, a))`, `t < l`: leaf chain.
    LeafChain { next_leaf: usize },
    /// `(u+1, NodeHasValue(v, b))`: propagates a node value to an out-arc.
    DummyPropagate { u: usize, v: usize, b: usize },
    /// `(EdgeHasValue(v1 u, b1), EdgeHasValue(v2 u, b2))`: computes `u`.
    InternalCompute { u: usize, b1: usize, b2: usize },
    Unused,
}

/// Deterministic element naming for a fixed `(G, k)`.
#[derive(Debug, Clone)]
pub struct ElementNaming {
    dag: Arc<RootedDag>,
    k: usize,
    m: usize,
    /// `(child, parent)` arcs: per parent in ascending order, left first.
    arcs: Vec<(usize, usize)>,
    names: Vec<ElementName>,
    element_of: BTreeMap<ElementName, usize>,
}

/// Checks the shape required by the reduction: every non-leaf has exactly
/// two ordered children.
fn require_indegree_two(dag: &RootedDag) -> Result<(), Error> {
    for u in dag.nodes() {
        let d = dag.in_degree(u);
        if !dag.is_leaf(u) && d != 2 {
            return Err(Error::InvalidParameter(format!(
                "reduction requires in-degree exactly 2 at non-leaves; node {u} has {d}"
            )));
        }
    }
    Ok(())
}

pub fn build_naming(dag: &Arc<RootedDag>, k: usize) -> Result<ElementNaming, Error> {
    if k < 2 {
        return Err(Error::InvalidParameter("k must be >= 2".into()));
    }
    let report = dag.validate();
    if !report.ok() {
        return Err(Error::InvalidDag(report.to_string()));
    }
    require_indegree_two(dag)?;
    let n = dag.node_count();
    let m = 3 * k * n + n + 1;
    let mut names = vec![ElementName::Unassigned; m + 1];
    for j in 1..=n + 1 {
        names[j] = ElementName::Plain(j);
    }
    let mut arcs = Vec::new();
    for u in dag.nodes() {
        for &v in dag.children(u) {
            arcs.push((v, u));
        }
    }
    for (idx, &(child, parent)) in arcs.iter().enumerate() {
        for a in 1..=k {
            names[n + 1 + idx * k + a] = ElementName::EdgeHasValue { child, parent, a };
        }
    }
    let base = m - n * k;
    for u in dag.nodes() {
        for a in 1..=k {
            names[base + (u - 1) * k + a] = ElementName::NodeHasValue { node: u, a };
        }
    }
    // Swap NodeHasValue(root, 1) onto m; the lex layout put (n, k) there.
    let root_slot = base + (dag.root() - 1) * k + 1;
    names.swap(root_slot, m);
    debug_assert_eq!(names[m], ElementName::NodeHasValue { node: dag.root(), a: 1 });

    let element_of = names
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, name)| !matches!(name, ElementName::Unassigned))
        .map(|(e, name)| (*name, e))
        .collect();
    Ok(ElementNaming { dag: dag.clone(), k, m, arcs, names, element_of })
}

impl ElementNaming {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dag(&self) -> &Arc<RootedDag> {
        &self.dag
    }

    pub fn name_of(&self, element: usize) -> Result<ElementName, Error> {
        if element == 0 || element > self.m {
            return Err(Error::ElementOutOfRange(element));
        }
        Ok(self.names[element])
    }

    pub fn element(&self, name: ElementName) -> usize {
        self.element_of[&name]
    }

    pub fn node_element(&self, u: usize) -> usize {
        u + 1
    }

    pub fn node_has_value(&self, node: usize, a: usize) -> usize {
        self.element(ElementName::NodeHasValue { node, a })
    }

    pub fn edge_has_value(&self, child: usize, parent: usize, a: usize) -> usize {
        self.element(ElementName::EdgeHasValue { child, parent, a })
    }

    /// Arcs `(child, parent)` in naming order.
    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    /// Leaf order `w_1, ..., w_l` used by the chain equations.
    pub fn leaf_order(&self) -> Vec<usize> {
        self.dag.leaves()
    }

    /// Classifies a GEN variable `(x, y)` into the four used forms or
    /// unused; every pair gets exactly one type.
    pub fn classify(&self, x: usize, y: usize) -> Result<GenVarType, Error> {
        let n = self.dag.node_count();
        let x_name = self.name_of(x)?;
        let y_name = self.name_of(y)?;
        if x == 1 {
            if (1..=n).contains(&y) {
                return Ok(GenVarType::DummyNodeIntro { u: y });
            }
            let leaves = self.leaf_order();
            if y == n + 1 {
                return Ok(GenVarType::LeafChain { next_leaf: leaves[0] });
            }
            if let ElementName::NodeHasValue { node, .. } = y_name {
                if let Some(pos) = leaves.iter().position(|&w| w == node) {
                    // The chain is defined only up to the second-to-last
                    // leaf; a pair keyed on the last leaf stays unused.
                    if pos + 1 < leaves.len() {
                        return Ok(GenVarType::LeafChain { next_leaf: leaves[pos + 1] });
                    }
                }
            }
            return Ok(GenVarType::Unused);
        }
        if let ElementName::Plain(j) = x_name {
            // x = u + 1 for node u = j - 1.
            let u = j - 1;
            if u >= 1 && u <= n && !self.dag.is_leaf(u) {
                if let ElementName::NodeHasValue { node: v, a: b } = y_name {
                    if self.dag.children(u).contains(&v) {
                        return Ok(GenVarType::DummyPropagate { u, v, b });
                    }
                }
            }
            return Ok(GenVarType::Unused);
        }
        if let (
            ElementName::EdgeHasValue { child: v1, parent: u1, a: b1 },
            ElementName::EdgeHasValue { child: v2, parent: u2, a: b2 },
        ) = (x_name, y_name)
        {
            if u1 == u2 {
                let children = self.dag.children(u1);
                if children.len() == 2 && children[0] == v1 && children[1] == v2 {
                    return Ok(GenVarType::InternalCompute { u: u1, b1, b2 });
                }
            }
        }
        Ok(GenVarType::Unused)
    }

    /// Exportable audit map element -> mnemonic name.
    pub fn to_json(&self) -> serde_json::Value {
        let names: BTreeMap<String, String> = (1..=self.m)
            .map(|e| (format!("{e:05}"), self.names[e].to_string()))
            .collect();
        serde_json::json!({
            "m": self.m,
            "n": self.dag.node_count(),
            "k": self.k,
            "elements": names,
        })
    }
}

/// Maps a dag-evaluation instance to the GEN instance `T^I`.
pub fn reduce_instance(naming: &ElementNaming, input: &DagEvalInstance) -> Result<GenInstance, Error> {
    if input.dag().as_ref() != naming.dag.as_ref() || input.k() != naming.k {
        return Err(Error::InvalidParameter("instance does not match the naming's (G, k)".into()));
    }
    let dag = &naming.dag;
    let n = dag.node_count();
    let k = naming.k;
    let m = naming.m;
    let mut table = vec![1usize; m * m]; // unused entries are 1
    let set = |table: &mut Vec<usize>, x: usize, y: usize, v: usize| {
        table[(x - 1) * m + (y - 1)] = v;
    };
    // Surface the plain elements 2..=n+1.
    for u in 1..=n {
        set(&mut table, 1, u, naming.node_element(u));
    }
    // Leaf chain: each link reveals the next leaf's value.
    let leaves = naming.leaf_order();
    let first = leaves[0];
    set(&mut table, 1, n + 1, naming.node_has_value(first, input.leaf_value(first)));
    for t in 0..leaves.len().saturating_sub(1) {
        let next = leaves[t + 1];
        let target = naming.node_has_value(next, input.leaf_value(next));
        for a in 1..=k {
            set(&mut table, 1, naming.node_has_value(leaves[t], a), target);
        }
    }
    for u in dag.nodes().filter(|&u| !dag.is_leaf(u)) {
        let children = dag.children(u);
        let (v1, v2) = (children[0], children[1]);
        // Propagate node values onto the in-arcs of u.
        for &v in &[v1, v2] {
            for a in 1..=k {
                set(&mut table, naming.node_element(u), naming.node_has_value(v, a), naming.edge_has_value(v, u, a));
            }
        }
        // Combine the two in-arc values through u's function.
        for b1 in 1..=k {
            for b2 in 1..=k {
                let b = input.func_value(u, &[b1, b2]);
                set(
                    &mut table,
                    naming.edge_has_value(v1, u, b1),
                    naming.edge_has_value(v2, u, b2),
                    naming.node_has_value(u, b),
                );
            }
        }
    }
    GenInstance::new(m, table)
}
