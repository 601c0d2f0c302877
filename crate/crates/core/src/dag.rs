//! Rooted dags: the substrate for pebbling, dag evaluation and the GEN
//! reduction.
//!
//! Nodes are integers `1..=n`. Generators number nodes in leaves-first
//! topological order so that every child index is smaller than every parent
//! index and the root is node `n`; the reduction's element layout keys off
//! that convention.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::report::ValidationReport;

/// Connected rooted dag with ordered children (position 0 = left child).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedDag {
    n: usize,
    root: usize,
    /// `children[u]` for u in 1..=n; index 0 unused.
    children: Vec<Vec<usize>>,
    /// Derived from `children` at construction.
    parents: Vec<Vec<usize>>,
}

impl RootedDag {
    /// Builds a dag from per-node ordered child lists and validates it.
    pub fn new(n: usize, root: usize, children_of: BTreeMap<usize, Vec<usize>>) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidDag("n must be positive".into()));
        }
        let mut children = vec![Vec::new(); n + 1];
        for (u, cs) in children_of {
            if u == 0 || u > n {
                return Err(Error::InvalidDag(format!("node {u} out of range 1..={n}")));
            }
            for &c in &cs {
                if c == 0 || c > n {
                    return Err(Error::InvalidDag(format!("child {c} of node {u} out of range")));
                }
            }
            children[u] = cs;
        }
        let dag = Self::from_children(n, root, children);
        let report = dag.validate();
        if report.ok() {
            Ok(dag)
        } else {
            Err(Error::InvalidDag(report.to_string()))
        }
    }

    fn from_children(n: usize, root: usize, children: Vec<Vec<usize>>) -> Self {
        let mut parents = vec![Vec::new(); n + 1];
        for u in 1..=n {
            for &c in &children[u] {
                if c <= n {
                    parents[c].push(u);
                }
            }
        }
        RootedDag { n, root, children, parents }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        1..=self.n
    }

    /// Ordered children of `u` (left first).
    pub fn children(&self, u: usize) -> &[usize] {
        &self.children[u]
    }

    pub fn parents(&self, u: usize) -> &[usize] {
        &self.parents[u]
    }

    pub fn is_leaf(&self, u: usize) -> bool {
        self.children[u].is_empty()
    }

    /// Leaves in ascending node order. This is the fixed leaf order
    /// `w_1, ..., w_l` used by the reduction's chain equations.
    pub fn leaves(&self) -> Vec<usize> {
        self.nodes().filter(|&u| self.is_leaf(u)).collect()
    }

    pub fn in_degree(&self, u: usize) -> usize {
        self.children[u].len()
    }

    pub fn arc_count(&self) -> usize {
        self.nodes().map(|u| self.in_degree(u)).sum()
    }

    /// Checks the structural invariants and reports every violation found.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::new();
        if self.n < 2 {
            report.violation("n >= 2 required");
        }
        // Unique out-degree-0 node, and it is the declared root.
        let mut out_degree = vec![0usize; self.n + 1];
        for u in 1..=self.n {
            for &c in &self.children[u] {
                out_degree[c] += 1;
            }
        }
        let sinks: Vec<usize> = (1..=self.n).filter(|&u| out_degree[u] == 0).collect();
        if sinks.len() != 1 {
            report.violation(format!("unique root required, found {} out-degree-0 nodes", sinks.len()));
        } else if sinks[0] != self.root {
            report.violation(format!("declared root {} is not the out-degree-0 node {}", self.root, sinks[0]));
        }
        for u in 1..=self.n {
            let mut seen = self.children[u].clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != self.children[u].len() {
                report.violation(format!("node {u} has duplicate children"));
            }
        }
        if self.has_cycle() {
            report.violation("graph must be acyclic");
        } else if !self.is_connected() {
            report.violation("graph must be connected");
        }
        report
    }

    fn has_cycle(&self) -> bool {
        // Kahn's algorithm on child -> parent arcs.
        let mut indeg: Vec<usize> = (0..=self.n).map(|u| if u == 0 { 0 } else { self.in_degree(u) }).collect();
        let mut queue: Vec<usize> = (1..=self.n).filter(|&u| indeg[u] == 0).collect();
        let mut seen = 0;
        while let Some(u) = queue.pop() {
            seen += 1;
            for &p in &self.parents[u] {
                indeg[p] -= 1;
                if indeg[p] == 0 {
                    queue.push(p);
                }
            }
        }
        seen != self.n
    }

    fn is_connected(&self) -> bool {
        // Undirected reachability from node 1.
        let mut seen = vec![false; self.n + 1];
        let mut stack = vec![1usize];
        seen[1] = true;
        while let Some(u) = stack.pop() {
            for &v in self.children[u].iter().chain(self.parents[u].iter()) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        (1..=self.n).all(|u| seen[u])
    }

    /// A topological order of the nodes, children before parents.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = (0..=self.n).map(|u| if u == 0 { 0 } else { self.in_degree(u) }).collect();
        let mut queue: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
            (1..=self.n).filter(|&u| indeg[u] == 0).map(std::cmp::Reverse).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(std::cmp::Reverse(u)) = queue.pop() {
            order.push(u);
            for &p in &self.parents[u] {
                indeg[p] -= 1;
                if indeg[p] == 0 {
                    queue.push(std::cmp::Reverse(p));
                }
            }
        }
        order
    }
}

/// Complete binary tree of height `h` with `2^h - 1` nodes, leaves numbered
/// first and root = n.
pub fn make_complete_binary_tree(h: u32) -> Result<RootedDag, Error> {
    if h < 2 {
        return Err(Error::InvalidParameter("tree height must be >= 2".into()));
    }
    let n = (1usize << h) - 1;
    let mut children = vec![Vec::new(); n + 1];
    // Level 1 is the leaf level with 2^(h-1) nodes; level j has 2^(h-j).
    let mut level_start = 1usize; // first node index of the level below
    let mut below = 1usize << (h - 1);
    let mut next = below + 1; // first node index of the current level
    for _ in 2..=h {
        let width = below / 2;
        for i in 0..width {
            children[next + i] = vec![level_start + 2 * i, level_start + 2 * i + 1];
        }
        level_start = next;
        next += width;
        below = width;
    }
    Ok(RootedDag::from_children(n, n, children))
}

/// Pyramid with `h` levels: the bottom level has `h` leaves, each higher
/// level one node fewer, every internal node has in-degree 2, root = n.
pub fn make_pyramid(h: usize) -> Result<RootedDag, Error> {
    if h < 2 {
        return Err(Error::InvalidParameter("pyramid height must be >= 2".into()));
    }
    let n = h * (h + 1) / 2;
    let mut children = vec![Vec::new(); n + 1];
    // Bottom level nodes are 1..=h; level with w nodes sits above level w+1.
    let mut below_start = 1usize;
    let mut next = h + 1;
    for width in (1..h).rev() {
        for i in 0..width {
            children[next + i] = vec![below_start + i, below_start + i + 1];
        }
        below_start = next;
        next += width;
    }
    Ok(RootedDag::from_children(n, n, children))
}

/// Chain of `len` nodes: 1 -> 2 -> ... -> len, root = len.
pub fn make_path(len: usize) -> Result<RootedDag, Error> {
    if len < 2 {
        return Err(Error::InvalidParameter("path length must be >= 2".into()));
    }
    let mut children = vec![Vec::new(); len + 1];
    for u in 2..=len {
        children[u] = vec![u - 1];
    }
    Ok(RootedDag::from_children(len, len, children))
}

/// On-disk form: `{"n": .., "root": .., "children": {"<node>": [..]}}`.
#[derive(Serialize, Deserialize)]
struct DagFile {
    n: usize,
    root: usize,
    children: BTreeMap<String, Vec<usize>>,
}

impl RootedDag {
    pub fn to_json(&self) -> serde_json::Value {
        let children = self
            .nodes()
            .filter(|&u| !self.is_leaf(u))
            .map(|u| (u.to_string(), self.children[u].clone()))
            .collect();
        serde_json::to_value(DagFile { n: self.n, root: self.root, children }).unwrap()
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, Error> {
        let file: DagFile = serde_json::from_value(value.clone())?;
        let mut children = BTreeMap::new();
        for (key, cs) in file.children {
            let u: usize = key
                .parse()
                .map_err(|_| Error::InvalidDag(format!("bad node key {key:?}")))?;
            children.insert(u, cs);
        }
        RootedDag::new(file.n, file.root, children)
    }
}
