//! Dag evaluation instances, the hard-input family, and the thrifty
//! property checkers.
//!
//! An instance fixes a dag, an alphabet size k, a value for each leaf and a
//! total function for each non-leaf; the decision problem asks whether the
//! root evaluates to 1. The hard family contains, for each assignment of
//! node values, the unique instance whose functions are 1 everywhere except
//! possibly at the children's true values, so its size is exactly `k^n`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bp::{BranchingProgram, ComputationTrace, Oracle, VarLabel};
use crate::dag::RootedDag;
use crate::error::Error;
use crate::report::CheckReport;

/// A variable of the dag evaluation problem: a leaf value or one entry of a
/// non-leaf's function table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BdeVar {
    Leaf(usize),
    Func(usize, Vec<usize>),
}

impl VarLabel for BdeVar {
    fn token(&self) -> String {
        match self {
            BdeVar::Leaf(u) => format!("l_{u}"),
            BdeVar::Func(u, args) => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                format!("f_{u}({})", args.join(","))
            }
        }
    }

    fn parse_token(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidProgram(format!("bad BDE variable token {s:?}"));
        if let Some(rest) = s.strip_prefix("l_") {
            return rest.parse().map(BdeVar::Leaf).map_err(|_| bad());
        }
        let rest = s.strip_prefix("f_").ok_or_else(bad)?;
        let open = rest.find('(').ok_or_else(bad)?;
        let u: usize = rest[..open].parse().map_err(|_| bad())?;
        let inner = rest[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args = inner
            .split(',')
            .map(|a| a.trim().parse().map_err(|_| bad()))
            .collect::<Result<Vec<usize>, _>>()?;
        Ok(BdeVar::Func(u, args))
    }
}

/// One input of the dag evaluation problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagEvalInstance {
    dag: Arc<RootedDag>,
    k: usize,
    /// Value in 1..=k per leaf.
    leaf_val: BTreeMap<usize, usize>,
    /// Row-major table of size k^d per non-leaf.
    funcs: BTreeMap<usize, Vec<usize>>,
}

impl DagEvalInstance {
    pub fn new(
        dag: Arc<RootedDag>,
        k: usize,
        leaf_val: BTreeMap<usize, usize>,
        funcs: BTreeMap<usize, Vec<usize>>,
    ) -> Result<Self, Error> {
        if k < 2 {
            return Err(Error::InvalidParameter("k must be >= 2".into()));
        }
        for u in dag.nodes() {
            if dag.is_leaf(u) {
                match leaf_val.get(&u) {
                    Some(&v) if (1..=k).contains(&v) => {}
                    Some(&v) => return Err(Error::InvalidInstance(format!("leaf {u} value {v} outside 1..={k}"))),
                    None => return Err(Error::InvalidInstance(format!("missing value for leaf {u}"))),
                }
            } else {
                let want = k.pow(dag.in_degree(u) as u32);
                match funcs.get(&u) {
                    Some(table) if table.len() == want && table.iter().all(|v| (1..=k).contains(v)) => {}
                    Some(_) => return Err(Error::InvalidInstance(format!("bad function table for node {u}"))),
                    None => return Err(Error::InvalidInstance(format!("missing function for node {u}"))),
                }
            }
        }
        if leaf_val.keys().any(|&u| !dag.is_leaf(u)) || funcs.keys().any(|&u| dag.is_leaf(u) || u > dag.node_count()) {
            return Err(Error::InvalidInstance("values assigned to wrong node kinds".into()));
        }
        Ok(Self { dag, k, leaf_val, funcs })
    }

    pub fn dag(&self) -> &Arc<RootedDag> {
        &self.dag
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn leaf_value(&self, u: usize) -> usize {
        self.leaf_val[&u]
    }

    /// Row-major index of `args` into a k-ary table.
    fn table_index(&self, args: &[usize]) -> usize {
        args.iter().fold(0, |acc, &a| acc * self.k + (a - 1))
    }

    pub fn func_value(&self, u: usize, args: &[usize]) -> usize {
        self.funcs[&u][self.table_index(args)]
    }

    /// Value of the instance on node `u`: memoized top-down evaluation.
    pub fn node_value(&self, u: usize) -> usize {
        let mut memo = vec![0usize; self.dag.node_count() + 1];
        self.eval(u, &mut memo)
    }

    fn eval(&self, u: usize, memo: &mut Vec<usize>) -> usize {
        if memo[u] != 0 {
            return memo[u];
        }
        let v = if self.dag.is_leaf(u) {
            self.leaf_val[&u]
        } else {
            let args: Vec<usize> = self.dag.children(u).iter().map(|&c| self.eval(c, memo)).collect();
            self.func_value(u, &args)
        };
        memo[u] = v;
        v
    }

    /// All node values at once (single memo pass).
    pub fn node_values(&self) -> Vec<usize> {
        let mut memo = vec![0usize; self.dag.node_count() + 1];
        self.eval(self.dag.root(), &mut memo);
        for u in self.dag.nodes() {
            self.eval(u, &mut memo);
        }
        memo
    }

    pub fn decide(&self) -> crate::bp::Decision {
        if self.node_value(self.dag.root()) == 1 {
            crate::bp::Decision::Yes
        } else {
            crate::bp::Decision::No
        }
    }

    /// The true children values of non-leaf `u`, i.e. the argument tuple of
    /// the thrifty `u` variable.
    pub fn thrifty_args(&self, u: usize) -> Vec<usize> {
        let values = self.node_values();
        self.dag.children(u).iter().map(|&c| values[c]).collect()
    }
}

impl Oracle<BdeVar> for DagEvalInstance {
    fn answer(&self, var: &BdeVar) -> Result<usize, Error> {
        match var {
            BdeVar::Leaf(u) => self
                .leaf_val
                .get(u)
                .copied()
                .ok_or_else(|| Error::OracleDomain(var.token())),
            BdeVar::Func(u, args) => {
                let table = self.funcs.get(u).ok_or_else(|| Error::OracleDomain(var.token()))?;
                if args.len() != self.dag.in_degree(*u) || args.iter().any(|a| *a == 0 || *a > self.k) {
                    return Err(Error::OracleDomain(var.token()));
                }
                Ok(table[self.table_index(args)])
            }
        }
    }
}

/// The unique hard instance whose node values are `values[u]` (1-indexed):
/// every function entry is 1 except at the children's true values, where it
/// equals the prescribed node value.
pub fn hard_input_from_values(dag: &Arc<RootedDag>, k: usize, values: &[usize]) -> Result<DagEvalInstance, Error> {
    if values.len() != dag.node_count() + 1 {
        return Err(Error::InvalidParameter("values must be 1-indexed over all nodes".into()));
    }
    let mut leaf_val = BTreeMap::new();
    let mut funcs = BTreeMap::new();
    for u in dag.nodes() {
        if dag.is_leaf(u) {
            leaf_val.insert(u, values[u]);
        } else {
            let d = dag.in_degree(u) as u32;
            let mut table = vec![1usize; k.pow(d)];
            let idx = dag
                .children(u)
                .iter()
                .fold(0, |acc, &c| acc * k + (values[c] - 1));
            table[idx] = values[u];
            funcs.insert(u, table);
        }
    }
    DagEvalInstance::new(dag.clone(), k, leaf_val, funcs)
}

/// Caps on family enumeration.
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    pub max_instances: u64,
    pub max_steps: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_instances: 1_000_000, max_steps: 100_000_000 }
    }
}

fn checked_pow(base: u64, exp: u64, cap: u64) -> Option<u64> {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
        if acc > cap {
            return None;
        }
    }
    Some(acc)
}

/// Number of hard inputs, `k^n`, or a guard error if it exceeds the cap.
pub fn hard_family_size(dag: &RootedDag, k: usize, caps: &Caps) -> Result<u64, Error> {
    checked_pow(k as u64, dag.node_count() as u64, caps.max_instances)
        .ok_or_else(|| Error::GuardExceeded(format!("hard family k^{} exceeds cap {}", dag.node_count(), caps.max_instances)))
}

/// Streams the hard family in lexicographic node-value order.
pub fn enumerate_hard_inputs(
    dag: &Arc<RootedDag>,
    k: usize,
    caps: &Caps,
) -> Result<impl Iterator<Item = DagEvalInstance>, Error> {
    hard_family_size(dag, k, caps)?;
    let dag = dag.clone();
    let n = dag.node_count();
    Ok(MixedRadix::new(vec![k; n]).map(move |digits| {
        let mut values = vec![0usize; n + 1];
        for (i, d) in digits.iter().enumerate() {
            values[i + 1] = d + 1;
        }
        hard_input_from_values(&dag, k, &values).expect("hard input construction cannot fail")
    }))
}

/// Streams every instance of the problem for (dag, k): all leaf assignments
/// times all function tables.
pub fn enumerate_all_inputs(
    dag: &Arc<RootedDag>,
    k: usize,
    caps: &Caps,
) -> Result<impl Iterator<Item = DagEvalInstance>, Error> {
    let digit_count: u64 = dag
        .nodes()
        .map(|u| if dag.is_leaf(u) { 1u64 } else { (k as u64).pow(dag.in_degree(u) as u32) })
        .sum();
    checked_pow(k as u64, digit_count, caps.max_instances)
        .ok_or_else(|| Error::GuardExceeded(format!("full family k^{digit_count} exceeds cap {}", caps.max_instances)))?;
    let dag = dag.clone();
    let leaves = dag.leaves();
    let non_leaves: Vec<usize> = dag.nodes().filter(|&u| !dag.is_leaf(u)).collect();
    let radices = vec![k; digit_count as usize];
    let dag2 = dag.clone();
    Ok(MixedRadix::new(radices).map(move |digits| {
        let mut it = digits.iter().map(|d| d + 1);
        let leaf_val: BTreeMap<usize, usize> = leaves.iter().map(|&u| (u, it.next().unwrap())).collect();
        let mut funcs = BTreeMap::new();
        for &u in &non_leaves {
            let len = k.pow(dag2.in_degree(u) as u32);
            funcs.insert(u, (0..len).map(|_| it.next().unwrap()).collect());
        }
        DagEvalInstance::new(dag.clone(), k, leaf_val, funcs).expect("enumerated instance cannot fail")
    }))
}

/// Draws a uniformly random instance.
pub fn random_instance(dag: &Arc<RootedDag>, k: usize, rng: &mut impl Rng) -> DagEvalInstance {
    let leaf_val = dag.leaves().iter().map(|&u| (u, rng.gen_range(1..=k))).collect();
    let funcs = dag
        .nodes()
        .filter(|&u| !dag.is_leaf(u))
        .map(|u| {
            let len = k.pow(dag.in_degree(u) as u32);
            (u, (0..len).map(|_| rng.gen_range(1..=k)).collect())
        })
        .collect();
    DagEvalInstance::new(dag.clone(), k, leaf_val, funcs).expect("random instance cannot fail")
}

/// Odometer over digit vectors with per-position radices.
struct MixedRadix {
    radices: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl MixedRadix {
    fn new(radices: Vec<usize>) -> Self {
        let current = Some(vec![0; radices.len()]);
        Self { radices, current }
    }
}

impl Iterator for MixedRadix {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let digits = self.current.as_mut().unwrap();
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < self.radices[pos] {
                break;
            }
            digits[pos] = 0;
        }
        Some(out)
    }
}

/// Which inputs a family checker simulates.
pub enum Family {
    All,
    Hard,
    Explicit(Vec<DagEvalInstance>),
}

fn family_iter<'a>(
    family: &'a Family,
    dag: &'a Arc<RootedDag>,
    k: usize,
    caps: &Caps,
) -> Result<Box<dyn Iterator<Item = DagEvalInstance> + 'a>, Error> {
    match family {
        Family::All => Ok(Box::new(enumerate_all_inputs(dag, k, caps)?)),
        Family::Hard => Ok(Box::new(enumerate_hard_inputs(dag, k, caps)?)),
        Family::Explicit(list) => Ok(Box::new(list.iter().cloned())),
    }
}

/// Checks the thrifty property of `b` over a family: every visited state
/// that queries a function variable must query it at the children's true
/// values for the input at hand.
pub fn check_thrifty(
    b: &BranchingProgram<BdeVar>,
    dag: &Arc<RootedDag>,
    k: usize,
    family: &Family,
    caps: &Caps,
) -> Result<CheckReport, Error> {
    let mut steps_used: u64 = 0;
    let mut count = 0usize;
    for (index, input) in family_iter(family, dag, k, caps)?.enumerate() {
        let trace = b.run(&input)?;
        steps_used += trace.steps.len() as u64;
        if steps_used > caps.max_steps {
            return Err(Error::GuardExceeded(format!("step cap {} exceeded", caps.max_steps)));
        }
        let values = input.node_values();
        for step in &trace.steps {
            if let BdeVar::Func(u, args) = &step.var {
                let expected: Vec<usize> = dag.children(*u).iter().map(|&c| values[c]).collect();
                if *args != expected {
                    return Ok(CheckReport::Violation {
                        input_index: index,
                        location: format!("state {}", step.state),
                        detail: format!(
                            "queries {} but the children of node {u} have values {expected:?}",
                            step.var.token()
                        ),
                    });
                }
            }
        }
        count += 1;
    }
    Ok(CheckReport::Ok { inputs_checked: count })
}

/// The node whose thrifty variable `step` queries under `input`, if any.
fn thrifty_query_node(dag: &RootedDag, values: &[usize], step: &crate::bp::TraceStep<BdeVar>) -> Option<usize> {
    match &step.var {
        BdeVar::Leaf(u) => Some(*u),
        BdeVar::Func(u, args) => {
            let expected: Vec<usize> = dag.children(*u).iter().map(|&c| values[c]).collect();
            (*args == expected).then_some(*u)
        }
    }
}

/// Checks, per input, that every non-leaf's thrifty variable is queried and
/// that each child is queried before every such parent query.
pub fn check_basic_thrifty_lemma(
    b: &BranchingProgram<BdeVar>,
    dag: &Arc<RootedDag>,
    k: usize,
    family: &Family,
    caps: &Caps,
) -> Result<CheckReport, Error> {
    let mut steps_used: u64 = 0;
    let mut count = 0usize;
    for (index, input) in family_iter(family, dag, k, caps)?.enumerate() {
        let trace = b.run(&input)?;
        steps_used += trace.steps.len() as u64;
        if steps_used > caps.max_steps {
            return Err(Error::GuardExceeded(format!("step cap {} exceeded", caps.max_steps)));
        }
        let values = input.node_values();
        let queried_nodes: Vec<Option<usize>> =
            trace.steps.iter().map(|s| thrifty_query_node(dag, &values, s)).collect();
        for u in dag.nodes().filter(|&u| !dag.is_leaf(u)) {
            let positions: Vec<usize> = queried_nodes
                .iter()
                .enumerate()
                .filter_map(|(t, &q)| (q == Some(u)).then_some(t))
                .collect();
            if positions.is_empty() {
                return Ok(CheckReport::Violation {
                    input_index: index,
                    location: format!("node {u}"),
                    detail: format!("node {u} never queried"),
                });
            }
            for &t in &positions {
                for &v in dag.children(u) {
                    if !queried_nodes[..t].iter().any(|&q| q == Some(v)) {
                        return Ok(CheckReport::Violation {
                            input_index: index,
                            location: format!("state {} (step {t})", trace.steps[t].state),
                            detail: format!("child {v} not queried before parent {u}"),
                        });
                    }
                }
            }
        }
        count += 1;
    }
    Ok(CheckReport::Ok { inputs_checked: count })
}

/// Decides correctness of `b` over a family by exhaustive simulation.
pub fn check_decides(
    b: &BranchingProgram<BdeVar>,
    dag: &Arc<RootedDag>,
    k: usize,
    family: &Family,
    caps: &Caps,
) -> Result<CheckReport, Error> {
    let mut count = 0usize;
    for (index, input) in family_iter(family, dag, k, caps)?.enumerate() {
        let trace = b.run(&input)?;
        if trace.terminal != input.decide() {
            return Ok(CheckReport::Violation {
                input_index: index,
                location: format!("output state {}", trace.terminal_state),
                detail: format!("program answers {} but the instance evaluates to {}", trace.terminal, input.decide()),
            });
        }
        count += 1;
    }
    Ok(CheckReport::Ok { inputs_checked: count })
}

pub fn run_on(b: &BranchingProgram<BdeVar>, input: &DagEvalInstance) -> Result<ComputationTrace<BdeVar>, Error> {
    b.run(input)
}

/// A deliberately non-thrifty negative control over the height-2 tree with
/// k = 2: the start state queries the root function at the fixed tuple
/// (1,1) regardless of the leaves' values.
pub fn non_thrifty_example() -> BranchingProgram<BdeVar> {
    use crate::bp::State;
    BranchingProgram {
        k: 2,
        start: 0,
        states: [
            (0, State::Query { var: BdeVar::Func(3, vec![1, 1]), edges: [(1, 1), (2, 2)].into() }),
            (1, State::Output(crate::bp::Decision::Yes)),
            (2, State::Output(crate::bp::Decision::No)),
        ]
        .into(),
    }
}

// ---------------------------------------------------------------------------
// JSON: {"dag": <dag>, "k": int, "leaves": {"<u>": v},
//        "funcs": {"<u>": {"a1,a2": v}}}
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    dag: serde_json::Value,
    k: usize,
    leaves: BTreeMap<String, usize>,
    funcs: BTreeMap<String, BTreeMap<String, usize>>,
}

impl DagEvalInstance {
    pub fn to_json(&self) -> serde_json::Value {
        let leaves = self.leaf_val.iter().map(|(u, v)| (u.to_string(), *v)).collect();
        let funcs = self
            .funcs
            .iter()
            .map(|(&u, table)| {
                let d = self.dag.in_degree(u);
                let mut entries = BTreeMap::new();
                for (idx, &v) in table.iter().enumerate() {
                    let mut args = vec![0usize; d];
                    let mut rest = idx;
                    for pos in (0..d).rev() {
                        args[pos] = rest % self.k + 1;
                        rest /= self.k;
                    }
                    let key: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                    entries.insert(key.join(","), v);
                }
                (u.to_string(), entries)
            })
            .collect();
        serde_json::to_value(InstanceFile { dag: self.dag.to_json(), k: self.k, leaves, funcs }).unwrap()
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, Error> {
        let file: InstanceFile = serde_json::from_value(value.clone())?;
        let dag = Arc::new(RootedDag::from_json(&file.dag)?);
        let mut leaf_val = BTreeMap::new();
        for (key, v) in file.leaves {
            let u: usize = key.parse().map_err(|_| Error::InvalidInstance(format!("bad leaf key {key:?}")))?;
            leaf_val.insert(u, v);
        }
        let mut funcs = BTreeMap::new();
        for (key, entries) in file.funcs {
            let u: usize = key.parse().map_err(|_| Error::InvalidInstance(format!("bad node key {key:?}")))?;
            let d = dag.in_degree(u);
            let mut table = vec![0usize; file.k.pow(d as u32)];
            for (args_key, v) in entries {
                let args = args_key
                    .split(',')
                    .map(|a| a.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| Error::InvalidInstance(format!("bad args key {args_key:?}")))?;
                if args.len() != d || args.iter().any(|&a| a == 0 || a > file.k) {
                    return Err(Error::InvalidInstance(format!("bad args key {args_key:?} for node {u}")));
                }
                let idx = args.iter().fold(0, |acc, &a| acc * file.k + (a - 1));
                table[idx] = v;
            }
            funcs.insert(u, table);
        }
        DagEvalInstance::new(dag, file.k, leaf_val, funcs)
    }
}
