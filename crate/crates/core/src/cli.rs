//! Command-line front end: file I/O, orchestration, and report emission.
//!
//! Exit status: 0 when every checked property holds, 1 when a property is
//! violated or a cap prevents demonstrating it, 2 on usage or input-format
//! errors. Output is deterministic — identical invocations produce
//! byte-identical artifacts (ordered maps, no timestamps).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rand::SeedableRng;

use crate::analysis::{build_thrifty_from_pebbling, decode_advice, encode_advice, verify_partition_bound};
use crate::bp::{BranchingProgram, EdgeMode, Strictness};
use crate::dag::{make_complete_binary_tree, make_path, make_pyramid, RootedDag};
use crate::dageval::{
    check_thrifty, enumerate_hard_inputs, hard_input_from_values, random_instance, Caps, DagEvalInstance, Family,
};
use crate::error::Error;
use crate::genprob::{check_semantic_incremental, GenInstance};
use crate::pebbling::min_pebbling_cost;
use crate::reduction::{build_naming, reduce_instance};
use crate::transform::{incremental_to_thrifty, reduction_image, thrifty_to_incremental};

#[derive(Debug, Parser)]
#[command(name = "incrbp", about = "Branching programs, pebbling, and the dag-evaluation to GEN reduction", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact black pebbling cost of a dag, with a witness sequence.
    Pebble {
        /// Dag: `tree:H`, `pyramid:H`, `path:L`, or a JSON file path.
        #[arg(long)]
        dag: String,
        /// Largest budget tried before giving up.
        #[arg(long, default_value_t = 16)]
        budget: usize,
        #[arg(long)]
        json: bool,
    },
    /// Map a dag-evaluation instance to its GEN instance.
    Reduce {
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        /// Instance JSON file.
        #[arg(long, conflicts_with_all = ["values", "seed"])]
        instance: Option<PathBuf>,
        /// Node values `v1,v2,..` of a hard input (one per node).
        #[arg(long, conflicts_with = "seed")]
        values: Option<String>,
        /// Draw a random instance instead.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the GEN instance here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a dag-evaluation instance: node values and the decision.
    Evaluate {
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        #[arg(long, conflicts_with_all = ["values", "seed"])]
        instance: Option<PathBuf>,
        #[arg(long, conflicts_with = "seed")]
        values: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Decide a GEN instance by closure.
    GenDecide {
        /// GEN instance JSON file.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check the thrifty property of a dag-evaluation program over a family.
    CheckThrifty {
        /// Branching program JSON file.
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        /// Family: `all` or `hard`.
        #[arg(long, default_value = "hard")]
        family: String,
        #[arg(long)]
        json: bool,
    },
    /// Check the semantic-incremental property of a GEN program over the
    /// reduction image of the hard family.
    CheckIncremental {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Specialize a GEN program to the reduction image and rename it into a
    /// dag-evaluation program.
    Transform {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Turn a thrifty dag-evaluation program into a semantic-incremental
    /// GEN program over the reduction image.
    Forward {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a thrifty program from an optimal pebbling of the dag.
    ConstructThrifty {
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 16)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// End-to-end counting bound: build the thrifty program, group the hard
    /// inputs by critical state, and check the group sizes and counts.
    VerifyBound {
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Advice round-trip over the hard family: encode each input at its
    /// critical state, decode, and compare.
    Protocol {
        #[arg(long)]
        dag: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
}

fn parse_dag(spec: &str) -> Result<Arc<RootedDag>, Error> {
    let dag = if let Some(h) = spec.strip_prefix("tree:") {
        let h: u32 = h
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad tree height {h:?}")))?;
        make_complete_binary_tree(h)?
    } else if let Some(h) = spec.strip_prefix("pyramid:") {
        let h: usize = h
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad pyramid height {h:?}")))?;
        make_pyramid(h)?
    } else if let Some(len) = spec.strip_prefix("path:") {
        let len: usize = len
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad path length {len:?}")))?;
        make_path(len)?
    } else {
        let text = std::fs::read_to_string(spec)?;
        RootedDag::from_json(&serde_json::from_str(&text)?)?
    };
    Ok(Arc::new(dag))
}

fn load_instance(
    dag: &Arc<RootedDag>,
    k: usize,
    instance: &Option<PathBuf>,
    values: &Option<String>,
    seed: Option<u64>,
) -> Result<DagEvalInstance, Error> {
    if let Some(path) = instance {
        let text = std::fs::read_to_string(path)?;
        let loaded = DagEvalInstance::from_json(&serde_json::from_str(&text)?)?;
        if !Arc::ptr_eq(loaded.dag(), dag) && loaded.dag().as_ref() != dag.as_ref() {
            return Err(Error::InvalidInstance("instance dag differs from --dag".into()));
        }
        return Ok(loaded);
    }
    if let Some(values) = values {
        let parsed: Result<Vec<usize>, _> = values.split(',').map(|v| v.trim().parse::<usize>()).collect();
        let mut parsed = parsed.map_err(|_| Error::InvalidParameter(format!("bad --values {values:?}")))?;
        parsed.insert(0, 0); // the builder takes 1-indexed node values
        return hard_input_from_values(dag, k, &parsed);
    }
    if let Some(seed) = seed {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        return Ok(random_instance(dag, k, &mut rng));
    }
    Err(Error::InvalidParameter("provide one of --instance, --values, --seed".into()))
}

fn load_program<V: crate::bp::VarLabel>(path: &Path) -> Result<BranchingProgram<V>, Error> {
    let text = std::fs::read_to_string(path)?;
    BranchingProgram::from_json(&serde_json::from_str(&text)?)
}

fn emit(value: &serde_json::Value, out: &Option<PathBuf>) -> Result<(), Error> {
    let text = format!("{}\n", serde_json::to_string_pretty(value)?);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs a parsed command; `Ok` carries the process exit status.
pub fn run_command(cli: Cli) -> Result<i32, Error> {
    let caps = Caps::default();
    match cli.command {
        Command::Pebble { dag, budget, json } => {
            let dag = parse_dag(&dag)?;
            let (p, witness) = min_pebbling_cost(&dag, budget)?;
            if json {
                let configs: Vec<Vec<usize>> =
                    witness.configs.iter().map(|c| c.iter().copied().collect()).collect();
                emit(&serde_json::json!({ "p": p, "witness": configs }), &None)?;
            } else {
                println!("pebbling cost p = {p}");
                for (t, config) in witness.configs.iter().enumerate() {
                    println!("  step {t}: {{{}}}", config.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(", "));
                }
            }
            Ok(0)
        }
        Command::Reduce { dag, k, instance, values, seed, out } => {
            let dag = parse_dag(&dag)?;
            let input = load_instance(&dag, k, &instance, &values, seed)?;
            let naming = build_naming(&dag, k)?;
            let reduced = reduce_instance(&naming, &input)?;
            emit(&reduced.to_json(), &out)?;
            Ok(0)
        }
        Command::Evaluate { dag, k, instance, values, seed, json } => {
            let dag = parse_dag(&dag)?;
            let input = load_instance(&dag, k, &instance, &values, seed)?;
            let node_values = input.node_values();
            let decision = input.decide();
            if json {
                let values: std::collections::BTreeMap<String, usize> =
                    dag.nodes().map(|u| (u.to_string(), node_values[u])).collect();
                emit(&serde_json::json!({ "values": values, "decision": decision }), &None)?;
            } else {
                for u in dag.nodes() {
                    println!("node {u}: {}", node_values[u]);
                }
                println!("decision: {decision:?}");
            }
            Ok(0)
        }
        Command::GenDecide { instance, json } => {
            let text = std::fs::read_to_string(&instance)?;
            let gen = GenInstance::from_json(&serde_json::from_str(&text)?)?;
            let closure: Vec<usize> = gen.closure().into_iter().collect();
            let decision = gen.decide();
            if json {
                emit(&serde_json::json!({ "closure": closure, "decision": decision }), &None)?;
            } else {
                println!("closure: {closure:?}");
                println!("decision: {decision:?}");
            }
            Ok(0)
        }
        Command::CheckThrifty { program, dag, k, family, json } => {
            let dag = parse_dag(&dag)?;
            let b = load_program(&program)?;
            let family = match family.as_str() {
                "all" => Family::All,
                "hard" => Family::Hard,
                other => return Err(Error::InvalidParameter(format!("unknown family {other:?}"))),
            };
            let report = check_thrifty(&b, &dag, k, &family, &caps)?;
            if json {
                emit(&serde_json::json!({ "ok": report.ok(), "report": report.to_string() }), &None)?;
            } else {
                println!("thrifty: {report}");
            }
            Ok(if report.ok() { 0 } else { 1 })
        }
        Command::CheckIncremental { program, dag, k, json } => {
            let dag = parse_dag(&dag)?;
            let b = load_program(&program)?;
            let naming = build_naming(&dag, k)?;
            let image = reduction_image(&naming, &caps)?;
            let report = check_semantic_incremental(&b, &image)?;
            if json {
                emit(&serde_json::json!({ "ok": report.ok(), "report": report.to_string() }), &None)?;
            } else {
                println!("semantic-incremental: {report}");
            }
            Ok(if report.ok() { 0 } else { 1 })
        }
        Command::Transform { program, dag, k, out } => {
            let dag = parse_dag(&dag)?;
            let b = load_program(&program)?;
            let naming = build_naming(&dag, k)?;
            let (back, audit) = incremental_to_thrifty(&b, &naming)?;
            eprintln!(
                "deleted {} edges, bypassed {} states, {} reject conversions; size {} -> {}",
                audit.deleted_edges.len(),
                audit.bypassed,
                audit.reject_conversions,
                b.size(),
                back.size()
            );
            emit(&back.to_json(), &out)?;
            Ok(0)
        }
        Command::Forward { program, dag, k, out } => {
            let dag = parse_dag(&dag)?;
            let b = load_program(&program)?;
            let naming = build_naming(&dag, k)?;
            let forward = thrifty_to_incremental(&b, &naming)?;
            emit(&forward.to_json(), &out)?;
            Ok(0)
        }
        Command::ConstructThrifty { dag, k, budget, out } => {
            let dag = parse_dag(&dag)?;
            let (p, witness) = min_pebbling_cost(&dag, budget)?;
            let b = build_thrifty_from_pebbling(&dag, k, &witness)?;
            let report = b.validate(EdgeMode::Full, Strictness::Strict);
            if !report.ok() {
                return Err(Error::InvalidProgram(format!("constructed program invalid: {report}")));
            }
            eprintln!("p = {p}, program size = {}", b.size());
            emit(&b.to_json(), &out)?;
            Ok(0)
        }
        Command::VerifyBound { dag, k, json } => {
            let dag = parse_dag(&dag)?;
            let (_, witness) = min_pebbling_cost(&dag, 16)?;
            let b = build_thrifty_from_pebbling(&dag, k, &witness)?;
            let report = verify_partition_bound(&b, &dag, k, &caps)?;
            if json {
                emit(&report.to_json(), &None)?;
            } else {
                println!(
                    "p = {}, |D| = {}, groups = {} (required >= {}), max group = {} (bound {}), size = {}",
                    report.pebbling_cost,
                    report.hard_inputs,
                    report.groups.len(),
                    report.required_groups,
                    report.max_group,
                    report.group_bound,
                    report.program_size
                );
                for failure in &report.failures {
                    println!("FAIL: {failure}");
                }
                println!("{}", if report.pass() { "pass" } else { "fail" });
            }
            Ok(if report.pass() { 0 } else { 1 })
        }
        Command::Protocol { dag, k, json } => {
            let dag = parse_dag(&dag)?;
            let (p, witness) = min_pebbling_cost(&dag, 16)?;
            let b = build_thrifty_from_pebbling(&dag, k, &witness)?;
            let n = dag.node_count();
            let mut checked = 0usize;
            let mut max_words = 0usize;
            let mut failures = Vec::new();
            for input in enumerate_hard_inputs(&dag, k, &caps)? {
                let (pkg, _) = encode_advice(&b, &input)?;
                max_words = max_words.max(pkg.words.len());
                let decoded = decode_advice(&b, &dag, &pkg)?;
                if decoded != input.node_values() {
                    failures.push(format!("input {:?} decoded as {:?}", &input.node_values()[1..], &decoded[1..]));
                }
                checked += 1;
            }
            let ok = failures.is_empty() && max_words + p <= n;
            if json {
                emit(
                    &serde_json::json!({
                        "inputs": checked,
                        "p": p,
                        "max_words": max_words,
                        "word_budget": n - p,
                        "failures": failures,
                        "ok": ok,
                    }),
                    &None,
                )?;
            } else {
                println!("round-trip on {checked} inputs: max advice words {max_words} (budget {})", n - p);
                for failure in &failures {
                    println!("FAIL: {failure}");
                }
                println!("{}", if ok { "pass" } else { "fail" });
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

/// Maps an error to the documented exit status: caps and property failures
/// are 1, usage and format problems are 2.
pub fn exit_status_for(error: &Error) -> i32 {
    match error {
        Error::BudgetExhausted { .. } | Error::GuardExceeded(..) => 1,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dag_generator_specs_parse() {
        assert_eq!(parse_dag("tree:2").unwrap().node_count(), 3);
        assert_eq!(parse_dag("pyramid:3").unwrap().node_count(), 6);
        assert_eq!(parse_dag("path:4").unwrap().node_count(), 4);
        assert!(parse_dag("tree:x").is_err());
        assert!(parse_dag("/nonexistent.json").is_err());
    }

    #[test]
    fn values_flag_builds_hard_input() {
        let dag = parse_dag("tree:2").unwrap();
        let input = load_instance(&dag, 2, &None, &Some("2,1,2".into()), None).unwrap();
        assert_eq!(input.node_values()[1..], [2, 1, 2]);
    }

    #[test]
    fn seeded_instances_are_reproducible() {
        let dag = parse_dag("tree:2").unwrap();
        let a = load_instance(&dag, 2, &None, &None, Some(7)).unwrap();
        let b = load_instance(&dag, 2, &None, &None, Some(7)).unwrap();
        assert_eq!(a, b);
    }
}
