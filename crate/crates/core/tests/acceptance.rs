//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line (visible with `--nocapture`). The suite covers the
//! reduction, the exact pebbling solver, the pebbling-derived thrifty
//! construction, the critical-state counting bound, the advice protocol,
//! both program transformations, annotation validity, and the negative
//! controls. The headline asymptotic bounds are not reproducible as single
//! numbers; their desk-scale substitute is criterion 4.

use std::sync::Arc;
use std::time::Instant;

use incrbp::analysis::{
    annotate_pebbling, build_thrifty_from_pebbling, check_retention_fact, decode_advice, encode_advice,
    verify_partition_bound,
};
use incrbp::bp::{BranchingProgram, Decision, EdgeMode, Strictness};
use incrbp::dag::{make_complete_binary_tree, make_path, make_pyramid, RootedDag};
use incrbp::dageval::{
    check_decides, check_thrifty, enumerate_all_inputs, enumerate_hard_inputs, non_thrifty_example, BdeVar, Caps,
    DagEvalInstance, Family,
};
use incrbp::genprob::{check_decides_gen, check_semantic_incremental, non_incremental_example};
use incrbp::pebbling::{is_valid_complete_sequence, min_pebbling_cost};
use incrbp::reduction::{build_naming, reduce_instance};
use incrbp::report::CheckReport;
use incrbp::transform::{incremental_to_thrifty, reduction_image, thrifty_to_incremental};
use incrbp::Error;

fn caps() -> Caps {
    Caps::default()
}

fn tree(h: u32) -> Arc<RootedDag> {
    Arc::new(make_complete_binary_tree(h).unwrap())
}

fn pyramid(h: usize) -> Arc<RootedDag> {
    Arc::new(make_pyramid(h).unwrap())
}

/// The pebbling-derived thrifty program for `(dag, k)`.
fn constructed(dag: &Arc<RootedDag>, k: usize) -> (usize, BranchingProgram<BdeVar>) {
    let (p, witness) = min_pebbling_cost(dag, 16).unwrap();
    (p, build_thrifty_from_pebbling(dag, k, &witness).unwrap())
}

fn verdict(criterion: u32, what: &str, pass: bool) {
    println!("criterion {criterion}: {} — {what}", if pass { "pass" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {what}");
}

#[test]
fn criterion_1_reduction_soundness() {
    let started = Instant::now();
    for (dag, family, label) in [
        (tree(2), Family::All, "T^2 all 64"),
        (pyramid(3), Family::Hard, "pyramid(3) hard 64"),
    ] {
        let k = 2;
        let naming = build_naming(&dag, k).unwrap();
        if label.starts_with("T^2") {
            assert_eq!(naming.m(), 22, "m = 3kn+n+1 at n=3, k=2");
        }
        let inputs: Vec<DagEvalInstance> = match family {
            Family::All => enumerate_all_inputs(&dag, k, &caps()).unwrap().collect(),
            Family::Hard => enumerate_hard_inputs(&dag, k, &caps()).unwrap().collect(),
            Family::Explicit(_) => unreachable!(),
        };
        assert_eq!(inputs.len(), 64, "{label}");
        for input in &inputs {
            let reduced = reduce_instance(&naming, input).unwrap();
            assert_eq!(input.decide(), reduced.decide(), "{label}");
        }
    }
    let elapsed = started.elapsed();
    verdict(
        1,
        "decide(I) == decide_gen(T^I) on T^2 (all 64, m = 22) and pyramid(3) hard inputs, < 1 s",
        elapsed.as_secs_f64() < 1.0,
    );
}

#[test]
fn criterion_2_pebbling_exactness() {
    let started = Instant::now();
    for len in 2..=6 {
        let dag = Arc::new(make_path(len).unwrap());
        let (p, witness) = min_pebbling_cost(&dag, 16).unwrap();
        assert_eq!(p, 1, "path({len})");
        assert!(is_valid_complete_sequence(&dag, &witness).ok());
    }
    for h in 2..=4 {
        let dag = tree(h);
        let (p, witness) = min_pebbling_cost(&dag, 16).unwrap();
        assert_eq!(p as u32, h, "T^{h}");
        assert!(is_valid_complete_sequence(&dag, &witness).ok());
        assert_eq!(witness.cost(), p);
        // Independent cross-check: no sequence fits in budget p - 1.
        assert!(
            matches!(min_pebbling_cost(&dag, p - 1), Err(Error::BudgetExhausted { .. })),
            "T^{h} must not pebble within {}",
            p - 1
        );
    }
    let elapsed = started.elapsed();
    verdict(
        2,
        "cost 1 on path(2..6); cost h on T^h, h = 2..4, each cross-checked by failed (p-1) search, < 10 s",
        elapsed.as_secs_f64() < 10.0,
    );
}

#[test]
fn criterion_3_thrifty_construction() {
    let dag = tree(2);
    let k = 2;
    let (p, b) = constructed(&dag, k);
    assert!(b.validate(EdgeMode::Full, Strictness::Strict).ok());
    let thrifty = check_thrifty(&b, &dag, k, &Family::All, &caps()).unwrap();
    let decides = check_decides(&b, &dag, k, &Family::All, &caps()).unwrap();
    verdict(
        3,
        "pebbling-derived program on T^2 is thrifty on all 64 inputs, decides all 64, size >= k^p = 4",
        thrifty.ok() && decides.ok() && b.size() >= k.pow(p as u32),
    );
}

#[test]
fn criterion_4_partition_bound() {
    let k = 2;
    let mut pass = true;
    for (dag, expected_hard, label) in [(tree(2), 8usize, "T^2"), (pyramid(3), 64, "pyramid(3)")] {
        let (p, b) = constructed(&dag, k);
        let report = verify_partition_bound(&b, &dag, k, &caps()).unwrap();
        let n = dag.node_count();
        pass &= report.pass()
            && report.pebbling_cost == p
            && report.hard_inputs == expected_hard
            && report.groups.len() >= k.pow(p as u32)
            && report.max_group <= k.pow((n - p) as u32);
        assert!(pass, "{label}: {:?}", report.failures);
    }
    verdict(
        4,
        "critical-state groups: |D| = 8 with >= 4 groups of <= 2 on T^2; pyramid(3) within k^(n-p) / k^p bounds",
        pass,
    );
}

#[test]
fn criterion_5_protocol_round_trip() {
    let k = 2usize;
    let mut pass = true;
    for dag in [tree(2), tree(3), pyramid(3)] {
        let n = dag.node_count();
        let (p, b) = constructed(&dag, k);
        for input in enumerate_hard_inputs(&dag, k, &caps()).unwrap() {
            let (pkg, stats) = encode_advice(&b, &input).unwrap();
            let decoded = decode_advice(&b, &dag, &pkg).unwrap();
            pass &= decoded == input.node_values();
            pass &= pkg.words.len() <= n - p;
            // learned = words consumed plus thrifty deductions; the decoder
            // must gain at least p values beyond the advice words.
            pass &= pkg.words.len() + stats.deduced >= pkg.words.len() + p;
            assert!(pass, "n = {n}");
        }
    }
    verdict(
        5,
        "decode(encode(I)) == I on all hard inputs of T^2, T^3, pyramid(3); |words| <= n-p; learned >= |words|+p",
        pass,
    );
}

#[test]
fn criterion_6_transformations() {
    let dag = tree(2);
    let k = 2;
    let (_, b) = constructed(&dag, k);
    let naming = build_naming(&dag, k).unwrap();
    let forward = thrifty_to_incremental(&b, &naming).unwrap();
    let image = reduction_image(&naming, &caps()).unwrap();
    let incremental = check_semantic_incremental(&forward, &image).unwrap();
    let forward_decides = check_decides_gen(&forward, &image).unwrap();
    let (back, _) = incremental_to_thrifty(&forward, &naming).unwrap();
    let back_thrifty = check_thrifty(&back, &dag, k, &Family::Hard, &caps()).unwrap();
    let mut same_decisions = true;
    for input in enumerate_hard_inputs(&dag, k, &caps()).unwrap() {
        same_decisions &= b.run(&input).unwrap().terminal == back.run(&input).unwrap().terminal;
    }
    verdict(
        6,
        "forward program is semantic-incremental and correct on the image; back-transform is thrifty, agrees on all hard inputs, and size(B') <= size(B)",
        incremental.ok() && forward_decides.ok() && back_thrifty.ok() && same_decisions && back.size() <= forward.size(),
    );
}

#[test]
fn criterion_7_annotation_validity() {
    let k = 2usize;
    let mut checked = 0usize;
    // Same (program, input) pairs as criteria 3-5: the constructed programs
    // on T^2 (all inputs) and on T^3 / pyramid(3) (hard inputs).
    for (dag, family) in [(tree(2), Family::All), (tree(3), Family::Hard), (pyramid(3), Family::Hard)] {
        let (_, b) = constructed(&dag, k);
        let inputs: Vec<DagEvalInstance> = match family {
            Family::All => enumerate_all_inputs(&dag, k, &caps()).unwrap().collect(),
            Family::Hard => enumerate_hard_inputs(&dag, k, &caps()).unwrap().collect(),
            Family::Explicit(_) => unreachable!(),
        };
        for input in inputs {
            let ann = annotate_pebbling(&b, &input).unwrap();
            assert!(is_valid_complete_sequence(&dag, &ann.configs).ok());
            check_retention_fact(&dag, &input, &ann).unwrap();
            checked += 1;
        }
    }
    verdict(
        7,
        "every annotated trace yields a valid complete pebbling and satisfies the retention fact (zero violations)",
        checked == 64 + 128 + 64,
    );
}

#[test]
fn criterion_8_negative_controls() {
    let dag = tree(2);
    let bad_thrifty = non_thrifty_example();
    let thrifty_report = check_thrifty(&bad_thrifty, &dag, 2, &Family::Hard, &caps()).unwrap();
    let thrifty_flagged = matches!(
        &thrifty_report,
        CheckReport::Violation { location, .. } if location == "state 0"
    );
    let (bad_incremental, family) = non_incremental_example();
    let incremental_report = check_semantic_incremental(&bad_incremental, &family).unwrap();
    let incremental_flagged = matches!(
        &incremental_report,
        CheckReport::Violation { location, detail, .. }
            if location.contains("state 0") && detail.contains("coordinate 5")
    );
    verdict(
        8,
        "non-thrifty and non-incremental controls are flagged at the offending state with the offending coordinate",
        thrifty_flagged && incremental_flagged,
    );
}

#[test]
fn criterion_9_asymptotics_out_of_scope() {
    // The asymptotic form of the lower bound needs an unbounded graph
    // family and is not reproducible at desk scale; its stand-in is the
    // counting bound of criterion 4 across the generated families.
    // Spot-check one consequence here: the constructed program is never
    // smaller than k^p.
    let mut pass = true;
    for (dag, k) in [(tree(2), 2usize), (tree(3), 2), (pyramid(3), 2)] {
        let (p, b) = constructed(&dag, k);
        pass &= b.size() >= k.pow(p as u32);
    }
    verdict(
        9,
        "asymptotic lower bound intentionally not reproduced; size >= k^p spot-checked via criterion-4 machinery",
        pass,
    );
}

#[test]
fn artifacts_round_trip_and_determinism() {
    // Supporting invariant from the CLI contract: JSON artifacts re-read
    // identically and serialization is byte-stable.
    let dag = tree(2);
    let dag_json = dag.to_json();
    assert_eq!(RootedDag::from_json(&dag_json).unwrap(), *dag);
    assert_eq!(serde_json::to_string(&dag_json).unwrap(), serde_json::to_string(&dag.to_json()).unwrap());
    let (_, b) = constructed(&dag, 2);
    let b_json = b.to_json();
    let reloaded: BranchingProgram<BdeVar> = BranchingProgram::from_json(&b_json).unwrap();
    assert_eq!(reloaded, b);
    for input in enumerate_hard_inputs(&dag, 2, &caps()).unwrap() {
        let json = input.to_json();
        let reloaded = DagEvalInstance::from_json(&json).unwrap();
        assert_eq!(reloaded.node_values(), input.node_values());
        assert_eq!(reloaded.decide(), input.decide());
    }
    let naming = build_naming(&dag, 2).unwrap();
    for gen in reduction_image(&naming, &caps()).unwrap() {
        let reloaded = incrbp::genprob::GenInstance::from_json(&gen.to_json()).unwrap();
        assert_eq!(reloaded, gen);
        assert_eq!(reloaded.decide(), gen.decide());
    }
}

#[test]
fn decisions_match_oracle_everywhere() {
    // Cross-family agreement of the three decision procedures on YES/NO.
    let dag = tree(2);
    let naming = build_naming(&dag, 2).unwrap();
    let (_, b) = constructed(&dag, 2);
    let mut yes = 0usize;
    for input in enumerate_all_inputs(&dag, 2, &caps()).unwrap() {
        let direct = input.decide();
        let programmatic = b.run(&input).unwrap().terminal;
        let reduced = reduce_instance(&naming, &input).unwrap().decide();
        assert_eq!(direct, programmatic);
        assert_eq!(direct, reduced);
        if direct == Decision::Yes {
            yes += 1;
        }
    }
    // Exactly the inputs whose root evaluates to 1; for k = 2 on T^2 that
    // is half of the 4 function tables per leaf-pair, 32 in total.
    assert_eq!(yes, 32);
}
