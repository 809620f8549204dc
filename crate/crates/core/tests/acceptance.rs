//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rainbow_trees::coloring::{permuted_round_robin, round_robin, EdgeColoring};
use rainbow_trees::constructor::{build_forest, omega, ConstructionTrace, SelectionPolicy};
use rainbow_trees::forest::ForestRecord;
use rainbow_trees::oracle::{enumerate_rainbow_spanning_trees, max_disjoint_rainbow_trees};
use rainbow_trees::verifier::{verify_all, verify_trace_bounds};

const M_MAX: usize = 40;
const COLORING_SEEDS: [u64; 3] = [11, 23, 47];
const MUTATIONS: usize = 1000;

struct Run {
    m: usize,
    seed: u64,
    policy: SelectionPolicy,
    coloring: EdgeColoring,
    forest: Result<(ForestRecord, ConstructionTrace), String>,
}

impl Run {
    fn label(&self) -> String {
        format!("m={} seed={} policy={}", self.m, self.seed, self.policy)
    }
}

fn runs_for(policy: SelectionPolicy) -> Vec<Run> {
    let mut runs = Vec::new();
    for m in 1..=M_MAX {
        for seed in COLORING_SEEDS {
            let coloring = permuted_round_robin(m, seed);
            let forest =
                build_forest(&coloring, policy, true).map(|(f, t)| (f.to_record(), t)).map_err(|e| e.error.to_string());
            runs.push(Run { m, seed, policy, coloring, forest });
        }
    }
    runs
}

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn bound_reproduction(runs: &[Run], elapsed: Option<Duration>) -> Outcome {
    for run in runs {
        let (record, trace) = run.forest.as_ref().map_err(|e| format!("{}: build failed: {e}", run.label()))?;
        if record.trees.len() != omega(run.m) {
            return Err(format!("{}: {} trees, expected {}", run.label(), record.trees.len(), omega(run.m)));
        }
        if !verify_all(&run.coloring, record, Some(trace)).verdict {
            return Err(format!("{}: verifier rejected the forest", run.label()));
        }
    }
    match elapsed {
        Some(t) if t > Duration::from_secs(10) => Err(format!("took {t:.2?}, limit 10s")),
        Some(t) => Ok(format!("{} runs, exact tree count, verified, {t:.2?}", runs.len())),
        None => Ok(format!("{} runs, exact tree count, verified", runs.len())),
    }
}

fn threshold_exactness() -> Outcome {
    let firsts: Vec<usize> = (1..=5).map(|t| (1..).find(|&m| omega(m) == t).unwrap()).collect();
    if firsts != [1, 5, 12, 23, 36] {
        return Err(format!("first m per value: {firsts:?}"));
    }
    for m in 1..=100_000usize {
        let by_square = (0..).take_while(|t: &usize| 9 * t * t <= 6 * m + 9).last().unwrap();
        if omega(m) != by_square {
            return Err(format!("m={m}: omega {} vs {by_square}", omega(m)));
        }
    }
    Ok("thresholds 1, 5, 12, 23, 36; formula agrees for m <= 100000".into())
}

fn structural_equalities(runs: &[Run]) -> Outcome {
    let mut roots_checked = 0;
    for run in runs {
        let (record, _) = run.forest.as_ref().map_err(|e| format!("{}: {e}", run.label()))?;
        let (m, psi) = (run.m as i64, record.trees.len() as i64);
        for (idx, tree) in record.trees.iter().enumerate() {
            let i = idx as i64 + 1;
            let mut degree = vec![0i64; 2 * run.m];
            for e in &tree.edges {
                degree[e[0]] += 1;
                degree[e[1]] += 1;
            }
            let r = tree.root;
            let root_leaves = tree
                .edges
                .iter()
                .filter(|e| e[0] == r || e[1] == r)
                .filter(|e| degree[if e[0] == r { e[1] } else { e[0] }] == 1)
                .count() as i64;
            let (want_degree, want_leaves) = if i == 1 {
                ((2 * m - 1) - 2 * (psi - 1), (2 * m - 1) - 4 * (psi - 1))
            } else {
                ((2 * m - 1) - i - 2 * (psi - i), (2 * m - 1) - 2 * i - 4 * (psi - i))
            };
            if degree[r] != want_degree || root_leaves < want_leaves {
                return Err(format!(
                    "{} tree {i}: degree {} (want {want_degree}), root leaves {root_leaves} (want >= {want_leaves})",
                    run.label(),
                    degree[r]
                ));
            }
            roots_checked += 1;
        }
    }
    Ok(format!("{roots_checked} roots at exact degree with enough root leaves"))
}

fn trace_bounds(runs: &[Run]) -> Outcome {
    let (mut rounds, mut steps) = (0, 0);
    for run in runs {
        let (_, trace) = run.forest.as_ref().map_err(|e| format!("{}: {e}", run.label()))?;
        let m = run.m as i64;
        for round in &trace.rounds {
            let k = round.k as i64;
            let bound = 2 * m - 3 * k * k + 6 * k - 1;
            if (round.leaf_count as i64) < bound {
                return Err(format!("{} k={k}: |L| = {} < {bound}", run.label(), round.leaf_count));
            }
            for step in &round.steps {
                if step.admissible.is_empty() {
                    return Err(format!("{} k={k} i={}: no admissible candidate", run.label(), step.i));
                }
                steps += 1;
            }
            rounds += 1;
        }
        let check = verify_trace_bounds(trace, run.m);
        if !check.pass {
            return Err(format!("{}: trace check failed: {:?}", run.label(), check.failures.first()));
        }
    }
    Ok(format!("{rounds} rounds and {steps} candidate steps within bounds"))
}

fn oracle_agreement() -> Outcome {
    let k4 = round_robin(2);
    let count = enumerate_rainbow_spanning_trees(&k4, 10).map_err(|e| e.to_string())?.len();
    let pack = max_disjoint_rainbow_trees(&k4, 8).map_err(|e| e.to_string())?;
    if count != 4 || pack != 1 {
        return Err(format!("m=2: {count} trees, packing {pack}"));
    }
    let started = Instant::now();
    let mut packs = Vec::new();
    for coloring in std::iter::once(round_robin(3)).chain(COLORING_SEEDS.iter().map(|&s| permuted_round_robin(3, s))) {
        let best = max_disjoint_rainbow_trees(&coloring, 8).map_err(|e| e.to_string())?;
        let built = build_forest(&coloring, SelectionPolicy::MinIndex, false).map_err(|e| e.error.to_string())?.0;
        if best < 2 || best < built.trees.len() {
            return Err(format!("m=3: packing {best}, built {}", built.trees.len()));
        }
        packs.push(best);
    }
    let t = started.elapsed();
    if t > Duration::from_secs(60) {
        return Err(format!("m=3 packing took {t:.2?}, limit 60s"));
    }
    Ok(format!("m=2: 4 trees, packing 1; m=3 packings {packs:?} in {t:.2?}"))
}

fn disjointness_accounting(runs: &[Run]) -> Outcome {
    for run in runs {
        let (record, _) = run.forest.as_ref().map_err(|e| format!("{}: {e}", run.label()))?;
        let union: BTreeSet<(usize, usize)> =
            record.trees.iter().flat_map(|t| t.edges.iter().map(|e| (e[0].min(e[1]), e[0].max(e[1])))).collect();
        let want = omega(run.m) * (2 * run.m - 1);
        if union.len() != want {
            return Err(format!("{}: union has {} edges, expected {want}", run.label(), union.len()));
        }
    }
    Ok(format!("{} runs with |union| = omega(2m-1)", runs.len()))
}

fn mutation_detection() -> Outcome {
    let m = 5;
    let coloring = permuted_round_robin(m, 5);
    let (forest, _) = build_forest(&coloring, SelectionPolicy::MinIndex, false).map_err(|e| e.error.to_string())?;
    let base = forest.to_record();
    if !verify_all(&coloring, &base, None).verdict {
        return Err("unmutated forest rejected".into());
    }
    let n = coloring.n();
    let colors = coloring.num_colors();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let started = Instant::now();
    let mut kinds = [0usize; 3];
    for trial in 0..MUTATIONS {
        let mut mutated = base.clone();
        let t = rng.gen_range(0..mutated.trees.len());
        let tree = &mut mutated.trees[t];
        let kind = trial % 3;
        kinds[kind] += 1;
        match kind {
            0 => {
                let e = rng.gen_range(0..tree.edges.len());
                let side = rng.gen_range(0..2);
                let old = tree.edges[e][side];
                let mut x = rng.gen_range(0..n - 1);
                if x >= old {
                    x += 1;
                }
                tree.edges[e][side] = x;
            }
            1 => {
                let e = rng.gen_range(0..tree.edges.len());
                let old = tree.edges[e][2];
                let mut c = rng.gen_range(0..colors - 1);
                if c >= old {
                    c += 1;
                }
                tree.edges[e][2] = c;
            }
            _ => {
                let mut r = rng.gen_range(0..n - 1);
                if r >= tree.root {
                    r += 1;
                }
                tree.root = r;
            }
        }
        if verify_all(&coloring, &mutated, None).verdict {
            return Err(format!("mutation {trial} (kind {kind}) went undetected"));
        }
    }
    let t = started.elapsed();
    if t > Duration::from_secs(30) {
        return Err(format!("took {t:.2?}, limit 30s"));
    }
    Ok(format!(
        "{MUTATIONS}/{MUTATIONS} detected (edge {}, color {}, root {}) in {t:.2?}",
        kinds[0], kinds[1], kinds[2]
    ))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_rainbow-trees");
    let produce = |dir: &Path, m: &str, policy: &str| -> Result<[Vec<u8>; 3], String> {
        let col = dir.join("coloring.json");
        let forest = dir.join("forest.json");
        let trace = dir.join("trace.jsonl");
        let p = |x: &Path| x.to_str().unwrap().to_owned();
        let gen = Command::new(bin).args(["gen", "--m", m, "--permute-seed", "17", "-o", &p(&col)]).status();
        let build = Command::new(bin)
            .args(["build", "-i", &p(&col), "-o", &p(&forest), "--trace", &p(&trace)])
            .args(["--policy", policy, "--seed", "99"])
            .output();
        if !gen.map_err(|e| e.to_string())?.success() || !build.map_err(|e| e.to_string())?.status.success() {
            return Err(format!("m={m} policy={policy}: command failed"));
        }
        let read = |x: &Path| std::fs::read(x).map_err(|e| e.to_string());
        Ok([read(&col)?, read(&forest)?, read(&trace)?])
    };
    let mut cases = 0;
    for m in ["5", "23", "40"] {
        for policy in ["min", "max", "random"] {
            let a = tempfile::tempdir().map_err(|e| e.to_string())?;
            let b = tempfile::tempdir().map_err(|e| e.to_string())?;
            let first = produce(a.path(), m, policy)?;
            let second = produce(b.path(), m, policy)?;
            for (name, (x, y)) in ["coloring", "forest", "trace"].iter().zip(first.iter().zip(second.iter())) {
                if x != y {
                    return Err(format!("m={m} policy={policy}: {name} files differ"));
                }
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} configurations byte-identical across two runs"))
}

fn policy_robustness() -> Outcome {
    let policies = [
        SelectionPolicy::MinIndex,
        SelectionPolicy::MaxIndex,
        SelectionPolicy::Random(1),
        SelectionPolicy::Random(2),
        SelectionPolicy::Random(3),
    ];
    for policy in policies {
        let runs = runs_for(policy);
        bound_reproduction(&runs, None)
            .and_then(|_| structural_equalities(&runs))
            .and_then(|_| trace_bounds(&runs))
            .and_then(|_| disjointness_accounting(&runs))
            .map_err(|e| format!("policy {policy}: {e}"))?;
    }
    Ok("criteria 1, 3, 4, 6 hold under min, max, random:1, random:2, random:3".into())
}

fn main() {
    let started = Instant::now();
    let runs = runs_for(SelectionPolicy::MinIndex);
    let build_time = started.elapsed();

    let criteria: Vec<Criterion<'_>> = vec![
        ("bound reproduction", Box::new(|| bound_reproduction(&runs, Some(build_time + verify_time(&runs))))),
        ("threshold exactness", Box::new(threshold_exactness)),
        ("structural equalities", Box::new(|| structural_equalities(&runs))),
        ("trace bounds", Box::new(|| trace_bounds(&runs))),
        ("oracle agreement", Box::new(oracle_agreement)),
        ("disjointness accounting", Box::new(|| disjointness_accounting(&runs))),
        ("mutation detection", Box::new(mutation_detection)),
        ("determinism", Box::new(determinism)),
        ("policy robustness", Box::new(policy_robustness)),
    ];

    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail}", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

/// Time to verify every run, so the bound-reproduction budget covers build
/// and verification together.
fn verify_time(runs: &[Run]) -> Duration {
    let started = Instant::now();
    for run in runs {
        if let Ok((record, trace)) = &run.forest {
            std::hint::black_box(verify_all(&run.coloring, record, Some(trace)));
        }
    }
    started.elapsed()
}
