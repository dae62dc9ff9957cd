//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::time::Instant;

use arc_rl::agents::{AgentCheckpoint, AgentConfig, AgentKind, HashQ, WmPlanner};
use arc_rl::env::{Action, ArcEnv, Outcome};
use arc_rl::grid::{anti_transpose, emit_grid, flip_h, flip_v, parse_grid, rotate270, rotate90, transpose, Grid};
use arc_rl::harness::{
    evaluate, run_single_task, run_transfer, train, write_run, ExperimentConfig, Pretrain, TaskSource,
};
use arc_rl::task::{generate_task, substream, BuiltinTask, Diagonal, Pair, Rule, SizeSpec, TaskSpec};
use rand::Rng;

type Script = Vec<(Action, f64, Outcome)>;
type Transform = fn(&Grid) -> Grid;
type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_grid(rng: &mut impl Rng, rows: usize, cols: usize) -> Grid {
    Grid::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(0..10u8)).collect()).unwrap()
}

// 1. D4 identities on 1,000 random square grids.
fn d4_algebra() -> Verdict {
    let mut rng = substream(2024, 0);
    let start = Instant::now();
    let mut failures = Vec::new();
    for k in 0..1000 {
        let n = rng.random_range(1..=30);
        let g = random_grid(&mut rng, n, n);
        let r = |g: &Grid| rotate90(g);
        let checks = [
            ("rotate90^4", r(&r(&r(&r(&g)))) == g),
            ("rotate270 = rotate90^3", rotate270(&g) == r(&r(&r(&g)))),
            ("flip_h^2", flip_h(&flip_h(&g)) == g),
            ("flip_v^2", flip_v(&flip_v(&g)) == g),
            ("flip_h . rotate90 = transpose", flip_h(&r(&g)) == transpose(&g)),
            ("flip_v . rotate270 = transpose", flip_v(&rotate270(&g)) == transpose(&g)),
            ("flip_v . rotate90 = anti_transpose", flip_v(&r(&g)) == anti_transpose(&g)),
            ("orbit <= 8", orbit_size(&g) <= 8),
            ("colors preserved", [rotate90, rotate270, flip_h, flip_v]
                .iter()
                .all(|t| t(&g).color_histogram() == g.color_histogram())),
            ("parse . emit", parse_grid(&emit_grid(&g)).as_ref() == Ok(&g)),
        ];
        for (name, ok) in checks {
            if !ok {
                failures.push(format!("grid {k}: {name}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed.as_secs_f64() < 1.0;
    verdict(pass, format!("1000 grids, {} failures, {:.3}s {:?}", failures.len(), elapsed.as_secs_f64(), failures.first()))
}

/// Closure of `g` under the four transforms, by flood fill.
fn orbit_size(g: &Grid) -> usize {
    let mut seen = vec![g.clone()];
    let mut frontier = vec![g.clone()];
    while let Some(x) = frontier.pop() {
        for t in [rotate90, rotate270, flip_h, flip_v] {
            let y = t(&x);
            if !seen.contains(&y) {
                seen.push(y.clone());
                frontier.push(y);
            }
        }
    }
    seen.len()
}

// 2. Scripted trajectories with exact rewards and outcomes.
fn env_conformance() -> Verdict {
    use Action::*;
    use Outcome::*;
    let p = |i: &str, o: &str| Pair { input: parse_grid(i).unwrap(), output: parse_grid(o).unwrap() };
    let transpose_pair = p("[[1,2],[3,4]]", "[[1,3],[2,4]]");
    let hflip_pair = p("[[1,2,3],[4,5,6],[7,8,9]]", "[[3,2,1],[6,5,4],[9,8,7]]");
    let ccw_pair = p("[[1,2],[3,4]]", "[[2,4],[1,3]]");
    // Rows repeat, so FlipV keeps the grid (and the match) unchanged.
    let striped_pair = p("[[1,2],[1,2]]", "[[2,1],[2,1]]");

    let mut timeout = vec![(Rotate90, 0.0, Running); 49];
    timeout.push((Rotate90, 0.0, FailTimeout));
    let mut farm = Vec::new();
    for _ in 0..24 {
        farm.push((FlipH, 1.0, Running));
        farm.push((FlipH, 0.0, Running));
    }
    farm.push((FlipH, 1.0, Running));
    farm.push((Submit, 1000.0, Success));

    let table: Vec<(&str, &Pair, Script)> = vec![
        ("correct submit", &hflip_pair, vec![(FlipH, 1.0, Running), (Submit, 1000.0, Success)]),
        ("two-step rule", &transpose_pair, vec![(Rotate90, 0.0, Running), (FlipH, 1.0, Running), (Submit, 1000.0, Success)]),
        ("single ccw turn", &ccw_pair, vec![(Rotate270, 1.0, Running), (Submit, 1000.0, Success)]),
        ("staying matched pays nothing", &striped_pair, vec![(FlipH, 1.0, Running), (FlipV, 0.0, Running), (FlipV, 0.0, Running), (Submit, 1000.0, Success)]),
        ("leaving and returning is a new entry", &hflip_pair, vec![(FlipH, 1.0, Running), (FlipV, 0.0, Running), (FlipV, 1.0, Running), (Submit, 1000.0, Success)]),
        ("wrong submit continues", &hflip_pair, vec![(Submit, 0.0, Running), (FlipH, 1.0, Running), (Submit, 1000.0, Success)]),
        ("three wrong submits", &hflip_pair, vec![(Submit, 0.0, Running), (Submit, 0.0, Running), (Submit, 0.0, FailSubmissions)]),
        ("wrong submits around a detour", &transpose_pair, vec![(Submit, 0.0, Running), (Rotate90, 0.0, Running), (Submit, 0.0, Running), (Rotate270, 0.0, Running), (Submit, 0.0, FailSubmissions)]),
        ("leaving the target then submitting fails", &hflip_pair, vec![(FlipH, 1.0, Running), (FlipH, 0.0, Running), (Submit, 0.0, Running)]),
        ("step-50 timeout", &hflip_pair, timeout),
        ("entry farming capped by the step limit", &hflip_pair, farm),
        ("success on step 50 beats timeout", &hflip_pair, {
            let mut v = vec![(FlipV, 0.0, Running); 48];
            v.push((FlipH, 1.0, Running));
            v.push((Submit, 1000.0, Success));
            v
        }),
    ];

    let mut failures = Vec::new();
    for (name, pair, script) in &table {
        let mut env = ArcEnv::new();
        env.reset_pair(pair);
        for (k, &(action, reward, outcome)) in script.iter().enumerate() {
            let got = env.step(action).unwrap();
            if got.reward != reward || got.outcome != outcome {
                failures.push(format!("{name} step {}: got ({}, {}) want ({reward}, {outcome})", k + 1, got.reward, got.outcome));
                break;
            }
        }
    }
    verdict(failures.is_empty(), format!("{} trajectories, failures: {failures:?}", table.len()))
}

// 3. Induced rules equal brute-force enumeration.
fn brute_force_rule(demos: &[Pair], max_len: usize) -> Option<Vec<Action>> {
    let ops: [(Action, Transform); 4] =
        [(Action::Rotate90, rotate90), (Action::Rotate270, rotate270), (Action::FlipH, flip_h), (Action::FlipV, flip_v)];
    let mut searched = 0;
    for len in 1..=max_len {
        for code in 0..4usize.pow(len as u32) {
            searched += 1;
            // Most significant digit first gives lexicographic order by action ordinal.
            let seq: Vec<usize> = (0..len).rev().map(|d| (code / 4usize.pow(d as u32)) % 4).collect();
            let fits = demos.iter().all(|p| seq.iter().fold(p.input.clone(), |g, &i| ops[i].1(&g)) == p.output);
            if fits {
                return Some(seq.iter().map(|&i| ops[i].0).collect());
            }
        }
    }
    assert_eq!(searched, 340);
    None
}

fn rule_induction() -> Verdict {
    let rules = [Rule::DiagonalFlip(Diagonal::Main), Rule::DiagonalFlip(Diagonal::Anti), Rule::RotateCcw, Rule::HorizontalFlip];
    let mut failures = Vec::new();
    let mut main_diag = Vec::new();
    for k in 0..50u64 {
        let rule = rules[k as usize % 4];
        let size = if (k / 4) % 2 == 0 { SizeSpec::Fixed(2 + (k as usize % 5)) } else { SizeSpec::Varying { min: 2, max: 10 } };
        let task = generate_task(format!("t{k}"), rule, size, 30, 5, 1000 + k).unwrap();
        let mut agent = WmPlanner::new(&AgentConfig { seed: k, ..AgentConfig::default() });
        train(&mut agent, &task, 200, 200, 0, k, None).unwrap();
        let induced = agent.model().induce_rule(&task.demos, 4);
        let oracle = brute_force_rule(&task.demos, 4);
        if induced.as_ref().ok() != oracle.as_ref() {
            failures.push(format!("task {k} {rule:?}: induced {induced:?} oracle {oracle:?}"));
        }
        if rule == Rule::DiagonalFlip(Diagonal::Main) {
            main_diag.push(induced.ok());
        }
    }
    let main_ok = main_diag.iter().all(|r| r.as_deref() == Some(&[Action::Rotate90, Action::FlipH][..]));
    verdict(failures.is_empty() && main_ok, format!("50 tasks, {} mismatches {:?}; main diagonal -> [Rotate90, FlipH]: {main_ok}", failures.len(), failures.first()))
}

// 4. Single-task direction: planner solves everything, the table does not generalize.
fn single_task() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for task in BuiltinTask::ALL {
        let mut config = ExperimentConfig::single_task(TaskSource::Builtin(task.name().into()), AgentKind::WmPlanner, 1);
        config.train_budget = 2_000;
        config.eval_every = 500;
        let run = run_single_task(&config).unwrap();
        let acc = run.curve.final_accuracy().unwrap();
        pass &= acc == 1.0;
        parts.push(format!("wm-planner {task}={acc:.2}"));
    }

    // Frozen 3x3 task evaluated on its own training inputs.
    let mut frozen = BuiltinTask::FlipD3x3.generate(50, 0, 5).unwrap();
    frozen.evals = frozen.demos.clone();
    let mut q = HashQ::new(&AgentConfig { seed: 5, ..AgentConfig::default() });
    train(&mut q, &frozen, 100_000, 100_000, 50, 5, None).unwrap();
    let own = evaluate(&q, &frozen, 50).unwrap();
    pass &= own >= 0.99;
    parts.push(format!("hash-q frozen 3x3 own inputs={own:.2}"));

    let varying = BuiltinTask::FlipDNxN.generate(1000, 100, 6).unwrap();
    let mut q = HashQ::new(&AgentConfig { seed: 6, ..AgentConfig::default() });
    train(&mut q, &varying, 100_000, 100_000, 100, 6, None).unwrap();
    let held_out = evaluate(&q, &varying, 100).unwrap();
    pass &= held_out <= 0.05;
    parts.push(format!("hash-q flip-d-NxN held-out={held_out:.2}"));
    verdict(pass, parts.join(", "))
}

// 5. Transfer through a checkpoint file in both directions.
fn transfer() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (from, to) in [(BuiltinTask::FlipD3x3, BuiltinTask::FlipDNxN), (BuiltinTask::FlipDNxN, BuiltinTask::FlipD3x3)] {
        let mut pre = ExperimentConfig::single_task(TaskSource::Builtin(from.name().into()), AgentKind::WmPlanner, 3);
        pre.train_budget = 2_000;
        let pre_run = run_single_task(&pre).unwrap();
        let out = dir.path().join(from.name());
        write_run(&out, &pre_run, true).unwrap();
        let ckpt = out.join("checkpoint.json");
        AgentCheckpoint::read(&ckpt).unwrap();

        let mut config = ExperimentConfig::transfer(
            TaskSource::Builtin(to.name().into()),
            Pretrain::Checkpoint(ckpt),
            AgentKind::WmPlanner,
            4,
        );
        config.train_budget = 1_000;
        let run = run_transfer(&config).unwrap();
        let zero_shot = run.zero_shot.unwrap();
        let noted = run.summary().notes.iter().any(|n| n.contains("size-independent"));
        pass &= zero_shot == 1.0 && run.curve.samples[0].env_steps == 0 && noted;
        parts.push(format!("{from} -> {to} zero-shot={zero_shot:.2} noted={noted}"));
    }
    verdict(pass, parts.join(", "))
}

// 6. Policy gradient on the one-action rotation task.
fn seq_policy() -> Verdict {
    let mut reached = Vec::new();
    for seed in 1..=5u64 {
        let mut config = ExperimentConfig::single_task(TaskSource::Builtin("rotate-ccw-3x3".into()), AgentKind::SeqPolicy, seed);
        config.train_budget = 100_000;
        let run = run_single_task(&config).unwrap();
        reached.push(run.curve.first_perfect());
    }
    let hits = reached.iter().filter(|r| r.is_some()).count();
    verdict(hits >= 4, format!("{hits}/5 seeds reached 1.00, first at {reached:?}"))
}

// 7. Byte-identical outputs for repeated runs.
fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let files = |name: &str, config: &ExperimentConfig, transfer: bool| {
        let run = if transfer { run_transfer(config) } else { run_single_task(config) }.unwrap();
        let out = dir.path().join(name);
        write_run(&out, &run, true).unwrap();
        ["curves.csv", "summary.json", "checkpoint.json"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let mut same = true;
    let mut checked = 0;
    for kind in AgentKind::ALL {
        let mut train_cfg = ExperimentConfig::single_task(TaskSource::Builtin("flip-h-NxN".into()), kind, 9);
        train_cfg.train_budget = 5_000;
        same &= files(&format!("{kind}-a"), &train_cfg, false) == files(&format!("{kind}-b"), &train_cfg, false);

        let mut transfer_cfg = ExperimentConfig::transfer(
            TaskSource::Builtin("flip-d-NxN".into()),
            Pretrain::Train { task: TaskSource::Builtin("flip-d-3x3".into()), budget: 3_000 },
            kind,
            9,
        );
        transfer_cfg.train_budget = 3_000;
        same &= files(&format!("{kind}-c"), &transfer_cfg, true) == files(&format!("{kind}-d"), &transfer_cfg, true);
        checked += 2;
    }
    verdict(same, format!("{checked} repeated train/transfer runs byte-identical: {same}"))
}

// 8. Single-threaded throughput on 10x10 grids.
fn throughput() -> Verdict {
    let task: TaskSpec = generate_task("bench", Rule::HorizontalFlip, SizeSpec::Fixed(10), 64, 0, 11).unwrap();
    let script = [Action::Rotate90, Action::FlipH, Action::Rotate270, Action::FlipV, Action::Rotate90, Action::Submit];
    let mut env = ArcEnv::new();
    let mut pair = 0;
    env.reset_pair(&task.demos[0]);
    let total = 1_000_000u64;
    let start = Instant::now();
    for k in 0..total {
        let r = env.step(script[k as usize % script.len()]).unwrap();
        if r.outcome.is_done() {
            pair = (pair + 1) % task.demos.len();
            env.reset_pair(&task.demos[pair]);
        }
    }
    let rate = total as f64 / start.elapsed().as_secs_f64();
    verdict(rate >= 100_000.0, format!("{rate:.0} steps/s"))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("1 D4 algebra", d4_algebra),
        ("2 environment conformance", env_conformance),
        ("3 rule-induction oracle equivalence", rule_induction),
        ("4 single-task direction", single_task),
        ("5 transfer zero-shot", transfer),
        ("6 seq-policy on rotate-ccw-3x3", seq_policy),
        ("7 determinism", determinism),
        ("8 throughput", throughput),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("acceptance {tag} [{name}] {} ({:.1}s)", v.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 8 criteria passed");
}
