//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trace_styles::dtmc::{Dtmc, RewardStructure, RewardValue, StateSet};
use trace_styles::gpam::{fit, refine, FitOptions, Gpam, SMOOTHING};
use trace_styles::ingest::{write_traces, UserTrace, Vocabulary};
use trace_styles::pctl::{parse_property, At, Checker, PropertyResult, Unavailable};
use trace_styles::suite::{
    jenks_breaks, long_run_vector, predominant_states, switching_analysis, PatternResultTable,
    PropertyKind, SuiteParams,
};
use trace_styles::synth::{
    brute_force_bounded, brute_force_cumulative, direct_reach_reward, direct_unbounded_until,
    generate, opposed_cycles_gpam, random_dtmc, random_gpam, random_irreducible_dtmc,
    GeneratorSpec, SessionCount,
};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn vocab(n: usize) -> Vocabulary {
    let mut labels = vec!["startS".to_string(), "stopS".to_string()];
    labels.extend((0..n - 2).map(|i| format!("s{i}")));
    Vocabulary::new(labels).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_trace-styles")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .output()
        .map_err(|e| format!("spawning cli: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "cli {:?} exited with {:?}: {}",
            args,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

// ---------------------------------------------------------------- 1

fn jenks_fixture() -> Outcome {
    let counts = [0.37, 0.47, 0.54, 5.43, 6.17, 7.35, 7.55, 10.13, 10.82];
    let lengths = [3.51, 3.81, 3.86, 5.36, 5.56, 7.09, 8.28, 87.76, 102.07, 130.96];
    let want_counts: Vec<Vec<f64>> = vec![
        vec![0.37, 0.47, 0.54],
        vec![5.43, 6.17, 7.35, 7.55],
        vec![10.13, 10.82],
    ];
    let want_lengths: Vec<Vec<f64>> = vec![
        vec![3.51, 3.81, 3.86],
        vec![5.36, 5.56, 7.09, 8.28],
        vec![87.76, 102.07, 130.96],
    ];
    let start = Instant::now();
    // shuffled input: the classes must not depend on input order
    let mut shuffled = counts.to_vec();
    shuffled.reverse();
    let c = jenks_breaks(&shuffled, 3).map_err(|e| e.to_string())?;
    let l = jenks_breaks(&lengths, 3).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(c.classes == want_counts, || format!("count classes {:?}", c.classes))?;
    check(l.classes == want_lengths, || format!("length classes {:?}", l.classes))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("both classifications exact in {elapsed:?}"))
}

// ---------------------------------------------------------------- 2

fn predominance_fixture() -> Outcome {
    // (state, [VisitProbInit], [VisitCountInit], [StepCountInit]) for AP1, AP2
    let rows: [(&str, [f64; 2], [f64; 2], [f64; 2]); 5] = [
        ("OverallUsage", [0.94, 0.99], [3.54, 14.58], [16.55, 4.53]),
        ("Last7Days", [0.80, 0.89], [1.63, 2.24], [30.27, 22.75]),
        ("SelectPeriod", [0.80, 0.42], [1.92, 0.72], [30.45, 90.36]),
        ("Stats", [0.81, 0.99], [1.74, 5.77], [29.82, 12.01]),
        ("AppsInPeriod", [0.45, 0.13], [0.95, 0.28], [83.40, 332.40]),
    ];
    let mut table = PatternResultTable::new(2);
    let col = |v: [f64; 2]| v.iter().map(|x| PropertyResult::Value(*x)).collect();
    for (state, prob, count, steps) in rows {
        table.insert(PropertyKind::VisitProbInit, state, col(prob));
        table.insert(PropertyKind::VisitCountInit, state, col(count));
        table.insert(PropertyKind::StepCountInit, state, col(steps));
    }
    let report = predominant_states(&table, &SuiteParams::default()).map_err(|e| e.to_string())?;
    let has = |a: usize, s: &str| report.patterns[a].iter().any(|x| x == s);
    for s in ["SelectPeriod", "Stats", "Last7Days"] {
        check(has(0, s), || format!("AP1 lacks {s}: {:?}", report.patterns[0]))?;
    }
    check(!has(0, "OverallUsage"), || format!("AP1 has OverallUsage: {:?}", report.patterns[0]))?;
    for s in ["OverallUsage", "Stats", "Last7Days"] {
        check(has(1, s), || format!("AP2 lacks {s}: {:?}", report.patterns[1]))?;
    }
    for s in ["SelectPeriod", "AppsInPeriod"] {
        check(!has(1, s), || format!("AP2 has {s}: {:?}", report.patterns[1]))?;
    }
    Ok(format!("AP1 {:?}, AP2 {:?}", report.patterns[0], report.patterns[1]))
}

// ---------------------------------------------------------------- 3

fn checker_oracles() -> Outcome {
    let start = Instant::now();
    let (mut worst_bounded, mut worst_direct) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3_000 + seed);
        let m = rng.gen_range(1..=6);
        let d = random_dtmc(&mut rng, m, 3);
        let phi1 = StateSet::from_fn(m, |_| rng.gen_bool(0.7));
        let phi2 = StateSet::from_fn(m, |_| rng.gen_bool(0.3));
        let r: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        for n in 0..=8 {
            let exact = brute_force_bounded(&d, &phi1, &phi2, n).map_err(|e| e.to_string())?;
            worst_bounded = worst_bounded.max(max_diff(&d.bounded_until(&phi1, &phi2, n), &exact));
            let exact = brute_force_cumulative(&d, &r, n).map_err(|e| e.to_string())?;
            let got = d.cumulative_reward(&RewardStructure::new(r.clone()).unwrap(), n);
            worst_bounded = worst_bounded.max(max_diff(&got, &exact));
        }
        let got = d
            .unbounded_until(&phi1, &phi2)
            .map_err(|e| format!("chain {seed}: until {e}"))?;
        worst_direct = worst_direct.max(max_diff(&got, &direct_unbounded_until(&d, &phi1, &phi2)));
        let got = d
            .reach_reward(&RewardStructure::new(r.clone()).unwrap(), &phi2)
            .map_err(|e| format!("chain {seed}: reward {e}"))?;
        for (g, e) in got.iter().zip(direct_reach_reward(&d, &r, &phi2)) {
            match (g, e) {
                (RewardValue::Finite(a), Some(b)) => worst_direct = worst_direct.max((a - b).abs()),
                (RewardValue::Infinite, None) => {}
                _ => return Err(format!("chain {seed}: {g:?} vs {e:?}")),
            }
        }
    }
    let elapsed = start.elapsed();
    check(worst_bounded < 1e-9, || format!("bounded error {worst_bounded:e}"))?;
    check(worst_direct < 1e-8, || format!("unbounded error {worst_direct:e}"))?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max error bounded {worst_bounded:.1e}, unbounded {worst_direct:.1e}, {elapsed:.1?}"
    ))
}

// ---------------------------------------------------------------- 4

/// Fraction of `steps` transitions spent in each state, starting from 0.
fn simulate_occupancy(d: &Dtmc, steps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = d.num_states();
    let mut visits = vec![0u64; m];
    let mut s = 0;
    for _ in 0..steps {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = m - 1;
        for t in 0..m {
            acc += d.prob(s, t);
            if u < acc {
                next = t;
                break;
            }
        }
        s = next;
        visits[s] += 1;
    }
    visits.iter().map(|&v| v as f64 / steps as f64).collect()
}

fn steady_state() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut worst_inv = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4_000 + seed);
        let m = rng.gen_range(1..=6);
        let d = random_dtmc(&mut rng, m, 3);
        let pi = d.steady_state().map_err(|e| format!("chain {seed}: {e}"))?;
        worst_sum = worst_sum.max((pi.iter().sum::<f64>() - 1.0).abs());
        for t in 0..m {
            let next: f64 = (0..m).map(|s| pi[s] * d.prob(s, t)).sum();
            worst_inv = worst_inv.max((next - pi[t]).abs());
        }
    }
    check(worst_sum <= 1e-8, || format!("sum off by {worst_sum:e}"))?;
    check(worst_inv <= 1e-8, || format!("invariance off by {worst_inv:e}"))?;

    let two = Dtmc::with_initial_state(vec![vec![0.5, 0.5], vec![1.0, 0.0]], 0).unwrap();
    let pi = two.steady_state().map_err(|e| e.to_string())?;
    let closed = max_diff(&pi, &[2.0 / 3.0, 1.0 / 3.0]);
    check(closed <= 1e-12, || format!("two-state chain {pi:?}"))?;

    let mut worst_sim = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4_500 + seed);
        let m = rng.gen_range(2..=6);
        let d = random_irreducible_dtmc(&mut rng, m, 3);
        let pi = d.steady_state().map_err(|e| format!("chain {seed}: {e}"))?;
        let occ = simulate_occupancy(&d, 1_000_000, &mut rng);
        worst_sim = worst_sim.max(max_diff(&pi, &occ));
    }
    check(worst_sim < 0.005, || format!("simulation off by {worst_sim}"))?;
    Ok(format!(
        "sum {worst_sum:.1e}, invariance {worst_inv:.1e}, closed form {closed:.1e}, simulation {worst_sim:.4}"
    ))
}

// ---------------------------------------------------------------- 5

fn corpus(seed: u64, n: usize, k: usize, traces: usize) -> (Vocabulary, Vec<UserTrace>) {
    let v = vocab(n);
    let truth = random_gpam(&mut ChaCha8Rng::seed_from_u64(seed), v.clone(), k);
    let mut spec = GeneratorSpec::new(truth, traces, seed);
    spec.sessions = SessionCount::Uniform { min: 5, max: 10 };
    spec.max_events_per_session = 60;
    (v, generate(&spec).unwrap().0)
}

fn bigram_mle(v: &Vocabulary, traces: &[UserTrace]) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut counts = vec![vec![0.0; n]; n];
    for t in traces {
        let ids: Vec<usize> = t.events().map(|e| v.index_of(&e.label).unwrap()).collect();
        for w in ids.windows(2) {
            counts[w[0]][w[1]] += 1.0;
        }
    }
    counts
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().map(|c| c + SMOOTHING).sum();
            row.into_iter().map(|c| (c + SMOOTHING) / total).collect()
        })
        .collect()
}

fn row_gap(model: &Gpam, oracle: &[Vec<f64>]) -> f64 {
    oracle
        .iter()
        .enumerate()
        .map(|(y, row)| max_diff(model.b_row(0, y), row))
        .fold(0.0, f64::max)
}

fn em_properties() -> Outcome {
    let options = |seed, restarts, max_iters, parallel| FitOptions {
        restarts,
        max_iters,
        seed,
        parallel,
    };
    let mut worst_drop = 0.0f64;
    let mut restarts_seen = 0;
    for seed in 0..6u64 {
        let (v, traces) = corpus(seed, 4 + seed as usize % 4, 1 + seed as usize % 3, 40);
        for k in 2..=3 {
            let (_, report) = fit(&traces, &v, k, &options(seed, 5, 100, true)).map_err(|e| e.to_string())?;
            for r in &report.per_restart {
                restarts_seen += 1;
                for w in r.log_likelihoods.windows(2) {
                    worst_drop = worst_drop.max(w[0] - w[1]);
                }
            }
        }
    }
    check(worst_drop <= 1e-9, || format!("log-likelihood fell by {worst_drop:e}"))?;

    let mut worst_mle = 0.0f64;
    for seed in 0..5u64 {
        let (v, traces) = corpus(100 + seed, 6, 2, 40);
        let oracle = bigram_mle(&v, &traces);
        let (model, _) = fit(&traces, &v, 1, &options(seed, 3, 50, true)).map_err(|e| e.to_string())?;
        worst_mle = worst_mle.max(row_gap(&model, &oracle));
        let start = random_gpam(&mut ChaCha8Rng::seed_from_u64(seed), v.clone(), 1);
        let (once, _) = refine(&start, &traces, 1).map_err(|e| e.to_string())?;
        worst_mle = worst_mle.max(row_gap(&once, &oracle));
    }
    check(worst_mle <= 1e-12, || format!("K=1 off the bigram MLE by {worst_mle:e}"))?;

    let (v, traces) = corpus(7, 6, 2, 40);
    let a = fit(&traces, &v, 2, &options(21, 6, 60, true)).map_err(|e| e.to_string())?;
    let b = fit(&traces, &v, 2, &options(21, 6, 60, true)).map_err(|e| e.to_string())?;
    let c = fit(&traces, &v, 2, &options(21, 6, 60, false)).map_err(|e| e.to_string())?;
    check(a == b && a == c, || "identical seeds gave different fits".into())?;
    let bits = |m: &Gpam| -> Vec<u64> {
        let mut out: Vec<u64> = m.pi().iter().map(|x| x.to_bits()).collect();
        for i in 0..m.k() {
            out.extend(m.a_row(i).iter().map(|x| x.to_bits()));
            for y in 0..m.n() {
                out.extend(m.b_row(i, y).iter().map(|x| x.to_bits()));
            }
        }
        out
    };
    check(bits(&a.0) == bits(&b.0) && bits(&a.0) == bits(&c.0), || "parameter bits differ".into())?;
    Ok(format!(
        "{restarts_seen} restarts, worst drop {worst_drop:.1e}; K=1 gap {worst_mle:.1e}; repeat fits bit-identical"
    ))
}

// ---------------------------------------------------------------- 6

/// Total variation between the two components' rows for `y`.
fn row_tv(m: &Gpam, y: usize) -> f64 {
    0.5 * m.b_row(0, y).iter().zip(m.b_row(1, y)).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Largest L1 error over emission and switching rows under the better of
/// the two labellings.
fn recovery_error(truth: &Gpam, fitted: &Gpam) -> f64 {
    [[0usize, 1], [1, 0]]
        .iter()
        .map(|perm| {
            let mut worst = 0.0f64;
            for x in 0..2 {
                let f = perm[x];
                for y in 0..truth.n() {
                    worst = worst.max(l1(truth.b_row(x, y), fitted.b_row(f, y)));
                }
                let a: Vec<f64> = (0..2).map(|t| fitted.a(f, perm[t])).collect();
                worst = worst.max(l1(truth.a_row(x), &a));
            }
            worst
        })
        .fold(f64::INFINITY, f64::min)
}

fn recovery() -> Outcome {
    let start = Instant::now();
    let truth = opposed_cycles_gpam(3).map_err(|e| e.to_string())?;
    let separated = (0..truth.n()).filter(|&y| row_tv(&truth, y) >= 0.5).count();
    check(2 * separated >= truth.n(), || format!("only {separated} separated rows"))?;
    let mut ok = 0;
    let mut errors = Vec::new();
    for seed in 0..20u64 {
        let (traces, _) = generate(&GeneratorSpec::new(truth.clone(), 500, seed)).map_err(|e| e.to_string())?;
        let options = FitOptions {
            restarts: 10,
            max_iters: 200,
            seed,
            parallel: true,
        };
        let (fitted, _) = fit(&traces, truth.vocab(), 2, &options).map_err(|e| e.to_string())?;
        let err = recovery_error(&truth, &fitted);
        errors.push(err);
        if err <= 0.05 {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    check(ok >= 19, || format!("{ok}/20 seeds recovered, errors {errors:?}"))?;
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{ok}/20 seeds within L1 0.05 (worst {worst:.4}), {separated}/{} rows separated, {elapsed:.1?}",
        truth.n()
    ))
}

// ---------------------------------------------------------------- 7

fn complementarity() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_long = 0.0f64;
    let mut cells = 0;
    let mut models: Vec<Gpam> = (0..20u64)
        .map(|seed| {
            let n = 3 + seed as usize % 6;
            random_gpam(&mut ChaCha8Rng::seed_from_u64(7_000 + seed), vocab(n), 2)
        })
        .collect();
    models.push(opposed_cycles_gpam(4).map_err(|e| e.to_string())?);
    for model in &models {
        for i in 0..2 {
            let switch = switching_analysis(model, i, Some(1 - i), 0.5).map_err(|e| e.to_string())?;
            let stop = switching_analysis(model, i, None, 0.5).map_err(|e| e.to_string())?;
            for (a, b) in switch.cells.iter().zip(&stop.cells) {
                if a.state == "stopS" {
                    continue;
                }
                let (Some(pa), Some(pb)) = (a.likelihood.value(), b.likelihood.value()) else {
                    return Err(format!("no value at ({i}, {})", a.state));
                };
                worst = worst.max((pa + pb - 1.0).abs());
                cells += 1;
            }
        }
        let long: Vec<f64> = long_run_vector(model)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|r| r.value().unwrap_or(f64::NAN))
            .collect();
        let gap = (long.iter().sum::<f64>() - 1.0).abs();
        worst_long = if gap.is_nan() { f64::INFINITY } else { worst_long.max(gap) };
    }
    check(worst <= 1e-9, || format!("switch + stop off by {worst:e}"))?;
    check(worst_long <= 1e-8, || format!("long-run sum off by {worst_long:e}"))?;
    Ok(format!("{cells} product states, worst {worst:.1e}; long-run sum {worst_long:.1e}"))
}

// ---------------------------------------------------------------- 8

fn sentinels() -> Outcome {
    let run = |d: &Dtmc, text: &str| -> Result<PropertyResult, String> {
        Checker::new(d)
            .check(&parse_property(text).map_err(|e| e.to_string())?, At::Initial)
            .map_err(|e| e.to_string())
    };
    let mut split = Dtmc::with_initial_state(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0).unwrap();
    split.add_atom("y=B", StateSet::from_indices(2, [1])).unwrap();
    let infinite = run(&split, "R{rSteps}=?[ F B ]")?;
    check(infinite == PropertyResult::Infinite, || format!("unreachable target gave {infinite:?}"))?;
    let empty = run(&split, "filter(state, P=?[ F B ], false)")?;
    check(
        empty == PropertyResult::NotAvailable(Unavailable::FilterEmpty),
        || format!("empty filter gave {empty:?}"),
    )?;

    let delta = 1e-6;
    let mut slow = Dtmc::with_initial_state(
        vec![
            vec![0.0, 1.0 - delta, delta / 2.0, delta / 2.0],
            vec![1.0 - delta, 0.0, delta / 2.0, delta / 2.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
        0,
    )
    .unwrap();
    slow.add_atom("y=B", StateSet::from_indices(4, [2])).unwrap();
    let stuck = run(&slow, "P=?[ F B ]")?;
    check(
        stuck == PropertyResult::NotAvailable(Unavailable::NonConvergent),
        || format!("slow chain gave {stuck:?}"),
    )?;

    let mut table = PatternResultTable::new(3);
    table.insert(PropertyKind::StepCountInit, "B", vec![infinite, empty, stuck]);
    let csv = table.to_csv();
    let line = csv.lines().nth(1).ok_or("empty csv")?;
    let cells: Vec<&str> = line.split(',').collect();
    let tail = &cells[cells.len() - 3..];
    check(tail.iter().all(|c| *c == "---"), || format!("csv row `{line}`"))?;
    for r in [infinite, empty, stuck] {
        check(r.render() == "---", || format!("{r:?} renders as {}", r.render()))?;
    }
    Ok(format!("Infinite, filter-empty and non-convergent all render `---` (`{line}`)"))
}

// ---------------------------------------------------------------- 9

fn fit_budget() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let truth = random_gpam(&mut ChaCha8Rng::seed_from_u64(9), vocab(16), 2);
    let mut spec = GeneratorSpec::new(truth, 300, 9);
    spec.sessions = SessionCount::Uniform { min: 25, max: 35 };
    spec.max_events_per_session = 200;
    let (traces, _) = generate(&spec).map_err(|e| e.to_string())?;
    let events: usize = traces.iter().map(|t| t.event_count()).sum();
    let input = dir.path().join("traces.txt");
    std::fs::write(&input, write_traces(&traces)).map_err(|e| e.to_string())?;
    let out = dir.path().join("fit");
    let start = Instant::now();
    run_cli(&[
        "--threads", "1",
        "fit",
        "--input", input.to_str().unwrap(),
        "--k", "2",
        "--restarts", "20",
        "--seed", "9",
        "--out", out.to_str().unwrap(),
    ])?;
    let elapsed = start.elapsed();
    check(out.join("all/K2/model.json").exists(), || "model.json missing".into())?;
    check(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!("300 traces, {events} events, 20 restarts in {elapsed:.1?} on one thread"))
}

// ---------------------------------------------------------------- 10

fn read_tree(root: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

fn suite_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let truth = opposed_cycles_gpam(4).map_err(|e| e.to_string())?;
    let mut spec = GeneratorSpec::new(truth, 60, 10);
    spec.sessions = SessionCount::Uniform { min: 5, max: 40 };
    let (traces, _) = generate(&spec).map_err(|e| e.to_string())?;
    let input = dir.path().join("traces.txt");
    std::fs::write(&input, write_traces(&traces)).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        run_cli(&[
            "suite",
            "--input", input.to_str().unwrap(),
            "--intervals", "0:1,0:2",
            "--k", "1,2",
            "--restarts", "4",
            "--max-iters", "50",
            "--seed", "10",
            "--out", out.to_str().unwrap(),
        ])?;
        trees.push(read_tree(&out).map_err(|e| e.to_string())?);
    }
    check(trees[0].len() >= 9, || format!("only {} files", trees[0].len()))?;
    check(trees[0] == trees[1], || {
        let differing: Vec<&String> = trees[0]
            .iter()
            .filter(|(k, v)| trees[1].get(*k) != Some(v))
            .map(|(k, _)| k)
            .collect();
        format!("trees differ: {differing:?}")
    })?;
    Ok(format!("{} files byte-identical across runs", trees[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("jenks fixture", jenks_fixture),
        ("predominance fixture", predominance_fixture),
        ("model-checker oracles", checker_oracles),
        ("steady state", steady_state),
        ("EM properties", em_properties),
        ("parameter recovery", recovery),
        ("latent complementarity", complementarity),
        ("sentinels", sentinels),
        ("fit performance budget", fit_budget),
        ("pipeline determinism", suite_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
