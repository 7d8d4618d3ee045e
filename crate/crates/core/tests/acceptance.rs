//! Acceptance suite. Runs every criterion, prints one PASS/FAIL/SKIP line each
//! and exits non-zero if any criterion fails.
//!
//! Criteria 7 and 10 read the UCI household power file from
//! `$MRKMEANS_UCI_PATH` (default `data/household_power_consumption.txt` at
//! the workspace root) when it exists.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use mrkmeans::bench::{bench_run, throughput};
use mrkmeans::engine::{init_centroids, MapperHook};
use mrkmeans::ingest::{generate_synthetic, parse_uci, parse_uci_reader, AttributeProjection, SyntheticSpec};
use mrkmeans::memplane::{block_address, build_layout, plan_transfer, MemoryPlane, SIMPLE_MODE_CAP};
use mrkmeans::{ClusteringConfig, Engine, Error, Event, SampleSet};
use rand::Rng;

const MIB: u64 = 1 << 20;
const MONOTONE_TOL: f32 = 1e-4;

enum Outcome {
    Pass(String),
    Skip(String),
}

type Criterion = fn(&Distortions) -> Result<Outcome, String>;

/// Distortion histories collected from every run, for criterion 3.
#[derive(Default)]
struct Distortions(Mutex<Vec<(String, Vec<f32>)>>);

impl Distortions {
    fn record(&self, what: impl Into<String>, history: Vec<f32>) {
        self.0.lock().unwrap().push((what.into(), history));
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn uci_path() -> PathBuf {
    std::env::var_os("MRKMEANS_UCI_PATH")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/household_power_consumption.txt"))
}

fn c1_oracle_equivalence(log: &Distortions) -> Result<Outcome, String> {
    let started = Instant::now();
    let mut rng = common::rng(2024);
    let mappers = [1usize, 2, 4, 8];
    let mut worst = 0.0f64;
    for instance in 0..200 {
        let n = rng.random_range(16..=1000);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(1..=16usize).min(n);
        let components = rng.random_range(1..=16);
        let spread = rng.random_range(0.3..3.0);
        let samples = common::blobs(&mut rng, n, d, components, spread);
        let m = mappers[instance % mappers.len()];
        let seed = rng.random::<u64>();
        let config = ClusteringConfig::new(k).with_mappers(m).with_seed(seed).with_epsilon(0.0).with_max_iterations(100);

        let run = Engine::new(config).unwrap().with_label_history(true).run(&samples).map_err(|e| e.to_string())?;
        let init = init_centroids(&samples, k, seed).unwrap();
        let oracle = common::lloyd_f64(samples.as_slice(), d, init.as_slice(), 0.0, 100);

        ensure!(
            run.iterations_run == oracle.labels.len(),
            "instance {instance} (n={n} d={d} k={k} m={m}): {} iterations vs oracle {}",
            run.iterations_run,
            oracle.labels.len()
        );
        for (t, (got, want)) in run.label_history.iter().zip(&oracle.labels).enumerate() {
            ensure!(got.labels() == &want[..], "instance {instance} (n={n} d={d} k={k} m={m}): labels differ at iteration {t}");
        }
        ensure!(run.converged == oracle.converged, "instance {instance}: convergence flag differs");
        let err = common::max_rel_err(run.centroids.as_slice(), &oracle.centroids);
        worst = worst.max(err);
        ensure!(err <= 1e-4, "instance {instance}: centroid relative error {err:.3e}");
        log.record(format!("c1 instance {instance}"), run.distortions());
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(Outcome::Pass(format!("200 instances, worst centroid rel err {worst:.2e}, {elapsed:.2?}")))
}

fn c2_label_m_invariance(log: &Distortions) -> Result<Outcome, String> {
    let mut rng = common::rng(99);
    let mut boundary_events = Vec::new();
    let mut runs = 0;
    for instance in 0..50 {
        let n = rng.random_range(1..=2000);
        let d = rng.random_range(1..=8);
        let k = rng.random_range(1..=16usize).min(n);
        let components = rng.random_range(1..=8);
        let samples = common::blobs(&mut rng, n, d, components, 1.5);
        let centroids = init_centroids(&samples, k, instance).unwrap();
        let mut reference = None;
        for m in [1usize, 2, 3, 5, 8] {
            let config = ClusteringConfig::new(k).with_mappers(m);
            let (labels, _, _) = Engine::new(config)
                .unwrap()
                .run_iteration(&samples, &centroids)
                .map_err(|e| e.to_string())?;
            match &reference {
                None => reference = Some(labels),
                Some(r) => ensure!(*r == labels, "instance {instance}: m={m} labels differ from m=1"),
            }
        }
        // Full runs: partial sums are rounded differently for each m, so a
        // sample sitting on a decision boundary may flip in a later
        // iteration. Such events are counted, not failed.
        let mut first: Option<Vec<_>> = None;
        for m in [1usize, 2, 4, 8] {
            let config = ClusteringConfig::new(k).with_mappers(m).with_seed(instance).with_epsilon(0.0);
            let run = Engine::new(config).unwrap().with_label_history(true).run(&samples).map_err(|e| e.to_string())?;
            log.record(format!("c2 instance {instance} m={m}"), run.distortions());
            runs += 1;
            match &first {
                None => first = Some(run.label_history),
                Some(f) => {
                    if let Some(t) = f.iter().zip(&run.label_history).position(|(a, b)| a != b) {
                        boundary_events.push(format!("instance {instance} m={m} iteration {t}"));
                    } else if f.len() != run.label_history.len() {
                        boundary_events.push(format!("instance {instance} m={m} iteration count"));
                    }
                }
            }
        }
    }
    Ok(Outcome::Pass(format!(
        "50 instances bit-identical for m ∈ {{1,2,3,5,8}}; full runs m ∈ {{1,2,4,8}}: {} of {runs} rounding-boundary divergences {:?}",
        boundary_events.len(),
        boundary_events
    )))
}

fn c3_monotonicity(log: &Distortions) -> Result<Outcome, String> {
    // a few larger runs on top of everything recorded by the other criteria
    for (i, (n, k)) in [(20_000usize, 4usize), (50_000, 8), (100_000, 16)].into_iter().enumerate() {
        let samples = generate_synthetic(&SyntheticSpec { n, d: 4, k_true: 6, spread: 2.0, seed: i as u64 }).unwrap();
        let config = ClusteringConfig::new(k).with_mappers(4).with_seed(i as u64).with_epsilon(0.0);
        let run = Engine::new(config).unwrap().run(&samples).map_err(|e| e.to_string())?;
        log.record(format!("c3 synthetic n={n} k={k}"), run.distortions());
    }
    let runs = log.0.lock().unwrap();
    for (what, history) in runs.iter() {
        ensure!(common::non_increasing(history, MONOTONE_TOL), "{what}: distortion rose: {history:?}");
    }
    Ok(Outcome::Pass(format!("{} runs, E[t+1] ≤ E[t]·(1+1e-4)", runs.len())))
}

fn c4_fsm_ordering(log: &Distortions) -> Result<Outcome, String> {
    let mut rng = common::rng(4);
    let samples = common::blobs(&mut rng, 4000, 3, 6, 2.0);
    let mut checked = 0;
    for (m, epsilon) in [(2usize, 0.0f32), (4, 1e-2), (8, 50.0), (5, f32::INFINITY)] {
        // mapper `id` sleeps (m − id) ms so completions arrive in reverse order
        let hook: MapperHook = Arc::new(move |id, _| {
            std::thread::sleep(Duration::from_millis((m - id) as u64));
            Ok(())
        });
        let config = ClusteringConfig::new(6).with_mappers(m).with_seed(m as u64).with_epsilon(epsilon);
        let mut engine = Engine::new(config).unwrap().with_mapper_hook(hook);
        let run = engine.run(&samples).map_err(|e| e.to_string())?;
        log.record(format!("c4 m={m}"), run.distortions());
        let events = engine.events();
        let distortions = run.distortions();

        for t in 0..run.iterations_run {
            let pos = |pred: &dyn Fn(&Event) -> bool| events.iter().position(pred);
            let start = pos(&|e| *e == Event::MapStart { iteration: t }).ok_or("missing map_start")?;
            let done: Vec<(usize, usize)> = events
                .iter()
                .enumerate()
                .filter_map(|(i, e)| match e {
                    Event::MapDone { iteration, mapper } if *iteration == t => Some((i, *mapper)),
                    _ => None,
                })
                .collect();
            ensure!(done.len() == m, "iteration {t}: {} map_done for m={m}", done.len());
            let mut ids: Vec<usize> = done.iter().map(|x| x.1).collect();
            ensure!(ids.iter().rev().copied().eq(0..m), "iteration {t}: completion order {ids:?} not reversed");
            ids.sort_unstable();
            ensure!(ids == (0..m).collect::<Vec<_>>(), "iteration {t}: duplicate map_done");
            let reduce_start = pos(&|e| *e == Event::ReduceStart { iteration: t }).ok_or("missing reduce_start")?;
            let reduce_done = pos(&|e| *e == Event::ReduceDone { iteration: t }).ok_or("missing reduce_done")?;
            let last_map_done = done.iter().map(|x| x.0).max().unwrap();
            ensure!(start < done[0].0, "iteration {t}: map_done before map_start");
            ensure!(last_map_done < reduce_start, "iteration {t}: reduce_start before the M-th map_done");
            ensure!(reduce_start < reduce_done, "iteration {t}: reduce_done before reduce_start");

            let fired = events.contains(&Event::IterationDone { iteration: t });
            let within = t > 0 && (distortions[t - 1] - distortions[t]).abs() <= epsilon;
            ensure!(fired == within, "iteration {t}: iteration_done={fired} but |ΔE| ≤ ε is {within}");
            checked += 1;
        }
        ensure!(run.converged == events.iter().any(|e| matches!(e, Event::IterationDone { .. })), "converged flag vs iteration_done");
    }
    Ok(Outcome::Pass(format!("{checked} iterations with reverse-delayed mappers")))
}

fn c5_memplane(_: &Distortions) -> Result<Outcome, String> {
    let mut rng = common::rng(5);
    let max = 64 * MIB;
    let mut source = vec![0u8; (max + 4096) as usize];
    rng.fill(&mut source[..]);
    let mut plane = MemoryPlane::raw(max as usize, SIMPLE_MODE_CAP).map_err(|e| e.to_string())?;
    for case in 0..1000 {
        let size = rng.random_range(0..=max);
        let plan = plan_transfer(size, SIMPLE_MODE_CAP).map_err(|e| e.to_string())?;
        ensure!(plan.chunks.iter().all(|c| c.1 <= SIMPLE_MODE_CAP), "case {case}: oversized chunk");
        ensure!(plan.len() as u64 == size.div_ceil(SIMPLE_MODE_CAP), "case {case}: chunk count");
        ensure!(plan.total_bytes() == size, "case {case}: coverage");

        let shift = rng.random_range(0..4096usize);
        let src = &source[shift..shift + size as usize];
        plane.write_stream(0, src).map_err(|e| e.to_string())?;
        let mut offset = 0;
        for chunk in plane.stream_read(0, size).map_err(|e| e.to_string())? {
            ensure!(chunk == &src[offset..offset + chunk.len()], "case {case}: round trip mismatch at {offset}");
            offset += chunk.len();
        }
        ensure!(offset as u64 == size, "case {case}: short read");
    }
    for _ in 0..1000 {
        let base = rng.random::<u64>() >> rng.random_range(0..64);
        let id = rng.random::<u64>() >> rng.random_range(0..64);
        let len = rng.random::<u64>() >> rng.random_range(0..64);
        let expected = base as u128 + id as u128 * len as u128;
        match block_address(base, id, len) {
            Ok(addr) => ensure!(addr as u128 == expected, "{base} + {id}×{len}"),
            Err(_) => ensure!(expected > u64::MAX as u128, "spurious overflow for {base} + {id}×{len}"),
        }
    }
    for _ in 0..100 {
        let (n, d, k, m) = (
            rng.random_range(1..100_000),
            rng.random_range(1..64),
            rng.random_range(1..128),
            rng.random_range(1..64),
        );
        let layout = build_layout(n, d, k, m, 4).map_err(|e| e.to_string())?;
        layout.check_disjoint().map_err(|e| format!("n={n} d={d} k={k} m={m}: {e}"))?;
    }
    Ok(Outcome::Pass("1000 transfers ≤ 64 MiB, 1000 addresses, 100 layouts".into()))
}

fn c6_throughput(_: &Distortions) -> Result<Outcome, String> {
    let v = throughput(1000, 4, 32, 0.001).map_err(|e| e.to_string())?;
    ensure!(v == 1.28e8, "throughput(1000,4,32,1ms) = {v}");
    let mut rng = common::rng(6);
    for _ in 0..1000 {
        let (n, d, w) = (rng.random_range(1..1u64 << 24), rng.random_range(1..64u64), rng.random_range(1..64u32));
        let t = rng.random_range(1e-6..10.0);
        let c = rng.random_range(2..10u64);
        let base = throughput(n, d, w, t).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
        ensure!(close(throughput(n * c, d, w, t).unwrap(), base * c as f64), "not linear in n");
        ensure!(close(throughput(n, d * c, w, t).unwrap(), base * c as f64), "not linear in d");
        ensure!(close(throughput(n, d, w * c as u32, t).unwrap(), base * c as f64), "not linear in w");
        ensure!(close(throughput(n, d, w, t * c as f64).unwrap(), base / c as f64), "not inverse in runtime");
    }
    ensure!(matches!(throughput(1, 1, 1, 0.0), Err(Error::Measurement(_))), "zero runtime accepted");
    Ok(Outcome::Pass("1.28e8 bit/s exact; 1000 linearity checks".into()))
}

/// Runs the convergence protocol: ε = 10⁻³ × first-iteration distortion,
/// ten seeds, K = 4. Returns the iteration counts.
fn convergence_protocol(samples: &SampleSet, m: usize, log: &Distortions, tag: &str) -> Result<Vec<usize>, String> {
    let mut counts = Vec::new();
    for seed in 0..10u64 {
        let init = init_centroids(samples, 4, seed).map_err(|e| e.to_string())?;
        let (_, first, _) = Engine::new(ClusteringConfig::new(4).with_mappers(m))
            .unwrap()
            .run_iteration(samples, &init)
            .map_err(|e| e.to_string())?;
        let epsilon = 1e-3 * first.total_distortion;
        let config = ClusteringConfig::new(4).with_mappers(m).with_seed(seed).with_epsilon(epsilon).with_max_iterations(100);
        let run = Engine::new(config).unwrap().run(samples).map_err(|e| e.to_string())?;
        ensure!(run.converged, "{tag} seed {seed}: no convergence within 100 iterations");
        log.record(format!("{tag} seed {seed}"), run.distortions());
        counts.push(run.iterations_run);
    }
    counts.sort_unstable();
    Ok(counts)
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

fn c7_convergence(log: &Distortions) -> Result<Outcome, String> {
    let path = uci_path();
    if !path.exists() {
        // protocol still exercised on a synthetic stand-in
        let stand_in = generate_synthetic(&SyntheticSpec { n: 200_000, d: 4, k_true: 4, spread: 3.0, seed: 7 }).unwrap();
        let counts = convergence_protocol(&stand_in, 4, log, "c7 stand-in")?;
        return Ok(Outcome::Skip(format!(
            "UCI file not found at {} (set MRKMEANS_UCI_PATH); synthetic 4-D stand-in converged, median {} iterations",
            path.display(),
            median(&counts)
        )));
    }
    let mut lines = Vec::new();
    for (projection, reference) in [(AttributeProjection::power4d(), 11), (AttributeProjection::power2d(), 34)] {
        let data = parse_uci(&path, &projection).map_err(|e| e.to_string())?;
        let counts = convergence_protocol(&data.samples, 12, log, &format!("c7 {}", projection.name))?;
        lines.push(format!(
            "{} N={} median {} iterations (reference {reference}), range {}..={}",
            projection.name,
            data.samples.n(),
            median(&counts),
            counts[0],
            counts[counts.len() - 1]
        ));
    }
    Ok(Outcome::Pass(lines.join("; ")))
}

fn c8_map_dominance(log: &Distortions) -> Result<Outcome, String> {
    let mut parts = Vec::new();
    for n in [10_000usize, 100_000, 512_000] {
        let samples = generate_synthetic(&SyntheticSpec { n, d: 4, k_true: 4, spread: 1.0, seed: 8 }).unwrap();
        let config = ClusteringConfig::new(4).with_mappers(4).with_seed(8).with_epsilon(0.0).with_max_iterations(30);
        let (report, run) = bench_run(&samples, "synthetic", &config).map_err(|e| e.to_string())?;
        log.record(format!("c8 n={n}"), run.distortions());
        ensure!(report.map_ratio >= 0.85, "n={n}: map ratio {:.3} < 0.85", report.map_ratio);
        for s in &report.history {
            ensure!(s.map_time + s.reduce_time <= s.total_time, "n={n}: phase times exceed iteration time");
        }
        parts.push(format!("n={n}: {:.3}", report.map_ratio));
    }
    Ok(Outcome::Pass(format!("map ratio {}", parts.join(", "))))
}

fn c9_m_scaling(log: &Distortions) -> Result<Outcome, String> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let samples = generate_synthetic(&SyntheticSpec { n: 512_000, d: 4, k_true: 4, spread: 1.0, seed: 9 }).unwrap();
    let mut tp = Vec::new();
    for m in [1usize, 4] {
        let config = ClusteringConfig::new(4).with_mappers(m).with_seed(9).with_epsilon(0.0).with_max_iterations(10);
        let (report, run) = bench_run(&samples, "synthetic", &config).map_err(|e| e.to_string())?;
        log.record(format!("c9 m={m}"), run.distortions());
        tp.push(report.throughput_gbps);
    }
    let ratio = tp[1] / tp[0];
    let summary = format!("M=1 {:.3} Gbps, M=4 {:.3} Gbps, ratio {ratio:.2}", tp[0], tp[1]);
    if cores < 4 {
        return Ok(Outcome::Skip(format!("host exposes {cores} core(s), criterion needs ≥ 4; measured {summary}")));
    }
    ensure!(ratio >= 2.0, "{summary} < 2.0");
    Ok(Outcome::Pass(summary))
}

fn c10_ingestion(_: &Distortions) -> Result<Outcome, String> {
    const HEADER: &str = "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3";
    let fixture = format!(
        "{HEADER}\n16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000\n\
         21/12/2006;11:23:00;?;?;?;?;?;?;\n\
         16/12/2006;17:25:00;5.360;0.436;233.630;23.000;0.000;1.000;16.000\n"
    );
    let data = parse_uci_reader(fixture.as_bytes(), &AttributeProjection::power4d()).map_err(|e| e.to_string())?;
    ensure!(data.samples.n() == 2 && data.dropped == 1, "drop path: n={} dropped={}", data.samples.n(), data.dropped);
    let bad = format!("{HEADER}\n16/12/2006;17:24:00;4.2x6;0.418;234.840;18.400;0.000;1.000;17.000\n");
    match parse_uci_reader(bad.as_bytes(), &AttributeProjection::power2d()) {
        Err(Error::Ingest { line: Some(2), .. }) => {}
        other => return Err(format!("malformed field: {other:?}")),
    }
    let missing = AttributeProjection::new("x", &["Global_active_power", "Frequency"]).unwrap();
    ensure!(
        matches!(parse_uci_reader(fixture.as_bytes(), &missing), Err(Error::Ingest { .. })),
        "missing column accepted"
    );

    let path = uci_path();
    if !path.exists() {
        return Ok(Outcome::Skip(format!(
            "fixture paths pass; UCI file not found at {} for first-row checks",
            path.display()
        )));
    }
    let two = parse_uci(&path, &AttributeProjection::power2d()).map_err(|e| e.to_string())?;
    let four = parse_uci(&path, &AttributeProjection::power4d()).map_err(|e| e.to_string())?;
    ensure!(two.samples.row(0) == [4.216, 0.418], "2-D first row {:?}", two.samples.row(0));
    ensure!(four.samples.row(0) == [4.216, 0.0, 1.0, 17.0], "4-D first row {:?}", four.samples.row(0));
    for data in [&two, &four] {
        ensure!(data.samples.n() + data.dropped == data.rows, "row accounting");
    }
    Ok(Outcome::Pass(format!(
        "fixtures pass; UCI rows {}, kept {} (2-D) / {} (4-D)",
        two.rows,
        two.samples.n(),
        four.samples.n()
    )))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("1 oracle equivalence", c1_oracle_equivalence),
        ("2 label M-invariance", c2_label_m_invariance),
        ("4 FSM ordering", c4_fsm_ordering),
        ("5 memplane properties", c5_memplane),
        ("6 throughput arithmetic", c6_throughput),
        ("7 convergence reproduction", c7_convergence),
        ("8 map-phase dominance", c8_map_dominance),
        ("9 M-scaling", c9_m_scaling),
        ("10 ingestion", c10_ingestion),
        // last, so it sees every other criterion's runs
        ("3 distortion monotonicity", c3_monotonicity),
    ];
    let log = Distortions::default();
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| check(&log)))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        let elapsed = started.elapsed();
        match outcome {
            Ok(Outcome::Pass(detail)) => println!("[PASS] criterion {name} ({elapsed:.1?}): {detail}"),
            Ok(Outcome::Skip(detail)) => println!("[SKIP] criterion {name} ({elapsed:.1?}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {name} ({elapsed:.1?}): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
