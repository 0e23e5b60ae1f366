//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (bypassing the test harness capture) before asserting.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resin_bench::drones::DroneScenario;
use resin_bench::harness::{run_benchmark, run_mode, BenchError};
use resin_bench::synthetic::{mixture_rates, poisson_trace, settle, SyntheticWorkload};
use resin_bench::tracking::{sweep, TrackingConfig};
use resin_core::grounder::{Literal, WmcPolynomial};
use resin_core::lang::{parse_str, ErrorClass};
use resin_core::runtime::{BusMessage, TypedValue};
use resin_core::{check, compile, Engine, EngineConfig, Mode, ReactiveCircuit, SemiringInstance};

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {n} {name}: {} ({detail})\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn example(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/examples")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn worked_example_circuit() -> (resin_core::CompiledTarget, ReactiveCircuit) {
    let tp = check(&example("d.resin")).expect("valid program");
    let target = compile(&tp, 24).expect("compiles").remove(0);
    let rc =
        ReactiveCircuit::from_polynomial(&target.wmc_polynomial(), SemiringInstance::Probability);
    (target, rc)
}

#[test]
fn worked_example_exactness() {
    let clock = Instant::now();
    let (target, mut rc) = worked_example_circuit();
    let models = target.model_sets();
    let flat_omega = rc.omega(0);
    for (v, w) in [(0, 0.5), (1, 0.4), (2, 0.2)] {
        rc.set_literal_weights(v, w, 1.0 - w).unwrap();
    }
    let value = rc.evaluate_full().unwrap();
    rc.drop(&[1, 2]).unwrap();
    let root_omega = rc.omega(0);

    rc.set_literal_weights(0, 0.6, 0.4).unwrap();
    rc.invalidate(0).unwrap();
    let (_, a_ops) = rc.react().unwrap();
    rc.set_literal_weights(1, 0.3, 0.7).unwrap();
    rc.invalidate(1).unwrap();
    let (after_b, b_ops) = rc.react().unwrap();
    // 0.6 * 0.3 * 0.8 + 0.4 * 0.3 * 0.2
    let expected_b = 0.168;
    let elapsed = clock.elapsed().as_secs_f64();

    let pass = models == ["{a, b, ¬c}", "{¬a, b, c}"]
        && flat_omega == 5
        && root_omega == 3
        && a_ops == 3
        && b_ops == 5
        && (value - 0.2).abs() < 1e-12
        && (after_b - expected_b).abs() < 1e-12
        && elapsed < 1.0;
    report(
        1,
        "worked example",
        pass,
        &format!(
            "models {models:?}, flat omega {flat_omega}, root omega {root_omega}, a-update {a_ops} ops, b-update {b_ops} ops, {elapsed:.3}s"
        ),
    );
    assert!(pass);
}

/// A leveled program: derived predicate `p{k}` only reads sources and
/// predicates below level `k`.
struct RandomProgram {
    sources: usize,
    /// `rules[k]` lists the bodies of `p{k}`; literals are `(atom, positive)`
    /// with atoms `< sources` naming sources and the rest naming `p{atom - sources}`.
    rules: Vec<Vec<Vec<(usize, bool)>>>,
}

impl RandomProgram {
    fn generate(rng: &mut ChaCha8Rng) -> Self {
        let sources = rng.random_range(1..=12);
        let derived = rng.random_range(1..=5);
        let rules = (0..derived)
            .map(|k| {
                (0..rng.random_range(1..=3))
                    .map(|_| {
                        (0..rng.random_range(1..=4))
                            .map(|_| (rng.random_range(0..sources + k), rng.random_bool(0.7)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        RandomProgram { sources, rules }
    }

    fn atom(&self, a: usize) -> String {
        if a < self.sources {
            format!("s{a}")
        } else {
            format!("p{}", a - self.sources)
        }
    }

    fn text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.sources {
            s += &format!("s{i} <- source(\"/s{i}\", Probability).\n");
        }
        for (k, bodies) in self.rules.iter().enumerate() {
            for body in bodies {
                let lits: Vec<String> = body
                    .iter()
                    .map(|&(a, pos)| {
                        let name = self.atom(a);
                        if pos {
                            name
                        } else {
                            format!("not {name}")
                        }
                    })
                    .collect();
                s += &format!("p{k} if {}.\n", lits.join(" and "));
            }
        }
        s += &format!("p{} -> target(\"/t\").\n", self.rules.len() - 1);
        s
    }

    /// Weighted model count over all source assignments, deriving each level
    /// in order.
    fn oracle(&self, weights: &[f64]) -> f64 {
        let mut total = 0.0;
        for bits in 0u32..(1 << self.sources) {
            let mut truth: Vec<bool> = (0..self.sources).map(|i| bits >> i & 1 == 1).collect();
            for bodies in &self.rules {
                let holds = bodies
                    .iter()
                    .any(|body| body.iter().all(|&(a, pos)| truth[a] == pos));
                truth.push(holds);
            }
            if *truth.last().unwrap() {
                total += (0..self.sources)
                    .map(|i| {
                        if truth[i] {
                            weights[i]
                        } else {
                            1.0 - weights[i]
                        }
                    })
                    .product::<f64>();
            }
        }
        total
    }
}

#[test]
fn oracle_wmc_equivalence() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = EngineConfig {
        epsilon: 0.0,
        h: 2.0,
        hysteresis: 1,
        ..Default::default()
    };
    let mut programs = 0;
    let mut checks = 0;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    while programs < 500 {
        let prog = RandomProgram::generate(&mut rng);
        let tp = check(&prog.text()).expect("generated programs are valid");
        let target = compile(&tp, 24).expect("stratified").remove(0);
        if target.models.is_empty() || target.models.len() > 200 {
            continue;
        }
        programs += 1;
        let mut engine = Engine::new(target, cfg.clone(), Mode::Reactive);
        let channels = engine.source_channels();
        let mut weights: Vec<f64> = (0..prog.sources).map(|_| rng.random()).collect();
        let mut t = 0.0;
        let feed = |engine: &mut Engine, ch: &str, w: f64, t: f64| {
            engine
                .step(&BusMessage::new(ch, TypedValue::Probability(w), t))
                .expect("valid message")
        };
        let mut last = None;
        for ch in &channels {
            let i: usize = ch[2..].parse().unwrap();
            t += 0.05;
            last = feed(&mut engine, ch, weights[i], t).or(last);
        }
        let mut compare = |value: Option<BusMessage>, weights: &[f64]| {
            let Some(TypedValue::Probability(v)) = value.map(|m| m.value) else {
                failures += 1;
                return;
            };
            let d = (v - prog.oracle(weights)).abs();
            worst = worst.max(d);
            checks += 1;
            if d > 1e-9 {
                failures += 1;
            }
        };
        compare(last, &weights);
        for _ in 0..8 {
            let ch = &channels[rng.random_range(0..channels.len())];
            let i: usize = ch[2..].parse().unwrap();
            let mut w: f64 = rng.random();
            while w == weights[i] {
                w = rng.random();
            }
            weights[i] = w;
            t += rng.random_range(0.01..1.0);
            let out = feed(&mut engine, ch, w, t);
            compare(out, &weights);
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = failures == 0 && elapsed < 60.0;
    report(
        2,
        "oracle WMC equivalence",
        pass,
        &format!("{programs} programs, {checks} comparisons, {failures} failures, max error {worst:.2e}, {elapsed:.1}s"),
    );
    assert!(pass);
}

fn random_polynomial(rng: &mut ChaCha8Rng) -> WmcPolynomial {
    let n = rng.random_range(2..=8);
    let terms = (0..rng.random_range(1..=24))
        .map(|_| {
            let k = rng.random_range(1..=n);
            let mut t: Vec<Literal> = sample(rng, n, k)
                .into_iter()
                .map(|v| {
                    if rng.random_bool(0.5) {
                        Literal::pos(v)
                    } else {
                        Literal::neg(v)
                    }
                })
                .collect();
            t.sort();
            t
        })
        .collect();
    WmcPolynomial {
        variables: (0..n).map(|i| format!("x{i}")).collect(),
        terms,
    }
}

fn plain_wmc(poly: &WmcPolynomial, w: &[f64]) -> f64 {
    poly.terms
        .iter()
        .map(|t| {
            t.iter()
                .map(|l| if l.positive { w[l.var] } else { 1.0 - w[l.var] })
                .product::<f64>()
        })
        .sum()
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let k = rng.random_range(1..=n);
    sample(rng, n, k).into_vec()
}

#[test]
fn adaptation_preserves_value() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut steps = 0;
    let mut value_failures = 0;
    let mut index_failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let poly = random_polynomial(&mut rng);
        let n = poly.num_vars();
        let mut rc = ReactiveCircuit::from_polynomial(&poly, SemiringInstance::Probability);
        let mut w: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        for (v, &x) in w.iter().enumerate() {
            rc.set_literal_weights(v, x, 1.0 - x).unwrap();
        }
        rc.evaluate_full().unwrap();
        for _ in 0..20 {
            let vars = random_subset(&mut rng, n);
            if rng.random_bool(0.5) {
                rc.drop(&vars).unwrap();
            } else {
                rc.lift(&vars).unwrap();
            }
            steps += 1;
            let expected = plain_wmc(&poly, &w);
            let got = rc.root_value().unwrap();
            let rel = (got - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
            if expected != 0.0 || got != 0.0 {
                worst = worst.max(rel);
                if rel > 1e-12 {
                    value_failures += 1;
                }
            }
            if rc.check_invariants().is_err() {
                index_failures += 1;
            }
            // Keep the memos exercised between moves.
            let v = rng.random_range(0..n);
            w[v] = rng.random();
            rc.set_literal_weights(v, w[v], 1.0 - w[v]).unwrap();
            rc.invalidate(v).unwrap();
            rc.react().unwrap();
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = value_failures == 0 && index_failures == 0 && elapsed < 60.0;
    report(
        3,
        "lift/drop value preservation",
        pass,
        &format!(
            "{steps} steps, {value_failures} value failures, {index_failures} index failures, max rel error {worst:.2e}, {elapsed:.1}s"
        ),
    );
    assert!(pass);
}

#[test]
fn gain_accounting() {
    let (target, mut rc) = worked_example_circuit();
    for v in 0..3 {
        rc.set_literal_weights(v, 0.5, 0.5).unwrap();
    }
    rc.evaluate_full().unwrap();
    rc.drop(&[1, 2]).unwrap();
    let rates = rc.rates(&[5.0, 1.0, 1.0]).unwrap();
    let expected_exact = rates.rho_max == 35.0 && rates.rho_rc == 25.0;

    let cfg = EngineConfig {
        h: 5.0,
        ..Default::default()
    };
    let channels: Vec<String> = target.sources.iter().map(|s| s.channel.clone()).collect();
    let trace = poisson_trace(&channels, &[5.0, 1.0, 1.0], 100.0, 11);
    let result = run_benchmark(
        |mode| {
            let mut e = Engine::new(target.clone(), cfg.clone(), mode);
            e.set_rate_override(Some(vec![5.0, 1.0, 1.0]))?;
            Ok::<_, BenchError>(e)
        },
        &trace,
        &[Mode::Flat, Mode::Reactive],
        10.0,
    )
    .expect("modes agree");
    let flat = result.run(Mode::Flat).unwrap().stats.eval_ops;
    let reactive = result.run(Mode::Reactive).unwrap().stats.eval_ops;
    let measured = result.gain(Mode::Reactive).unwrap();

    // Gain never drops below one on random circuits, structures and rates.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_gain = f64::INFINITY;
    for _ in 0..300 {
        let poly = random_polynomial(&mut rng);
        let n = poly.num_vars();
        let mut rc = ReactiveCircuit::from_polynomial(&poly, SemiringInstance::Probability);
        for _ in 0..rng.random_range(0..6) {
            let vars = random_subset(&mut rng, n);
            if rng.random_bool(0.5) {
                rc.drop(&vars).unwrap();
            } else {
                rc.lift(&vars).unwrap();
            }
        }
        let lambda: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.0..30.0)
                }
            })
            .collect();
        min_gain = min_gain.min(rc.rates(&lambda).unwrap().gain);
    }

    let pass = expected_exact && (measured - 1.4).abs() <= 0.14 && min_gain >= 1.0;
    report(
        4,
        "gain accounting",
        pass,
        &format!(
            "expected {}/{} = {:.3}, counted {flat}/{reactive} = {measured:.3}, min gain over random circuits {min_gain:.3}",
            rates.rho_max, rates.rho_rc, rates.gain
        ),
    );
    assert!(pass);
}

#[test]
fn rate_tracking() {
    let clock = Instant::now();
    let widths = [1.0, 5.0, 10.0, 30.0];
    let scores = sweep(20, &widths, &TrackingConfig::default());
    let at5 = scores.iter().find(|s| s.h == 5.0).unwrap().in_band;
    let monotone = scores.windows(2).all(|w| w[1].mae <= w[0].mae);
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = at5 >= 0.8 && monotone && elapsed < 30.0;
    let maes: Vec<String> = scores
        .iter()
        .map(|s| format!("h={}: {:.3}", s.h, s.mae))
        .collect();
    report(
        5,
        "rate tracking",
        pass,
        &format!(
            "{:.1}% in band at h=5, band MAE {}, {elapsed:.1}s",
            100.0 * at5,
            maes.join(", ")
        ),
    );
    assert!(pass);
}

fn drone_config(h: f64) -> EngineConfig {
    EngineConfig {
        h,
        epsilon: 0.0,
        ..Default::default()
    }
}

#[test]
fn plasticity() {
    // Synthetic workload: memory and depth grow as the bands narrow.
    let w = SyntheticWorkload {
        n_signals: 60,
        models: 300,
        sources_per_model: 12,
        seed: 3,
        ..Default::default()
    };
    let poly = w.polynomial().unwrap();
    let rates = mixture_rates(w.n_signals, &[3.0, 14.0, 26.0], 2.5, 30.0, 9);
    let shapes: Vec<(f64, usize, usize)> = [30.0, 10.0, 5.0, 1.0]
        .iter()
        .map(|&h| {
            let (memo, layers) = settle(&poly, &rates, h).unwrap();
            (h, memo, layers)
        })
        .collect();
    let synthetic_ok = shapes
        .windows(2)
        .all(|p| p[1].1 >= p[0].1 && p[1].2 >= p[0].2);

    // Drones: two bands follow the journeys, one band never adapts.
    let sc = DroneScenario {
        seconds: 120.0,
        seed: 1,
        ..Default::default()
    };
    let dt = sc.simulate().unwrap();
    let two = run_mode(
        sc.engine(drone_config(8.0), Mode::Reactive).unwrap(),
        &dt.trace,
        5.0,
    )
    .unwrap();
    let single = run_mode(
        sc.engine(drone_config(100.0), Mode::Reactive).unwrap(),
        &dt.trace,
        5.0,
    )
    .unwrap();

    let truth = dt.trace.truth.as_ref().unwrap();
    let window = 3.0;
    let mut considered = 0;
    let mut followed = 0;
    for change in &dt.phase_changes {
        if change.time + window > sc.seconds {
            continue;
        }
        // Skip changes that leave every pair in its band (all partners airborne).
        let before = (0..truth.channels.len()).map(|i| truth.rate(i, change.time - 1e-6));
        let after = (0..truth.channels.len()).map(|i| truth.rate(i, change.time));
        if before.eq(after) {
            continue;
        }
        considered += 1;
        if two
            .migrations
            .iter()
            .any(|&(t, _)| t >= change.time && t <= change.time + window)
        {
            followed += 1;
        }
    }
    let single_moves = single.stats.lifts + single.stats.drops;
    let drones_ok = considered > 0 && followed == considered && single_moves == 0;
    let pass = synthetic_ok && drones_ok;
    let shape_text: Vec<String> = shapes
        .iter()
        .map(|(h, m, l)| format!("h={h}: {m} memos/{l} layers"))
        .collect();
    report(
        6,
        "plasticity",
        pass,
        &format!(
            "{}; drones: {followed}/{considered} phase changes followed by a migration, {} migration rounds, single band {single_moves} moves",
            shape_text.join(", "),
            two.migrations.len()
        ),
    );
    assert!(pass);
}

#[test]
fn speedup_ordering() {
    let clock = Instant::now();
    let sc = DroneScenario {
        seconds: 60.0,
        seed: 2,
        ..Default::default()
    };
    let dt = sc.simulate().unwrap();
    let result = run_benchmark(
        |mode| Ok(sc.engine(drone_config(8.0), mode).unwrap()),
        &dt.trace,
        &Mode::ALL,
        5.0,
    )
    .expect("modes agree");
    let ops = |m| result.run(m).unwrap().stats.eval_ops;
    let (flat, adapted, reactive) = (ops(Mode::Flat), ops(Mode::Adapted), ops(Mode::Reactive));
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = reactive < adapted && adapted < flat && reactive * 10 <= flat && elapsed < 300.0;
    let adapt = result.run(Mode::Reactive).unwrap().stats.adaptation_ops;
    let bound = instant_adaptation_bound(&dt.trace);
    report(
        7,
        "speedup ordering",
        pass,
        &format!(
            "counted ops flat {flat}, adapted {adapted}, reactive {reactive} ({:.1}x), bound with instant adaptation {bound:.1}x, reactive adaptation work {adapt}, max disagreement {:.1e}, {elapsed:.1}s",
            flat as f64 / reactive.max(1) as f64,
            result.max_disagreement
        ),
    );
    assert!(pass);
}

/// Flat-to-reactive ratio if every flying pair sat at the root the moment
/// it took off. With k fast pairs the root has 2^k products of arity k + 1,
/// while the flat polynomial costs 10229 for 1023 models of 10 sources.
fn instant_adaptation_bound(trace: &resin_bench::Trace) -> f64 {
    let truth = trace.truth.as_ref().unwrap();
    let idx = truth.index();
    let (mut flat, mut ideal) = (0.0, 0.0);
    for ev in &trace.events {
        if truth.rate(idx[ev.channel.as_str()], ev.timestamp) == 0.0 {
            continue;
        }
        let k = (0..truth.channels.len())
            .filter(|&j| truth.rate(j, ev.timestamp) > 0.0)
            .count() as i32;
        flat += 10229.0;
        ideal += 2f64.powi(k) * (k as f64 + 1.0) - 1.0;
    }
    flat / ideal
}

/// Parse, type check and ground; the class of the first diagnostic.
fn front_end(text: &str) -> Result<(), ErrorClass> {
    let tp = check(text).map_err(|d| d[0].class)?;
    compile(&tp, 24).map_err(|e| e.to_diagnostic().class)?;
    Ok(())
}

#[test]
fn parser_corpus() {
    let mut problems = Vec::new();
    for name in ["d.resin", "safety.resin", "drones.resin"] {
        let text = example(name);
        if let Err(d) = check(&text) {
            problems.push(format!("{name}: {}", d[0]));
            continue;
        }
        let printed = parse_str(&text).unwrap().to_string();
        match parse_str(&printed) {
            Ok(again) if again.to_string() == printed && check(&printed).is_ok() => {}
            _ => problems.push(format!("{name}: round trip differs")),
        }
    }

    let malformed: [(&str, ErrorClass); 10] = [
        ("a <- source(\"/a\", Probability).\nd if a & b.\n", ErrorClass::IllegalCharacter),
        ("a <- source(\"/a\n, Probability).\n", ErrorClass::UnterminatedPath),
        ("a <- source(\"/a\", Probability)\nd if a.\n", ErrorClass::UnexpectedToken),
        ("a <- source(\"/a\", Probability).\nd if a and\n", ErrorClass::UnexpectedEof),
        ("x <- source(\"/x\", Number).\nx > 3 if x > 2.\n", ErrorClass::ComparisonHead),
        ("a <- source(\"/a\", Probability).\nd if a and b.\nd -> target(\"/d\").\n", ErrorClass::UnknownAtom),
        ("a <- source(\"/a\", Probability).\nd if a > 0.5.\nd -> target(\"/d\").\n", ErrorClass::ComparisonType),
        ("x <- source(\"/x\", Density).\nd if x.\nd -> target(\"/d\").\n", ErrorClass::MissingComparison),
        ("a <- source(\"/a\", Probability).\nb <- source(\"/a\", Probability).\nd if a and b.\nd -> target(\"/d\").\n", ErrorClass::DuplicateChannel),
        ("a <- source(\"/a\", Probability).\np if a and not q.\nq if a and not p.\np -> target(\"/p\").\n", ErrorClass::NonStratified),
    ];
    let mut classified = 0;
    for (text, class) in &malformed {
        let got = front_end(text).err();
        if got == Some(*class) {
            classified += 1;
        } else {
            problems.push(format!("expected {class}, got {got:?} for {text:?}"));
        }
    }
    let pass = problems.is_empty();
    report(
        8,
        "parser corpus",
        pass,
        &format!(
            "3 example programs round-tripped, {classified}/10 malformed variants classified{}",
            if pass {
                String::new()
            } else {
                format!("; {}", problems.join("; "))
            }
        ),
    );
    assert!(pass, "{problems:?}");
}
