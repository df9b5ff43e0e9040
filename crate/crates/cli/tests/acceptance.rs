//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semalloc_core::auction::objective::RevenueObjective;
use semalloc_core::auction::{
    self, expected_revenue, learned_auction, second_price, AuctionOutcome, Bid, MonotoneNet, ProfileSet, TrainConfig,
    UniformValues, ValueDistribution,
};
use semalloc_core::config::ExperimentConfig;
use semalloc_core::experiment;
use semalloc_core::fedse::{self, FedConfig, ModelParams, Sample};
use semalloc_core::metrics::{self, EmbeddingVec, StateTrace, TokenSeq, TraceEvent};
use semalloc_core::perf_model::PerfCurve;
use semalloc_core::rng::{stream, stream_rng};
use semalloc_core::NetworkConfig;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)*));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

const BIN: &str = env!("CARGO_BIN_EXE_semalloc");

fn samples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/samples")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = ok(Command::new(BIN).args(args).output())?;
    check!(
        out.status.success(),
        "semalloc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

// ---------------------------------------------------------------- curves

/// Sentence similarity and 1-gram BLEU for D = 1..=16, as measured.
const CURVE_ORACLE: [(&str, &str); 16] = [
    ("0.39550235", "0.0944817"),
    ("0.40009948", "0.09667912"),
    ("0.40945041", "0.09386748"),
    ("0.41866887", "0.10047062"),
    ("0.42247792", "0.10116262"),
    ("0.42490115", "0.10300542"),
    ("0.4295931", "0.11076793"),
    ("0.43368545", "0.11739845"),
    ("0.43733177", "0.12781957"),
    ("0.4519554", "0.15357989"),
    ("0.47728359", "0.1940025"),
    ("0.51547686", "0.27020956"),
    ("0.55437698", "0.34242301"),
    ("0.61085957", "0.44607532"),
    ("0.7460733", "0.65054165"),
    ("0.86169747", "0.82109432"),
];

fn curve_fidelity() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let start = Instant::now();
    run_cli(&["--out", dir.path().to_str().unwrap(), "export-curves"])?;
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(1), "export took {elapsed:?}");

    let text = ok(std::fs::read_to_string(dir.path().join(experiment::CURVES_FILE)))?;
    let mut lines = text.lines();
    check!(lines.next() == Some("dimension,similarity,bleu_1gram"), "bad header");
    let embedded = PerfCurve::embedded();
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let d = i as u32 + 1;
        let (sim, bleu) = *CURVE_ORACLE.get(i).ok_or("too many rows")?;
        check!(line == format!("{d},{sim},{bleu}"), "row {d}: {line}");
        let want_sim: f64 = sim.parse().unwrap();
        let want_bleu: f64 = bleu.parse().unwrap();
        let got = ok(embedded.lookup(d))?;
        check!(
            got.similarity.to_bits() == want_sim.to_bits() && got.bleu.to_bits() == want_bleu.to_bits(),
            "embedded table differs at D = {d}"
        );
        rows += 1;
    }
    check!(rows == 16, "{rows} rows");
    Ok(format!(
        "16/16 points bit-exact, export {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

// ---------------------------------------------------------------- auctions

struct Trained {
    nets: Vec<MonotoneNet>,
    elapsed: Duration,
}

fn train_uniform(bidders: usize) -> Result<Trained, String> {
    let start = Instant::now();
    let config = TrainConfig::default();
    let result = ok(auction::train(&config, &UniformValues::unit(bidders)))?;
    Ok(Trained {
        nets: result.nets,
        elapsed: start.elapsed(),
    })
}

fn heldout_revenue(nets: &[MonotoneNet], bidders: usize) -> Result<f64, String> {
    ok(expected_revenue(
        nets,
        &UniformValues::unit(bidders),
        1_000_000,
        &mut stream_rng(0, stream::HELD_OUT),
    ))
}

fn single_bidder(trained: &Trained) -> Outcome {
    let reserve = trained.nets[0].reserve();
    let revenue = heldout_revenue(&trained.nets, 1)?;
    let elapsed = trained.elapsed.as_secs_f64();
    check!((0.45..=0.55).contains(&reserve), "reserve {reserve}");
    check!((revenue - 0.25).abs() <= 0.02, "revenue {revenue}");
    check!(elapsed < 60.0, "training took {elapsed:.1} s");
    Ok(format!(
        "reserve {reserve:.4}, revenue {revenue:.5}, train {elapsed:.1} s"
    ))
}

/// Exact expected revenue of a second-price auction with reserve `r` for two
/// U[0,1] bidders, by midpoint quadrature over the value square.
fn spa_with_reserve(r: f64, cells: usize) -> f64 {
    let h = 1.0 / cells as f64;
    let mut total = 0.0;
    for i in 0..cells {
        let v1 = (i as f64 + 0.5) * h;
        for j in 0..cells {
            let v2 = (j as f64 + 0.5) * h;
            let (hi, lo) = if v1 >= v2 { (v1, v2) } else { (v2, v1) };
            if hi >= r {
                total += lo.max(r);
            }
        }
    }
    total * h * h
}

fn two_bidders(trained: &Trained) -> Outcome {
    let target = 5.0 / 12.0;
    // Reserve sweep: the best second-price-with-reserve revenue is the
    // optimum for i.i.d. regular bidders.
    let (best_r, best) = (0..=100)
        .map(|k| {
            let r = k as f64 / 100.0;
            (r, spa_with_reserve(r, 1000))
        })
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    check!((best - target).abs() < 1e-3, "sweep optimum {best} at r = {best_r}");
    check!((best_r - 0.5).abs() <= 0.011, "sweep optimum at r = {best_r}");

    let revenue = heldout_revenue(&trained.nets, 2)?;
    let rel = (revenue - target).abs() / target;
    let elapsed = trained.elapsed.as_secs_f64();
    check!(rel <= 0.05, "revenue {revenue} is {:.2}% off", rel * 100.0);
    check!(elapsed < 180.0, "training took {elapsed:.1} s");
    Ok(format!(
        "revenue {revenue:.5} ({:.2}% off 5/12), sweep optimum {best:.5} at r = {best_r}, train {elapsed:.1} s",
        rel * 100.0
    ))
}

fn network_revenue(report: &experiment::AuctionReport) -> Outcome {
    let trace = &report.result.trace;
    let first = trace.first().ok_or("empty trace")?;
    check!(first.iteration == 0, "trace starts at {}", first.iteration);
    check!(
        first.dl_revenue == first.spa_revenue,
        "iteration 0: learned {} vs second-price {}",
        first.dl_revenue,
        first.spa_revenue
    );
    check!(
        report.heldout_learned >= report.heldout_second_price,
        "held-out learned {} < second-price {}",
        report.heldout_learned,
        report.heldout_second_price
    );
    Ok(format!(
        "held-out learned {:.5} >= second-price {:.5}; iteration 0 equal ({:.5})",
        report.heldout_learned, report.heldout_second_price, first.dl_revenue
    ))
}

// ---------------------------------------------------------------- incentives

const PROFILES: usize = 100_000;
const GRID: usize = 101;
const TOL: f64 = 1e-9;

struct Violations {
    dsic: usize,
    ir: usize,
    worst: f64,
}

/// Each profile checks truthful individual rationality for every bidder and
/// the full deviation grid for bidder `p mod n`.
fn incentive_scan<M, D>(mechanism: M, dist: &D, seed: u64) -> Result<Violations, String>
where
    M: Fn(&[Bid]) -> semalloc_core::Result<AuctionOutcome> + Sync,
    D: ValueDistribution + Sync,
{
    let profiles = ProfileSet::sample(dist, PROFILES, &mut stream_rng(seed, 99));
    let rows: Vec<&[f64]> = profiles.iter().collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(16);
    let chunk = rows.len().div_ceil(threads);
    let results: Vec<Result<Violations, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = rows
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| {
                let mechanism = &mechanism;
                s.spawn(move || {
                    let mut v = Violations {
                        dsic: 0,
                        ir: 0,
                        worst: 0.0,
                    };
                    let mut bids = Vec::new();
                    for (k, values) in part.iter().enumerate() {
                        let n = values.len();
                        bids.clear();
                        bids.extend(values.iter().enumerate().map(|(i, &x)| Bid { bidder: i, amount: x }));
                        let truthful = ok(mechanism(&bids))?;
                        for (i, &x) in values.iter().enumerate() {
                            let u = truthful.utility(i, x);
                            if u < -TOL {
                                v.ir += 1;
                                v.worst = v.worst.max(-u);
                            }
                        }
                        let i = (c * chunk + k) % n;
                        let u_true = truthful.utility(i, values[i]);
                        for g in 0..GRID {
                            bids[i].amount = g as f64 / (GRID - 1) as f64;
                            let u = ok(mechanism(&bids))?.utility(i, values[i]);
                            if u > u_true + TOL {
                                v.dsic += 1;
                                v.worst = v.worst.max(u - u_true);
                            }
                        }
                    }
                    Ok(v)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scan thread panicked"))
            .collect()
    });
    let mut total = Violations {
        dsic: 0,
        ir: 0,
        worst: 0.0,
    };
    for r in results {
        let r = r?;
        total.dsic += r.dsic;
        total.ir += r.ir;
        total.worst = total.worst.max(r.worst);
    }
    Ok(total)
}

fn incentives(two: &Trained, network: &[MonotoneNet]) -> Outcome {
    let start = Instant::now();
    let wpcn = NetworkConfig::default();
    let uniform = UniformValues::unit(2);
    let config = TrainConfig::default();
    let init = |n: usize| -> Vec<MonotoneNet> {
        let mut rng = stream_rng(0, stream::NET_INIT);
        (0..n)
            .map(|_| MonotoneNet::identity_with_noise(config.groups, config.units, config.init_noise, &mut rng))
            .collect()
    };
    let init_uniform = init(2);
    let init_network = init(wpcn.num_devices);

    let mut lines = Vec::new();
    let mut failed = false;
    let mut record = |name: &str, v: Violations| {
        failed |= v.dsic > 0 || v.ir > 0;
        lines.push(format!("{name}: {}/{}", v.dsic, v.ir));
    };
    record("spa uniform", incentive_scan(second_price, &uniform, 1)?);
    record("spa network", incentive_scan(second_price, &wpcn, 2)?);
    record(
        "init uniform",
        incentive_scan(|b| learned_auction(&init_uniform, b), &uniform, 3)?,
    );
    record(
        "init network",
        incentive_scan(|b| learned_auction(&init_network, b), &wpcn, 4)?,
    );
    record(
        "trained uniform",
        incentive_scan(|b| learned_auction(&two.nets, b), &uniform, 5)?,
    );
    record(
        "trained network",
        incentive_scan(|b| learned_auction(network, b), &wpcn, 6)?,
    );
    let elapsed = start.elapsed().as_secs_f64();
    let summary = format!("dsic/ir violations {}; {elapsed:.1} s", lines.join(", "));
    check!(!failed, "{summary}");
    check!(elapsed < 120.0, "{summary}");
    Ok(summary)
}

// ---------------------------------------------------------------- metrics

const VOCAB: [&str; 5] = ["a", "b", "c", "d", "e"];

fn random_sentence(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<&'static str> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect()
}

fn occurrences(words: &[&str], gram: &[&str]) -> usize {
    words.windows(gram.len()).filter(|w| *w == gram).count()
}

/// BLEU by direct counting: position `i` of the candidate matches when fewer
/// earlier positions carry the same n-gram than the best reference count.
fn bleu_oracle(cand: &[&str], refs: &[Vec<&str>], max_n: usize) -> (Vec<usize>, f64) {
    let mut matches = vec![0; max_n];
    for n in 1..=max_n {
        for i in 0..=cand.len() - n {
            let gram = &cand[i..i + n];
            let earlier = occurrences(&cand[..i + n - 1], gram);
            let allowed = refs.iter().map(|r| occurrences(r, gram)).max().unwrap();
            if earlier < allowed {
                matches[n - 1] += 1;
            }
        }
    }
    if matches.contains(&0) {
        return (matches, 0.0);
    }
    let c = cand.len();
    let mut r = refs[0].len();
    for reference in refs {
        let l = reference.len();
        if l.abs_diff(c) < r.abs_diff(c) || (l.abs_diff(c) == r.abs_diff(c) && l < r) {
            r = l;
        }
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    let mut log_sum = 0.0;
    for (k, &m) in matches.iter().enumerate() {
        log_sum += (m as f64 / (c - k) as f64).ln();
    }
    (matches, bp * (log_sum / max_n as f64).exp())
}

/// Pointwise AoII from its definition, scanning the trace at time `t`.
fn aoii_at(events: &[TraceEvent], t: f64) -> f64 {
    let k = events.iter().rposition(|e| e.timestamp <= t).unwrap();
    if events[k].source == events[k].estimate {
        return 0.0;
    }
    let mut first_wrong = k;
    while first_wrong > 0 && events[first_wrong - 1].source != events[first_wrong - 1].estimate {
        first_wrong -= 1;
    }
    t - events[first_wrong].timestamp
}

fn aoi_at(events: &[TraceEvent], t: f64) -> f64 {
    let k = events.iter().rposition(|e| e.timestamp <= t).unwrap();
    t - events[k].freshest_generation
}

/// Both ages are linear between change points, so the midpoint rule on each
/// piece is exact.
fn integrate(events: &[TraceEvent], horizon: f64, f: fn(&[TraceEvent], f64) -> f64) -> f64 {
    let mut cuts: Vec<f64> = events.iter().map(|e| e.timestamp).filter(|&t| t < horizon).collect();
    cuts.push(horizon);
    cuts.windows(2)
        .map(|w| (w[1] - w[0]) * f(events, 0.5 * (w[0] + w[1])))
        .sum::<f64>()
        / horizon
}

fn random_trace(rng: &mut ChaCha8Rng) -> Vec<TraceEvent> {
    let n = rng.random_range(1..=12);
    let states = ["x", "y", "z"];
    let mut t = 0.0;
    let mut generation = 0.0;
    (0..n)
        .map(|i| {
            if i > 0 {
                t += rng.random_range(0.05..3.0);
                generation = rng.random_range(generation..=t);
            }
            TraceEvent::new(
                t,
                states[rng.random_range(0..3)],
                states[rng.random_range(0..3)],
                generation,
            )
        })
        .collect()
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let cand = random_sentence(&mut rng, 8);
        let refs: Vec<Vec<&str>> = (0..rng.random_range(1..=3))
            .map(|_| random_sentence(&mut rng, 8))
            .collect();
        let max_n = rng.random_range(1..=cand.len().min(4));
        let (want_matches, want) = bleu_oracle(&cand, &refs, max_n);
        let c = TokenSeq::new(cand.iter().copied());
        let rs: Vec<TokenSeq> = refs.iter().map(|r| TokenSeq::new(r.iter().copied())).collect();
        let stats = ok(metrics::bleu_stats(&c, &rs, max_n))?;
        let got = ok(metrics::bleu(&c, &rs, max_n))?;
        check!(
            stats.matches == want_matches && got.to_bits() == want.to_bits(),
            "case {case}: {cand:?} vs {refs:?} (n = {max_n}): {got} != {want}"
        );
    }

    let hand: [(&[f64], &[f64], f64); 5] = [
        (&[1.0, 0.0], &[1.0, 1.0], std::f64::consts::FRAC_1_SQRT_2),
        (&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 0.974_631_846_197_076_2),
        (&[3.0, 4.0], &[6.0, 8.0], 1.0),
        (&[1.0, 0.0, 0.0], &[0.0, 0.0, 2.0], 0.0),
        (&[1.0, 1.0], &[-1.0, -1.0], -1.0),
    ];
    for (a, b, want) in hand {
        let got = ok(metrics::sentence_similarity(
            &ok(EmbeddingVec::new(a.to_vec()))?,
            &ok(EmbeddingVec::new(b.to_vec()))?,
        ))?;
        check!((got - want).abs() <= 1e-12, "cosine {a:?} {b:?}: {got} != {want}");
    }

    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let events = random_trace(&mut rng);
        let last = events.last().unwrap().timestamp;
        let horizon = if rng.random::<bool>() {
            last + rng.random_range(0.1..2.0)
        } else {
            rng.random_range(0.01..=last.max(0.01))
        };
        let trace = ok(StateTrace::new(events.clone()))?;
        let aoi = ok(metrics::average_aoi(&trace, horizon))?;
        let aoii = ok(metrics::average_aoii(&trace, horizon))?;
        let (want_aoi, want_aoii) = (
            integrate(&events, horizon, aoi_at),
            integrate(&events, horizon, aoii_at),
        );
        let err = (aoi - want_aoi).abs().max((aoii - want_aoii).abs());
        check!(
            err <= 1e-9,
            "trace case {case}: aoi {aoi} vs {want_aoi}, aoii {aoii} vs {want_aoii}"
        );
        worst = worst.max(err);
    }
    let sample = ok(StateTrace::from_csv(&samples_dir().join("trace.csv")))?;
    let (aoi, aoii) = (
        ok(metrics::average_aoi(&sample, 6.0))?,
        ok(metrics::average_aoii(&sample, 6.0))?,
    );
    check!(
        (aoi - 1.125).abs() <= 1e-9 && (aoii - 1.625 / 6.0).abs() <= 1e-9,
        "sample trace: {aoi} {aoii}"
    );
    Ok(format!(
        "1000 BLEU cases exact, 5 cosine cases, 500 traces (max err {worst:.1e})"
    ))
}

// ---------------------------------------------------------------- gradients

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut accepted, mut rejected) = (0, 0);
    let mut worst: f64 = 0.0;
    while accepted < 100 {
        let bidders = rng.random_range(1..=3);
        let groups = rng.random_range(1..=3);
        let units = rng.random_range(1..=3);
        let batch = rng.random_range(1..=4);
        let mut obj = ok(RevenueObjective::new(bidders, groups, units, batch))?;
        let nets: Vec<MonotoneNet> = (0..bidders)
            .map(|_| {
                let k = groups * units;
                let w = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = (0..k).map(|_| rng.random_range(-0.5..0.5)).collect();
                MonotoneNet::new(groups, units, w, b)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ok(obj.set_nets(&nets))?;
        let profiles: Vec<f64> = (0..batch * bidders).map(|_| rng.random::<f64>()).collect();
        ok(obj.set_profiles(&profiles))?;
        obj.set_temperature(rng.random_range(1.0..10.0));
        if ok(obj.kink_margin())? < 1e-3 {
            rejected += 1;
            continue;
        }
        let err = ok(obj.check_gradients(1e-6))?;
        check!(err <= 1e-4, "point {accepted}: relative error {err:.3e}");
        worst = worst.max(err);
        accepted += 1;
    }
    Ok(format!(
        "100 points (rejected {rejected} near kinks), worst relative error {worst:.2e}"
    ))
}

// ---------------------------------------------------------------- federation

fn centralized_step(data: &[Sample], theta: &[f64], lr: f64) -> Vec<f64> {
    let m = data.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    for s in data {
        let pred: f64 = theta.iter().zip(&s.input).map(|(t, x)| t * x).sum();
        let r = pred - s.target;
        for (g, x) in grad.iter_mut().zip(&s.input) {
            *g += 2.0 * r * x / m;
        }
    }
    theta.iter().zip(&grad).map(|(t, g)| t - lr * g).collect()
}

/// Minimum mean squared error over all linear models, via the normal
/// equations.
#[allow(clippy::needless_range_loop)]
fn least_squares_floor(data: &[Sample]) -> f64 {
    let d = data[0].input.len();
    let mut a = vec![vec![0.0; d + 1]; d];
    for s in data {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += s.input[i] * s.input[j];
            }
            a[i][d] += s.input[i] * s.target;
        }
    }
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..d {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..=d {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let theta: Vec<f64> = (0..d).map(|i| a[i][d] / a[i][i]).collect();
    data.iter()
        .map(|s| {
            let r: f64 = theta.iter().zip(&s.input).map(|(t, x)| t * x).sum::<f64>() - s.target;
            r * r
        })
        .sum::<f64>()
        / data.len() as f64
}

fn federation() -> Outcome {
    // Single group against centralized gradient descent on the same,
    // growing, knowledge set.
    let mut rng = stream_rng(11, stream::FEDSE);
    let truth = ok(ModelParams::new(vec![0.7, -0.3, 0.2]))?;
    let mut groups = ok(fedse::synthetic_groups(1, 3, 24, &truth, &mut rng))?;
    let fed = FedConfig {
        local_epochs: 3,
        learning_rate: 0.05,
        upload_batch: 4,
        label_noise: 0.01,
        truth: truth.clone(),
    };
    let rounds = 30;
    let mut models = Vec::new();
    let mut sizes = Vec::new();
    for _ in 0..rounds {
        sizes.push(groups[0].dataset.len());
        ok(fedse::run_rounds(&mut groups, 1, &fed, &mut rng))?;
        models.push(groups[0].model.values().to_vec());
    }
    let pooled = groups[0].dataset.clone();
    let mut theta = vec![0.0; 3];
    for (round, (model, &size)) in models.iter().zip(&sizes).enumerate() {
        for _ in 0..fed.local_epochs {
            theta = centralized_step(&pooled[..size], &theta, fed.learning_rate);
        }
        check!(
            model.iter().zip(&theta).all(|(a, b)| a.to_bits() == b.to_bits()),
            "round {round}: {model:?} != {theta:?}"
        );
    }

    // Two groups, 50 rounds.
    let settings = ExperimentConfig::default();
    let s = ok(settings.fedse())?;
    let mut rng = stream_rng(3, stream::FEDSE);
    let truth = ok(ModelParams::new(
        (0..s.dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
    ))?;
    let mut groups = ok(fedse::synthetic_groups(
        2,
        s.devices_per_group,
        s.samples_per_group,
        &truth,
        &mut rng,
    ))?;
    let fed = FedConfig {
        local_epochs: s.local_epochs,
        learning_rate: s.learning_rate,
        upload_batch: s.upload_batch,
        label_noise: s.label_noise,
        truth,
    };
    let logs = ok(fedse::run_rounds(&mut groups, 50, &fed, &mut rng))?;
    let final_loss = logs.last().unwrap().global_loss;
    let pooled: Vec<Sample> = groups.iter().flat_map(|g| g.dataset.iter().cloned()).collect();
    let floor = least_squares_floor(&pooled);
    check!(final_loss < 1e-3, "two-group loss {final_loss:.3e}");
    check!(
        final_loss >= floor - 1e-12,
        "loss {final_loss:.3e} below the least-squares floor {floor:.3e}"
    );
    Ok(format!(
        "{rounds} single-group rounds bit-identical; two-group loss {final_loss:.2e} (floor {floor:.2e})"
    ))
}

// ---------------------------------------------------------------- determinism

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = ok(std::fs::read_dir(dir))?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            let bytes = ok(std::fs::read(e.path()))?;
            Ok((e.file_name().to_string_lossy().into_owned(), bytes))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let samples = samples_dir();
    let s = |name: &str| samples.join(name).to_string_lossy().into_owned();
    let (cands, refs, embeds, trace) = (
        s("candidates.txt"),
        s("references.txt"),
        s("embeddings.csv"),
        s("trace.csv"),
    );
    let commands: Vec<Vec<&str>> = vec![
        vec!["export-curves"],
        vec!["simulate", "--iters", "100"],
        vec!["simulate", "fedse"],
        vec!["train-auction", "--iters", "100", "--devices", "3"],
        vec![
            "eval-metrics",
            "--candidates",
            &cands,
            "--references",
            &refs,
            "--embeddings",
            &embeds,
            "--trace",
            &trace,
        ],
    ];
    let mut files = 0;
    for args in &commands {
        for seed in ["0", "7"] {
            let mut runs = Vec::new();
            for _ in 0..2 {
                let dir = ok(tempfile::tempdir())?;
                let mut full = vec!["--seed", seed, "--out", dir.path().to_str().unwrap()];
                full.extend(args.iter().copied());
                run_cli(&full)?;
                runs.push(snapshot(dir.path())?);
            }
            check!(!runs[0].is_empty(), "{args:?} wrote nothing");
            check!(runs[0] == runs[1], "{args:?} with seed {seed} is not reproducible");
            files += runs[0].len();
        }
    }
    Ok(format!(
        "{} subcommand runs, {files} files byte-identical",
        commands.len() * 2
    ))
}

// ---------------------------------------------------------------- driver

fn report(id: usize, name: &str, outcome: Outcome, failures: &mut usize) {
    match outcome {
        Ok(detail) => println!("criterion {id} {name}: PASS ({detail})"),
        Err(why) => {
            *failures += 1;
            println!("criterion {id} {name}: FAIL ({why})");
        }
    }
}

fn main() {
    let start = Instant::now();
    let mut failures = 0;

    report(1, "curve fidelity", curve_fidelity(), &mut failures);

    let one = train_uniform(1);
    let two = train_uniform(2);
    let network_dir = tempfile::tempdir().expect("temp dir");
    let network =
        experiment::train_auction(&ExperimentConfig::default(), network_dir.path()).map_err(|e| e.to_string());

    report(
        2,
        "single-bidder optimum",
        one.as_ref().map_err(Clone::clone).and_then(single_bidder),
        &mut failures,
    );
    report(
        3,
        "two-bidder optimum",
        two.as_ref().map_err(Clone::clone).and_then(two_bidders),
        &mut failures,
    );
    report(
        4,
        "network revenue vs second price",
        network.as_ref().map_err(Clone::clone).and_then(network_revenue),
        &mut failures,
    );
    let c5 = match (&two, &network) {
        (Ok(two), Ok(net)) => incentives(two, &net.result.nets),
        (Err(e), _) | (_, Err(e)) => Err(format!("training failed: {e}")),
    };
    report(5, "incentive compatibility", c5, &mut failures);
    report(6, "metric oracles", metric_oracles(), &mut failures);
    report(7, "gradient correctness", gradients(), &mut failures);
    report(8, "federation equivalence", federation(), &mut failures);
    report(9, "determinism", determinism(), &mut failures);

    let total = start.elapsed().as_secs_f64();
    println!("acceptance: {} of 9 criteria passed in {total:.1} s", 9 - failures);
    if total >= 300.0 {
        println!("acceptance: FAIL (suite exceeded the 5 min budget)");
        failures += 1;
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
