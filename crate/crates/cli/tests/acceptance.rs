//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! run when a criterion that is expected to hold does not.
//!
//! Criteria listed in `KNOWN_RED` are measured and reported like the others
//! but do not fail the run unless `ACCEPTANCE_STRICT=1` is set.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specalloc::config::RunConfig;
use specalloc::dataset::augment::{augment_far_pu, augment_rotate, FarPuConfig};
use specalloc::dataset::idw::{idw_interpolate, k_nearest, IdwDomain};
use specalloc::dataset::{label_scenario, sample_scenarios};
use specalloc::exec::Exec;
use specalloc::metrics::score_pairs;
use specalloc::multi_su::{binary_alloc, binary_alloc_observed};
use specalloc::oracle::optimal_power;
use specalloc::{
    ActiveSu, AllocationDecision, Location, LogDistance, LogDistanceParams, OracleConfig, PathLoss, PowerDbm,
    PrimaryUser, PuReceiver, Region, Scenario, SecondaryUser, SpectrumSensor,
};

const KNOWN_RED: &[&str] = &["binary-alloc-mirror", "augment-far-pu"];

type Check = fn() -> (bool, String);

fn main() {
    let checks: &[(&str, Check)] = &[
        ("oracle-brute-force", oracle_brute_force),
        ("analytic-fixture", analytic_fixture),
        ("binary-alloc-single-su", binary_alloc_single),
        ("binary-alloc-lower-ends", binary_alloc_lower_ends),
        ("binary-alloc-mirror", binary_alloc_mirror),
        ("monotonicity", monotonicity),
        ("augment-far-pu", augment_far_pu_rate),
        ("augment-rotation", augment_rotation),
        ("idw", idw),
        ("metrics", metrics),
        ("determinism", determinism),
        ("throughput", throughput),
        ("baselines", baselines),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut unexpected = 0;
    for &(name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => (false, format!("panicked: {}", panic_text(&e))),
        };
        let known = KNOWN_RED.contains(&name) && !strict;
        let tag = match (pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} {name} [{:.1?}]: {detail}", start.elapsed());
        if !pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

// ---------------------------------------------------------------- helpers

fn mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

fn exact_world() -> LogDistance {
    LogDistance::new(LogDistanceParams::default().deterministic(), &Region::default()).unwrap()
}

fn uniform_loc<R: Rng>(rng: &mut R) -> Location {
    Location::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0))
}

fn small_scenario<R: Rng>(rng: &mut R, max_pus: usize, max_purs: usize) -> (Scenario, SecondaryUser) {
    let mut s = Scenario::empty(Region::default(), rng.gen());
    let mut pur_id = 0;
    for id in 0..rng.gen_range(1..=max_pus) {
        let loc = uniform_loc(rng);
        let receivers = (0..rng.gen_range(1..=max_purs))
            .map(|_| {
                let r = rng.gen_range(1.0..50.0);
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                pur_id += 1;
                PuReceiver {
                    id: pur_id,
                    loc: Location::new((loc.x + r * t.cos()).clamp(0.0, 1000.0), (loc.y + r * t.sin()).clamp(0.0, 1000.0)),
                }
            })
            .collect();
        s.pus.push(PrimaryUser { id: id as u32, loc, tx_power: PowerDbm(rng.gen_range(-30.0..0.0)), receivers });
    }
    let su = SecondaryUser { id: 0, loc: uniform_loc(rng) };
    s.sus.push(su);
    (s, su)
}

/// Per PUR: (room left for SU power at the PUR in mW, SU-to-PUR loss per SU site).
fn pur_rooms(s: &Scenario, sites: &[Location], model: &dyn PathLoss, cfg: &OracleConfig) -> Vec<(f64, Vec<f64>)> {
    let beta = mw(cfg.beta_db);
    let mut out = Vec::new();
    for pu in &s.pus {
        for pur in &pu.receivers {
            let signal = mw(pu.tx_power.0 - model.loss_db(pu.loc, pur.loc));
            let mut heard = mw(cfg.noise_dbm);
            for o in s.pus.iter().filter(|o| o.id != pu.id) {
                heard += mw(o.tx_power.0 - model.loss_db(o.loc, pur.loc));
            }
            for a in &s.active_sus {
                heard += mw(a.power.0 - model.loss_db(a.loc, pur.loc));
            }
            out.push((signal / beta - heard, sites.iter().map(|&l| model.loss_db(l, pur.loc)).collect()));
        }
    }
    out
}

/// SNR holds at every PUR with `powers_dbm[k]` at site `k`; `None` is silence.
fn snr_ok(rooms: &[(f64, Vec<f64>)], powers_dbm: &[Option<f64>]) -> bool {
    rooms.iter().all(|(room, losses)| {
        let added: f64 = powers_dbm.iter().zip(losses).filter_map(|(p, l)| p.map(|p| mw(p - l))).sum();
        added <= *room
    })
}

fn grid(cfg: &OracleConfig, step: f64) -> Vec<f64> {
    let n = ((cfg.max_su_power_dbm - cfg.denial_floor_dbm) / step).round() as i64;
    (1..=n).map(|k| (cfg.denial_floor_dbm + k as f64 * step).min(cfg.max_su_power_dbm)).collect()
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_specalloc")
}

fn cli(args: &[&str]) {
    let out = Command::new(bin()).args(args).output().expect("run specalloc");
    assert!(
        out.status.success(),
        "specalloc {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Reads a report CSV into (algo, column -> value) rows.
fn report_rows(path: &Path) -> Vec<(String, std::collections::HashMap<String, String>)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            let map: std::collections::HashMap<String, String> =
                header.iter().zip(&cells).map(|(h, c)| (h.to_string(), c.to_string())).collect();
            (map["algo"].clone(), map)
        })
        .collect()
}

// ---------------------------------------------------------------- criteria

fn oracle_brute_force() -> (bool, String) {
    let start = Instant::now();
    let model = exact_world();
    let cfg = OracleConfig::default();
    let steps = grid(&cfg, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let (mut worst, mut granted) = (0.0f64, 0);
    for _ in 0..500 {
        let (s, su) = small_scenario(&mut rng, 3, 3);
        let got = optimal_power(&s, &su, &model, &cfg).decision;
        let rooms = pur_rooms(&s, &[su.loc], &model, &cfg);
        let best = steps.iter().copied().filter(|&q| snr_ok(&rooms, &[Some(q)])).fold(None, |m: Option<f64>, q| {
            Some(m.map_or(q, |m| m.max(q)))
        });
        granted += got.is_granted() as usize;
        let diff = (got.dbm_or(cfg.denial_floor_dbm) - best.unwrap_or(cfg.denial_floor_dbm)).abs();
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed();
    (
        worst <= 0.01 + 1e-9 && elapsed < Duration::from_secs(30),
        format!("500 scenarios ({granted} granted), max |oracle - grid| = {worst:.5} dB, {elapsed:.2?}"),
    )
}

/// Path loss looked up by endpoint pair, in either order.
struct Table(Vec<(Location, Location, f64)>);

impl PathLoss for Table {
    fn loss_db(&self, a: Location, b: Location) -> f64 {
        self.0
            .iter()
            .find(|(x, y, _)| (*x == a && *y == b) || (*x == b && *y == a))
            .map(|e| e.2)
            .expect("link in table")
    }
}

fn analytic_fixture() -> (bool, String) {
    let (pu, pur, su) = (Location::new(0.0, 0.0), Location::new(10.0, 0.0), Location::new(20.0, 0.0));
    let table = Table(vec![(pu, pur, 80.0), (su, pur, 70.0)]);
    let mut s = Scenario::empty(Region::default(), 0);
    s.pus.push(PrimaryUser { id: 0, loc: pu, tx_power: PowerDbm(0.0), receivers: vec![PuReceiver { id: 0, loc: pur }] });
    let cfg = OracleConfig { beta_db: 3.0, noise_dbm: -90.0, ..OracleConfig::default() };
    let got = optimal_power(&s, &SecondaryUser { id: 0, loc: su }, &table, &cfg).decision;
    match got.to_dbm() {
        Some(v) => ((v - (-13.967)).abs() <= 1e-3, format!("{v:.6} dBm (target -13.967 +- 0.001)")),
        None => (false, "denied".into()),
    }
}

fn binary_alloc_single() -> (bool, String) {
    let model = exact_world();
    let cfg = OracleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (s, su) = small_scenario(&mut rng, 3, 3);
        let exact = optimal_power(&s, &su, &model, &cfg).decision.dbm_or(cfg.denial_floor_dbm);
        let got = binary_alloc(&s, &[su], &model, &cfg, 0.1).unwrap().allocation.grants[0].1;
        worst = worst.max((exact - got.dbm_or(cfg.denial_floor_dbm)).abs());
    }
    (worst <= 0.1, format!("max |binary - oracle| = {worst:.4} dB over 200 scenarios"))
}

fn binary_alloc_lower_ends() -> (bool, String) {
    let model = exact_world();
    let cfg = OracleConfig::default();
    let mut states = 0usize;
    let mut violations = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for _ in 0..200 {
        let (s, _) = small_scenario(&mut rng, 3, 3);
        let sus: Vec<SecondaryUser> = (0..rng.gen_range(2..6)).map(|id| SecondaryUser { id, loc: uniform_loc(&mut rng) }).collect();
        let sites: Vec<Location> = sus.iter().map(|u| u.loc).collect();
        let rooms = pur_rooms(&s, &sites, &model, &cfg);
        if !snr_ok(&rooms, &vec![None; sus.len()]) {
            continue;
        }
        binary_alloc_observed(&s, &sus, &model, &cfg, 0.1, &mut |ranges| {
            let lo: Vec<Option<f64>> =
                ranges.iter().map(|r| (r.lo_dbm > cfg.denial_floor_dbm).then_some(r.lo_dbm)).collect();
            states += 1;
            violations += !snr_ok(&rooms, &lo) as usize;
        })
        .unwrap();
    }
    (violations == 0 && states > 0, format!("{violations} violations in {states} observed lower-end states"))
}

/// Two SUs mirrored about the PU/PUR axis, compared with the joint optimum on
/// a 0.1 dB grid: the feasible pair with the largest minimum grant, ties
/// broken by total power.
fn binary_alloc_mirror() -> (bool, String) {
    let model = exact_world();
    let cfg = OracleConfig::default();
    let mut s = Scenario::empty(Region::default(), 3);
    s.pus.push(PrimaryUser {
        id: 0,
        loc: Location::new(500.0, 500.0),
        tx_power: PowerDbm(0.0),
        receivers: vec![PuReceiver { id: 0, loc: Location::new(500.0, 520.0) }],
    });
    let sus = [
        SecondaryUser { id: 0, loc: Location::new(400.0, 520.0) },
        SecondaryUser { id: 1, loc: Location::new(600.0, 520.0) },
    ];
    let single = optimal_power(&s, &sus[0], &model, &cfg).decision.to_dbm().unwrap();
    let out = binary_alloc(&s, &sus, &model, &cfg, 0.1).unwrap();
    let q: Vec<f64> = sus.iter().map(|u| out.allocation.decision(u.id).unwrap().dbm_or(cfg.denial_floor_dbm)).collect();
    let rooms = pur_rooms(&s, &[sus[0].loc, sus[1].loc], &model, &cfg);
    let levels = grid(&cfg, 0.1);
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &a in &levels {
        for &b in &levels {
            if !snr_ok(&rooms, &[Some(a), Some(b)]) {
                continue;
            }
            let key = (a.min(b), mw(a) + mw(b));
            if best.is_none_or(|(m, t, _, _)| key.0 > m || (key.0 == m && key.1 > t)) {
                best = Some((key.0, key.1, a, b));
            }
        }
    }
    let (_, _, oa, ob) = best.unwrap();
    let dev = (q[0] - oa).abs().max((q[1] - ob).abs());
    (
        dev <= 0.1,
        format!(
            "grants ({:.3}, {:.3}) dBm vs joint optimum ({oa:.1}, {ob:.1}); single-SU grant {single:.3}; max deviation {dev:.3} dB",
            q[0], q[1]
        ),
    )
}

fn monotonicity() -> (bool, String) {
    let model = exact_world();
    let cfg = OracleConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let eval = |s: &Scenario, su: &SecondaryUser, c: &OracleConfig| {
        optimal_power(s, su, &model, c).decision.dbm_or(c.denial_floor_dbm)
    };
    let mut violations = [0usize; 4];
    for _ in 0..1000 {
        let (s, su) = small_scenario(&mut rng, 4, 3);
        let base = eval(&s, &su, &cfg);

        let stricter = OracleConfig { beta_db: cfg.beta_db + rng.gen_range(0.0..10.0), ..cfg };
        violations[0] += (eval(&s, &su, &stricter) > base + 1e-9) as usize;

        // Raising a PU other than the binding one; the binding PU's own
        // signal is part of its constraint.
        let binding = optimal_power(&s, &su, &model, &cfg).binding.map(|b| b.pu_id);
        if let (true, Some(k)) = (
            base > cfg.denial_floor_dbm,
            s.pus.iter().position(|p| Some(p.id) != binding),
        ) {
            let mut louder = s.clone();
            louder.pus[k].tx_power = PowerDbm(louder.pus[k].tx_power.0 + rng.gen_range(0.0..20.0));
            violations[1] += (eval(&louder, &su, &cfg) > base + 1e-9) as usize;
        }

        let mut more = s.clone();
        let at = uniform_loc(&mut rng);
        more.pus.push(PrimaryUser {
            id: 77,
            loc: at,
            tx_power: PowerDbm(rng.gen_range(-30.0..0.0)),
            receivers: vec![PuReceiver { id: 777, loc: Location::new((at.x + 25.0).min(1000.0), at.y) }],
        });
        violations[2] += (eval(&more, &su, &cfg) > base + 1e-9) as usize;

        let mut busy = s.clone();
        busy.active_sus.push(ActiveSu { id: 0, loc: uniform_loc(&mut rng), power: PowerDbm(rng.gen_range(-20.0..30.0)) });
        violations[3] += (eval(&busy, &su, &cfg) > base + 1e-9) as usize;
    }
    let total: usize = violations.iter().sum();
    (
        total == 0,
        format!("1000 trials; violations beta {} / pu power {} / extra pu {} / extra active su {}", violations[0], violations[1], violations[2], violations[3]),
    )
}

fn augment_far_pu_rate() -> (bool, String) {
    let run = RunConfig::default();
    let model = LogDistance::new(run.propagation, &run.region).unwrap();
    let scenarios = sample_scenarios(&run.sampler, &run.region, &model, &run.oracle, 0, 250, Exec::Parallel).unwrap();
    let far = FarPuConfig::default();
    let mut drifts = Vec::new();
    let mut kept = 0usize;
    for (i, s) in scenarios.iter().enumerate() {
        let label = label_scenario(s, i as u64, &model, &run.oracle).unwrap();
        let o = augment_far_pu(s, &label, &model, &run.oracle, &far).unwrap();
        drifts.extend(o.drifts_db);
        kept += o.kept.len();
    }
    drifts.sort_by(f64::total_cmp);
    let rate = kept as f64 / drifts.len().max(1) as f64;
    let median = drifts.get(drifts.len() / 2).copied().unwrap_or(f64::NAN);
    let flips = drifts.iter().filter(|d| d.is_infinite()).count();
    (
        !drifts.is_empty() && rate >= 0.95,
        format!(
            "{kept}/{} within {} dB = {:.1}% (need >= 95%; d_far {} m, delta {} dB); {flips} flipped grant to denial; median drift {median:.2} dB",
            drifts.len(),
            far.epsilon_db,
            100.0 * rate,
            far.d_far_m,
            far.delta_db
        ),
    )
}

fn augment_rotation() -> (bool, String) {
    let run = RunConfig::default();
    let exact = exact_world();
    let scenarios = sample_scenarios(&run.sampler, &run.region, &exact, &run.oracle, 0, 100, Exec::Parallel).unwrap();
    let mut worst = 0.0f64;
    let mut flips = 0;
    for s in &scenarios {
        let base = optimal_power(s, &s.sus[0], &exact, &run.oracle).decision;
        for deg in [90, 180, 270] {
            let r = augment_rotate(s, deg).unwrap();
            let got = optimal_power(&r, &r.sus[0], &exact, &run.oracle).decision;
            match (base.to_dbm(), got.to_dbm()) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => flips += 1,
            }
        }
    }
    (
        worst <= 1e-9 && flips == 0,
        format!("300 rotated samples, max label drift {worst:.2e} dB, {flips} grant/denial flips"),
    )
}

fn idw() -> (bool, String) {
    let sensors = [
        SpectrumSensor { id: 0, loc: Location::new(10.0, 0.0), reading: PowerDbm(-60.0) },
        SpectrumSensor { id: 1, loc: Location::new(100.0, 0.0), reading: PowerDbm(-90.0) },
    ];
    let v = idw_interpolate(&sensors, Location::new(0.0, 0.0), 2, IdwDomain::Dbm).unwrap().0;
    let fixture = v == -70.0;

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.gen_range(4..400);
        let pts: Vec<Location> = (0..n).map(|_| uniform_loc(&mut rng)).collect();
        let target = uniform_loc(&mut rng);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pts[a].distance(target).total_cmp(&pts[b].distance(target)).then(a.cmp(&b)));
        mismatches += (k_nearest(&pts, target, 4) != order[..4]) as usize;
    }
    (fixture && mismatches == 0, format!("fixture {v} dBm; 4-nearest mismatches {mismatches}/100 layouts"))
}

fn metrics() -> (bool, String) {
    let g = |v: f64| AllocationDecision::Granted(PowerDbm(v));
    let s = score_pairs(&[(0, g(-10.0)), (1, g(-12.0))], &[(0, g(-11.0)), (1, g(-11.0))], -100.0).unwrap();
    let fixture = s.a_err_db == 1.0 && s.a_fp_db == 0.5 && s.fp_rate == 0.5;

    // Oracle labels fed back through the CLI as predictions.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("ds");
    cli(&["gen", "--out", p(&d), "--count", "200", "--seed", "5"]);
    cli(&["label", "--out", p(&d)]);
    let labels = fs::read_to_string(d.join("labels.csv")).unwrap();
    let mut pred = String::from("sample_id,predicted_dbm,algo\n");
    for line in labels.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        pred.push_str(&format!("{},{},oracle\n", cells[0], cells[1]));
    }
    let pred_path = dir.path().join("oracle.csv");
    fs::write(&pred_path, pred).unwrap();
    let report = dir.path().join("report.csv");
    cli(&["eval", "--out", p(&d), "--pred", p(&pred_path), "--report", p(&report)]);
    let rows = report_rows(&report);
    let r = &rows[0].1;
    let zero = ["a_err_db", "a_fp_db", "fp_rate"].iter().all(|k| r[*k].parse::<f64>().unwrap() == 0.0);
    (
        fixture && zero,
        format!(
            "fixture a_err {} a_fp {} fp_rate {}; oracle-as-predictor a_err {} a_fp {} fp_rate {} on {} samples",
            s.a_err_db, s.a_fp_db, s.fp_rate, r["a_err_db"], r["a_fp_db"], r["fp_rate"], r["n"]
        ),
    )
}

fn determinism() -> (bool, String) {
    let root = tempfile::tempdir().unwrap();
    let build = |name: &str, jobs: &str| {
        let staged = root.path().join(format!("{name}-staged"));
        let pre = root.path().join(format!("{name}-pretrain"));
        let common = ["--seed", "42", "--jobs", jobs];
        cli(&[&["gen", "--out", p(&staged), "--count", "96"][..], &common].concat());
        cli(&[&["label", "--out", p(&staged)][..], &common].concat());
        cli(&[&["encode", "--out", p(&staged)][..], &common].concat());
        cli(&[&["pretrain-gen", "--out", p(&pre), "--count", "300"][..], &common].concat());
        (snapshot(&staged), snapshot(&pre))
    };
    let a = build("a", "1");
    let b = build("b", "1");
    let c = build("c", "8");
    let files = a.0.len() + a.1.len();
    let rerun = a == b;
    let jobs = a == c;
    (
        rerun && jobs && files > 0,
        format!("{files} files; rerun identical {rerun}; --jobs 1 vs --jobs 8 identical {jobs}"),
    )
}

fn throughput() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("ds");
    let start = Instant::now();
    cli(&["gen", "--out", p(&d), "--count", "2048", "--seed", "9"]);
    cli(&["label", "--out", p(&d)]);
    cli(&["encode", "--out", p(&d), "--sheets", "6", "--size", "100"]);
    let elapsed = start.elapsed();
    let ds_manifest = fs::read_to_string(d.join("manifest.json")).unwrap();
    let images = fs::read_dir(d.join("images")).unwrap().count();
    let ok_counts = ds_manifest.contains("\"images\": 2048") && images == 2048;
    (
        ok_counts && elapsed < Duration::from_secs(300),
        format!("2048 samples generated, labeled and encoded (7x100x100) in {elapsed:.2?} on {} threads", std::thread::available_parallelism().map_or(1, |n| n.get())),
    )
}

fn baselines() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();

    let d = dir.path().join("default");
    cli(&["gen", "--out", p(&d), "--count", "400", "--seed", "11"]);
    cli(&["label", "--out", p(&d)]);
    cli(&["baseline", "--out", p(&d), "--algo", "lbt"]);
    let report = dir.path().join("lbt.csv");
    cli(&["eval", "--out", p(&d), "--report", p(&report)]);
    let lbt_err: f64 = report_rows(&report)[0].1["a_err_db"].parse().unwrap();
    let preds = fs::read_to_string(d.join("predictions.csv")).unwrap();
    let rows: Vec<&str> = preds.lines().skip(1).collect();
    let denied = rows.iter().filter(|l| l.split(',').nth(1) == Some("")).count();
    let denial_rate = denied as f64 / rows.len() as f64;

    let exact_cfg = dir.path().join("exact.toml");
    fs::write(&exact_cfg, "[propagation]\nshadowing_sigma_db = 0.0\nfading_amplitude_db = 0.0\n").unwrap();
    let e = dir.path().join("exact");
    let conf = ["--config", p(&exact_cfg)];
    cli(&[&["gen", "--out", p(&e), "--count", "400", "--seed", "11"][..], &conf].concat());
    cli(&[&["label", "--out", p(&e)][..], &conf].concat());
    cli(&[&["baseline", "--out", p(&e), "--algo", "ipb"][..], &conf].concat());
    let report = dir.path().join("ipb.csv");
    cli(&["eval", "--out", p(&e), "--report", p(&report)]);
    let ipb_err: f64 = report_rows(&report)[0].1["a_err_db"].parse().unwrap();

    let pass = lbt_err > 15.0 && denial_rate >= 0.5 && ipb_err < 0.01;
    (
        pass,
        format!("LBT a_err {lbt_err:.2} dB, denies {:.1}% of 400; exact-model IP-Based a_err {ipb_err:.2e} dB", 100.0 * denial_rate),
    )
}
