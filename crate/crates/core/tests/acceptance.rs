//! Acceptance criteria, one pass/fail line each.
//!
//! Runs without the test harness. `HPRN_ACCEPTANCE=1,3,8` restricts the run to
//! the listed criteria; everything runs by default. Failures are always printed;
//! with `HPRN_ACCEPTANCE_STRICT=1` they also make the process exit non-zero.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hprn_core::dataset::{describe_session, simulate, Location, SimConfig};
use hprn_core::descriptor::{DescriptorConfig, Modality, PolarDescriptor, RadarPolarScan};
use hprn_core::evaluation::{evaluate, pr_curve, recall_at_1, EvalConfig, Top1};
use hprn_core::grid::Grid;
use hprn_core::io::*;
use hprn_core::net::{Architecture, NetParams, MAP_COLS, MAP_ROWS};
use hprn_core::retrieval::{coarse_to_fine_query, nearest_neighbours};
use hprn_core::spectral::{signature, signature_distance, SpectralSignature};
use hprn_core::submap::{submap_bounds, SubmapConfig};
use hprn_core::train::{batch_gradients, train, AdamState, LossMode, Model, Pairing, TrainConfig, TrainState, TripletSample};
use hprn_core::trajectory::{angular_difference, Pose2D, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn random_descriptor(rng: &mut ChaCha8Rng) -> Grid {
    let density = rng.random_range(0.02..0.3);
    Grid::from_fn(MAP_ROWS, MAP_COLS, |_, _| if rng.random_bool(density) { rng.random_range(0.0..1.0) } else { 0.0 })
}

// ---------------------------------------------------------------------------
// Shared synthetic experiment: one seeded world, both training modes.

struct Experiment {
    map: Vec<Location>,
    query: Vec<Location>,
    joint: TrainState,
    joint_secs: f64,
    separate: TrainState,
    separate_secs: f64,
}

fn locations() -> (Vec<Location>, Vec<Location>) {
    let run = simulate(&SimConfig { seed: 0, ..Default::default() }).expect("simulation");
    let (s, d) = (SubmapConfig::default(), DescriptorConfig::default());
    (describe_session(&run.map, &s, &d).expect("map"), describe_session(&run.query, &s, &d).expect("query"))
}

fn experiment() -> Experiment {
    let (map, query) = locations();
    let t = Instant::now();
    let joint = train(&map, &TrainConfig { loss_mode: LossMode::Joint, seed: 0, ..Default::default() }).expect("joint training");
    let joint_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let separate =
        train(&map, &TrainConfig { loss_mode: LossMode::Separate, seed: 0, ..Default::default() }).expect("separate training");
    let separate_secs = t.elapsed().as_secs_f64();
    Experiment { map, query, joint, joint_secs, separate, separate_secs }
}

fn recalls(model: &Model, map: &[Location], query: &[Location]) -> [f64; 3] {
    let sig = |locs: &[Location], m| model.signatures(locs, m).expect("signatures");
    let (ml, mr, qr, ql) = (sig(map, Modality::Lidar), sig(map, Modality::Radar), sig(query, Modality::Radar), sig(query, Modality::Lidar));
    let mp: Vec<Pose2D> = map.iter().map(|l| l.pose).collect();
    let qp: Vec<Pose2D> = query.iter().map(|l| l.pose).collect();
    let r = |q: &[SpectralSignature], db: &[SpectralSignature]| {
        recall_at_1(&nearest_neighbours(q, db).expect("retrieval"), &qp, &mp, 3.0).expect("recall")
    };
    [r(&qr, &ml), r(&ql, &ml), r(&qr, &mr)]
}

// ---------------------------------------------------------------------------

fn c1_rotation_invariance() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = random_descriptor(&mut rng);
        let k = rng.random_range(0..MAP_COLS as i64) as isize;
        let a = signature(&d).unwrap();
        let b = signature(&d.shift_columns(k)).unwrap();
        worst = worst.max(a.values.max_abs_diff(&b.values));
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(worst < 1e-9 && secs < 10.0, format!("max |diff| {worst:.2e} over 1000 shifts (< 1e-9), {secs:.1}s (< 10s)"))
}

fn c2_equivariance(exp: &Experiment) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = NetParams::init(2, Architecture::standard());
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = random_descriptor(&mut rng);
        let a = net.embed(&x.shift_columns(4)).unwrap();
        let b = net.embed(&x).unwrap().shift_columns(4);
        worst = worst.max(a.max_abs_diff(&b));
    }
    // Drift of the trained model's signatures under arbitrary sector shifts,
    // broken down by shift residue modulo the network stride.
    let mut by_residue = [0.0f64; 4];
    let mut total = 0.0;
    let mut n = 0;
    for loc in exp.query.iter().step_by(6) {
        for m in [Modality::Radar, Modality::Lidar] {
            let k = rng.random_range(1..MAP_COLS as i64) as isize;
            let a = exp.joint.model.signature(m, loc.descriptor(m)).unwrap();
            let b = exp.joint.model.signature(m, &loc.descriptor(m).shift_columns(k)).unwrap();
            let d = signature_distance(&a, &b).unwrap();
            let r = &mut by_residue[k.rem_euclid(4) as usize];
            *r = r.max(d);
            total += d;
            n += 1;
        }
    }
    let drift = by_residue.iter().cloned().fold(0.0, f64::max);
    verdict(
        worst < 1e-6 && drift < 0.05,
        format!(
            "shift-4 error {worst:.2e} (< 1e-6); trained drift max {drift:.4} (< 0.05), mean {:.4} over {n}; max by shift mod 4: {:.4?}",
            total / n as f64,
            by_residue
        ),
    )
}

/// Batch loss evaluated forward-only from its definition: the hinge averaged
/// over all eight modality assignments, plus `alpha` times the mean radar to
/// lidar distance of the three places, averaged over triplets.
fn reference_loss(model: &Model, data: &[Location], triplets: &[TripletSample], margin: f64, alpha: Option<f64>) -> f64 {
    let dist = |a: &SpectralSignature, b: &SpectralSignature| signature_distance(a, b).unwrap();
    let mut total = 0.0;
    for t in triplets {
        // sig[place][modality], place = anchor/positive/negative, modality 0 = radar.
        let sig: Vec<[SpectralSignature; 2]> = [t.anchor, t.positive, t.negative]
            .iter()
            .map(|&i| {
                let l = &data[i];
                [model.signature(Modality::Radar, l.descriptor(Modality::Radar)).unwrap(), model.signature(Modality::Lidar, l.descriptor(Modality::Lidar)).unwrap()]
            })
            .collect();
        let mut hinge = 0.0;
        for (ma, mp, mn) in (0..8).map(|b| (b & 1, (b >> 1) & 1, (b >> 2) & 1)) {
            hinge += (margin + dist(&sig[0][ma], &sig[1][mp]) - dist(&sig[0][ma], &sig[2][mn])).max(0.0);
        }
        let mut l = hinge / 8.0;
        if let Some(a) = alpha {
            l += a * sig.iter().map(|s| dist(&s[0], &s[1])).sum::<f64>() / 3.0;
        }
        total += l;
    }
    total / triplets.len() as f64
}

fn c3_gradients() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<Location> = (0..8)
        .map(|i| Location {
            pose: Pose2D::new(i as f64, 10.0 * i as f64, 0.0, 0.0),
            lidar: PolarDescriptor { modality: Modality::Lidar, values: random_descriptor(&mut rng) },
            radar: PolarDescriptor { modality: Modality::Radar, values: random_descriptor(&mut rng) },
        })
        .collect();
    // Zero biases on sparse inputs park whole regions exactly on the ReLU kink,
    // so check at a generic point instead.
    let mut model = Model::init(3, Architecture::reduced(), false);
    if let Model::Shared(net) = &mut model {
        for b in net.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
            *b = rng.random_range(-0.05f32..0.05) as f64;
        }
    }
    let triplets = [TripletSample { anchor: 0, positive: 1, negative: 6 }, TripletSample { anchor: 7, positive: 7, negative: 2 }];
    let (h, floor, wanted) = (1e-5, 1e-6, 220);
    let mut details = Vec::new();
    let mut pass = true;
    for (name, alpha) in [("triplet", None), ("combined", Some(0.2))] {
        let loss = |m: &Model| reference_loss(m, &data, &triplets, 1.0, alpha);
        let analytic = batch_gradients(&model, &data, &triplets, Pairing::Joint, 1.0, alpha).unwrap().grads[0].flat_values();
        let central = |k: usize, h: f64| {
            let at = |s: f64| {
                let mut m = model.clone();
                if let Model::Shared(net) = &mut m {
                    *net.flat_mut(k) += s;
                }
                loss(&m)
            };
            (at(h) - at(-h)) / (2.0 * h)
        };
        let rel = |fd: f64, a: f64, floor: f64| (fd - a).abs() / fd.abs().max(a.abs()).max(floor);
        let order = rand::seq::index::sample(&mut rng, analytic.len(), analytic.len());
        let (mut worst, mut checked, mut kinked) = (0.0f64, 0, 0);
        for k in order.iter() {
            if checked == wanted {
                break;
            }
            let fd = central(k, h);
            // A kink inside the stencil shows up as disagreement with a tenth of the step.
            if rel(fd, central(k, h / 10.0), 1e-4) > 1e-5 {
                kinked += 1;
                continue;
            }
            worst = worst.max(rel(fd, analytic[k], floor));
            checked += 1;
        }
        pass &= checked == wanted && kinked * 10 <= wanted;
        pass &= worst < 1e-4;
        details.push(format!("{name}: max rel err {worst:.2e} over {checked} params, {kinked} skipped at kinks"));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(pass, format!("{}; h {h:e}, denominator floor {floor:e}; {secs:.1}s (< 60s)", details.join("; ")))
}

/// Random walk with enough turning to trigger the heading bound.
fn random_trajectory(rng: &mut ChaCha8Rng, n: usize) -> Trajectory {
    let (mut x, mut y, mut yaw) = (0.0f64, 0.0f64, 0.0f64);
    let poses = (0..n)
        .map(|i| {
            let p = Pose2D::new(i as f64 * 0.1, x, y, yaw);
            let step = rng.random_range(0.0..2.0);
            x += step * yaw.cos();
            y += step * yaw.sin();
            yaw += rng.random_range(-0.15..0.15);
            p
        })
        .collect();
    Trajectory::new(poses, "walk").unwrap()
}

fn c4_submap_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = SubmapConfig::default();
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..100 {
        let traj = random_trajectory(&mut rng, 500);
        let p = traj.poses();
        let ok = |c: usize, k: usize| {
            p[c].planar_distance(&p[k]) <= cfg.r_max && angular_difference(p[c].yaw, p[k].yaw) <= cfg.theta_max
        };
        for c in 0..p.len() {
            // Exhaustive: the nearest violating index on each side bounds the window.
            let start = (0..c).filter(|&k| !ok(c, k)).max().map_or(0, |k| k + 1);
            let end = (c + 1..p.len()).filter(|&k| !ok(c, k)).min().map_or(p.len() - 1, |k| k - 1);
            let b = submap_bounds(&traj, c, &cfg).unwrap();
            total += 1;
            agree += usize::from(b.start_index == start && b.end_index == end);
        }
    }
    verdict(agree == total, format!("{agree}/{total} centers agree (100% required)"))
}

fn c5_joint_vs_separate(exp: &Experiment) -> Verdict {
    let [jr2l, jl2l, jr2r] = recalls(&exp.joint.model, &exp.map, &exp.query);
    let [sr2l, sl2l, sr2r] = recalls(&exp.separate.model, &exp.map, &exp.query);
    let pass = jr2l >= 80.0
        && jl2l >= 90.0
        && jr2r >= 85.0
        && sr2l <= 20.0
        && sl2l >= 85.0
        && sr2r >= 85.0
        && exp.joint_secs <= 900.0
        && exp.separate_secs <= 900.0;
    let matchable = exp.query.iter().filter(|q| exp.map.iter().any(|m| q.pose.planar_distance(&m.pose) <= 3.0)).count();
    verdict(
        pass,
        format!(
            "{matchable}/{} queries matchable; joint R2L {jr2l:.1} L2L {jl2l:.1} R2R {jr2r:.1} ({:.0}s); separate R2L {sr2l:.1} L2L {sl2l:.1} R2R {sr2r:.1} ({:.0}s)",
            exp.query.len(),
            exp.joint_secs,
            exp.separate_secs
        ),
    )
}

fn c6_scan_context(exp: &Experiment) -> Verdict {
    let mp: Vec<Pose2D> = exp.map.iter().map(|l| l.pose).collect();
    let qp: Vec<Pose2D> = exp.query.iter().map(|l| l.pose).collect();
    let lidar_db: Vec<PolarDescriptor> = exp.map.iter().map(|l| l.lidar.clone()).collect();
    let run = |m: Modality| {
        let results: Vec<Top1> = exp
            .query
            .iter()
            .map(|l| {
                let q = if m == Modality::Lidar { &l.lidar } else { &l.radar };
                let (index, distance) = coarse_to_fine_query(&lidar_db, q, 0.01).unwrap();
                Top1 { index, distance }
            })
            .collect();
        recall_at_1(&results, &qp, &mp, 3.0).unwrap()
    };
    let (l2l, r2l) = (run(Modality::Lidar), run(Modality::Radar));
    verdict(l2l >= 80.0 && r2l <= 20.0, format!("L2L {l2l:.1} (>= 80), R2L {r2l:.1} (<= 20)"))
}

fn c7_loss_decrease(exp: &Experiment) -> Verdict {
    let h = &exp.joint.history;
    let w = 100.min(h.len());
    let mean = |rows: &[hprn_core::train::HistoryRow]| rows.iter().map(|r| r.loss).sum::<f64>() / rows.len() as f64;
    let (first, last) = (mean(&h[..w]), mean(&h[h.len() - w..]));
    verdict(last <= 0.5 * first, format!("first-window mean {first:.4}, last-window mean {last:.4}, ratio {:.3} (<= 0.5)", last / first))
}

/// Brute-force metrics written from the definitions, independent of the library.
fn oracle_metrics(dist: &[Vec<f64>], qp: &[Pose2D], dp: &[Pose2D], cfg: &EvalConfig) -> (Vec<Top1>, f64, Vec<(f64, f64, f64)>, f64) {
    let near = |a: &Pose2D, b: &Pose2D| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() <= cfg.distance_threshold;
    let mut tops = Vec::new();
    for row in dist {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] < row[best] {
                best = j;
            }
        }
        tops.push(Top1 { index: best, distance: row[best] });
    }
    let correct: Vec<bool> = tops.iter().zip(qp).map(|(t, q)| near(q, &dp[t.index])).collect();
    let recall = 100.0 * correct.iter().filter(|c| **c).count() as f64 / qp.len() as f64;
    let positives = qp.iter().filter(|q| dp.iter().any(|p| near(q, p))).count();
    let ds: Vec<f64> = tops.iter().map(|t| t.distance).collect();
    let lo = ds.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = cfg.pr_thresholds;
    let mut curve = Vec::new();
    let mut best_f1 = 0.0f64;
    for k in 0..n {
        let tau = if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
        let accepted: Vec<usize> = (0..ds.len()).filter(|&i| ds[i] <= tau).collect();
        let tp = accepted.iter().filter(|&&i| correct[i]).count();
        let precision = if accepted.is_empty() { 1.0 } else { tp as f64 / accepted.len() as f64 };
        let recall_t = if positives == 0 { 0.0 } else { tp as f64 / positives as f64 };
        let f1 = if precision + recall_t > 0.0 { 2.0 * precision * recall_t / (precision + recall_t) } else { 0.0 };
        best_f1 = best_f1.max(f1);
        curve.push((tau, precision, recall_t));
    }
    (tops, recall, curve, best_f1)
}

fn c8_metric_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = EvalConfig::default();
    let mut exact = 0;
    let mut monotone = true;
    for _ in 0..20 {
        let qp: Vec<Pose2D> = (0..50).map(|i| Pose2D::new(i as f64, rng.random_range(0.0..40.0), rng.random_range(0.0..40.0), 0.0)).collect();
        let dp: Vec<Pose2D> = (0..50).map(|i| Pose2D::new(i as f64, rng.random_range(0.0..40.0), rng.random_range(0.0..40.0), 0.0)).collect();
        let dist: Vec<Vec<f64>> = (0..50).map(|_| (0..50).map(|_| rng.random_range(0.0..2.0)).collect()).collect();
        let (tops, recall, curve, f1) = oracle_metrics(&dist, &qp, &dp, &cfg);
        let m = evaluate(&tops, &qp, &dp, &cfg).unwrap();
        let same_curve = m.curve.len() == curve.len()
            && m.curve.iter().zip(&curve).all(|(p, o)| p.threshold == o.0 && p.precision == o.1 && p.recall == o.2);
        exact += usize::from(m.recall_at_1 == recall && m.max_f1 == f1 && same_curve);
        monotone &= m.curve.windows(2).all(|w| w[0].recall <= w[1].recall);
        // The library's own sweep over the same inputs must agree too.
        let correct: Vec<bool> = tops.iter().zip(&qp).map(|(t, q)| q.planar_distance(&dp[t.index]) <= 3.0).collect();
        let has: Vec<bool> = qp.iter().map(|q| dp.iter().any(|p| q.planar_distance(p) <= 3.0)).collect();
        let ds: Vec<f64> = tops.iter().map(|t| t.distance).collect();
        monotone &= pr_curve(&ds, &correct, &has, &cfg).unwrap().points.windows(2).all(|w| w[0].recall <= w[1].recall);
    }
    verdict(exact == 20 && monotone, format!("{exact}/20 instances match exactly; recall monotone: {monotone}"))
}

fn cli(args: &[&str]) -> i32 {
    hprn_core::cli::run(std::iter::once("hprn").chain(args.iter().copied()))
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn pipeline(root: &Path) -> bool {
    let r = root.to_str().unwrap();
    let p = |s: &str| format!("{r}/{s}");
    let cfg = p("run.cfg");
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(&cfg, "pose-count = 240\nmap-poses = 160\nepochs = 2\nsamples-per-epoch = 48\nbatch-size = 8\n").unwrap();
    let steps: [Vec<String>; 9] = [
        vec!["simulate".into(), "--config".into(), cfg.clone(), "--seed".into(), "9".into(), "--output".into(), p("sim")],
        vec!["submap".into(), "--input".into(), p("sim/map"), "--output".into(), p("submap"), "--index".into(), "80".into()],
        vec!["describe".into(), "--input".into(), p("sim/map"), "--output".into(), p("desc/map")],
        vec!["describe".into(), "--input".into(), p("sim/query"), "--output".into(), p("desc/query")],
        vec!["train".into(), "--config".into(), cfg.clone(), "--seed".into(), "9".into(), "--input".into(), p("desc/map"), "--output".into(), p("model")],
        vec!["embed".into(), "--model".into(), p("model/model.hprn"), "--input".into(), p("desc/map"), "--output".into(), p("sig/map")],
        vec!["embed".into(), "--model".into(), p("model/model.hprn"), "--input".into(), p("desc/query"), "--output".into(), p("sig/query")],
        vec!["retrieve".into(), "--database".into(), p("sig/map"), "--query".into(), p("sig/query"), "--output".into(), p("ret")],
        vec!["eval".into(), "--input".into(), p("ret"), "--output".into(), p("eval")],
    ];
    steps.iter().all(|s| cli(&s.iter().map(String::as_str).collect::<Vec<_>>()) == 0)
}

fn c9_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    if !(pipeline(&a) && pipeline(&b)) {
        return verdict(false, "pipeline step failed".into());
    }
    let (fa, fb) = (files(&a), files(&b));
    let have_all = ["model/model.hprn", "model/epoch_002.hprn", "eval/metrics.csv", "eval/pr_curve.csv"].iter().all(|f| fa.contains_key(*f));
    let differing: Vec<&String> = fa.keys().filter(|k| fb.get(*k) != fa.get(*k)).collect();
    verdict(
        have_all && fa.len() == fb.len() && differing.is_empty(),
        format!("{} files compared, {} differ; reduced pipeline config", fa.len(), differing.len()),
    )
}

fn flip(bytes: &[u8], positions: &[usize], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = bytes.to_vec();
    let at = positions[rng.random_range(0..positions.len())];
    out[at] ^= rng.random_range(1..=255u8);
    out
}

fn f32v(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-10.0f32..10.0) as f64).collect()
}

fn c10_formats() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut lossless = [0usize; 5];
    let mut caught = [0usize; 5];
    for _ in 0..1000 {
        let n = rng.random_range(0..40);
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-5.0..5.0)]).collect();
        let b = encode_cloud(&pts);
        lossless[0] += usize::from(decode_cloud(&b).unwrap() == pts);
        caught[0] += usize::from(decode_cloud(&flip(&b, &(0..16).collect::<Vec<_>>(), &mut rng)).is_err());

        let (na, nr) = (rng.random_range(1..30), rng.random_range(1..30));
        let intensities = (0..na * nr).map(|_| rng.random_range(0.0f32..=1.0) as f64).collect();
        let scan = RadarPolarScan::new(na, nr, rng.random_range(0.05..1.0), intensities).unwrap();
        let b = encode_scan(&scan).unwrap();
        lossless[1] += usize::from(decode_scan(&b).unwrap() == scan);
        caught[1] += usize::from(decode_scan(&flip(&b, &(0..16).collect::<Vec<_>>(), &mut rng)).is_err());

        let (r, c) = (rng.random_range(1..20), rng.random_range(1..20));
        let modality = if rng.random_bool(0.5) { Modality::Radar } else { Modality::Lidar };
        let d = PolarDescriptor { modality, values: Grid::from_vec(r, c, f32v(&mut rng, r * c)).unwrap() };
        let b = encode_descriptor(&d).unwrap();
        lossless[2] += usize::from(decode_descriptor(&b).unwrap() == d);
        let shape: Vec<usize> = (0..8).chain(9..17).collect();
        caught[2] += usize::from(decode_descriptor(&flip(&b, &shape, &mut rng)).is_err());

        let s = SpectralSignature { values: Grid::from_vec(r, c, f32v(&mut rng, r * c)).unwrap() };
        let b = encode_signature(&s).unwrap();
        lossless[3] += usize::from(decode_signature(&b).unwrap() == s && encode_signature(&decode_signature(&b).unwrap()).unwrap() == b);
        caught[3] += usize::from(decode_signature(&flip(&b, &(0..16).collect::<Vec<_>>(), &mut rng)).is_err());

        let widths = [rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4)];
        let model = Model::init(rng.random(), Architecture { widths }, rng.random_bool(0.5));
        let step = rng.random_range(0..1_000_000u64);
        let optimizers = model
            .nets()
            .iter()
            .map(|net| {
                let mut o = AdamState::new(net.parameter_count());
                o.step = step;
                o.m = f32v(&mut rng, o.m.len());
                o.v = f32v(&mut rng, o.v.len()).into_iter().map(f64::abs).collect();
                o
            })
            .collect();
        let state = TrainState { model, optimizers, step, epoch: 0, seed: rng.random(), history: Vec::new() };
        let b = encode_checkpoint(&state).unwrap();
        lossless[4] += usize::from(decode_checkpoint(&b).unwrap() == state);
        // Header, layer count and every layer's shape block.
        let mut region: Vec<usize> = (0..8).chain(24..28).collect();
        let mut at = 28;
        for net in state.model.nets() {
            for l in &net.layers {
                region.extend(at..at + 16);
                at += 16 + 4 * (l.weights.len() + l.bias.len());
            }
        }
        caught[4] += usize::from(decode_checkpoint(&flip(&b, &region, &mut rng)).is_err());
    }
    let names = ["cloud", "scan", "descriptor", "signature", "checkpoint"];
    let detail: Vec<String> = names.iter().enumerate().map(|(i, n)| format!("{n} {}/{}", lossless[i], caught[i])).collect();
    verdict(
        lossless.iter().all(|&v| v == 1000) && caught.iter().all(|&v| v == 1000),
        format!("round-trip/corruption-caught per 1000: {}", detail.join(", ")),
    )
}

fn main() {
    let selected: Option<Vec<u32>> =
        std::env::var("HPRN_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wants = |id: u32| selected.as_ref().is_none_or(|s| s.contains(&id));
    let needs_experiment = [2, 5, 6, 7].iter().any(|&i| wants(i));
    let exp = needs_experiment.then(experiment);

    let names = [
        "rotation invariance",
        "network equivariance",
        "gradient correctness",
        "submap oracle equivalence",
        "joint vs separate training",
        "scan context baseline",
        "loss decrease",
        "metric oracles",
        "determinism",
        "format round-trips",
    ];
    let mut failed = 0;
    for id in 1..=10u32 {
        if !wants(id) {
            println!("SKIP {id:>2} {}", names[id as usize - 1]);
            continue;
        }
        let t = Instant::now();
        let v = match id {
            1 => c1_rotation_invariance(),
            2 => c2_equivariance(exp.as_ref().unwrap()),
            3 => c3_gradients(),
            4 => c4_submap_oracle(),
            5 => c5_joint_vs_separate(exp.as_ref().unwrap()),
            6 => c6_scan_context(exp.as_ref().unwrap()),
            7 => c7_loss_decrease(exp.as_ref().unwrap()),
            8 => c8_metric_oracles(),
            9 => c9_determinism(),
            _ => c10_formats(),
        };
        failed += usize::from(!v.pass);
        println!(
            "{} {id:>2} {}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            names[id as usize - 1],
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        if std::env::var("HPRN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    } else {
        println!("all selected criteria passed");
    }
}
