//! Command-line pipeline: `simulate`, `submap`, `describe`, `train`, `embed`,
//! `retrieve`, `eval` and `loops`.
//!
//! Every setting is a key of one flat table. Its value comes from the `--key`
//! flag if given, else from the `--config` file, else from the built-in
//! default. Exit status is 0 on success, 1 on usage errors and 2 on data errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Arg, ArgMatches, Command};

use crate::dataset::{describe_session, simulate, Location, SimConfig};
use crate::descriptor::{DescriptorConfig, Modality, PolarDescriptor};
use crate::error::Error;
use crate::evaluation::{detect_loops, evaluate, EvalConfig, Top1};
use crate::io::{self, atomic_write, indexed_path, read_indexed};
use crate::net::Architecture;
use crate::retrieval::{similarity_matrix, DatabaseEntry, SignatureDatabase};
use crate::spectral::SpectralSignature;
use crate::submap::{build_submap, submap_bounds, SubmapConfig};
use crate::train::{history_csv, train_with, LossMode, TrainConfig};
use crate::trajectory::{Pose2D, Trajectory};

/// Failure of a CLI invocation, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// One configurable key: name, default (`None` means required where used) and help.
struct Key {
    name: &'static str,
    default: Option<&'static str>,
    help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(default), help }
}

const KEYS: &[Key] = &[
    Key { name: "seed", default: None, help: "Master seed (required by simulate and train)" },
    key("pose-count", "900", "Poses in the simulated trajectory"),
    key("map-poses", "600", "Leading poses that form the map session"),
    key("world-extent", "400", "Side of the square simulated world, meters"),
    key("wall-count", "60", "Walls in the simulated world"),
    key("pole-count", "200", "Poles in the simulated world"),
    key("lidar-noise", "0.02", "Lidar range noise standard deviation, meters"),
    key("radar-speckle", "0.05", "Radar multiplicative speckle standard deviation"),
    key("radar-streak", "0.1", "Probability of a saturated radar azimuth streak per scan"),
    key("radar-ghost", "0.02", "Probability of a multipath ghost per radar return"),
    key("submap-radius", "80", "Maximum distance of a submap pose from its center, meters"),
    key("submap-heading", "1.5707963267948966", "Maximum heading change within a submap, radians"),
    key("rings", "40", "Descriptor rings"),
    key("sectors", "120", "Descriptor sectors"),
    key("max-range", "80", "Descriptor radius, meters"),
    key("margin", "1.0", "Triplet margin"),
    key("alpha", "0.2", "Weight of the cross-modal term in combined mode"),
    key("learning-rate", "0.001", "Initial Adam learning rate"),
    key("lr-decay", "0.9", "Learning-rate factor applied after each epoch"),
    key("batch-size", "16", "Triplets per step"),
    key("epochs", "6", "Training epochs"),
    key("samples-per-epoch", "1400", "Triplets drawn per epoch"),
    key("d-pos", "3", "Maximum anchor-positive distance, meters"),
    key("d-neg", "25", "Minimum anchor-negative distance, meters"),
    key("loss-mode", "joint", "joint, combined or separate"),
    key("two-networks", "false", "Separate radar and lidar encoders"),
    key("arch", "standard", "standard or reduced network width"),
    key("query-modality", "radar", "Modality of the query signatures"),
    key("database-modality", "lidar", "Modality of the database signatures"),
    key("top-k", "1", "Matches listed per query"),
    key("match-distance", "3", "Distance under which a retrieval is correct, meters"),
    key("pr-thresholds", "200", "Thresholds in the precision-recall sweep"),
    key("loop-threshold", "-0.5", "Minimum similarity (negative distance) of a loop"),
    key("exclusion-window", "50", "Loop candidates closer than this many poses are ignored"),
];

/// Resolved key values after layering defaults, config file and flags.
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    /// Layers `file` over the defaults and `flags` over both.
    pub fn resolve(file: &BTreeMap<String, String>, flags: &BTreeMap<String, String>) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for k in KEYS {
            if let Some(d) = k.default {
                values.insert(k.name, d.to_string());
            }
        }
        for layer in [file, flags] {
            for (name, v) in layer {
                let k = KEYS.iter().find(|k| k.name == name).ok_or_else(|| {
                    let valid: Vec<&str> = KEYS.iter().map(|k| k.name).collect();
                    CliError::Usage(format!("unknown configuration key `{name}`; valid keys: {}", valid.join(", ")))
                })?;
                values.insert(k.name, v.clone());
            }
        }
        Ok(Self { values })
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, name: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(name).ok_or_else(|| CliError::Usage(format!("missing required --{name}")))?;
        raw.parse().map_err(|e| CliError::Usage(format!("invalid value {raw:?} for --{name}: {e}")))
    }

    fn sim(&self) -> CliResult<SimConfig> {
        let mut c = SimConfig { seed: self.get("seed")?, pose_count: self.get("pose-count")?, map_poses: self.get("map-poses")?, ..Default::default() };
        c.world.extent = self.get("world-extent")?;
        c.world.wall_count = self.get("wall-count")?;
        c.world.pole_count = self.get("pole-count")?;
        c.sensors.lidar_noise = self.get("lidar-noise")?;
        c.sensors.speckle = self.get("radar-speckle")?;
        c.sensors.streak_probability = self.get("radar-streak")?;
        c.sensors.ghost_probability = self.get("radar-ghost")?;
        c.validate().map_err(usage)?;
        Ok(c)
    }

    fn submap(&self) -> CliResult<SubmapConfig> {
        let c = SubmapConfig { r_max: self.get("submap-radius")?, theta_max: self.get("submap-heading")?, ..Default::default() };
        c.validate().map_err(usage)?;
        Ok(c)
    }

    fn descriptor(&self) -> CliResult<DescriptorConfig> {
        let c = DescriptorConfig { rings: self.get("rings")?, sectors: self.get("sectors")?, r_max: self.get("max-range")? };
        c.validate().map_err(usage)?;
        Ok(c)
    }

    fn train(&self) -> CliResult<TrainConfig> {
        let arch = match self.raw("arch") {
            Some("standard") => Architecture::standard(),
            Some("reduced") => Architecture::reduced(),
            other => return Err(CliError::Usage(format!("invalid --arch {other:?}; expected standard or reduced"))),
        };
        let c = TrainConfig {
            margin: self.get("margin")?,
            alpha: self.get("alpha")?,
            learning_rate: self.get("learning-rate")?,
            lr_decay: self.get("lr-decay")?,
            batch_size: self.get("batch-size")?,
            epochs: self.get("epochs")?,
            samples_per_epoch: self.get("samples-per-epoch")?,
            d_pos: self.get("d-pos")?,
            d_neg: self.get("d-neg")?,
            loss_mode: self.get::<LossMode>("loss-mode")?,
            two_networks: self.get("two-networks")?,
            arch,
            seed: self.get("seed")?,
        };
        c.validate().map_err(usage)?;
        Ok(c)
    }

    fn eval(&self) -> CliResult<EvalConfig> {
        let c = EvalConfig {
            distance_threshold: self.get("match-distance")?,
            pr_thresholds: self.get("pr-thresholds")?,
            exclusion_window: self.get("exclusion-window")?,
        };
        c.validate().map_err(usage)?;
        Ok(c)
    }

    /// All resolved values as a config file, for provenance next to outputs.
    fn to_text(&self) -> String {
        io::format_key_values(self.values.iter().map(|(k, v)| (*k, v.clone())))
    }
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn path_arg(name: &'static str, help: &'static str) -> Arg {
    Arg::new(name).long(name).value_name("PATH").value_parser(clap::value_parser!(PathBuf)).help(help)
}

/// The full command definition, including one global flag per key.
pub fn command() -> Command {
    let mut root = Command::new("hprn")
        .about("Radar/lidar place recognition pipeline")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(path_arg("config", "Key = value configuration file").global(true));
    for k in KEYS {
        let help = match k.default {
            Some(d) => format!("{} [default: {d}]", k.help),
            None => k.help.to_string(),
        };
        root = root.arg(Arg::new(k.name).long(k.name).value_name("VALUE").allow_hyphen_values(true).help(help).global(true).help_heading("Settings"));
    }
    let output = || path_arg("output", "Output directory").required(true);
    let input = |help| path_arg("input", help).required(true);
    root.subcommand(Command::new("simulate").about("Generate a world and a map/query session pair").arg(output()))
        .subcommand(
            Command::new("submap")
                .about("Compute submap bounds of a session, optionally writing one accumulated cloud")
                .arg(input("Session directory"))
                .arg(output())
                .arg(Arg::new("index").long("index").value_name("POSE").value_parser(clap::value_parser!(usize)).help("Also write the submap cloud centered here")),
        )
        .subcommand(Command::new("describe").about("Build radar and lidar descriptors of a session").arg(input("Session directory")).arg(output()))
        .subcommand(Command::new("train").about("Train the encoder on a described session").arg(input("Descriptor directory")).arg(output()))
        .subcommand(
            Command::new("embed")
                .about("Compute signatures of described locations")
                .arg(path_arg("model", "Checkpoint file").required(true))
                .arg(input("Descriptor directory"))
                .arg(output()),
        )
        .subcommand(
            Command::new("retrieve")
                .about("Match query signatures against a database")
                .arg(path_arg("database", "Signature directory of the database").required(true))
                .arg(path_arg("query", "Signature directory of the queries").required(true))
                .arg(output()),
        )
        .subcommand(Command::new("eval").about("Recall@1 and precision-recall of a retrieval").arg(input("Retrieval directory")).arg(output()))
        .subcommand(Command::new("loops").about("Detect revisits within one signature set").arg(input("Signature directory")).arg(output()))
}

/// Parses and runs one invocation; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(m: &ArgMatches) -> CliResult<()> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let file = match sub.get_one::<PathBuf>("config") {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            io::parse_key_values(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => BTreeMap::new(),
    };
    let flags: BTreeMap<String, String> =
        KEYS.iter().filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone()))).collect();
    let settings = Settings::resolve(&file, &flags)?;
    let path = |id: &str| sub.get_one::<PathBuf>(id).expect("required by the parser").as_path();
    match name {
        "simulate" => cmd_simulate(&settings, path("output")),
        "submap" => cmd_submap(&settings, path("input"), path("output"), sub.get_one::<usize>("index").copied()),
        "describe" => cmd_describe(&settings, path("input"), path("output")),
        "train" => cmd_train(&settings, path("input"), path("output")),
        "embed" => cmd_embed(path("model"), path("input"), path("output")),
        "retrieve" => cmd_retrieve(&settings, path("database"), path("query"), path("output")),
        "eval" => cmd_eval(&settings, path("input"), path("output")),
        "loops" => cmd_loops(&settings, path("input"), path("output")),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(atomic_write(path, text.as_bytes())?)
}

fn require_seed(s: &Settings) -> CliResult<()> {
    if s.raw("seed").is_none() {
        return Err(CliError::Usage("--seed is required for this subcommand".into()));
    }
    Ok(())
}

fn cmd_simulate(s: &Settings, out: &Path) -> CliResult<()> {
    require_seed(s)?;
    let cfg = s.sim()?;
    let run = simulate(&cfg)?;
    let meta = s.to_text();
    io::write_session(&out.join("map"), &run.map, &meta)?;
    io::write_session(&out.join("query"), &run.query, &meta)?;
    Ok(())
}

fn cmd_submap(s: &Settings, input: &Path, out: &Path, index: Option<usize>) -> CliResult<()> {
    let cfg = s.submap()?;
    let session = io::read_session(input)?;
    let traj = &session.trajectory;
    let mut csv = String::from("center,start,end\n");
    for i in 0..traj.len() {
        let b = submap_bounds(traj, i, &cfg)?;
        csv.push_str(&format!("{},{},{}\n", b.center_index, b.start_index, b.end_index));
    }
    write_text(&out.join("bounds.csv"), &csv)?;
    if let Some(i) = index {
        let b = submap_bounds(traj, i, &cfg)?;
        let cloud = build_submap(traj, &session.clouds[b.start_index..=b.end_index], b, &cfg)?;
        atomic_write(&indexed_path(out, i, "plcd"), &io::encode_cloud(&cloud.points))?;
    }
    Ok(())
}

fn cmd_describe(s: &Settings, input: &Path, out: &Path) -> CliResult<()> {
    let (sub, desc) = (s.submap()?, s.descriptor()?);
    let session = io::read_session(input)?;
    let locations = describe_session(&session, &sub, &desc)?;
    io::write_poses(&out.join(io::layout::POSES_FILE), &session.trajectory)?;
    for (i, l) in locations.iter().enumerate() {
        atomic_write(&indexed_path(&out.join("lidar"), i, "sctx"), &io::encode_descriptor(&l.lidar)?)?;
        atomic_write(&indexed_path(&out.join("radar"), i, "sctx"), &io::encode_descriptor(&l.radar)?)?;
    }
    Ok(())
}

fn read_locations(dir: &Path) -> CliResult<(Trajectory, Vec<Location>)> {
    let traj = io::read_poses(&dir.join(io::layout::POSES_FILE), "described")?;
    let n = traj.len();
    let lidar = read_descriptors(&dir.join("lidar"), n, Modality::Lidar)?;
    let radar = read_descriptors(&dir.join("radar"), n, Modality::Radar)?;
    let locations = traj.poses().iter().zip(lidar).zip(radar).map(|((&pose, lidar), radar)| Location { pose, lidar, radar }).collect();
    Ok((traj, locations))
}

fn read_descriptors(dir: &Path, n: usize, modality: Modality) -> CliResult<Vec<PolarDescriptor>> {
    let ds = read_indexed(dir, "sctx", n, io::decode_descriptor)?;
    if let Some(d) = ds.iter().find(|d| d.modality != modality) {
        return Err(Error::ShapeMismatch(format!("{} holds a {} descriptor", dir.display(), d.modality.name())).into());
    }
    Ok(ds)
}

fn cmd_train(s: &Settings, input: &Path, out: &Path) -> CliResult<()> {
    require_seed(s)?;
    let cfg = s.train()?;
    let (_, locations) = read_locations(input)?;
    fs::create_dir_all(out).map_err(Error::from)?;
    let state = train_with(&locations, &cfg, |st| {
        atomic_write(&out.join(format!("epoch_{:03}.hprn", st.epoch)), &io::encode_checkpoint(st)?)?;
        atomic_write(&out.join("history.csv"), history_csv(&st.history).as_bytes())
    })?;
    atomic_write(&out.join("model.hprn"), &io::encode_checkpoint(&state)?)?;
    write_text(&out.join("history.csv"), &history_csv(&state.history))?;
    write_text(&out.join("config.txt"), &s.to_text())
}

fn cmd_embed(model: &Path, input: &Path, out: &Path) -> CliResult<()> {
    let bytes = fs::read(model).map_err(|e| io::layout::io_context(e, model))?;
    let state = io::decode_checkpoint(&bytes)?;
    let (traj, locations) = read_locations(input)?;
    io::write_poses(&out.join(io::layout::POSES_FILE), &traj)?;
    for m in [Modality::Lidar, Modality::Radar] {
        for (i, sig) in state.model.signatures(&locations, m)?.iter().enumerate() {
            atomic_write(&indexed_path(&out.join(m.name()), i, "sigf"), &io::encode_signature(sig)?)?;
        }
    }
    Ok(())
}

fn read_signatures(dir: &Path, modality: Modality) -> CliResult<(Trajectory, Vec<SpectralSignature>)> {
    let traj = io::read_poses(&dir.join(io::layout::POSES_FILE), "signatures")?;
    let sigs = read_indexed(&dir.join(modality.name()), "sigf", traj.len(), io::decode_signature)?;
    Ok((traj, sigs))
}

fn database(traj: &Trajectory, sigs: Vec<SpectralSignature>, session: &str) -> CliResult<SignatureDatabase> {
    Ok(SignatureDatabase::from_entries(traj.poses().iter().zip(sigs).enumerate().map(|(i, (&pose, signature))| DatabaseEntry {
        id: i as u64,
        signature,
        pose,
        session: session.to_string(),
    }))?)
}

fn cmd_retrieve(s: &Settings, db_dir: &Path, q_dir: &Path, out: &Path) -> CliResult<()> {
    let (qm, dm) = (s.get::<Modality>("query-modality")?, s.get::<Modality>("database-modality")?);
    let k: usize = s.get("top-k")?;
    if k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    let (db_traj, db_sigs) = read_signatures(db_dir, dm)?;
    let (q_traj, q_sigs) = read_signatures(q_dir, qm)?;
    let db = database(&db_traj, db_sigs, "database")?;
    let queries = database(&q_traj, q_sigs, "query")?;
    let sim = similarity_matrix(&queries, &db)?;
    let mut csv = String::from("query,rank,database,distance\n");
    for i in 0..queries.len() {
        let mut row: Vec<(usize, f64)> = sim.values.row(i).iter().map(|v| -v).enumerate().collect();
        row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (rank, (j, d)) in row.into_iter().take(k).enumerate() {
            csv.push_str(&format!("{i},{},{j},{d:?}\n", rank + 1));
        }
    }
    write_text(&out.join("results.csv"), &csv)?;
    io::write_poses(&out.join("query_poses.txt"), &q_traj)?;
    io::write_poses(&out.join("database_poses.txt"), &db_traj)?;
    Ok(())
}

/// Rank-1 rows of a `results.csv`, one per query in order.
fn parse_results(text: &str, queries: usize, db_len: usize) -> CliResult<Vec<Top1>> {
    let mut top = vec![None; queries];
    for (k, line) in text.lines().enumerate().skip(1) {
        let err = |msg: String| CliError::Data(Error::Parse { line: k + 1, msg });
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| err(format!("not an index: {s:?}")));
        let (q, rank, j) = (num(f[0])?, num(f[1])?, num(f[2])?);
        let d: f64 = f[3].trim().parse().map_err(|_| err(format!("not a distance: {:?}", f[3])))?;
        if q >= queries || j >= db_len {
            return Err(err(format!("index out of range: query {q}, database {j}")));
        }
        if rank == 1 {
            top[q] = Some(Top1 { index: j, distance: d });
        }
    }
    top.into_iter()
        .enumerate()
        .map(|(i, t)| t.ok_or_else(|| CliError::Data(Error::ShapeMismatch(format!("no rank-1 result for query {i}")))))
        .collect()
}

fn cmd_eval(s: &Settings, input: &Path, out: &Path) -> CliResult<()> {
    let cfg = s.eval()?;
    let q = io::read_poses(&input.join("query_poses.txt"), "query")?;
    let db = io::read_poses(&input.join("database_poses.txt"), "database")?;
    let p = input.join("results.csv");
    let text = fs::read_to_string(&p).map_err(|e| io::layout::io_context(e, &p))?;
    let results = parse_results(&text, q.len(), db.len())?;
    let poses = |t: &Trajectory| -> Vec<Pose2D> { t.poses().to_vec() };
    let metrics = evaluate(&results, &poses(&q), &poses(&db), &cfg)?;
    write_text(&out.join("metrics.csv"), &metrics.to_csv())?;
    write_text(&out.join("pr_curve.csv"), &metrics.curve_csv())
}

fn cmd_loops(s: &Settings, input: &Path, out: &Path) -> CliResult<()> {
    let modality = s.get::<Modality>("query-modality")?;
    let threshold: f64 = s.get("loop-threshold")?;
    let window: usize = s.get("exclusion-window")?;
    let (traj, sigs) = read_signatures(input, modality)?;
    let db = database(&traj, sigs, "session")?;
    let sim = similarity_matrix(&db, &db)?;
    let mut csv = String::from("query,match,similarity\n");
    for (i, j) in detect_loops(&sim, threshold, window)? {
        csv.push_str(&format!("{i},{j},{:?}\n", sim.values.get(i, j)));
    }
    write_text(&out.join("loops.csv"), &csv)
}
