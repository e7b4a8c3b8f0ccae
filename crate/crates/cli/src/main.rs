use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use stochcouple::arr::{arr_run, interface_violation, SeparatedSolution};
use stochcouple::config::Config;
use stochcouple::io::{read_json, write_json, write_text};
use stochcouple::problems::{as_monolithic, build_problem, probe_value, CoupledProblem};
use stochcouple::reference::{monte_carlo_reference, probe_merged_dofs, solve_monolithic_sg_with};
use stochcouple::rng::{draw_germ, stream, PURPOSE_SELF_MC};
use stochcouple::stats::{
    error_metrics, error_metrics_net, mc_moments, mc_probe_samples, padded_grid, pdf_on_grid, separated_moments,
    separated_probe_samples, sg_moments, ErrorMetrics, MomentReport,
};
use stochcouple::Error;

#[derive(Parser, Debug)]
#[command(name = "stochcouple", version, about = "Separated-representation uncertainty propagation on coupled sub-domains")]
struct Cli {
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the separated representation.
    Run(RunArgs),
    /// Compute a monolithic Galerkin or Monte-Carlo reference.
    Reference(ReferenceArgs),
    /// Compare a solution file against a reference file.
    Compare(CompareArgs),
    /// Write both sub-domain meshes and KL bases.
    MeshExport(MeshArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    /// Named profile (lshape, lshape-desk, beam, beam-desk).
    #[arg(long, conflicts_with = "config")]
    example: Option<String>,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides both field standard deviations.
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    rank_max: Option<usize>,
    /// Also write per-iteration PCPG residuals.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Method {
    Sg,
    Mc,
}

#[derive(Args, Debug)]
struct ReferenceArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    method: Method,
    /// Monte-Carlo sample count.
    #[arg(short = 'N', default_value_t = 10_000)]
    n: usize,
    /// Galerkin order (defaults to the larger sub-domain order).
    #[arg(short = 'p', long = "order")]
    order: Option<usize>,
    /// Probe samples drawn from a Galerkin reference.
    #[arg(long, default_value_t = 10_000)]
    probe_samples: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Probe samples drawn from the separated representation.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory (defaults to the recorded one).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileEntry {
    sha256: String,
    bytes: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    config: Option<Config>,
    seeds: BTreeMap<String, u64>,
    versions: BTreeMap<String, String>,
    files: BTreeMap<String, FileEntry>,
    timings: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionFile {
    config: Config,
    converged: bool,
    solution: SeparatedSolution,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReferenceFile {
    config: Config,
    method: Method,
    samples: usize,
    order: Option<usize>,
    moments: MomentReport,
    probe_samples: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct CompareMetrics {
    raw: ErrorMetrics,
    /// Gaps net of three reference standard errors.
    net: ErrorMetrics,
    interface_violation: f64,
    pdf_l1_gap: Option<f64>,
    probe_mean: [f64; 2],
}

/// Output files with their hashes, collected in write order.
struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl Outputs {
    fn new(dir: &Path) -> stochcouple::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    fn text(&mut self, name: &str, text: &str) -> stochcouple::Result<()> {
        write_text(&self.dir.join(name), text)?;
        self.files.insert(
            name.to_string(),
            FileEntry {
                sha256: hex::encode(Sha256::digest(text.as_bytes())),
                bytes: text.len(),
            },
        );
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> stochcouple::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    fn finish(self, mut manifest: RunManifest) -> stochcouple::Result<()> {
        manifest.files = self.files;
        write_json(&self.dir.join("manifest.json"), &manifest)
    }
}

fn load_config(instance: &InstanceArgs) -> stochcouple::Result<Config> {
    let mut cfg = match (&instance.example, &instance.config) {
        (Some(name), _) => Config::profile(name)?,
        (None, Some(path)) => Config::from_json(&std::fs::read_to_string(path)?)?,
        (None, None) => return Err(Error::Config("one of --example or --config is required".into())),
    };
    if let Some(seed) = instance.seed {
        cfg.solver.seed = seed;
    }
    if let Some(sigma) = instance.sigma {
        cfg = cfg.with_sigma(sigma);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn manifest(command: &str, argv: &[String], config: Option<Config>) -> RunManifest {
    let mut versions = BTreeMap::new();
    versions.insert("stochcouple".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let mut seeds = BTreeMap::new();
    if let Some(c) = &config {
        seeds.insert("solver".to_string(), c.solver.seed);
    }
    RunManifest {
        command: command.to_string(),
        argv: argv.to_vec(),
        config,
        seeds,
        versions,
        files: BTreeMap::new(),
        timings: BTreeMap::new(),
        converged: None,
    }
}

fn cmd_run(args: &RunArgs, argv: &[String]) -> stochcouple::Result<()> {
    let mut cfg = load_config(&args.instance)?;
    if let Some(eps) = args.eps {
        cfg.solver.eps = eps;
    }
    if let Some(r) = args.rank_max {
        cfg.solver.rank_max = r;
    }
    cfg.validate()?;
    let mut out = Outputs::new(&args.out_dir)?;
    let mut man = manifest("run", argv, Some(cfg.clone()));
    let t = Instant::now();
    let problem = build_problem(&cfg)?;
    man.timings.insert("build".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let outcome = arr_run(&problem, &cfg.solver)?;
    man.timings.insert("arr".into(), t.elapsed().as_secs_f64());
    if !outcome.converged {
        log::warn!(
            "residual target {:e} not reached within rank {}",
            cfg.solver.eps,
            outcome.solution.rank
        );
    }
    man.converged = Some(outcome.converged);
    out.json(
        "solution.json",
        &SolutionFile {
            config: cfg.clone(),
            converged: outcome.converged,
            solution: outcome.solution.clone(),
        },
    )?;
    out.text("trace.csv", &outcome.trace.to_csv())?;
    out.json("trace.json", &outcome.trace)?;
    let moments = separated_moments(&outcome.solution, "separated", &cfg.name);
    out.text("moments.csv", &moments.to_csv())?;
    out.json("moments.json", &moments)?;
    if args.trace {
        let mut s = String::from("update,iter,relative_residual\n");
        for (k, tr) in outcome.trace.pcpg_traces.iter().enumerate() {
            for (i, v) in tr.iter().enumerate() {
                s.push_str(&format!("{},{},{v:e}\n", k + 1, i));
            }
        }
        out.text("pcpg_trace.csv", &s)?;
    }
    out.finish(man)
}

fn sg_probe_samples(
    problem: &CoupledProblem,
    mono: &stochcouple::problems::MonolithicProblem,
    sg: &stochcouple::reference::MonolithicSgSolution,
    n: usize,
    seed: u64,
) -> stochcouple::Result<Vec<f64>> {
    let dofs = probe_merged_dofs(problem, mono)?;
    let families = problem.families();
    (0..n as u64)
        .map(|s| {
            let xi = draw_germ(&families, &mut stream(seed, PURPOSE_SELF_MC, s));
            let u = sg.sample(&xi)?;
            Ok(probe_value(problem.config.probe.quantity, &dofs, &u))
        })
        .collect()
}

fn cmd_reference(args: &ReferenceArgs, argv: &[String]) -> stochcouple::Result<()> {
    let cfg = load_config(&args.instance)?;
    let problem = build_problem(&cfg)?;
    let mono = as_monolithic(&problem)?;
    let mut out = Outputs::new(&args.out_dir)?;
    let mut man = manifest("reference", argv, Some(cfg.clone()));
    let seed = cfg.solver.seed;
    let t = Instant::now();
    let (moments, probe, order) = match args.method {
        Method::Sg => {
            let p = args.order.unwrap_or(cfg.pc.p1.max(cfg.pc.p2));
            let sg = solve_monolithic_sg_with(&mono, p)?;
            let probe = sg_probe_samples(&problem, &mono, &sg, args.probe_samples, seed)?;
            (sg_moments(&mono, &sg, &cfg.name), probe, Some(p))
        }
        Method::Mc => {
            man.seeds.insert("mc".into(), seed);
            let mc = monte_carlo_reference(&problem, args.n, seed)?;
            (mc_moments(&mono, &mc, &cfg.name), mc_probe_samples(&problem, &mc), None)
        }
    };
    man.timings.insert("reference".into(), t.elapsed().as_secs_f64());
    out.text("moments.csv", &moments.to_csv())?;
    out.json(
        "reference.json",
        &ReferenceFile {
            config: cfg,
            method: args.method,
            samples: if args.method == Method::Mc { args.n } else { args.probe_samples },
            order,
            moments,
            probe_samples: probe,
        },
    )?;
    out.finish(man)
}

fn cmd_compare(args: &CompareArgs, argv: &[String]) -> stochcouple::Result<()> {
    let sol: SolutionFile = read_json(&args.solution)?;
    let reference: ReferenceFile = read_json(&args.reference)?;
    let problem = build_problem(&sol.config)?;
    sol.solution.check_layout(&problem)?;
    let moments = separated_moments(&sol.solution, "separated", &sol.config.name);
    if moments.layout != reference.moments.layout {
        return Err(Error::InvalidInput(format!(
            "layout mismatch: solution {:?}, reference {:?}",
            moments.layout, reference.moments.layout
        )));
    }
    let mut out = Outputs::new(&args.out_dir)?;
    let mut man = manifest("compare", argv, Some(sol.config.clone()));
    man.seeds.insert("probe".into(), args.seed);
    let raw = error_metrics(&moments, &reference.moments)?;
    let net = error_metrics_net(&moments, &reference.moments, 3.0)?;
    let samples = separated_probe_samples(&problem, &sol.solution, args.samples, args.seed)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let mut gap = None;
    if let Ok(grid) = padded_grid(&[&samples, &reference.probe_samples], 401) {
        let a = pdf_on_grid(&samples, &grid)?;
        let b = pdf_on_grid(&reference.probe_samples, &grid)?;
        out.text("pdf_solution.csv", &a.to_csv())?;
        out.text("pdf_reference.csv", &b.to_csv())?;
        if !a.degenerate && !b.degenerate {
            gap = Some(stochcouple::stats::l1_distance(&grid, &a.density, &b.density));
        }
    }
    out.json(
        "metrics.json",
        &CompareMetrics {
            raw,
            net,
            interface_violation: interface_violation(&problem, &sol.solution),
            pdf_l1_gap: gap,
            probe_mean: [mean(&samples), mean(&reference.probe_samples)],
        },
    )?;
    out.finish(man)
}

fn cmd_mesh_export(args: &MeshArgs, argv: &[String]) -> stochcouple::Result<()> {
    let cfg = load_config(&args.instance)?;
    let problem = build_problem(&cfg)?;
    let mut out = Outputs::new(&args.out_dir)?;
    for (i, sub) in problem.sub.iter().enumerate() {
        out.text(&format!("mesh{}.txt", i + 1), &sub.mesh.to_text())?;
        out.json(&format!("kl{}.json", i + 1), &sub.field.kl.to_json())?;
    }
    out.finish(manifest("mesh-export", argv, Some(cfg)))
}

fn cmd_replay(args: &ReplayArgs) -> stochcouple::Result<()> {
    let man: RunManifest = read_json(&args.manifest)?;
    let mut argv = man.argv.clone();
    if let Some(dir) = &args.out_dir {
        let dir = dir.to_string_lossy().into_owned();
        match argv.iter().position(|a| a == "--out-dir") {
            Some(k) if k + 1 < argv.len() => argv[k + 1] = dir,
            _ => {
                argv.push("--out-dir".into());
                argv.push(dir);
            }
        }
    }
    let mut full = vec!["stochcouple".to_string()];
    full.extend(argv.iter().cloned());
    let cli = Cli::try_parse_from(&full).map_err(|e| Error::Config(format!("manifest command: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Config("manifest records a replay command".into()));
    }
    dispatch(cli, &argv)
}

fn dispatch(cli: Cli, argv: &[String]) -> stochcouple::Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, argv),
        Command::Reference(a) => cmd_reference(a, argv),
        Command::Compare(a) => cmd_compare(a, argv),
        Command::MeshExport(a) => cmd_mesh_export(a, argv),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) => 1,
        Error::Config(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
