//! `qst`: design, verify and stress-test mirror-backed scattering registers
//! that swap a flying qubit with one static qubit.

mod output;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use output::{fmt15, round15, sidecar_path, write_atomic, RunManifest};
use qst_core::amplitudes::design_points_for_coupling;
use qst_core::linalg::unitarity_defect;
use qst_core::protocol::{design_from_coupling, design_register, verify_swap, Register, RegisterConfig};
use qst_core::robustness::{disorder_trials, linspace, sweep_design_functions, wavepacket_fidelity, DisorderSpec, PositionNoise};
use qst_core::solver::solve;
use qst_core::Error;

/// Fidelity at or above which `verify` succeeds.
const VERIFY_THRESHOLD: f64 = 1.0 - 1e-6;

#[derive(Parser)]
#[command(name = "qst", version, about = "Quantum state transfer by scattering off a mirror-backed spin register")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a register config from a distance or a coupling.
    Design(DesignArgs),
    /// Check a config against its target SWAP.
    Verify(VerifyArgs),
    /// Solve a config and write its reflection operator.
    Scatter(ScatterArgs),
    /// Tabulate the design functions g̃(kd) and h(kd).
    Sweep(SweepArgs),
    /// Monte Carlo over Gaussian position noise.
    Disorder(DisorderArgs),
    /// Average the fidelity over a narrow band of wavevectors.
    Wavepacket(WavepacketArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// Number of static qubits.
    #[arg(long, short = 'n')]
    qubits: usize,
    /// Static qubit to swap with (1 is nearest the mirror).
    #[arg(long)]
    target: usize,
    /// Optical distance kd of the target slot.
    #[arg(long, conflicts_with = "g0", required_unless_present = "g0")]
    kd_a: Option<f64>,
    /// Coupling g = G/k; picks kd from the two solutions of g̃(kd) = g0.
    #[arg(long)]
    g0: Option<f64>,
    /// Which solution to use with --g0: 0 (smaller kd) or 1.
    #[arg(long, default_value_t = 0, requires = "g0")]
    root: usize,
    /// Comma-separated multiple-of-π counts, one per slot.
    #[arg(long, value_delimiter = ',')]
    windings: Vec<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScatterArgs {
    #[arg(long)]
    config: PathBuf,
    /// Momentum in units of the design momentum.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// START:STOP:COUNT, inclusive.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DisorderArgs {
    #[arg(long)]
    config: PathBuf,
    /// Position std as a fraction of each designed distance.
    #[arg(long, conflicts_with = "sigma_abs", required_unless_present = "sigma_abs")]
    sigma_rel: Option<f64>,
    /// Position std in units of 1/k.
    #[arg(long)]
    sigma_abs: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WavepacketArgs {
    #[arg(long)]
    config: PathBuf,
    /// Std of k relative to the design momentum.
    #[arg(long)]
    bandwidth: f64,
    /// Gauss-Hermite nodes.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Numerical(String),
    Verification,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical degeneracy: {m}"),
            Failure::Verification => write!(f, "verification failed"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Degenerate { .. } | Error::Singular(_) | Error::Composition => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn read_config(path: &Path, manifest: &mut RunManifest) -> Result<RegisterConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    manifest.config(path, &text);
    RegisterConfig::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Writes `bytes` to `out` (plus the manifest sidecar), or to stdout.
fn emit(out: Option<&Path>, bytes: &[u8], manifest: &RunManifest) -> CmdResult {
    match out {
        Some(path) => {
            write_atomic(path, bytes)?;
            manifest.write_sidecar(path)?;
        }
        None => print!("{}", String::from_utf8_lossy(bytes)),
    }
    Ok(())
}

fn with_outputs(manifest: &mut RunManifest, outputs: &[&Option<PathBuf>]) {
    manifest.outputs = outputs.iter().filter_map(|o| o.as_ref().map(|p| p.display().to_string())).collect();
}

fn json_with_hash(value: impl Serialize, manifest: &RunManifest) -> Result<Vec<u8>, Failure> {
    let mut v = serde_json::to_value(value).map_err(|e| Failure::Input(e.to_string()))?;
    v["manifest_hash"] = json!(manifest.hash());
    let mut text = serde_json::to_string_pretty(&v).map_err(|e| Failure::Input(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn design(args: DesignArgs) -> CmdResult {
    let mut manifest = RunManifest::new("design");
    manifest.param("qubits", args.qubits).param("target", args.target).param("windings", &args.windings);
    let mut config = match (args.kd_a, args.g0) {
        (Some(kd_a), _) => {
            manifest.param("kd_a", kd_a);
            design_register(args.qubits, args.target, kd_a, &args.windings)?
        }
        (None, Some(g0)) => {
            manifest.param("g0", g0).param("root", args.root);
            let roots = design_points_for_coupling(g0)?;
            for (i, p) in roots.iter().enumerate() {
                let mark = if i == args.root { "  (selected)" } else { "" };
                eprintln!("root {i}: kd_a = {}, h = {}{mark}", fmt15(p.kd_a), fmt15(p.kd_b));
            }
            design_from_coupling(args.qubits, args.target, g0, args.root, &args.windings)?
        }
        (None, None) => return Err(Failure::Input("one of --kd-a or --g0 is required".into())),
    };
    with_outputs(&mut manifest, &[&args.out]);
    config.manifest_hash = Some(manifest.hash());
    eprintln!("g = {}", fmt15(config.g));
    eprintln!("kd = [{}]", config.kd.iter().map(|x| fmt15(*x)).collect::<Vec<_>>().join(", "));
    let mut text = config.to_json()?;
    text.push('\n');
    emit(args.out.as_deref(), text.as_bytes(), &manifest)
}

fn verify(args: VerifyArgs) -> CmdResult {
    let mut manifest = RunManifest::new("verify");
    let config = read_config(&args.config, &mut manifest)?;
    with_outputs(&mut manifest, &[&args.out]);
    let report = verify_swap(&config)?;
    let passed = report.fidelity >= VERIFY_THRESHOLD;
    eprintln!("target: {}", report.target);
    eprintln!("fidelity: {:.6} (process fidelity {:.6}, phase {})", report.fidelity, report.process_fidelity, fmt15(report.optimal_phase));
    for b in &report.bystander_disturbance {
        eprintln!("bystander qubit {}: Choi distance {:.3e}", b.qubit, b.choi_distance);
    }
    eprintln!("{}", if passed { "PASS" } else { "FAIL" });
    let body = json!({
        "fidelity": round15(report.fidelity),
        "process_fidelity": round15(report.process_fidelity),
        "optimal_phase": round15(report.optimal_phase),
        "target": report.target,
        "bystander_disturbance": report.bystander_disturbance.iter()
            .map(|b| json!({"qubit": b.qubit, "choi_distance": round15(b.choi_distance)}))
            .collect::<Vec<_>>(),
        "threshold": VERIFY_THRESHOLD,
        "passed": passed,
    });
    emit(args.out.as_deref(), &json_with_hash(body, &manifest)?, &manifest)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn scatter(args: ScatterArgs) -> CmdResult {
    let mut manifest = RunManifest::new("scatter");
    let config = read_config(&args.config, &mut manifest)?;
    manifest.param("k", args.k);
    with_outputs(&mut manifest, &[&args.out]);
    let register = Register::new(&config)?;
    let channel = solve(&register.problem_at(&config.positions(), args.k)?)?;
    let r = &channel.r;
    let n = r.nrows();
    let r_re: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| round15(r[(i, j)].re)).collect()).collect();
    let r_im: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| round15(r[(i, j)].im)).collect()).collect();
    let body = json!({
        "k": args.k,
        "dimension": r.nrows(),
        "basis": "qubit 0 (flying) most significant, then static qubits 1..n; spin up before down",
        "r_re": r_re,
        "r_im": r_im,
        "unitarity_defect": unitarity_defect(r),
        "fidelity": round15(register.overlap(r).0),
    });
    emit(args.out.as_deref(), &json_with_hash(body, &manifest)?, &manifest)
}


fn parse_grid(spec: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::Input(format!("grid {spec:?} must look like START:STOP:COUNT"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    Ok((start, stop, count))
}

fn sweep(args: SweepArgs) -> CmdResult {
    let mut manifest = RunManifest::new("sweep");
    manifest.param("grid", &args.grid);
    with_outputs(&mut manifest, &[&args.out]);
    let (start, stop, count) = parse_grid(&args.grid)?;
    let rows = sweep_design_functions(&linspace(start, stop, count))?;
    let mut bytes = format!("# manifest_hash={}\n", manifest.hash()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(["kd", "g_tilde", "h"])?;
        for r in rows {
            w.write_record([fmt15(r.kd), fmt15(r.g_tilde), fmt15(r.h)])?;
        }
        w.flush()?;
    }
    emit(args.out.as_deref(), &bytes, &manifest)
}

fn disorder(args: DisorderArgs) -> CmdResult {
    let mut manifest = RunManifest::new("disorder");
    let config = read_config(&args.config, &mut manifest)?;
    let noise = match (args.sigma_rel, args.sigma_abs) {
        (Some(s), _) => PositionNoise::Relative(s),
        (None, Some(s)) => PositionNoise::Absolute(s),
        (None, None) => return Err(Failure::Input("one of --sigma-rel or --sigma-abs is required".into())),
    };
    manifest.param("noise", noise).param("trials", args.trials);
    manifest.seed = Some(args.seed);
    let summary_path = args.out.as_ref().map(|p| sidecar_path(p, "summary.json"));
    with_outputs(&mut manifest, &[&args.out, &summary_path]);
    let spec = DisorderSpec { noise, trials: args.trials, seed: args.seed };
    let outcome = disorder_trials(&config, &spec)?;
    let hash = manifest.hash();

    let mut bytes = format!("# manifest_hash={hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        let mut header = vec!["trial".to_string(), "resamples".into(), "process_fidelity".into()];
        header.extend((1..=config.n).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for t in &outcome.trials {
            let mut row = vec![t.trial.to_string(), t.resamples.to_string(), t.fidelity.map(fmt15).unwrap_or_default()];
            row.extend((0..config.n).map(|i| t.positions.get(i).map(|x| fmt15(*x)).unwrap_or_default()));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    let s = &outcome.stats;
    let summary = json!({
        "accepted_trials": s.accepted_trials,
        "rejected_trials": s.rejected_trials,
        "resampled_draws": s.resampled_draws,
        "mean": round15(s.mean),
        "std": round15(s.std),
        "standard_error": round15(s.standard_error()),
        "min": round15(s.min),
        "max": round15(s.max),
        "quantiles": {
            "0.05": round15(s.quantiles.q05),
            "0.25": round15(s.quantiles.q25),
            "0.5": round15(s.quantiles.q50),
            "0.75": round15(s.quantiles.q75),
            "0.95": round15(s.quantiles.q95),
        },
        "noise": noise,
        "seed": args.seed,
    });
    eprintln!(
        "mean process fidelity {:.6} ± {:.6} over {} trials ({} rejected, {} resampled draws)",
        s.mean,
        s.standard_error(),
        s.accepted_trials,
        s.rejected_trials,
        s.resampled_draws
    );
    let summary_bytes = json_with_hash(summary, &manifest)?;
    match (&args.out, &summary_path) {
        (Some(out), Some(summary_path)) => {
            write_atomic(out, &bytes)?;
            write_atomic(summary_path, &summary_bytes)?;
            manifest.write_sidecar(out)?;
        }
        _ => print!("{}", String::from_utf8_lossy(&summary_bytes)),
    }
    Ok(())
}

fn wavepacket(args: WavepacketArgs) -> CmdResult {
    let mut manifest = RunManifest::new("wavepacket");
    let config = read_config(&args.config, &mut manifest)?;
    manifest.param("bandwidth", args.bandwidth).param("samples", args.samples);
    with_outputs(&mut manifest, &[&args.out]);
    let fidelity = wavepacket_fidelity(&config, args.bandwidth, args.samples)?;
    eprintln!("bandwidth-averaged process fidelity {fidelity:.9}");
    let body = json!({
        "bandwidth": args.bandwidth,
        "samples": args.samples,
        "process_fidelity": round15(fidelity),
    });
    emit(args.out.as_deref(), &json_with_hash(body, &manifest)?, &manifest)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(a) => design(a),
        Command::Verify(a) => verify(a),
        Command::Scatter(a) => scatter(a),
        Command::Sweep(a) => sweep(a),
        Command::Disorder(a) => disorder(a),
        Command::Wavepacket(a) => wavepacket(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !matches!(f, Failure::Verification) {
                eprintln!("qst: {f}");
            }
            ExitCode::from(f.code())
        }
    }
}
