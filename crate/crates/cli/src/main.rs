use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use uos_core::bounds::{theorem2_bound, BoundInputs, BoundReport};
use uos_core::experiments::{
    estimate_width_ub, generate_signal, run_noise_sweep, run_phase, verify_lemmas, NoiseSweepConfig, PhaseConfig,
    ScenarioKind, ScenarioSpec,
};
use uos_core::geometry::{atomic_norm, dual_norm};
use uos_core::io::{read_signal, write_signal, ModelFile};
use uos_core::solver::{recover, MeasurementEnsemble, Method, RecoveryMode, SolverConfig};
use uos_core::wavelet::{blocks, haar_analyze, k_measured, piecewise_constant, recover_in_wavelet_domain};
use uos_core::Error;

#[derive(Parser)]
#[command(name = "uos", version, about = "Recovery of signals in a union of subspaces")]
struct Cli {
    /// Worker threads for the Monte-Carlo harnesses (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the sample-complexity bounds.
    Bound(BoundArgs),
    /// Atomic norm and dual norm of a vector.
    Norm(NormArgs),
    /// Recover a signal from simulated Gaussian measurements.
    Recover(RecoverArgs),
    /// Success probability against the number of measurements.
    Phase(ConfigOut),
    /// Monte-Carlo cone-distance estimate against the bound.
    Width(WidthArgs),
    /// Run the numerical oracles for the auxiliary inequalities.
    VerifyLemmas(LemmaArgs),
    /// Group lasso against lasso over noise levels on piecewise constant signals.
    NoiseSweep(NoiseArgs),
    /// Recover a test signal from its Haar coefficients with parent-child groups.
    WaveletDemo(WaveletArgs),
    /// Generate a scenario signal and its group model.
    Gen(GenArgs),
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long = "M")]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long = "B")]
    b: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma_star: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sparsity for the lasso baseline (default kB).
    #[arg(long)]
    s: Option<usize>,
    /// Ambient dimension for the lasso baseline (default MB).
    #[arg(long)]
    p: Option<usize>,
    /// Print JSON instead of the aligned listing.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Noisy,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Noise norm: in noisy mode a seeded noise vector of exactly this norm is
    /// added to the measurements and used as the residual budget.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Noisy mode passes when the error is at most 2δ/ε.
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Solver settings as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigOut {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WidthArgs {
    /// JSON scenario (disjoint groups); overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "M", default_value_t = 100)]
    m: usize,
    #[arg(long = "B", default_value_t = 20)]
    b: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    /// JSON sweep configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalKind {
    Blocks,
    Piecewise,
}

#[derive(Args)]
struct WaveletArgs {
    #[arg(long, value_enum, default_value = "blocks")]
    signal: SignalKind,
    #[arg(long, default_value_t = 1024)]
    p: usize,
    /// Number of measurements, or `auto` for the bound at the measured k.
    #[arg(long, default_value = "auto")]
    n: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "glasso")]
    method: MethodArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Glasso,
    Lasso,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Glasso => Method::Glasso,
            MethodArg::Lasso => Method::Lasso,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    NoOverlap,
    PartialOverlap,
    RandomOverlap,
}

#[derive(Args)]
struct GenArgs {
    /// JSON scenario; overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "no-overlap")]
    kind: KindArg,
    #[arg(long = "M", default_value_t = 100)]
    m: usize,
    #[arg(long = "B", default_value_t = 20)]
    b: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    overlap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Signal file (one value per line).
    #[arg(long)]
    out: PathBuf,
    /// Model JSON output.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

/// Failure kinds mapped to exit codes.
enum Fail {
    /// A recovery or an assertion did not succeed.
    Check(String),
    /// Bad input, configuration or I/O.
    Usage(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail::Usage(e.to_string())
    }
}

type Outcome = Result<(), Fail>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Fail::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn bound(a: BoundArgs) -> Outcome {
    let report = BoundReport::compute(BoundInputs {
        m: a.m,
        k: a.k,
        b: a.b,
        sigma_star: a.sigma_star,
        sigma: a.sigma,
        kappa: a.kappa,
        epsilon: a.epsilon,
        s: a.s,
        p: a.p,
    })?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn norm(a: NormArgs) -> Outcome {
    let model = ModelFile::load(&a.model)?.to_model()?;
    let x = read_signal(&a.signal)?;
    let dec = atomic_norm(&x, &model)?;
    let dual = dual_norm(&x, &model);
    if a.json {
        #[derive(Serialize)]
        struct Out<'a> {
            atomic_norm: f64,
            lower_bound: f64,
            dual_norm: f64,
            coefficients: &'a [Vec<f64>],
        }
        let out = Out {
            atomic_norm: dec.value,
            lower_bound: dec.lower_bound,
            dual_norm: dual,
            coefficients: &dec.coefficients,
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("atomic norm {:.12}", dec.value);
        println!("dual norm   {:.12}", dual);
    }
    Ok(())
}

fn seeded_noise(n: usize, norm: f64, seed: u64) -> nalgebra::DVector<f64> {
    // an independent stream of the ensemble generator supplies the direction
    let dir = MeasurementEnsemble::gaussian(n, 1, seed ^ 0x6e6f_6973_65).matrix.column(0).into_owned();
    let len = dir.norm();
    if len > 0.0 {
        dir * (norm / len)
    } else {
        dir
    }
}

fn recover_cmd(a: RecoverArgs) -> Outcome {
    let model = ModelFile::load(&a.model)?.to_model()?;
    let x = read_signal(&a.signal)?;
    if x.len() != model.p() {
        return Err(Fail::Usage(format!("signal has {} values, model p = {}", x.len(), model.p())));
    }
    let cfg: SolverConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SolverConfig::default(),
    };
    let phi = MeasurementEnsemble::gaussian(a.n, model.p(), a.seed);
    let mut y = phi.measure(&x)?;
    let mode = match a.mode {
        ModeArg::Exact => RecoveryMode::Exact,
        ModeArg::Noisy => {
            if !(a.delta >= 0.0) {
                return Err(Fail::Usage("--delta must be nonnegative".into()));
            }
            if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
                return Err(Fail::Usage("--epsilon must lie in (0, 1)".into()));
            }
            y += seeded_noise(a.n, a.delta, a.seed);
            RecoveryMode::Noisy { delta: a.delta }
        }
    };
    let r = recover(&y, &phi, &model, mode, &cfg, Some(&x))?;
    let passed = match mode {
        RecoveryMode::Exact => r.success,
        RecoveryMode::Noisy { delta } => r.success && r.abs_err.unwrap_or(f64::INFINITY) <= 2.0 * delta / a.epsilon,
    };
    println!(
        "rel_err {:.3e}  abs_err {:.3e}  residual {:.3e}  lambda {:.3e}  iterations {}  passed {}",
        r.rel_err.unwrap_or(f64::NAN),
        r.abs_err.unwrap_or(f64::NAN),
        r.residual,
        r.lambda_selected,
        r.iterations,
        passed
    );
    if let Some(out) = &a.out {
        write_json(out, &r)?;
    }
    if passed {
        Ok(())
    } else {
        Err(Fail::Check("recovery did not succeed".into()))
    }
}

fn phase(a: ConfigOut) -> Outcome {
    let cfg: PhaseConfig = read_json(&a.config)?;
    let d = run_phase(&cfg)?;
    println!("{:<8}{:>8}{:>10}{:>14}", "method", "n", "success", "mean rel_err");
    for c in &d.cells {
        println!("{:<8}{:>8}{:>10.3}{:>14.3e}", c.method.as_str(), c.n, c.success_rate, c.mean_rel_err);
    }
    if let Some(out) = &a.out {
        d.write_csv(std::fs::File::create(out)?)?;
    }
    Ok(())
}

fn width(a: WidthArgs) -> Outcome {
    let spec = match &a.config {
        Some(p) => read_json(p)?,
        None => ScenarioSpec::new(ScenarioKind::NoOverlap, a.m, a.b, a.k).with_seed(a.seed),
    };
    let (sig, groups) = generate_signal(&spec)?;
    let est = estimate_width_ub(&sig.vector(), &groups, a.trials, a.seed)?;
    let bound = theorem2_bound(groups.m(), sig.k(), groups.max_group_size())?;
    println!("cone distance^2   {:.4} ± {:.4}", est.mean_dist_sq, est.stderr);
    println!("construction      {:.4} ± {:.4}", est.construction_mean, est.construction_stderr);
    println!("theorem2 bound    {:.4}", bound);
    if let Some(out) = &a.out {
        let mut w = String::from("trials,mean_dist_sq,stderr,construction_mean,construction_stderr,bound\n");
        w.push_str(&format!(
            "{},{},{},{},{},{}\n",
            est.trials, est.mean_dist_sq, est.stderr, est.construction_mean, est.construction_stderr, bound
        ));
        std::fs::write(out, w)?;
    }
    Ok(())
}

fn lemmas(a: LemmaArgs) -> Outcome {
    let r = verify_lemmas(a.trials, a.seed)?;
    print!("{}", r.to_text());
    if let Some(out) = &a.out {
        write_json(out, &r)?;
    }
    if r.passed() {
        Ok(())
    } else {
        Err(Fail::Check("an oracle check failed".into()))
    }
}

fn noise_sweep(a: NoiseArgs) -> Outcome {
    let cfg: NoiseSweepConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => NoiseSweepConfig::default(),
    };
    let s = run_noise_sweep(&cfg)?;
    println!("{:>8}{:>14}{:>14}{:>9}", "sigma", "glasso", "lasso", "ordered");
    for r in &s.rows {
        println!("{:>8.3}{:>14.4e}{:>14.4e}{:>9}", r.sigma, r.glasso_mean, r.lasso_mean, r.ordered);
    }
    if let Some(out) = &a.out {
        s.write_csv(std::fs::File::create(out)?)?;
    }
    Ok(())
}

fn wavelet_demo(a: WaveletArgs) -> Outcome {
    if !a.p.is_power_of_two() || a.p < 4 {
        return Err(Fail::Usage("--p must be a power of two, at least 4".into()));
    }
    let x = match a.signal {
        SignalKind::Blocks => blocks(a.p),
        SignalKind::Piecewise => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(a.seed);
            piecewise_constant(a.p, 5, &mut rng)?
        }
    };
    let levels = a.p.trailing_zeros() as usize;
    let k = k_measured(&haar_analyze(&x, levels)?)?;
    let n = if a.n == "auto" {
        theorem2_bound(a.p - 2, k, 2)?.ceil() as usize
    } else {
        a.n
            .parse()
            .map_err(|_| Fail::Usage(format!("--n must be an integer or 'auto', got '{}'", a.n)))?
    };
    let phi = MeasurementEnsemble::gaussian(n, a.p, a.seed);
    let r = recover_in_wavelet_domain(&x, &phi, None, a.method.into(), RecoveryMode::Exact, &SolverConfig::default())?;
    println!(
        "p {}  M {}  k {}  n {}  rel_err {:.3e}  success {}",
        a.p,
        a.p - 2,
        k,
        n,
        r.coefficients.rel_err.unwrap_or(f64::NAN),
        r.coefficients.success
    );
    if let Some(out) = &a.out {
        write_json(out, &r)?;
    }
    if r.coefficients.success {
        Ok(())
    } else {
        Err(Fail::Check("recovery did not succeed".into()))
    }
}

fn gen(a: GenArgs) -> Outcome {
    let spec = match &a.config {
        Some(p) => read_json(p)?,
        None => {
            let kind = match a.kind {
                KindArg::NoOverlap => ScenarioKind::NoOverlap,
                KindArg::PartialOverlap => ScenarioKind::PartialOverlap,
                KindArg::RandomOverlap => ScenarioKind::RandomOverlap,
            };
            ScenarioSpec::new(kind, a.m, a.b, a.k).with_overlap(a.overlap).with_seed(a.seed)
        }
    };
    let (sig, groups) = generate_signal(&spec)?;
    write_signal(&a.out, &sig.x)?;
    if let Some(m) = &a.model_out {
        ModelFile::from_groups(&groups).save(m)?;
    }
    println!("p {}  M {}  k {}  s {}", groups.p, groups.m(), sig.k(), sig.s);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.cmd {
        Cmd::Bound(a) => bound(a),
        Cmd::Norm(a) => norm(a),
        Cmd::Recover(a) => recover_cmd(a),
        Cmd::Phase(a) => phase(a),
        Cmd::Width(a) => width(a),
        Cmd::VerifyLemmas(a) => lemmas(a),
        Cmd::NoiseSweep(a) => noise_sweep(a),
        Cmd::WaveletDemo(a) => wavelet_demo(a),
        Cmd::Gen(a) => gen(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Check(m)) => {
            eprintln!("failed: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
