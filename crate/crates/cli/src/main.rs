//! `ringblow`: command-line driver for the ring blow-up laboratory.
//!
//! Every command writes its outputs plus `manifest.txt` into an output
//! directory. Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ringblow::field::RescaledGrid2D;
use ringblow::inequalities::fuzz_campaign;
use ringblow::initdata::build;
use ringblow::io::{
    fmt_f64, key_values, read_modulation_csv, read_snapshot_file, write_snapshot_file, write_timeseries, ProfileBundle,
    RunConfig, RunManifest,
};
use ringblow::linearized::verify_spectral_property;
use ringblow::modulation::{decompose, epsilon_energy, guess_from_peak, write_csv, DecomposeOptions, ProfileFamily};
use ringblow::pipeline::tracked_run;
use ringblow::profiles::{
    momentum_degeneracy_check, profile_energy, qb_residual, solve_ground_state, solve_qb, truncate, GroundState,
    DEFAULT_ETA,
};
use ringblow::rates::{check_b_lambda_law, check_singular_circle, fit_loglog, max_relative_rise, median};
use ringblow::{Error, Result};

#[derive(Parser)]
#[command(name = "ringblow", version, about = "Ring-shaped blow-up laboratory for the axially symmetric cubic NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve Q_b with its radiation and write a profile bundle.
    Profile {
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Build ring initial data and report the admissibility conditions.
    Init(ConfigArgs),
    /// Evolve initial data, tracking the modulation parameters.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Start from this snapshot instead of building initial data.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Decompose one snapshot into modulated profile plus remainder.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Numerical checks of the inequalities, spectral property and profiles.
    Check {
        #[command(subcommand)]
        what: Check,
    },
    /// Fit blow-up rate laws to a modulation CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// Ignore samples with lambda below this value.
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Subcommand)]
enum Check {
    /// Axial Gagliardo-Nirenberg and interpolation inequalities on random fields.
    Gn {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        eps_radius: f64,
        #[command(flatten)]
        out: OutDir,
    },
    /// Minimum Rayleigh quotient of the linearized quadratic form.
    Spectral {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 14.0)]
        extent: f64,
        #[arg(long, default_value_t = 0.1)]
        spacing: f64,
        /// Skip the projection off the generalized kernel directions.
        #[arg(long)]
        no_projection: bool,
        #[command(flatten)]
        out: OutDir,
    },
    /// Ground state and profile identities.
    Profiles {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2])]
        b: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` of the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OutDir {
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Output directory plus the manifest being assembled for it.
struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
    start: Instant,
}

impl Outputs {
    fn new(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), manifest, start: Instant::now() })
    }

    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        fs::write(self.dir.join(name), content)?;
        self.manifest.add_output(&self.dir, name)
    }

    fn file(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&self.dir.join(name))?;
        self.manifest.add_output(&self.dir, name)
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        self.manifest.write_merged(&self.dir)?;
        Ok(())
    }
}

fn load_config(args: &ConfigArgs) -> Result<(RunConfig, PathBuf)> {
    let cfg = match &args.config {
        Some(p) => RunConfig::parse(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    Ok((cfg, out))
}

fn ground_state() -> Result<Arc<GroundState>> {
    Ok(Arc::new(solve_ground_state(0.01, 1e-12)?))
}

fn kv(pairs: &[(&str, f64)]) -> Vec<(String, String)> {
    pairs.iter().map(|&(k, v)| (k.to_string(), fmt_f64(v))).collect()
}

fn emit(out: &mut Outputs, name: &str, pairs: &[(String, String)]) -> Result<()> {
    let text = key_values(pairs);
    print!("{text}");
    out.text(name, &text)
}

fn cmd_profile(b: f64, eta: f64, dir: &Path) -> Result<()> {
    let q = ground_state()?;
    let mut out = Outputs::new(dir, RunManifest::unconfigured())?;
    let bundle = ProfileBundle::solve(b, eta, &q)?;
    let name = format!("profile_b{}.txt", fmt_f64(b));
    out.file(&name, |p| bundle.write(BufWriter::new(fs::File::create(p)?)))?;
    println!("wrote {}", dir.join(&name).display());
    println!(
        "R_b = {}\nGamma_b = {}\nd0 = {}",
        fmt_f64(bundle.profile.r_b),
        fmt_f64(bundle.radiation.gamma_b),
        fmt_f64(bundle.d0)
    );
    out.finish()
}

fn cmd_init(args: &ConfigArgs) -> Result<()> {
    let (cfg, dir) = load_config(args)?;
    let text = cfg.emit();
    let mut out = Outputs::new(&dir, RunManifest::new(&text))?;
    let family = ProfileFamily::new(ground_state()?, cfg.constants.eta);
    let (u0, report) = build(&cfg.init_params(), &family)?;
    out.text("config.toml", &text)?;
    out.file("init.snap", |p| write_snapshot_file(&u0, p))?;
    let ida = report.to_key_values();
    print!("{ida}");
    out.text("ida.txt", &ida)?;
    out.finish()
}

fn cmd_run(args: &ConfigArgs, init: Option<&Path>) -> Result<()> {
    let (cfg, dir) = load_config(args)?;
    let text = cfg.emit();
    let mut out = Outputs::new(&dir, RunManifest::new(&text))?;
    out.text("config.toml", &text)?;
    let family = ProfileFamily::new(ground_state()?, cfg.constants.eta);
    let (u0, guess) = match init {
        Some(p) => {
            let u0 = read_snapshot_file(p)?;
            let guess = guess_from_peak(&u0, cfg.b0, family.ground().q0)?;
            (u0, guess)
        }
        None => {
            let (u0, report) = build(&cfg.init_params(), &family)?;
            out.file("init.snap", |p| write_snapshot_file(&u0, p))?;
            out.text("ida.txt", &report.to_key_values())?;
            (u0, report.realized)
        }
    };
    let tracked = tracked_run(&u0, guess, &cfg, &family)?;
    let traj = &tracked.trajectory;
    out.file("series.csv", |p| write_timeseries(&traj.records, BufWriter::new(fs::File::create(p)?)))?;
    out.file("modulation.csv", |p| Ok(write_csv(&tracked.modulation, BufWriter::new(fs::File::create(p)?))?))?;
    out.file("final.snap", |p| write_snapshot_file(&traj.final_field, p))?;
    out.manifest.halt_reason = Some(traj.halt.to_string());
    let (first, last) = (tracked.modulation.first(), tracked.modulation.last());
    let mut summary = vec![
        ("halt_reason".to_string(), traj.halt.to_string()),
        ("steps".to_string(), traj.steps.to_string()),
        ("records".to_string(), traj.records.len().to_string()),
        ("decompositions".to_string(), tracked.modulation.len().to_string()),
    ];
    summary.extend(kv(&[
        ("t_final", traj.final_field.time),
        ("mass_drift", traj.mass_drift),
        ("energy_drift", traj.energy_drift),
        ("lambda_first", first.map_or(f64::NAN, |r| r.state.lambda)),
        ("lambda_last", last.map_or(f64::NAN, |r| r.state.lambda)),
        ("b_last", last.map_or(f64::NAN, |r| r.state.b)),
    ]));
    emit(&mut out, "run.txt", &summary)?;
    out.finish()
}

fn cmd_decompose(input: &Path, args: &ConfigArgs) -> Result<()> {
    let (cfg, dir) = load_config(args)?;
    let mut out = Outputs::new(&dir, RunManifest::new(&cfg.emit()))?;
    let u = read_snapshot_file(input)?;
    let family = ProfileFamily::new(ground_state()?, cfg.constants.eta);
    let guess = guess_from_peak(&u, cfg.b0, family.ground().q0)?;
    let d = decompose(&u, &guess, &family, &DecomposeOptions::default())?;
    let s = d.state;
    let mut pairs = kv(&[
        ("t", s.t),
        ("lambda", s.lambda),
        ("gamma", s.gamma),
        ("r_c", s.r_c),
        ("z_c", s.z_c),
        ("b", s.b),
        ("orth1", d.orth[0]),
        ("orth2r", d.orth[1]),
        ("orth2z", d.orth[2]),
        ("orth3", d.orth[3]),
        ("orth4", d.orth[4]),
        ("eps_core_l2", d.eps_core_l2),
        ("eps_h1", d.eps_h1),
        ("E_eps", epsilon_energy(&d.eps)?),
    ]);
    pairs.push(("iterations".into(), d.iterations.to_string()));
    emit(&mut out, "decompose.txt", &pairs)?;
    out.finish()
}

fn cmd_check_gn(samples: usize, seed: u64, eps_radius: f64, dir: &Path) -> Result<()> {
    let mut out = Outputs::new(dir, RunManifest::unconfigured())?;
    let rep = fuzz_campaign(samples, seed, eps_radius, &[1.5, 2.0, 2.5])?;
    let mut pairs = vec![("samples".to_string(), samples.to_string()), ("seed".to_string(), seed.to_string())];
    pairs.extend(kv(&[("eps_radius", eps_radius)]));
    let mut violations = 0;
    for o in &rep.outcomes {
        let name = o.exponent.map_or("gn".to_string(), |p| format!("interp_p{}", fmt_f64(p)));
        violations += o.violations;
        pairs.push((format!("{name}.worst_ratio"), fmt_f64(o.worst.ratio)));
        pairs.push((format!("{name}.violations"), o.violations.to_string()));
        pairs.push((format!("{name}.worst_field"), o.worst.field_id.clone()));
        pairs.push((format!("{name}.worst_truncated"), o.worst.truncated.to_string()));
    }
    emit(&mut out, "check_gn.txt", &pairs)?;
    out.finish()?;
    if violations > 0 {
        return Err(Error::Inconsistency(format!("{violations} inequality violations")));
    }
    Ok(())
}

fn cmd_check_spectral(samples: usize, seed: u64, extent: f64, spacing: f64, projected: bool, dir: &Path) -> Result<()> {
    let mut out = Outputs::new(dir, RunManifest::unconfigured())?;
    let q = solve_ground_state(0.005, 1e-12)?;
    let grid = RescaledGrid2D::new(spacing, extent)?;
    let rep = verify_spectral_property(samples, &grid, seed, &q, projected)?;
    const THRESHOLD: f64 = 0.01;
    let pass = !projected || rep.min_rayleigh >= THRESHOLD;
    let mut pairs = kv(&[
        ("min_rayleigh", rep.min_rayleigh),
        ("projection_residual", rep.projection_residual),
        ("extent", grid.extent),
        ("spacing", spacing),
        ("threshold", THRESHOLD),
    ]);
    pairs.push(("n_samples".into(), rep.n_samples.to_string()));
    pairs.push(("seed".into(), seed.to_string()));
    pairs.push(("projected".into(), projected.to_string()));
    pairs.push(("pass".into(), pass.to_string()));
    emit(&mut out, "check_spectral.txt", &pairs)?;
    out.finish()?;
    if !pass {
        return Err(Error::Inconsistency(format!("minimum Rayleigh quotient {} below {THRESHOLD}", rep.min_rayleigh)));
    }
    Ok(())
}

fn cmd_check_profiles(bs: &[f64], eta: f64, dir: &Path) -> Result<()> {
    let mut out = Outputs::new(dir, RunManifest::unconfigured())?;
    let q = solve_ground_state(0.005, 1e-12)?;
    let (m, g, l4) = (q.mass(), q.grad_norm_sq(), q.l4_norm4());
    let mut pairs = kv(&[
        ("q0", q.q0),
        ("mass", m),
        ("grad_sq", g),
        ("l4_half", 0.5 * l4),
        ("pohozaev_grad_gap", (g - m).abs() / m),
        ("pohozaev_l4_gap", (0.5 * l4 - m).abs() / m),
    ]);
    let mut failures = Vec::new();
    for &b in bs {
        let (tq, psi) = truncate(Arc::new(solve_qb(b, eta, 1e-13, q.q0)?));
        let res = qb_residual(&tq, 0.05);
        let bound = 10.0 * res.truncation_estimate;
        let (energy, gap) = profile_energy(&tq, &psi)?;
        let (m1, m2) = momentum_degeneracy_check(&tq);
        let pass = res.residual <= bound && gap <= bound && m1 <= 1e-10 && m2 <= 1e-10;
        if !pass {
            failures.push(b);
        }
        let p = format!("b{}", fmt_f64(b));
        for (k, v) in [
            ("r_b", tq.r_b),
            ("residual", res.residual),
            ("bound", bound),
            ("energy", energy),
            ("energy_gap", gap),
            ("momentum_gap", m1),
            ("scaling_momentum_gap", m2),
        ] {
            pairs.push((format!("{p}.{k}"), fmt_f64(v)));
        }
        pairs.push((format!("{p}.pass"), pass.to_string()));
    }
    emit(&mut out, "check_profiles.txt", &pairs)?;
    out.finish()?;
    if !failures.is_empty() {
        return Err(Error::Inconsistency(format!("profile identities fail at b = {failures:?}")));
    }
    Ok(())
}

fn cmd_fit(input: &Path, floor: f64, dir: &Path) -> Result<()> {
    let rows = read_modulation_csv(fs::File::open(input)?)?;
    let mut out = Outputs::new(dir, RunManifest::unconfigured())?;
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let lambda: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let cmp = fit_loglog(&t, &lambda, floor)?;
    let mut pairs = Vec::new();
    for f in [cmp.loglog, cmp.sqrt] {
        let n = f.law.name();
        pairs.extend(kv(&[
            (&format!("{n}.t_blowup"), f.t_est),
            (&format!("{n}.prefactor"), f.prefactor),
            (&format!("{n}.residual"), f.residual),
            (&format!("{n}.window_start"), f.window.0),
            (&format!("{n}.window_end"), f.window.1),
        ]));
        pairs.push((format!("{n}.samples"), f.n_samples.to_string()));
    }
    if let Ok(law) = check_b_lambda_law(&b, &lambda) {
        pairs.extend(kv(&[
            ("b_loglog_lambda.min", law.min),
            ("b_loglog_lambda.max", law.max),
            ("b_loglog_lambda.median", law.median),
        ]));
    }
    let r_c: Vec<f64> = rows.iter().map(|r| r.r_c).collect();
    let z_c: Vec<f64> = rows.iter().map(|r| r.z_c).collect();
    let circle = check_singular_circle(&r_c, &z_c, None)?;
    let res: Vec<f64> = rows.iter().map(|r| r.res_scaling).filter(|v| v.is_finite()).collect();
    let lyap: Vec<f64> = rows.iter().map(|r| r.lyapunov).filter(|v| v.is_finite()).collect();
    pairs.extend(kv(&[
        ("ring_relative_drift", circle.relative_drift),
        ("ring_tv_z", circle.tv_z),
        ("lambda_fall", lambda[0] / lambda.iter().copied().fold(f64::INFINITY, f64::min)),
        ("b_min", b.iter().copied().fold(f64::INFINITY, f64::min)),
        ("b_median", median(&b)),
        ("scaling_residual_median", if res.is_empty() { f64::NAN } else { median(&res) }),
        ("lyapunov_max_relative_rise", max_relative_rise(&lyap)),
    ]));
    emit(&mut out, "fit.txt", &pairs)?;
    out.finish()
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Profile { b, eta, out } => cmd_profile(b, eta, &out.out),
        Command::Init(args) => cmd_init(&args),
        Command::Run { cfg, init } => cmd_run(&cfg, init.as_deref()),
        Command::Decompose { input, cfg } => cmd_decompose(&input, &cfg),
        Command::Check { what } => match what {
            Check::Gn { samples, seed, eps_radius, out } => cmd_check_gn(samples, seed, eps_radius, &out.out),
            Check::Spectral { samples, seed, extent, spacing, no_projection, out } => {
                cmd_check_spectral(samples, seed, extent, spacing, !no_projection, &out.out)
            }
            Check::Profiles { b, eta, out } => cmd_check_profiles(&b, eta, &out.out),
        },
        Command::Fit { input, floor, out } => cmd_fit(&input, floor, &out.out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
