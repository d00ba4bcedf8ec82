//! `sinrlab`: command-line front end for the space-time SINR graph studies.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{CommandFactory, Parser, Subcommand};
use sinrlab::experiments::invariants::run_invariant_suite;
use sinrlab::experiments::time_constant::STABILIZATION_THRESHOLD;
use sinrlab::experiments::{degree, local, tail, time_constant, Verdict};
use sinrlab::marks::MarkStream;
use sinrlab::pointproc::sample_model;
use sinrlab::sinr::{Network, Variant};

use config::{Config, SMALL_CONFIG};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] sinrlab::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "sinrlab", version, about = "Space-time SINR random graph studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run config (sectioned key = value; see config/schema.txt).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides model.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Sample a pattern and the SINR edges of one slot.
    Generate,
    /// Path counts H^out,k and H^in,k (needs a torus window).
    Degree,
    /// Survival of the exit delay, trials and SNR trials.
    ExitTail,
    /// Mean point-to-point local delay against its oracle.
    LocalDelay,
    /// Mean first-passage time over distance along a ladder.
    TimeConstant,
    /// Run every study section in the config and check it; exit 2 on failure.
    Validate,
    /// Hard-invariant suite; exit 2 on failure.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Degree => "degree",
            Command::ExitTail => "exit-tail",
            Command::LocalDelay => "local-delay",
            Command::TimeConstant => "time-constant",
            Command::Validate => "validate",
            Command::Selftest => "selftest",
        }
    }

    /// Config section read by the command, echoed into the manifest.
    fn section(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Degree => "degree",
            Command::ExitTail => "exit_tail",
            Command::LocalDelay => "local_delay",
            Command::TimeConstant => "time_constant",
            Command::Validate => "validate",
            Command::Selftest => "selftest",
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?,
        None => match cli.command {
            Command::Generate | Command::Selftest => SMALL_CONFIG.to_string(),
            c => return Err(CliError::Usage(format!("`{}` needs --config PATH", c.name()))),
        },
    };
    let mut cfg = Config::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.set("model.seed", seed.to_string());
    }
    Ok(cfg)
}

struct Run<'a> {
    out: &'a Path,
    files: Vec<String>,
    verdicts: Vec<(String, Verdict)>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.out.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn verdicts(&mut self, study: &str, vs: Vec<Verdict>) {
        self.verdicts.extend(vs.into_iter().map(|v| (study.to_string(), v)));
    }
}

fn run_degree(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let rep = degree::run_degree_study(&cfg.degree()?)?;
    for r in &rep.rows {
        println!(
            "k={} H_out={:.6} H_in={:.6} diff={:.3e} (se {:.3e}) max_in={} bound={}",
            r.k, r.out_mean, r.in_mean, r.diff, r.diff_se, r.max_in, r.bound
        );
    }
    run.write("degree.csv", &rep.table.to_csv())?;
    run.verdicts("degree", rep.verdicts(cfg.z()));
    Ok(())
}

fn run_exit_tail(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let rep = tail::run_exit_tail_study(&cfg.exit_tail()?)?;
    for p in rep.points.iter().filter(|p| p.statistic == tail::TailStatistic::Exit) {
        println!("P(exit > {}) = {:.6} (censored {})", p.q, p.estimate, p.censored);
    }
    if let Some(s) = rep.exit_slope {
        println!("log-log slope of exit survival: {s:.4}");
    }
    if rep.warning {
        println!("warning: more than half of the samples are censored at the smallest q");
    }
    run.write("exit_tail.csv", &rep.table.to_csv())?;
    run.verdicts("exit_tail", rep.snr_verdicts(cfg.z()));
    Ok(())
}

fn run_local_delay(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let rep = local::run_local_delay_validation(&cfg.local_delay()?)?;
    println!(
        "mean local delay {:.4} (se {:.4}, censored {}) oracle {:.4}",
        rep.local.value, rep.local.se, rep.local.censored, rep.oracle
    );
    run.write("local_delay.csv", &rep.table.to_csv())?;
    run.verdicts("local_delay", rep.verdicts(cfg.rel()));
    Ok(())
}

fn run_time_constant(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let tc = cfg.time_constant()?;
    let rep = time_constant::run_time_constant_study(&tc)?;
    for r in &rep.rungs {
        println!("t={} mean={:.3} ratio={:.4} (se {:.4}) censored={}", r.t, r.mean, r.ratio, r.ratio_se, r.censored);
    }
    println!(
        "top relative change {:.4} (stabilization threshold {STABILIZATION_THRESHOLD}, an engineering choice)",
        rep.top_change
    );
    run.write("time_constant.csv", &rep.table.to_csv())?;
    let v = if tc.model.grid_step.is_some() {
        Verdict::at_most("top_relative_change", rep.top_change, STABILIZATION_THRESHOLD)
    } else {
        let inc = rep.strictly_increasing;
        Verdict {
            name: "ratio_strictly_increasing".into(),
            estimate: f64::from(u8::from(inc)),
            reference: 1.0,
            se: 0.0,
            tolerance: 0.0,
            passed: inc,
        }
    };
    run.verdicts("time_constant", vec![v]);
    Ok(())
}

fn run_generate(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let model = cfg.model()?;
    let pattern = sample_model(&model, model.seed)?;
    let mut buf = Vec::new();
    pattern.write_csv(&mut buf)?;
    run.write("pattern.csv", &String::from_utf8_lossy(&buf))?;
    let net = Network::new(&pattern, &model);
    let stream = MarkStream::new(&model, model.seed);
    let mut buf = Vec::new();
    net.view(&stream, cfg.generate_slot()).write_edges_csv(Variant::Sinr, &mut buf)?;
    run.write("edges.csv", &String::from_utf8_lossy(&buf))?;
    println!("{} points", pattern.len());
    Ok(())
}

fn run_selftest(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let rep = run_invariant_suite(&cfg.invariants()?)?;
    for (name, c) in rep.checks() {
        println!(
            "{} {name}: samples={} violations={} inconclusive={}",
            if c.violations == 0 { "PASS" } else { "FAIL" },
            c.samples,
            c.violations,
            c.inconclusive
        );
        run.verdicts.push((
            "selftest".into(),
            Verdict::at_most(name, c.violations as f64, 0.0),
        ));
    }
    run.write("selftest.csv", &rep.table.to_csv())?;
    Ok(())
}

type StudyFn = fn(&Config, &mut Run) -> Result<(), CliError>;

fn verdicts_csv(vs: &[(String, Verdict)]) -> String {
    let mut out = String::from("study,check,estimate,reference,se,tolerance,passed\n");
    for (s, v) in vs {
        let _ = writeln!(
            out,
            "{s},{},{:?},{:?},{:?},{:?},{}",
            v.name, v.estimate, v.reference, v.se, v.tolerance, v.passed
        );
    }
    out
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = load_config(cli)?;
    // validates before any output is written
    cfg.model()?;
    fs::create_dir_all(&cli.out)?;
    let started = Instant::now();
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut run = Run {
        out: &cli.out,
        files: Vec::new(),
        verdicts: Vec::new(),
    };
    let mut echo = vec![cli.command.section()];
    match cli.command {
        Command::Generate => run_generate(&cfg, &mut run)?,
        Command::Degree => run_degree(&cfg, &mut run)?,
        Command::ExitTail => run_exit_tail(&cfg, &mut run)?,
        Command::LocalDelay => run_local_delay(&cfg, &mut run)?,
        Command::TimeConstant => run_time_constant(&cfg, &mut run)?,
        Command::Selftest => run_selftest(&cfg, &mut run)?,
        Command::Validate => {
            let studies: [(&str, StudyFn); 4] = [
                ("degree", run_degree),
                ("exit_tail", run_exit_tail),
                ("local_delay", run_local_delay),
                ("time_constant", run_time_constant),
            ];
            let mut any = false;
            for (section, f) in studies {
                if cfg.has_section(section) {
                    any = true;
                    echo.push(section);
                    f(&cfg, &mut run)?;
                }
            }
            if !any {
                return Err(CliError::Usage(
                    "validate needs at least one study section ([degree], [exit_tail], [local_delay], [time_constant])".into(),
                ));
            }
        }
    }
    let checked = matches!(cli.command, Command::Validate | Command::Selftest);
    if checked {
        for (s, v) in &run.verdicts {
            println!("{s}: {v}");
        }
        let csv = verdicts_csv(&run.verdicts);
        run.write("verdicts.csv", &csv)?;
    }
    let passed = run.verdicts.iter().all(|(_, v)| v.passed);

    let mut manifest = String::new();
    let _ = writeln!(manifest, "# sinrlab run manifest; replay with:");
    let _ = writeln!(manifest, "#   sinrlab {} --config <this file>", cli.command.name());
    let _ = writeln!(manifest, "# command = {}", cli.command.name());
    let _ = writeln!(manifest, "# version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "# seed = {}", cfg.seed());
    let _ = writeln!(manifest, "# workers = {}", rayon::current_num_threads());
    let _ = writeln!(manifest, "# started_unix = {unix}");
    let _ = writeln!(manifest, "# wall_clock_seconds = {:.3}", started.elapsed().as_secs_f64());
    let _ = writeln!(manifest, "# outputs = {}", run.files.join(","));
    if checked {
        let _ = writeln!(manifest, "# checks_passed = {passed}");
    }
    manifest.push('\n');
    manifest.push_str(&cfg.resolved_text(&echo));
    fs::write(cli.out.join("manifest.txt"), manifest)?;
    Ok(passed || !checked)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("checks failed; see {}", cli.out.join("verdicts.csv").display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            ExitCode::from(1)
        }
    }
}
