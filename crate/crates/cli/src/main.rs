use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ltg_cli::report::verify_dir;
use ltg_cli::scenario::{Kind, Overrides};
use ltg_cli::{run_config, run_list, Outcome, EXIT_ASSERTION, EXIT_INPUT, EXIT_PASS};

#[derive(Parser)]
#[command(name = "ltg", version, about = "Run and verify living temporal game scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario (or scenario list) file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `$LTG_OUT/<name>` (`ltg-out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed for Monte Carlo paths and random transfer schemes.
    #[arg(long)]
    seed: Option<u64>,
    /// Equilibrium tolerance (default 1e-9).
    #[arg(long)]
    tol: Option<f64>,
    /// Uniformization rate, e.g. `4000` or `81/2`.
    #[arg(long)]
    gamma: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compare DP values with exact-clock simulation.
    UniformizeCheck(Common),
    /// Enumerate stationary MPEs and check them against a deviation oracle.
    MpeVerify(Common),
    /// Inertia depth with survival and converse checks.
    Inertia(Common),
    /// Bounded transfers against an edge retype on the two-player family.
    Dominance(Common),
    /// Outcome inclusion when flow edges become transport edges.
    Monotonicity(Common),
    /// Pivot mechanism: EPIC and deficit checks in exact arithmetic.
    Pivot(Common),
    /// Exact feasibility certificates over a grid of switching costs.
    Impossibility(Common),
    /// Run every scenario in a list file.
    Run {
        #[command(flatten)]
        common: Common,
        /// Scenarios run at once (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-derive the headline numbers of a report from its tables.
    Verify {
        /// Report directory (or a `run` output root).
        #[arg(long)]
        out: PathBuf,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides { gamma: c.gamma.clone(), tol: c.tol, seed: c.seed }
}

fn print(o: &Outcome) {
    match (&o.report, &o.error) {
        (_, Some(e)) => eprintln!("{}: error: {e}", o.name),
        (Some(r), None) => {
            for a in &r.assertions {
                println!("{} {}: {}{}", if a.pass { "PASS" } else { "FAIL" }, o.name, a.name, detail(&a.detail));
            }
            println!("{}: report in {}", o.name, o.dir.display());
        }
        (None, None) => {}
    }
}

fn detail(d: &str) -> String {
    if d.is_empty() {
        String::new()
    } else {
        format!(" ({d})")
    }
}

fn single(kind: Kind, c: &Common) -> i32 {
    let o = run_config(&c.config, c.out.as_deref(), &overrides(c), Some(kind));
    print(&o);
    o.status()
}

fn verify(out: &PathBuf) -> i32 {
    let dirs: Vec<PathBuf> = if out.join("summary.json").exists() {
        vec![out.clone()]
    } else {
        let mut v: Vec<PathBuf> = std::fs::read_dir(out)
            .map(|rd| rd.flatten().map(|e| e.path()).filter(|p| p.join("summary.json").exists()).collect())
            .unwrap_or_default();
        v.sort();
        v
    };
    if dirs.is_empty() {
        eprintln!("no reports under {}", out.display());
        return EXIT_INPUT;
    }
    let mut status = EXIT_PASS;
    for dir in dirs {
        match verify_dir(&dir) {
            Ok(checks) => {
                for c in checks {
                    let tag = if c.ok() { "OK" } else { "MISMATCH" };
                    println!("{tag} {}: {} reported {} derived {}", dir.display(), c.name, c.reported, c.derived);
                    if !c.ok() {
                        status = EXIT_ASSERTION;
                    }
                }
            }
            Err(e) => {
                eprintln!("{}: {e:#}", dir.display());
                return EXIT_INPUT;
            }
        }
    }
    status
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match &cli.command {
        Command::UniformizeCheck(c) => single(Kind::UniformizeCheck, c),
        Command::MpeVerify(c) => single(Kind::MpeVerify, c),
        Command::Inertia(c) => single(Kind::Inertia, c),
        Command::Dominance(c) => single(Kind::Dominance, c),
        Command::Monotonicity(c) => single(Kind::Monotonicity, c),
        Command::Pivot(c) => single(Kind::Pivot, c),
        Command::Impossibility(c) => single(Kind::Impossibility, c),
        Command::Run { common, jobs } => {
            let out = common.out.clone().unwrap_or_else(|| {
                std::env::var_os("LTG_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("ltg-out"))
            });
            match run_list(&common.config, &out, &overrides(common), *jobs) {
                Ok(outcomes) => {
                    outcomes.iter().for_each(print);
                    outcomes.iter().map(Outcome::status).max().unwrap_or(EXIT_PASS)
                }
                Err(e) => {
                    eprintln!("{e}");
                    EXIT_INPUT
                }
            }
        }
        Command::Verify { out } => verify(out),
    };
    debug_assert!([EXIT_PASS, EXIT_ASSERTION, EXIT_INPUT].contains(&status));
    ExitCode::from(status as u8)
}

