use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subfactor_core::catalog;
use subfactor_core::report::VerificationReport;
use subfactor_core::specfile::InclusionSpec;
use subfactor_core::suites::{self, Context, SuiteConfig};
use subfactor_core::tower::{max_depth, predicted_block_sizes};
use subfactor_core::Error;

/// Build Jones towers of multi-matrix inclusions and verify basis identities numerically.
#[derive(Parser, Debug)]
#[command(name = "subfactor-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Markov trace: ‖G‖², τ and the trace vectors.
    Markov(Common),
    /// Tower dimensions, block structure and Temperley-Lieb residuals.
    Tower(Common),
    /// Construct a basis of M over N and check the three basis conditions.
    Basis(Common),
    /// Run named suites (default: all).
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite names, or `all`.
        suites: Vec<String>,
    },
    /// Extend an automorphism (from the inclusion file, or random) up the tower.
    ExtendAut(Common),
    /// Multi-step Jones projections and their identities.
    Multistep(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Inclusion file, or a catalog name (C1..C4, R<seed>).
    spec: String,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance for every residual (overrides the per-suite defaults).
    #[arg(long)]
    tol: Option<f64>,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
}

fn load(spec: &str) -> Result<InclusionSpec, Error> {
    let path = Path::new(spec);
    if path.exists() {
        return InclusionSpec::read(path);
    }
    catalog::by_name(spec)
        .map(|d| InclusionSpec::from_data(&d))
        .ok_or_else(|| Error::Precondition(format!("'{spec}' is neither a readable file nor a catalog name (C1..C4, R<seed>)")))
}

fn run(common: &Common, names: &[&str], default_depth: Option<usize>) -> Result<(VerificationReport, InclusionSpec), Error> {
    if let Some(t) = common.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Precondition(format!("--tol must be a finite nonnegative number, got {t}")));
        }
    }
    let spec = load(&common.spec)?;
    let inc = spec.inclusion()?;
    let automorphism = spec.automorphism(&inc)?;
    let depth = common.depth.or(spec.depth).or_else(|| default_depth.map(|d| d.min(max_depth(&inc))));
    let mut ctx = Context::new(&spec.name, inc, automorphism, depth)?;
    let cfg = SuiteConfig { seed: common.seed, tol: common.tol, ..Default::default() };
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    Ok((suites::run(&mut ctx, &names, &cfg)?, spec))
}

fn print_header(cmd: &Command, spec: &InclusionSpec, report: &VerificationReport) {
    match cmd {
        Command::Markov(_) => {
            let m = &report.suites[0].values;
            println!("‖G‖² = {}", m["norm_sq"]);
            println!("τ    = {}", m["tau"]);
            let t: Vec<String> = (0..spec.dims_m.len()).map(|j| m[&format!("t[{j}]")].to_string()).collect();
            let s: Vec<String> = (0..spec.dims_n.len()).map(|i| m[&format!("s[{i}]")].to_string()).collect();
            println!("t (M) = [{}]", t.join(", "));
            println!("s (N) = [{}]", s.join(", "));
        }
        Command::Tower(_) => {
            let depth = report.depth.unwrap_or(0);
            if let Ok(inc) = spec.inclusion() {
                let sizes = predicted_block_sizes(&inc, depth);
                println!("{:>6} {:>10}  blocks", "level", "dimension");
                for (k, s) in sizes.iter().enumerate() {
                    let dim: usize = s.iter().map(|n| n * n).sum();
                    println!("{:>6} {:>10}  {:?}", k as i32 - 1, dim, s);
                }
            }
        }
        _ => {}
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, names, default_depth): (&Common, Vec<&str>, Option<usize>) = match &cli.command {
        Command::Markov(c) => (c, vec!["markov"], None),
        Command::Tower(c) => (c, vec!["structure", "tl"], Some(3)),
        Command::Basis(c) => (c, vec!["thm2.2"], Some(1)),
        Command::Verify { common, suites } => {
            let names = if suites.is_empty() { vec!["all"] } else { suites.iter().map(String::as_str).collect() };
            (common, names, None)
        }
        Command::ExtendAut(c) => (c, vec!["lem3.1", "thm3.2", "cor3.3"], Some(3)),
        Command::Multistep(c) => (c, vec!["lem3.4", "thm3.5", "tl", "eq3.4"], None),
    };
    let (report, spec) = match run(common, &names, default_depth) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if common.json {
        match serde_json::to_string_pretty(&report) {
            Ok(s) => println!("{s}"),
            Err(e) => {
                eprintln!("error: cannot serialize report: {e}");
                return ExitCode::from(2);
            }
        }
    } else {
        print_header(&cli.command, &spec, &report);
        println!("{report}");
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
