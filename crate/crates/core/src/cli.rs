//! Command-line front end. Exit codes: 0 success, 1 I/O or schema error,
//! 2 no solution found, 3 a hypothesis or property was refuted.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::catalog;
use crate::coercivity::{doubling_candidates, find_coercive_radius, tz_coercivity_check, verify_native, TzReport, UccReport, FAR_SAMPLES};
use crate::error::{QeqError, Result};
use crate::instance::ProblemInstance;
use crate::linalg::Point;
use crate::map::restrict_to_ball;
use crate::properties::{self, PropertyVerdict, SampleDomain, DEFAULT_KAPPA};
use crate::report::ReportFile;
use crate::solver::hypotheses::{check_own_block_convexity, Variant};
use crate::solver::oracle::oracle_enumerate;
use crate::solver::pipeline::{solve, SolveOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_SOLUTION: i32 = 2;
pub const EXIT_REFUTED: i32 = 3;

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "QEQ_SEED";

#[derive(Parser, Debug)]
#[command(name = "qeq", version, about = "Quasi-equilibrium problems on grids: solve, verify, coercivity, oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the built-in instances.
    Catalog {
        /// Print the listing as JSON.
        #[arg(long)]
        json: bool,
        /// Print one instance as a canonical instance file instead.
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
    /// Solve an instance: coercive radius, hypothesis checks, restricted solutions, lifting.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Coercive radius; searched when neither this nor numerics.rho is set.
        #[arg(long)]
        rho: Option<f64>,
        /// Overrides numerics.grid_h.
        #[arg(long)]
        grid_h: Option<f64>,
        /// Hypothesis set to check: case1, case2 or lassonde.
        #[arg(long, default_value = "case2")]
        variant: Variant,
        /// Samples per property check.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
    },
    /// Sample one property of the bifunction or constraint map.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Property name, e.g. pseudo-monotone or closed-graph.
        #[arg(long)]
        property: String,
        /// Samples to draw.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
    },
    /// Check the uniform coerciveness condition.
    Coercivity {
        #[command(flatten)]
        common: Common,
        /// Radius to check; defaults to numerics.rho.
        #[arg(long, conflicts_with = "search")]
        rho: Option<f64>,
        /// Search the doubling sequence 1, 2, 4, … up to --rho-max.
        #[arg(long)]
        search: bool,
        #[arg(long, default_value_t = 64.0)]
        rho_max: f64,
        /// Also sweep compact candidate pairs for the condition K(W) ⊆ Z.
        #[arg(long)]
        tz: bool,
        #[arg(long, default_value_t = 20)]
        candidates: usize,
    },
    /// Brute-force grid enumeration of solutions on C ∩ B̄_R.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Radius R of the window; defaults to numerics.rho.
        #[arg(long)]
        window_radius: Option<f64>,
        /// Overrides numerics.grid_h.
        #[arg(long)]
        grid_h: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Instance file or catalog name.
    instance: String,
    /// Sampling seed; falls back to QEQ_SEED, then numerics.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Loads a file when `arg` names one, otherwise a catalog entry.
pub fn resolve_instance(arg: &str) -> Result<ProblemInstance> {
    let path = Path::new(arg);
    if path.is_file() {
        ProblemInstance::load(path)
    } else if catalog::names().contains(&arg) {
        catalog::load(arg)
    } else {
        Err(QeqError::InvalidArgument(format!(
            "{arg:?} is neither a file nor a catalog instance"
        )))
    }
}

fn resolve_seed(flag: Option<u64>, inst: &ProblemInstance) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| QeqError::InvalidArgument(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(inst.numerics.seed),
    }
}

fn emit<T: Serialize>(report: &ReportFile<T>, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let text = report.to_json();
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_ERROR;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Catalog { json, show } => {
            if let Some(name) = show {
                write!(stdout, "{}", catalog::load(&name)?.canonical_json())?;
            } else if json {
                let listing = serde_json::to_string_pretty(catalog::entries())?;
                writeln!(stdout, "{listing}")?;
            } else {
                for e in catalog::entries() {
                    let tag = if e.control { " [control]" } else { "" };
                    writeln!(stdout, "{:<18} {:<5} {}{}", e.name, format!("{:?}", e.kind).to_lowercase(), e.summary, tag)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Solve {
            common,
            rho,
            grid_h,
            variant,
            budget,
        } => {
            let mut inst = resolve_instance(&common.instance)?;
            if let Some(h) = grid_h {
                inst.numerics.grid_h = h;
                inst.numerics.validate()?;
            }
            let seed = resolve_seed(common.seed, &inst)?;
            let opts = SolveOptions {
                rho,
                budget,
                seed,
                ..SolveOptions::new(variant)
            };
            let rep = solve(&inst, &opts)?;
            let code = if rep.is_refuted() {
                EXIT_REFUTED
            } else if rep.solutions.is_empty() {
                EXIT_NO_SOLUTION
            } else {
                EXIT_OK
            };
            writeln!(
                stderr,
                "{}: {} solution(s), rho = {}, refuted = {}",
                inst.name,
                rep.solutions.len(),
                rep.rho.map_or("none".to_string(), |r| r.to_string()),
                rep.is_refuted()
            )?;
            emit(&ReportFile::new("solve", &inst, seed, rep), common.out.as_deref(), stdout)?;
            Ok(code)
        }
        Command::Verify {
            common,
            property,
            budget,
        } => {
            let inst = resolve_instance(&common.instance)?;
            let seed = resolve_seed(common.seed, &inst)?;
            let verdict = verify_property(&inst, &property, budget, seed)?;
            writeln!(
                stderr,
                "{}: {} {}",
                inst.name,
                verdict.property,
                if verdict.passed() { "passed" } else { "refuted" }
            )?;
            let code = if verdict.passed() { EXIT_OK } else { EXIT_REFUTED };
            emit(&ReportFile::new("verify", &inst, seed, verdict), common.out.as_deref(), stdout)?;
            Ok(code)
        }
        Command::Coercivity {
            common,
            rho,
            search,
            rho_max,
            tz,
            candidates,
        } => {
            let inst = resolve_instance(&common.instance)?;
            let seed = resolve_seed(common.seed, &inst)?;
            let mut rep = CoercivityReport::default();
            if search {
                let found = find_coercive_radius(&inst, 1.0, rho_max, FAR_SAMPLES, seed)?;
                rep.search = Some(SearchOutcome {
                    rho_max,
                    found: found.as_ref().map(|r| r.rho),
                });
                rep.ucc = found;
            } else {
                let r = rho.or(inst.numerics.rho).ok_or_else(|| {
                    QeqError::InvalidArgument("no radius: pass --rho or --search, or set numerics.rho".into())
                })?;
                rep.ucc = Some(verify_native(&inst, r, FAR_SAMPLES, seed)?);
            }
            if tz {
                let cands = doubling_candidates(&inst.c, candidates)?;
                rep.tz = Some(tz_coercivity_check(&inst, &cands, seed)?);
            }
            let pass = rep.ucc.as_ref().is_some_and(|u| u.pass);
            writeln!(
                stderr,
                "{}: coercivity {}{}",
                inst.name,
                if pass { "passed" } else { "failed" },
                rep.tz
                    .as_ref()
                    .map_or(String::new(), |t| format!(", candidate sweep {}", if t.pass { "passed" } else { "failed" }))
            )?;
            emit(&ReportFile::new("coercivity", &inst, seed, rep), common.out.as_deref(), stdout)?;
            Ok(if pass { EXIT_OK } else { EXIT_REFUTED })
        }
        Command::Oracle {
            common,
            window_radius,
            grid_h,
        } => {
            let inst = resolve_instance(&common.instance)?;
            let seed = resolve_seed(common.seed, &inst)?;
            let radius = window_radius.or(inst.numerics.rho).ok_or_else(|| {
                QeqError::InvalidArgument("no window: pass --window-radius or set numerics.rho".into())
            })?;
            let h = grid_h.unwrap_or(inst.numerics.grid_h);
            let rep = run_oracle(&inst, radius, h)?;
            writeln!(stderr, "{}: {} grid solution(s)", inst.name, rep.solutions.len())?;
            emit(&ReportFile::new("oracle", &inst, seed, rep), common.out.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SearchOutcome {
    pub rho_max: f64,
    pub found: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CoercivityReport {
    pub ucc: Option<UccReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tz: Option<TzReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub window_radius: f64,
    pub grid_h: f64,
    pub tol_feas: f64,
    pub tol_sol: f64,
    pub solutions: Vec<Point>,
}

/// Oracle on `C ∩ B̄_R` with `K` restricted to `B̄_R`.
pub fn run_oracle(inst: &ProblemInstance, radius: f64, h: f64) -> Result<OracleReport> {
    let nm = &inst.numerics;
    let k = restrict_to_ball(&inst.k, radius)?;
    let region = inst.c.intersect_origin_ball(radius)?;
    let solutions = oracle_enumerate(&k, &inst.f, &region, h, nm.tol_feas, nm.tol_sol)?;
    Ok(OracleReport {
        window_radius: radius,
        grid_h: h,
        tol_feas: nm.tol_feas,
        tol_sol: nm.tol_sol,
        solutions,
    })
}

/// Property names accepted by `verify` (hyphens and underscores are interchangeable).
pub const PROPERTIES: &[&str] = &[
    "pseudo_monotone",
    "quasi_monotone",
    "properly_quasi_monotone",
    "upper_sign",
    "quasiconvex_y",
    "semistrict_quasiconvex_y",
    "usc_first_argument",
    "diagonal_vanishes",
    "lsc",
    "closed_graph",
    "nonempty_values",
    "fixed_set_closed",
    "own_block_convexity",
];

/// Runs one sampled property check on `C ∩ B̄_{2ρ}` (radius 10 without `ρ`).
pub fn verify_property(inst: &ProblemInstance, name: &str, budget: usize, seed: u64) -> Result<PropertyVerdict> {
    let name = name.replace('-', "_");
    let radius = inst.numerics.rho.map_or(10.0, |r| 2.0 * r);
    let domain = SampleDomain::new(inst.c.clone(), radius, inst.numerics.grid_h);
    let f = &inst.f;
    match name.as_str() {
        "pseudo_monotone" => properties::check_pseudo_monotone(f, &domain, budget, seed),
        "quasi_monotone" => properties::check_quasi_monotone(f, &domain, budget, seed),
        "properly_quasi_monotone" => properties::check_properly_quasi_monotone(f, &domain, 4, budget, seed),
        "upper_sign" => properties::check_upper_sign(f, &domain, budget, 9, seed),
        "quasiconvex_y" => properties::check_quasiconvex_y(f, &domain, budget, seed),
        "semistrict_quasiconvex_y" => properties::check_semistrict_quasiconvex_y(f, &domain, budget, seed),
        "usc_first_argument" => properties::check_usc_first_argument(f, &domain, budget, seed),
        "diagonal_vanishes" => Ok(properties::check_diagonal(f, &domain.lattice()?.points, true)),
        "lsc" => properties::falsify_lsc(&inst.k, &domain, DEFAULT_KAPPA, budget, seed),
        "closed_graph" => properties::falsify_closed_graph(&inst.k, &domain, budget, seed),
        "nonempty_values" => properties::check_nonempty_values(&inst.k, &domain, budget, seed),
        "fixed_set_closed" => {
            properties::falsify_fixed_set_closed(&inst.k, &domain, DEFAULT_KAPPA, inst.numerics.tol_feas, budget, seed)
        }
        "own_block_convexity" => match inst.game() {
            Some(g) => Ok(check_own_block_convexity(g)),
            None => Err(QeqError::InvalidArgument("own_block_convexity needs a GNEP instance".into())),
        },
        other => Err(QeqError::InvalidArgument(format!(
            "unknown property {other:?}; expected one of {}",
            PROPERTIES.join(", ")
        ))),
    }
}
