//! `lisnoma`: command-line front end of the analysis library.
//!
//! Every subcommand reads an optional JSON scenario (the two-user reference
//! scenario otherwise), applies the flag overrides and writes CSV or JSON to
//! `--output` or stdout. User indices on the command line are one-based.
//! Exit status is 2 for argument and scenario errors and 1 for numerical
//! failures or failed validation criteria.

// Range checks are negated so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod output;

use args::{ElementList, Grid, SnrRange};
use clap::{Parser, Subcommand, ValueEnum};
use lisnoma::asymptotics::diversity_order;
use lisnoma::channel::{sample_cascade, simulate_ber_with, simulate_pep, BerOptions};
use lisnoma::moments::{analytic_moments, empirical_moments};
use lisnoma::pdf::{fit_for, ModelDensity, PdfModel};
use lisnoma::pep::{default_event, PepEvaluator, PepMethod};
use lisnoma::union_bound::{enumerate_events, union_bound_curve};
use lisnoma::validation::{run_all, ValidationOptions};
use lisnoma::{Error, SnrGrid, SystemConfig};
use output::{curve_csv, emit, per_user_path, table_csv, CurveRow, RunManifest};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "lisnoma",
    version,
    about = "Error-rate analysis of LIS-assisted downlink NOMA"
)]
struct Cli {
    /// JSON scenario file; the two-user reference scenario when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Seed for every Monte Carlo draw.
    #[arg(long, global = true, env = "LISNOMA_SEED")]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    G,
    Dr,
    Clt,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum QuadModel {
    G,
    Dr,
    Clt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PepMethodArg {
    General,
    M1,
    Clt,
    Quad,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BerMethodArg {
    Bound,
    Mc,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Raw moments of the cascade sum as JSON.
    Moments {
        #[arg(long = "M")]
        m: u32,
        #[arg(long)]
        sigma2: Option<f64>,
        /// Monte Carlo estimate with this many samples instead of the
        /// analytic values.
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Fitted Meijer-G parameters for one `M` or a range `a:b`.
    Fit {
        #[arg(long = "M")]
        m: ElementList,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Density of q on the midpoints of a grid, as CSV `q,density`.
    Pdf {
        #[arg(long = "M")]
        m: u32,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// `a:b:n`: n cells of [a, b].
        #[arg(long)]
        grid: Grid,
        #[arg(long, default_value_t = 1)]
        user: usize,
        /// Samples for the Monte Carlo histogram.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// PEP of a user's reference event over an SNR sweep.
    Pep {
        #[arg(long = "M")]
        m: u32,
        #[arg(long, default_value_t = 1)]
        user: usize,
        #[arg(long, value_enum)]
        method: PepMethodArg,
        /// `start:stop:step` in dB.
        #[arg(long)]
        snr: SnrRange,
        /// Density averaged by the `quad` method.
        #[arg(long, value_enum, default_value_t = QuadModel::G)]
        model: QuadModel,
        /// Trials per SNR point for the `mc` method.
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
    },
    /// Analytic and numeric diversity order as JSON.
    Diversity {
        #[arg(long = "M")]
        m: ElementList,
        #[arg(long)]
        numeric: bool,
        /// Restrict to one user.
        #[arg(long)]
        user: Option<usize>,
    },
    /// Union bound and/or simulated error rate per user.
    Ber {
        #[arg(long = "M")]
        m: u32,
        #[arg(long)]
        snr: SnrRange,
        /// Power share of the first user in a two-user scenario.
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long, value_enum, default_value_t = BerMethodArg::Both)]
        method: BerMethodArg,
        /// Frame cap per SNR point.
        #[arg(long, default_value_t = 1 << 22)]
        frames: u64,
        /// Stop a point once every user has this many bit errors.
        #[arg(long, default_value_t = 200)]
        min_errors: u64,
    },
    /// Runs the cross-model acceptance criteria.
    Validate {
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Moments { .. } => "moments",
            Command::Fit { .. } => "fit",
            Command::Pdf { .. } => "pdf",
            Command::Pep { .. } => "pep",
            Command::Diversity { .. } => "diversity",
            Command::Ber { .. } => "ber",
            Command::Validate { .. } => "validate",
        }
    }
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(format!("i/o error: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

const DEFAULT_SEED: u64 = 1;

fn load_scenario(cli: &Cli, m: Option<u32>) -> Result<SystemConfig, Failure> {
    let mut cfg = match &cli.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SystemConfig>(&text)
                .map_err(|e| Failure::Usage(format!("bad scenario {}: {e}", path.display())))?
        }
        None => SystemConfig::reference(m.unwrap_or(1)),
    };
    if let Some(m) = m {
        cfg.elements = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn user_index(cfg: &SystemConfig, user: usize) -> Result<usize, Failure> {
    if user == 0 || user > cfg.users {
        return Err(Failure::Usage(format!(
            "--user must be in 1..={} (users are numbered from 1)",
            cfg.users
        )));
    }
    Ok(user - 1)
}

fn snr_grid(r: &SnrRange) -> Result<SnrGrid, Failure> {
    Ok(SnrGrid::db_range(r.start, r.stop, r.step)?)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> Outcome {
    let cmd = &cli.command;
    let seed = cli.seed.unwrap_or(match cmd {
        Command::Validate { .. } => ValidationOptions::default().seed,
        _ => DEFAULT_SEED,
    });
    let manifest = |cfg: Option<&SystemConfig>| RunManifest {
        tool: "lisnoma",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cmd.name().into(),
        scenario: cli.scenario.clone(),
        parameters: serde_json::json!({
            "args": serde_json::to_value(cmd).expect("serializable"),
            "config": cfg,
        }),
        seed,
        output: cli.output.clone(),
    };
    let out = cli.output.as_deref();

    match cmd {
        Command::Moments { m, sigma2, samples } => {
            let mut cfg = load_scenario(cli, Some(*m))?;
            if let Some(s) = sigma2 {
                cfg.sigma2 = *s;
            }
            let mom = match samples {
                Some(n) => empirical_moments(*m, cfg.sigma2, *n, seed)?,
                None => analytic_moments(*m, cfg.sigma2)?,
            };
            let mut v = serde_json::json!({
                "M": m,
                "sigma2": cfg.sigma2,
                "mu1": mom.mu[0],
                "mu2": mom.mu[1],
                "mu3": mom.mu[2],
                "mu4": mom.mu[3],
            });
            if let (Some(se), Some(n)) = (mom.std_error, mom.samples) {
                v["std_error"] = serde_json::json!(se);
                v["samples"] = serde_json::json!(n);
            }
            emit(out, &json(&v))?;
        }
        Command::Fit { m, sigma2, format } => {
            let base = load_scenario(cli, m.0.first().copied())?;
            let mut fits = Vec::new();
            for &k in &m.0 {
                let mut cfg = base.clone().with_elements(k);
                if let Some(s) = sigma2 {
                    cfg.sigma2 = *s;
                }
                fits.push((k, fit_for(&cfg)?));
            }
            match format {
                Format::Json if fits.len() == 1 => emit(out, &json(&fits[0].1))?,
                Format::Json => emit(out, &json(&fits.iter().map(|f| &f.1).collect::<Vec<_>>()))?,
                Format::Csv => {
                    let rows: Vec<String> = fits
                        .iter()
                        .map(|(k, p)| {
                            format!(
                                "{k},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                                p.a1,
                                p.a2,
                                p.a3,
                                p.a4.re,
                                p.a4.im,
                                p.a5.re,
                                p.a5.im,
                                p.complex_pair
                            )
                        })
                        .collect();
                    let header = "M,a1,a2,a3,a4_re,a4_im,a5_re,a5_im,complex_pair";
                    emit(out, &table_csv(&manifest(Some(&base)), header, &rows))?;
                }
            }
        }
        Command::Pdf {
            m,
            model,
            grid,
            user,
            samples,
        } => {
            let cfg = load_scenario(cli, Some(*m))?;
            let u = user_index(&cfg, *user)?;
            let qs = grid.midpoints();
            let dens: Vec<f64> = match model {
                ModelArg::Mc => {
                    let draws = sample_cascade(&cfg, u, *samples, seed)?;
                    let w = grid.width();
                    let mut counts = vec![0u64; grid.cells];
                    for d in draws {
                        let k = ((d.q - grid.start) / w).floor();
                        if k >= 0.0 && (k as usize) < grid.cells {
                            counts[k as usize] += 1;
                        }
                    }
                    counts
                        .iter()
                        .map(|c| *c as f64 / (*samples as f64 * w))
                        .collect()
                }
                _ => {
                    let pm = match model {
                        ModelArg::G => PdfModel::G,
                        ModelArg::Dr => PdfModel::DoubleRayleigh,
                        _ => PdfModel::Clt,
                    };
                    let d = ModelDensity::new(pm, &cfg, u)?;
                    qs.iter()
                        .map(|&q| d.density(q))
                        .collect::<lisnoma::Result<_>>()?
                }
            };
            let rows: Vec<String> = qs
                .iter()
                .zip(&dens)
                .map(|(q, d)| format!("{q},{d:e}"))
                .collect();
            emit(out, &table_csv(&manifest(Some(&cfg)), "q,density", &rows))?;
        }
        Command::Pep {
            m,
            user,
            method,
            snr,
            model,
            trials,
        } => {
            let cfg = load_scenario(cli, Some(*m))?;
            let u = user_index(&cfg, *user)?;
            let grid = snr_grid(snr)?;
            let event = default_event(&cfg, u)?;
            let mut rows = Vec::new();
            let db = grid.db();
            let mut warnings = Vec::new();
            if let PepMethodArg::Mc = method {
                for (g, d) in grid.points().iter().zip(&db) {
                    let est = simulate_pep(&cfg, &event.with_snr(*g), *trials, seed)?;
                    let h = 1.96 * est.std_error;
                    rows.push(CurveRow {
                        snr_db: *d,
                        value: est.value,
                        ci: Some(((est.value - h).max(0.0), est.value + h)),
                        method: "mc".into(),
                    });
                }
            } else {
                let pm = match method {
                    PepMethodArg::General => PepMethod::General,
                    PepMethodArg::M1 => PepMethod::M1,
                    PepMethodArg::Clt => PepMethod::Clt,
                    _ => PepMethod::Quadrature(match model {
                        QuadModel::G => PdfModel::G,
                        QuadModel::Dr => PdfModel::DoubleRayleigh,
                        QuadModel::Clt => PdfModel::Clt,
                    }),
                };
                let eval = PepEvaluator::new(&cfg, pm)?;
                for (g, d) in grid.points().iter().zip(&db) {
                    let p = eval.eval(&event.with_snr(*g))?;
                    for w in &p.warnings {
                        if !warnings.contains(w) {
                            warnings.push(w.clone());
                        }
                    }
                    rows.push(CurveRow {
                        snr_db: *d,
                        value: p.value,
                        ci: None,
                        method: p.method,
                    });
                }
            }
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let comments = vec![format!(
                "user {} event vartheta={} |delta|={}",
                user,
                event.vartheta,
                event.delta_bar.norm()
            )];
            emit(out, &curve_csv(&manifest(Some(&cfg)), &comments, &rows))?;
        }
        Command::Diversity { m, numeric, user } => {
            let base = load_scenario(cli, m.0.first().copied())?;
            let users: Vec<usize> = match user {
                Some(l) => vec![user_index(&base, *l)?],
                None => (0..base.users).collect(),
            };
            let mut reports = Vec::new();
            for &k in &m.0 {
                let cfg = base.clone().with_elements(k);
                for &u in &users {
                    let mut r = serde_json::to_value(diversity_order(&cfg, u, *numeric)?)
                        .expect("serializable");
                    r["user"] = serde_json::json!(u + 1);
                    reports.push(r);
                }
            }
            emit(out, &json(&reports))?;
        }
        Command::Ber {
            m,
            snr,
            p1,
            method,
            frames,
            min_errors,
        } => {
            let mut cfg = load_scenario(cli, Some(*m))?;
            if let Some(p) = p1 {
                if cfg.users != 2 {
                    return Err(Failure::Usage("--p1 needs a two-user scenario".into()));
                }
                cfg = cfg.with_first_power(*p);
                cfg.validate()?;
            }
            let grid = snr_grid(snr)?;
            let db = grid.db();
            let mc = match method {
                BerMethodArg::Bound => None,
                _ => Some(simulate_ber_with(
                    &cfg,
                    &grid,
                    &BerOptions {
                        max_frames: *frames,
                        min_errors: Some(*min_errors),
                        seed,
                    },
                )?),
            };
            let man = manifest(Some(&cfg));
            for u in 0..cfg.users {
                let mut rows = Vec::new();
                let mut comments = vec![format!("user {}", u + 1)];
                if *method != BerMethodArg::Mc {
                    let en = enumerate_events(&cfg, u, false)?;
                    comments.push(format!(
                        "tau {} distinct events {} with vartheta <= 0: {}",
                        en.tau,
                        en.events.len(),
                        en.nonpositive
                    ));
                    let ub = union_bound_curve(&cfg, u, &grid, PepMethod::General, false)?;
                    for (b, d) in ub.iter().zip(&db) {
                        rows.push(CurveRow {
                            snr_db: *d,
                            value: b.value,
                            ci: None,
                            method: "bound".into(),
                        });
                    }
                }
                if let Some(curves) = &mc {
                    for p in &curves[u].points {
                        rows.push(CurveRow {
                            snr_db: p.snr_db,
                            value: p.ber,
                            ci: Some((p.ci_low, p.ci_high)),
                            method: "mc".into(),
                        });
                    }
                }
                let text = curve_csv(&man, &comments, &rows);
                match out {
                    Some(path) => emit(Some(&per_user_path(path, u)), &text)?,
                    None => emit(None, &text)?,
                }
            }
        }
        Command::Validate { quick } => {
            let results = run_all(&ValidationOptions {
                quick: *quick,
                seed,
            });
            let mut text = String::new();
            for r in &results {
                text.push_str(&r.line());
                text.push('\n');
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            text.push_str(&format!(
                "{} of {} criteria passed\n",
                results.len() - failed,
                results.len()
            ));
            emit(out, &text)?;
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
