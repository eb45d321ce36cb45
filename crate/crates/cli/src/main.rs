//! `ehe`: simulate cohorts, fit intensity models, compare intensities and run
//! Monte Carlo coverage studies.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numeric failure or refusal,
//! 3 I/O error.

mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ehe_core::aggregate::{aggregate_homogeneous, aggregate_mortality, aggregate_piecewise};
use ehe_core::inference::{contrast, critical_value, pairwise_age_tests, AgeTest};
use ehe_core::io::{cohort_bytes, read_cohort, read_config, read_fit, write_cohort, write_fit_to};
use ehe_core::likelihood::loglik;
use ehe_core::markov::observation_probability;
use ehe_core::montecarlo::{confirmed_normality_failures, coverage_study, CoverageReport, Thresholds};
use ehe_core::{
    fit_homogeneous, fit_mortality, fit_piecewise, sample_cohort, Error, FitResult, Intensity, ModelKind, Partition,
    Provenance, RateSet, TransitionKind,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ehe", version, about = "Illness–death intensity estimation under left-truncation and window censoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an observed cohort from a run configuration.
    Simulate {
        config: PathBuf,
        /// Output directory for persons.csv, events.csv and truth.json.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit intensities to a cohort.
    Fit {
        #[command(flatten)]
        cohort: CohortArgs,
        /// Breakpoints in years since 50, e.g. 0,5,10,...,63.
        #[arg(long, value_delimiter = ',')]
        partition: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = ModelArg::Auto)]
        model: ModelArg,
        #[arg(long, default_value_t = ehe_core::DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Write the fit rows to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the fit, with provenance, as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Wald contrast `first - second` of two fitted intensities, per age
    /// interval for piecewise fits.
    Contrast {
        fit: PathBuf,
        /// Pair of transitions, e.g. S1D,HD.
        #[arg(long, value_parser = parse_pair)]
        pair: (TransitionKind, TransitionKind),
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Monte Carlo coverage study of the Wald intervals.
    Coverage {
        config: PathBuf,
        /// Overrides the configured number of replications.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 2 if any acceptance band is violated.
        #[arg(long)]
        strict: bool,
        /// Write the full report as JSON to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Summary table of a fit file, optionally with a step plot.
    Report {
        fit: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// SVG step plot of S1D and HD over age.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Log-likelihood, score and Hessian of homogeneous rates on a cohort.
    Loglik {
        #[command(flatten)]
        cohort: CohortArgs,
        /// Rates as TRANSITION=VALUE, e.g. HD=0.02,S1D=0.07; others are 0.
        #[arg(long, value_delimiter = ',')]
        rates: Vec<String>,
    },
}

#[derive(Args)]
struct CohortArgs {
    #[arg(long)]
    persons: PathBuf,
    #[arg(long)]
    events: PathBuf,
    /// Observation window length, the default follow-up of persons without
    /// an exit age.
    #[arg(long, default_value_t = ehe_core::DEFAULT_WINDOW)]
    window: f64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModelArg {
    /// Piecewise with --partition, homogeneous otherwise.
    Auto,
    Homogeneous,
    Piecewise,
    Mortality,
}

fn parse_pair(s: &str) -> Result<(TransitionKind, TransitionKind), String> {
    let (a, b) = s.split_once(',').ok_or("expected FIRST,SECOND, e.g. S1D,HD")?;
    let t = |x: &str| x.trim().parse::<TransitionKind>().map_err(|e| e.to_string());
    Ok((t(a)?, t(b)?))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } => 1,
        Error::Domain(_) | Error::Refused(_) => 2,
        Error::Io { .. } => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(code) = init_threads() {
        return code;
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn init_threads() -> Result<(), ExitCode> {
    let Ok(v) = std::env::var("EHE_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => {
            eprintln!("error: EHE_THREADS must be a positive integer, got {v:?}");
            return Err(ExitCode::from(1));
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| {
            eprintln!("error: {e}");
            ExitCode::from(2)
        })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate { config, out, seed } => simulate(&config, &out, seed),
        Command::Fit {
            cohort,
            partition,
            model,
            tau,
            level,
            out,
            json,
        } => fit(&cohort, partition, model, tau, level, out.as_deref(), json),
        Command::Contrast { fit, pair, level } => contrast_cmd(&fit, pair.0, pair.1, level),
        Command::Coverage {
            config,
            reps,
            level,
            seed,
            strict,
            json,
        } => coverage(&config, reps, level, seed, strict, json.as_deref()),
        Command::Report { fit, level, plot } => report(&fit, level, plot.as_deref()),
        Command::Loglik { cohort, rates } => loglik_cmd(&cohort, &rates),
    }
}

#[derive(Serialize)]
struct Truth<'a> {
    partition: &'a [f64],
    rates: &'a [RateSet],
    beta: f64,
    n_all: usize,
    seed: u64,
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<ExitCode, Error> {
    let mut cfg = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let beta = observation_probability(&cfg.rates, &cfg.scheme.entry)?;
    let cohort = sample_cohort(&cfg.rates, &cfg.scheme, cfg.n_all, cfg.seed)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_cohort(&cohort.records, &out.join("persons.csv"), &out.join("events.csv"))?;
    let truth = Truth {
        partition: cfg.rates.partition().breaks(),
        rates: cfg.rates.intervals(),
        beta,
        n_all: cfg.n_all,
        seed: cfg.seed,
    };
    write_file(&out.join("truth.json"), to_json(&truth).as_bytes())?;
    let s = cohort.summary;
    let beta_hat = s.beta_hat().map_or_else(|| "NA".into(), |b| format!("{b:.6}"));
    println!("n_all {}  n {}  truncated {}  beta_hat {beta_hat}  beta {beta:.6}", s.n_all, s.n, s.truncated);
    Ok(ExitCode::SUCCESS)
}

fn fit(
    args: &CohortArgs,
    partition: Option<Vec<f64>>,
    model: ModelArg,
    tau: f64,
    level: f64,
    out: Option<&Path>,
    json: bool,
) -> Result<ExitCode, Error> {
    critical_value(level)?;
    let records = read_cohort(&args.persons, &args.events, args.window)?;
    let model = match (model, &partition) {
        (ModelArg::Auto, Some(_)) | (ModelArg::Piecewise, _) => ModelKind::Piecewise,
        (ModelArg::Auto, None) | (ModelArg::Homogeneous, _) => ModelKind::Homogeneous,
        (ModelArg::Mortality, _) => ModelKind::Mortality,
    };
    let result = match model {
        ModelKind::Homogeneous => fit_homogeneous(&aggregate_homogeneous(&records), tau),
        ModelKind::Piecewise => {
            let p = match partition {
                Some(b) => Partition::new(b)?,
                None => Partition::single(tau)?,
            };
            fit_piecewise(&aggregate_piecewise(&records, &p)?)
        }
        ModelKind::Mortality => {
            let surv: Vec<_> = records.iter().map(|r| r.to_survival()).collect();
            fit_mortality(&aggregate_mortality(&surv), tau)
        }
    };
    let (p, e) = cohort_bytes(&records);
    let settings = format!("model={model:?} tau={tau} window={} level={level}", args.window);
    let result = result.with_provenance(Provenance::from_inputs([p.as_slice(), e.as_slice()], settings));
    if let Some(path) = out {
        let mut buf = Vec::new();
        write_fit_to(&result, level, &mut buf)?;
        write_file(path, &buf)?;
    }
    if json {
        print!("{}", to_json(&result));
    } else {
        print!("{}", fit_table(&result, level)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt(x: Option<f64>, prec: usize) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{v:.prec$}"))
}

fn fit_table(fit: &FitResult, level: f64) -> Result<String, Error> {
    let mut out = format!(
        "{:<6} {:>15} {:>8} {:>14} {:>10} {:>10} {:>22}\n",
        "rate",
        "age interval",
        "events",
        "exposure",
        "estimate",
        "se",
        format!("{:.0}% CI", level * 100.0)
    );
    for p in &fit.params {
        let ci = match p.value() {
            Ok(_) => {
                let (lo, hi) = p.ci(level)?;
                format!("[{lo:.6}, {hi:.6}]")
            }
            Err(_) => "NA".into(),
        };
        out += &format!(
            "{:<6} {:>15} {:>8} {:>14.3} {:>10} {:>10} {:>22}\n",
            p.intensity.label(),
            format!("]{}, {}]", p.interval.0 + 50.0, p.interval.1 + 50.0),
            p.events,
            p.exposure,
            fmt_opt(p.estimate, 6),
            fmt_opt(p.se, 6),
            ci
        );
    }
    if let Some(m) = &fit.mortality {
        out += &format!(
            "deaths {}  censored {}  time to death {:.3}\n",
            m.uncensored, m.censored, m.uncensored_time
        );
    }
    Ok(out)
}

fn contrast_cmd(path: &Path, first: TransitionKind, second: TransitionKind, level: f64) -> Result<ExitCode, Error> {
    let fit = read_fit(path)?;
    let (a, b) = (Intensity::Transition(first), Intensity::Transition(second));
    if fit.series(a).len() > 1 {
        print!("{}", to_json(&pairwise_age_tests(&fit, a, b, level)?));
    } else {
        let (x, y) = fit
            .get(a)
            .zip(fit.get(b))
            .ok_or_else(|| Error::refused(format!("fit lacks {first} or {second}")))?;
        print!("{}", to_json(&contrast(x, y, level)?));
    }
    Ok(ExitCode::SUCCESS)
}

fn coverage_table(rep: &CoverageReport) -> String {
    let mut out = format!(
        "R {}  n_all {}  mean n {:.1}  beta quadrature {:.6}  beta_hat {:.6} ± {:.6}\n",
        rep.replications, rep.n_all, rep.mean_n, rep.beta.quadrature, rep.beta.mean, rep.beta.mc_se
    );
    out += &format!(
        "{:<14} {:>9} {:>11} {:>10} {:>10} {:>10} {:>8} {:>7} {:>7} {:>7}\n",
        "rate", "truth", "mean", "bias", "mc sd", "mean se", "cover", "skew", "kurt", "ks p"
    );
    for p in &rep.params {
        out += &format!(
            "{:<14} {:>9.5} {:>11.7} {:>10.2e} {:>10.3e} {:>10.3e} {:>8.4} {:>7.3} {:>7.3} {:>7.3}\n",
            p.label(),
            p.truth,
            p.mean_estimate,
            p.bias,
            p.mc_sd,
            p.mean_se,
            p.coverage,
            p.skewness,
            p.excess_kurtosis,
            p.ks_p_value
        );
    }
    out
}

fn coverage(
    config: &Path,
    reps: Option<usize>,
    level: f64,
    seed: Option<u64>,
    strict: bool,
    json: Option<&Path>,
) -> Result<ExitCode, Error> {
    let mut cfg = read_config(config)?;
    if let Some(r) = reps {
        cfg.replications = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let rep = coverage_study(&cfg, level)?;
    if let Some(path) = json {
        write_file(path, to_json(&rep).as_bytes())?;
    }
    print!("{}", coverage_table(&rep));
    if strict {
        let t = Thresholds::default();
        let confirmed = confirmed_normality_failures(&cfg, level, &rep, t.ks_alpha)?;
        let violations: Vec<String> = rep
            .violations(&t)
            .into_iter()
            .filter(|v| !v.contains("KS p-value") || confirmed.iter().any(|c| v.starts_with(c.as_str())))
            .collect();
        if !violations.is_empty() {
            let mut err = std::io::stderr().lock();
            for v in &violations {
                let _ = writeln!(err, "violation: {v}");
            }
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn report(path: &Path, level: f64, plot: Option<&Path>) -> Result<ExitCode, Error> {
    let fit = read_fit(path)?;
    print!("{}", fit_table(&fit, level)?);
    let (s1d, hd) = (Intensity::Transition(TransitionKind::S1D), Intensity::Transition(TransitionKind::HD));
    if fit.model == ModelKind::Piecewise {
        let tests = pairwise_age_tests(&fit, s1d, hd, level)?;
        println!("\nS1D - HD by age interval ({} tests, no multiplicity correction)", tests.comparisons);
        for row in &tests.rows {
            let iv = format!("]{}, {}]", row.interval.0 + 50.0, row.interval.1 + 50.0);
            match &row.test {
                AgeTest::Tested(c) => println!(
                    "{iv:>15} diff {:>9.5} [{:.5}, {:.5}] p {:.4}{}",
                    c.difference,
                    c.ci.0,
                    c.ci.1,
                    c.p_value,
                    if c.significant() { " *" } else { "" }
                ),
                AgeTest::Skipped { reason } => println!("{iv:>15} skipped ({reason})"),
            }
        }
    }
    if let Some(out) = plot {
        let (a, b) = (fit.series(s1d), fit.series(hd));
        if fit.model != ModelKind::Piecewise || a.len() < 2 {
            return Err(Error::refused("plotting needs a piecewise fit; refit with --partition"));
        }
        let x0 = a.first().map_or(0.0, |c| c.interval.0);
        let x1 = a.last().map_or(0.0, |c| c.interval.1);
        let series = [
            svg::Series {
                name: "S1D (after stroke)",
                color: "#888888",
                cells: a,
            },
            svg::Series {
                name: "HD (healthy)",
                color: "#000000",
                cells: b,
            },
        ];
        write_file(out, svg::step_plot(&series, x0, x1, level, critical_value(level)?).as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct LoglikOutput {
    parameters: Vec<&'static str>,
    rates: Vec<f64>,
    value: Option<f64>,
    score: Vec<f64>,
    hessian: Vec<f64>,
}

fn loglik_cmd(args: &CohortArgs, specs: &[String]) -> Result<ExitCode, Error> {
    let mut rates = RateSet::zero();
    for spec in specs {
        let bad = || Error::validation("--rates", None, ehe_core::ValidationKind::Config, format!("expected TRANSITION=VALUE, got {spec:?}"));
        let (k, v) = spec.split_once('=').ok_or_else(bad)?;
        let hj: TransitionKind = k.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        rates.set(hj, v).map_err(|_| bad())?;
    }
    let records = read_cohort(&args.persons, &args.events, args.window)?;
    let v = loglik(&aggregate_homogeneous(&records), &rates);
    let value = v.value.as_f64();
    let out = LoglikOutput {
        parameters: TransitionKind::ALL.iter().map(|t| t.label()).collect(),
        rates: rates.as_array().to_vec(),
        value: value.is_finite().then_some(value),
        score: v.score,
        hessian: v.hessian,
    };
    print!("{}", to_json(&out));
    Ok(ExitCode::SUCCESS)
}
