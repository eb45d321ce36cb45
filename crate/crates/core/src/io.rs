//! File formats: two-file long cohort layout, run configuration and fit
//! output.
//!
//! ```text
//! persons.csv  person_id,entry_age,entry_state,exit_age
//! events.csv   person_id,event_age,to_state
//! fit.csv      transition,interval_lo,interval_hi,events,exposure,rate,se,ci_lo,ci_hi
//! ```
//!
//! Ages are years since age 50. Numbers are written with 17 significant
//! digits so that reading a written file reproduces every value bit for bit.
//! A person without a death row is censored at `exit_age`; an empty
//! `exit_age` means the full window `entry_age + w`.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::cohort::{Event, ObservedRecord};
use crate::error::{Error, Result, ValidationKind};
use crate::estimate::{FitResult, FitStatus, Intensity, ModelKind, ParamEstimate};
use crate::model::{
    EntryDistribution, ObservationScheme, Partition, PiecewiseRateSet, RateSet, State, TransitionKind,
    DEFAULT_TAU, DEFAULT_WINDOW,
};

pub const PERSONS_HEADER: [&str; 4] = ["person_id", "entry_age", "entry_state", "exit_age"];
pub const EVENTS_HEADER: [&str; 3] = ["person_id", "event_age", "to_state"];
pub const FIT_HEADER: [&str; 9] = [
    "transition",
    "interval_lo",
    "interval_hi",
    "events",
    "exposure",
    "rate",
    "se",
    "ci_lo",
    "ci_hi",
];

/// 17 significant digits, round-trip exact.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_num)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    open(path)?.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

struct Rows {
    name: String,
    reader: csv::Reader<Box<dyn Read>>,
}

impl Rows {
    fn new(name: &str, input: Box<dyn Read>, header: &[&str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let got = reader
            .headers()
            .map_err(|e| Error::validation(name, Some(1), ValidationKind::Syntax, e.to_string()))?
            .clone();
        if got.iter().map(str::trim).ne(header.iter().copied()) {
            return Err(Error::validation(
                name,
                Some(1),
                ValidationKind::Header,
                format!("expected header {:?}, got {:?}", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        Ok(Rows {
            name: name.to_string(),
            reader,
        })
    }

    fn for_each(mut self, mut f: impl FnMut(&str, u64, &csv::StringRecord) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let more = self.reader.read_record(&mut record).map_err(|e| {
                let line = e.position().map(|p| p.line());
                Error::validation(&self.name, line, ValidationKind::Syntax, e.to_string())
            })?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line());
            f(&self.name, line, &record)?;
        }
    }
}

fn field<'a>(name: &str, line: u64, rec: &'a csv::StringRecord, i: usize, col: &str) -> Result<&'a str> {
    rec.get(i)
        .map(str::trim)
        .ok_or_else(|| Error::validation(name, Some(line), ValidationKind::Syntax, format!("missing column {col}")))
}

fn parse_num(name: &str, line: u64, s: &str, col: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::validation(name, Some(line), ValidationKind::Syntax, format!("{col}: {s:?} is not a finite number")))
}

fn parse_state(name: &str, line: u64, s: &str) -> Result<State> {
    s.parse::<State>()
        .map_err(|_| Error::validation(name, Some(line), ValidationKind::Syntax, format!("unknown state code {s:?}")))
}

struct PersonRow {
    line: u64,
    entry_age: f64,
    entry_state: State,
    exit_age: f64,
    events: Vec<Event>,
}

/// Reads and validates a cohort from in-memory sources. `window` supplies the
/// default exit age of persons with an empty `exit_age`.
pub fn read_cohort_from(
    persons: (&str, Box<dyn Read>),
    events: (&str, Box<dyn Read>),
    window: f64,
) -> Result<Vec<ObservedRecord>> {
    let mut people: BTreeMap<String, PersonRow> = BTreeMap::new();
    Rows::new(persons.0, persons.1, &PERSONS_HEADER)?.for_each(|name, line, rec| {
        if rec.len() != 4 {
            return Err(Error::validation(name, Some(line), ValidationKind::Syntax, format!("expected 4 fields, got {}", rec.len())));
        }
        let id = field(name, line, rec, 0, "person_id")?;
        if id.is_empty() {
            return Err(Error::validation(name, Some(line), ValidationKind::Syntax, "empty person_id"));
        }
        let entry_age = parse_num(name, line, field(name, line, rec, 1, "entry_age")?, "entry_age")?;
        if entry_age < 0.0 {
            return Err(Error::validation(name, Some(line), ValidationKind::Syntax, format!("entry_age {entry_age} < 0")));
        }
        let entry_state = parse_state(name, line, field(name, line, rec, 2, "entry_state")?)?;
        if entry_state.is_absorbing() {
            return Err(Error::validation(name, Some(line), ValidationKind::DeadAtEntry, format!("person {id} enters in state d")));
        }
        let exit_raw = field(name, line, rec, 3, "exit_age")?;
        let exit_age = if exit_raw.is_empty() {
            entry_age + window
        } else {
            parse_num(name, line, exit_raw, "exit_age")?
        };
        if !(exit_age > entry_age && exit_age <= entry_age + window) {
            return Err(Error::validation(
                name,
                Some(line),
                ValidationKind::ExitAge,
                format!("exit_age {exit_age} outside ({entry_age}, {}]", entry_age + window),
            ));
        }
        let row = PersonRow {
            line,
            entry_age,
            entry_state,
            exit_age,
            events: Vec::new(),
        };
        if let Some(prev) = people.insert(id.to_string(), row) {
            return Err(Error::validation(
                name,
                Some(line),
                ValidationKind::DuplicatePerson,
                format!("person_id {id} already defined on line {}", prev.line),
            ));
        }
        Ok(())
    })?;

    let mut current: HashMap<String, (State, f64)> = HashMap::new();
    Rows::new(events.0, events.1, &EVENTS_HEADER)?.for_each(|name, line, rec| {
        if rec.len() != 3 {
            return Err(Error::validation(name, Some(line), ValidationKind::Syntax, format!("expected 3 fields, got {}", rec.len())));
        }
        let id = field(name, line, rec, 0, "person_id")?;
        let age = parse_num(name, line, field(name, line, rec, 1, "event_age")?, "event_age")?;
        let to = parse_state(name, line, field(name, line, rec, 2, "to_state")?)?;
        let person = people.get_mut(id).ok_or_else(|| {
            Error::validation(name, Some(line), ValidationKind::UnknownPerson, format!("person_id {id} not in persons file"))
        })?;
        let (state, last) = *current
            .entry(id.to_string())
            .or_insert((person.entry_state, person.entry_age));
        if state.is_absorbing() {
            return Err(Error::validation(name, Some(line), ValidationKind::EventAfterDeath, format!("event for {id} after death at {last}")));
        }
        if !(age > person.entry_age && age <= person.exit_age) {
            return Err(Error::validation(
                name,
                Some(line),
                ValidationKind::EventOutsideWindow,
                format!("event at {age} outside ({}, {}] for {id}", person.entry_age, person.exit_age),
            ));
        }
        if !(age > last) {
            return Err(Error::validation(
                name,
                Some(line),
                ValidationKind::NonMonotoneEvents,
                format!("event at {age} for {id} does not follow previous event at {last}"),
            ));
        }
        if !TransitionKind::is_admissible(state, to) {
            return Err(Error::validation(
                name,
                Some(line),
                ValidationKind::InadmissibleTransition,
                format!("transition {state}->{to} for {id} is not admissible"),
            ));
        }
        person.events.push(Event { age, to });
        current.insert(id.to_string(), (to, age));
        Ok(())
    })?;

    people
        .into_iter()
        .map(|(id, p)| {
            let exit_age = match p.events.last() {
                Some(e) if e.to.is_absorbing() => e.age,
                _ => p.exit_age,
            };
            ObservedRecord::new(id, p.entry_age, p.entry_state, exit_age, p.events)
                .map_err(|e| Error::validation(persons.0, Some(p.line), ValidationKind::Syntax, e.to_string()))
        })
        .collect()
}

pub fn read_cohort(persons: &Path, events: &Path, window: f64) -> Result<Vec<ObservedRecord>> {
    let p = open(persons)?;
    let e = open(events)?;
    read_cohort_from(
        (&persons.display().to_string(), Box::new(p)),
        (&events.display().to_string(), Box::new(e)),
        window,
    )
}

/// Writes the canonical form: persons sorted by id, each with an explicit
/// exit age, events in age order.
pub fn write_cohort_to(records: &[ObservedRecord], persons: impl Write, events: impl Write) -> csv::Result<()> {
    let mut sorted: Vec<&ObservedRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id().cmp(b.id()));
    let mut pw = csv::Writer::from_writer(persons);
    let mut ew = csv::Writer::from_writer(events);
    pw.write_record(PERSONS_HEADER)?;
    ew.write_record(EVENTS_HEADER)?;
    for r in sorted {
        pw.write_record([
            r.id(),
            &fmt_num(r.entry_age()),
            r.entry_state().code(),
            &fmt_num(r.exit_age()),
        ])?;
        for ev in r.events() {
            ew.write_record([r.id(), &fmt_num(ev.age), ev.to.code()])?;
        }
    }
    pw.flush()?;
    ew.flush()?;
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_cohort(records: &[ObservedRecord], persons: &Path, events: &Path) -> Result<()> {
    let (p, e) = (create(persons)?, create(events)?);
    write_cohort_to(records, p, e).map_err(|err| csv_err(persons, err))
}

/// Cohort bytes of the canonical form, used for digests and determinism checks.
pub fn cohort_bytes(records: &[ObservedRecord]) -> (Vec<u8>, Vec<u8>) {
    let (mut p, mut e) = (Vec::new(), Vec::new());
    write_cohort_to(records, &mut p, &mut e).expect("writing to memory cannot fail");
    (p, e)
}

/// Simulation and coverage-study configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rates: PiecewiseRateSet,
    pub scheme: ObservationScheme,
    pub n_all: usize,
    pub seed: u64,
    pub replications: usize,
    /// Model fitted to each replication.
    pub model: ModelKind,
}

impl RunConfig {
    pub fn new(rates: PiecewiseRateSet, scheme: ObservationScheme, n_all: usize, seed: u64) -> Result<Self> {
        let model = if rates.partition().len() > 1 {
            ModelKind::Piecewise
        } else {
            ModelKind::Homogeneous
        };
        let cfg = RunConfig {
            rates,
            scheme,
            n_all,
            seed,
            replications: 1,
            model,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.rates.tau() != self.scheme.tau {
            return Err(Error::domain(format!(
                "partition ends at {} but tau is {}",
                self.rates.tau(),
                self.scheme.tau
            )));
        }
        if self.replications == 0 {
            return Err(Error::domain("replications must be >= 1"));
        }
        Ok(())
    }
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Homogeneous => "homogeneous",
        ModelKind::Piecewise => "piecewise",
        ModelKind::Mortality => "mortality",
    }
}

fn fmt_list(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(fmt_num).collect::<Vec<_>>().join(",")
}

/// Flat `key = value` text; `#` starts a comment.
///
/// | key | value |
/// |-----|-------|
/// | `tau` | horizon in years since 50 (default 63) |
/// | `window` | observation window length (default 9) |
/// | `entry` | `uniform LO HI`, `degenerate U` or `empirical U1,U2,...` (default `uniform 0 tau-window`) |
/// | `partition` | comma-separated breakpoints from 0 to tau (default `0,tau`) |
/// | `rate.<HS1\|S1D\|HD\|Hd\|S1d\|Dd>` | one rate, or one per interval; missing rates are 0 |
/// | `n_all` | latent cohort size |
/// | `seed` | base seed (default 1) |
/// | `replications` | Monte Carlo replications (default 1) |
/// | `model` | `homogeneous`, `piecewise` or `mortality` (default by partition) |
pub fn parse_config(source_name: &str, text: &str) -> Result<RunConfig> {
    let bad = |line: usize, msg: String| Error::validation(source_name, Some(line as u64), ValidationKind::Config, msg);
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| bad(line, format!("expected key = value, got {content:?}")))?;
        let key = k.trim().to_string();
        if let Some((prev, _)) = kv.get(&key) {
            return Err(bad(line, format!("duplicate key {key} (first on line {prev})")));
        }
        kv.insert(key, (line, v.trim().to_string()));
    }

    let num = |key: &str, default: Option<f64>| -> Result<f64> {
        match kv.get(key) {
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(*line, format!("{key}: {v:?} is not a number"))),
            None => default.ok_or_else(|| bad(0, format!("missing required key {key}"))),
        }
    };
    let int = |key: &str, default: Option<u64>| -> Result<u64> {
        match kv.get(key) {
            Some((line, v)) => v.parse::<u64>().map_err(|_| bad(*line, format!("{key}: {v:?} is not a non-negative integer"))),
            None => default.ok_or_else(|| bad(0, format!("missing required key {key}"))),
        }
    };
    let list = |line: usize, key: &str, v: &str| -> Result<Vec<f64>> {
        v.split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(line, format!("{key}: {v:?} is not a comma-separated list of numbers")))
    };

    for (key, (line, _)) in &kv {
        let known = matches!(
            key.as_str(),
            "tau" | "window" | "entry" | "partition" | "n_all" | "seed" | "replications" | "model"
        ) || key
            .strip_prefix("rate.")
            .is_some_and(|t| t.parse::<TransitionKind>().is_ok());
        if !known {
            return Err(bad(*line, format!("unknown key {key}")));
        }
    }

    let tau = num("tau", Some(DEFAULT_TAU))?;
    let window = num("window", Some(DEFAULT_WINDOW))?;
    let entry = match kv.get("entry") {
        None => EntryDistribution::Uniform { lo: 0.0, hi: tau - window },
        Some((line, v)) => {
            let (kind, rest) = v.split_once(char::is_whitespace).unwrap_or((v.as_str(), ""));
            let rest = rest.trim();
            match kind {
                "uniform" => {
                    let parts: Vec<f64> = rest
                        .split_whitespace()
                        .map(|s| s.parse::<f64>().ok())
                        .collect::<Option<_>>()
                        .filter(|p: &Vec<f64>| p.len() == 2)
                        .ok_or_else(|| bad(*line, format!("entry: expected `uniform LO HI`, got {v:?}")))?;
                    EntryDistribution::Uniform { lo: parts[0], hi: parts[1] }
                }
                "degenerate" => EntryDistribution::Degenerate {
                    at: rest.parse().map_err(|_| bad(*line, format!("entry: expected `degenerate U`, got {v:?}")))?,
                },
                "empirical" => EntryDistribution::Empirical { ages: list(*line, "entry", rest)? },
                _ => return Err(bad(*line, format!("entry: unknown distribution {kind:?}"))),
            }
        }
    };
    let scheme = ObservationScheme { tau, window, entry };
    scheme
        .validate()
        .map_err(|e| bad(kv.get("entry").or(kv.get("window")).map_or(0, |x| x.0), e.to_string()))?;

    let partition = match kv.get("partition") {
        None => Partition::single(tau),
        Some((line, v)) => {
            let p = Partition::new(list(*line, "partition", v)?).map_err(|e| bad(*line, e.to_string()))?;
            if p.tau() != tau {
                return Err(bad(*line, format!("partition ends at {} but tau is {tau}", p.tau())));
            }
            Ok(p)
        }
    }?;
    let b = partition.len();
    let mut cells = vec![RateSet::zero(); b];
    for hj in TransitionKind::ALL {
        if let Some((line, v)) = kv.get(&format!("rate.{}", hj.label())) {
            let values = list(*line, hj.label(), v)?;
            let values = match values.len() {
                1 => vec![values[0]; b],
                n if n == b => values,
                n => return Err(bad(*line, format!("rate.{hj}: {n} values for {b} intervals"))),
            };
            for (cell, r) in cells.iter_mut().zip(values) {
                cell.set(hj, r).map_err(|e| bad(*line, e.to_string()))?;
            }
        }
    }
    let rates = PiecewiseRateSet::new(partition, cells)?;

    let model = match kv.get("model") {
        None if b > 1 => ModelKind::Piecewise,
        None => ModelKind::Homogeneous,
        Some((line, v)) => match v.as_str() {
            "homogeneous" => ModelKind::Homogeneous,
            "piecewise" => ModelKind::Piecewise,
            "mortality" => ModelKind::Mortality,
            _ => return Err(bad(*line, format!("model: unknown model {v:?}"))),
        },
    };
    let cfg = RunConfig {
        rates,
        scheme,
        n_all: int("n_all", None)? as usize,
        seed: int("seed", Some(1))?,
        replications: int("replications", Some(1))? as usize,
        model,
    };
    cfg.validate().map_err(|e| bad(kv.get("replications").map_or(0, |x| x.0), e.to_string()))?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let bytes = read_all(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::validation(path.display().to_string(), None, ValidationKind::Config, "not valid UTF-8"))?;
    parse_config(&path.display().to_string(), &text)
}

pub fn format_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let s = &cfg.scheme;
    out += &format!("tau = {}\n", fmt_num(s.tau));
    out += &format!("window = {}\n", fmt_num(s.window));
    out += &match &s.entry {
        EntryDistribution::Uniform { lo, hi } => format!("entry = uniform {} {}\n", fmt_num(*lo), fmt_num(*hi)),
        EntryDistribution::Degenerate { at } => format!("entry = degenerate {}\n", fmt_num(*at)),
        EntryDistribution::Empirical { ages } => format!("entry = empirical {}\n", fmt_list(ages.iter().copied())),
    };
    out += &format!("partition = {}\n", fmt_list(cfg.rates.partition().breaks().iter().copied()));
    for hj in TransitionKind::ALL {
        let values = cfg.rates.intervals().iter().map(|c| c.get(hj));
        out += &format!("rate.{} = {}\n", hj.label(), fmt_list(values));
    }
    out += &format!("n_all = {}\n", cfg.n_all);
    out += &format!("seed = {}\n", cfg.seed);
    out += &format!("replications = {}\n", cfg.replications);
    out += &format!("model = {}\n", model_name(cfg.model));
    out
}

pub fn write_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, format_config(cfg)).map_err(|e| Error::io(path, e))
}

/// Fit rows with Wald intervals at `level`. Cells without exposure are `NA`.
pub fn write_fit_to(fit: &FitResult, level: f64, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<fit output>", std::io::Error::other(e.to_string()));
    w.write_record(FIT_HEADER).map_err(io)?;
    for p in &fit.params {
        let ci = match p.status {
            FitStatus::UndefinedNoExposure => None,
            _ => Some(p.ci(level)?),
        };
        w.write_record([
            p.intensity.label().to_string(),
            fmt_num(p.interval.0),
            fmt_num(p.interval.1),
            p.events.to_string(),
            fmt_num(p.exposure),
            fmt_opt(p.estimate),
            fmt_opt(p.se),
            fmt_opt(ci.map(|c| c.0)),
            fmt_opt(ci.map(|c| c.1)),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<fit output>", e))?;
    Ok(())
}

pub fn write_fit(fit: &FitResult, level: f64, path: &Path) -> Result<()> {
    write_fit_to(fit, level, create(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_fit_from(name: &str, input: Box<dyn Read>) -> Result<FitResult> {
    let mut params = Vec::new();
    Rows::new(name, input, &FIT_HEADER)?.for_each(|name, line, rec| {
        if rec.len() != 9 {
            return Err(Error::validation(name, Some(line), ValidationKind::Syntax, format!("expected 9 fields, got {}", rec.len())));
        }
        let label = field(name, line, rec, 0, "transition")?;
        let intensity: Intensity = label.parse().map_err(|_| {
            Error::validation(name, Some(line), ValidationKind::Syntax, format!("unknown transition {label:?}"))
        })?;
        let lo = parse_num(name, line, field(name, line, rec, 1, "interval_lo")?, "interval_lo")?;
        let hi = parse_num(name, line, field(name, line, rec, 2, "interval_hi")?, "interval_hi")?;
        let events_raw = field(name, line, rec, 3, "events")?;
        let events: u64 = events_raw.parse().map_err(|_| {
            Error::validation(name, Some(line), ValidationKind::Syntax, format!("events: {events_raw:?} is not a count"))
        })?;
        let exposure = parse_num(name, line, field(name, line, rec, 4, "exposure")?, "exposure")?;
        let opt = |i: usize, col: &str| -> Result<Option<f64>> {
            match field(name, line, rec, i, col)? {
                "NA" => Ok(None),
                s => parse_num(name, line, s, col).map(Some),
            }
        };
        let estimate = opt(5, "rate")?;
        let se = opt(6, "se")?;
        let status = if exposure <= 0.0 {
            FitStatus::UndefinedNoExposure
        } else if events == 0 {
            FitStatus::ZeroEvents
        } else {
            FitStatus::Ok
        };
        if estimate.is_none() != (status == FitStatus::UndefinedNoExposure) {
            return Err(Error::validation(name, Some(line), ValidationKind::Syntax, "rate is NA exactly when exposure is 0"));
        }
        params.push(ParamEstimate {
            intensity,
            interval: (lo, hi),
            events,
            exposure,
            estimate,
            se,
            status,
        });
        Ok(())
    })?;
    let model = if params.iter().any(|p| p.intensity == Intensity::Mortality) {
        ModelKind::Mortality
    } else {
        let mut per: HashMap<Intensity, usize> = HashMap::new();
        for p in &params {
            *per.entry(p.intensity).or_default() += 1;
        }
        if per.values().any(|&n| n > 1) {
            ModelKind::Piecewise
        } else {
            ModelKind::Homogeneous
        }
    };
    Ok(FitResult {
        model,
        params,
        mortality: None,
        provenance: None,
    })
}

pub fn read_fit(path: &Path) -> Result<FitResult> {
    read_fit_from(&path.display().to_string(), Box::new(open(path)?))
}
