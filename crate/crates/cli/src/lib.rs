//! The `homonym` command line: run scenarios, check traces, sweep seeds.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use homonym::checker::{any_fail, check_all, decision_rounds, Status, Verdict};
use homonym::kernel::Trace;
use homonym::scenario::{run_scenario, Scenario};
use rayon::prelude::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "homonym",
    version,
    about = "Simulate and check failure detectors and consensus in homonymous systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario.
    Run {
        file: PathBuf,
        /// Write the trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Comma-separated properties, streams or `all`.
        #[arg(long)]
        check: Option<String>,
        /// Compare the trace byte for byte against this file.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Run a scenario over a range of seeds and tally verdicts.
    Sweep {
        file: PathBuf,
        /// Inclusive seed range `A..B`, or a single seed.
        #[arg(long)]
        seeds: String,
        /// `key=v1,v2,...` or `key=a..b`: one aggregate row per value.
        #[arg(long)]
        vary: Option<String>,
        #[arg(long, default_value = "all")]
        check: String,
    },
    /// Check a stored trace against the scenario that produced it.
    Check {
        trace: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "all")]
        check: String,
    },
}

struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

/// Runs the command line with `args` (program name first) and returns the exit status.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run {
            file,
            trace_out,
            check,
            golden,
        } => cmd_run(
            &file,
            trace_out.as_deref(),
            check.as_deref(),
            golden.as_deref(),
            out,
            err,
        ),
        Command::Sweep {
            file,
            seeds,
            vary,
            check,
        } => cmd_sweep(&file, &seeds, vary.as_deref(), &check, out, err),
        Command::Check { trace, spec, check } => cmd_check(&trace, &spec, &check, out),
    };
    match result {
        Ok(code) => code,
        Err(Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn read(path: &Path) -> Result<String, Usage> {
    fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Scenario, Usage> {
    Scenario::parse(&read(path)?).map_err(|e| Usage(format!("{}: {e}", path.display())))
}

fn select(verdicts: Vec<Verdict>, selectors: &str) -> Vec<Verdict> {
    let wanted: Vec<&str> = selectors.split(',').map(str::trim).collect();
    verdicts
        .into_iter()
        .filter(|v| wanted.iter().any(|s| v.selected_by(s)))
        .collect()
}

fn cmd_run(
    file: &Path,
    trace_out: Option<&Path>,
    check: Option<&str>,
    golden: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Usage> {
    let scenario = load(file)?;
    let (resolved, trace) = run_scenario(&scenario)?;
    let text = trace.to_text();
    if let Some(p) = trace_out {
        fs::write(p, &text).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
    }
    let decisions = trace.decisions();
    writeln!(
        out,
        "seed={} events={} sends={} decisions={}",
        scenario.seed,
        trace.events.len(),
        trace.sends().count(),
        decisions.len()
    )?;
    let mut code = EXIT_OK;
    if let Some(sel) = check {
        let verdicts = select(check_all(&trace, &resolved), sel);
        if verdicts.is_empty() {
            return Err(Usage(format!("no property matches `{sel}`")));
        }
        for v in &verdicts {
            writeln!(out, "{v}")?;
        }
        if any_fail(&verdicts) {
            code = EXIT_FAIL;
        }
    }
    if let Some(g) = golden {
        let expected = read(g)?;
        if let Some(line) = first_difference(&expected, &text) {
            writeln!(
                err,
                "golden mismatch against {} at line {line}",
                g.display()
            )?;
            code = EXIT_FAIL;
        } else {
            writeln!(out, "golden: identical")?;
        }
    }
    Ok(code)
}

fn first_difference(a: &str, b: &str) -> Option<usize> {
    if a == b {
        return None;
    }
    let mut la = a.lines();
    let mut lb = b.lines();
    let mut n = 1;
    loop {
        match (la.next(), lb.next()) {
            (Some(x), Some(y)) if x == y => n += 1,
            _ => return Some(n),
        }
    }
}

fn parse_range(s: &str) -> Option<RangeInclusive<u64>> {
    match s.split_once("..") {
        Some((a, b)) => Some(a.trim().parse().ok()?..=b.trim().parse().ok()?),
        None => {
            let v = s.trim().parse().ok()?;
            Some(v..=v)
        }
    }
}

fn vary_values(spec: &str) -> Result<(String, Vec<String>), Usage> {
    let (key, vals) = spec
        .split_once('=')
        .ok_or_else(|| Usage(format!("--vary expects key=values, got `{spec}`")))?;
    let values: Vec<String> = if vals.contains("..") && !vals.contains(',') {
        parse_range(vals)
            .ok_or_else(|| Usage(format!("bad range `{vals}`")))?
            .map(|v| v.to_string())
            .collect()
    } else {
        vals.split(',').map(|v| v.trim().to_string()).collect()
    };
    Ok((key.trim().to_string(), values))
}

/// Verdict tallies in first-seen property order.
#[derive(Default)]
struct Tally {
    order: Vec<String>,
    counts: BTreeMap<String, [usize; 3]>,
    rounds: BTreeMap<u64, usize>,
    undecided_runs: usize,
}

impl Tally {
    fn add(&mut self, verdicts: &[Verdict], round: Option<Option<u64>>) {
        for v in verdicts {
            let c = self.counts.entry(v.property.clone()).or_insert_with(|| {
                self.order.push(v.property.clone());
                [0; 3]
            });
            c[match v.status {
                Status::Pass => 0,
                Status::Fail => 1,
                Status::Inconclusive => 2,
            }] += 1;
        }
        match round {
            Some(Some(r)) => *self.rounds.entry(r).or_default() += 1,
            Some(None) => self.undecided_runs += 1,
            None => {}
        }
    }

    fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for p in &self.order {
            let [pass, fail, inc] = self.counts[p];
            let mut parts = Vec::new();
            for (n, name) in [(pass, "PASS"), (fail, "FAIL"), (inc, "INCONCLUSIVE")] {
                if n > 0 {
                    parts.push(format!("{n} {name}"));
                }
            }
            writeln!(out, "{p}: {}", parts.join(", "))?;
        }
        if !self.rounds.is_empty() || self.undecided_runs > 0 {
            let mut parts: Vec<String> = self
                .rounds
                .iter()
                .map(|(r, n)| format!("{r}:{n}"))
                .collect();
            if self.undecided_runs > 0 {
                parts.push(format!("none:{}", self.undecided_runs));
            }
            writeln!(out, "decision rounds: {}", parts.join(" "))?;
        }
        Ok(())
    }

    fn fails(&self) -> usize {
        self.counts.values().map(|c| c[1]).sum()
    }

    fn inconclusive(&self) -> usize {
        self.counts.values().map(|c| c[2]).sum()
    }
}

/// Verdicts of one seed and, for consensus stacks, its last decision round.
type SeedRun = (Vec<Verdict>, Option<Option<u64>>);

fn sweep_one(template: &Scenario, seeds: RangeInclusive<u64>, check: &str) -> Result<Tally, Usage> {
    let runs: Vec<Result<SeedRun, String>> = seeds
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|seed| {
            let s = template.with_seed(seed);
            let (resolved, trace) = run_scenario(&s).map_err(|e| format!("seed {seed}: {e}"))?;
            let verdicts = select(check_all(&trace, &resolved), check);
            let round = s
                .consensus
                .map(|_| decision_rounds(&trace).values().copied().max());
            Ok((verdicts, round))
        })
        .collect();
    let mut tally = Tally::default();
    for r in runs {
        let (v, round) = r.map_err(Usage)?;
        tally.add(&v, round);
    }
    Ok(tally)
}

fn thread_pool() -> Result<rayon::ThreadPool, Usage> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("HOMONYM_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Usage(format!("HOMONYM_THREADS must be a number, got `{v}`")))?;
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn cmd_sweep(
    file: &Path,
    seeds: &str,
    vary: Option<&str>,
    check: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Usage> {
    let template = load(file)?;
    let seeds = parse_range(seeds).ok_or_else(|| Usage(format!("bad seed range `{seeds}`")))?;
    if seeds.is_empty() {
        return Err(Usage("empty seed range".into()));
    }
    let rows: Vec<(Option<String>, Scenario)> = match vary {
        None => vec![(None, template)],
        Some(spec) => {
            let (key, values) = vary_values(spec)?;
            values
                .into_iter()
                .map(|v| {
                    let s = template.with_value(&key, &v)?;
                    Ok((Some(format!("{key}={v}")), s))
                })
                .collect::<Result<_, Usage>>()?
        }
    };
    let pool = thread_pool()?;
    let (mut fails, mut inconclusive) = (0, 0);
    for (label, scenario) in rows {
        let tally = pool.install(|| sweep_one(&scenario, seeds.clone(), check))?;
        if let Some(l) = label {
            writeln!(out, "[{l}]")?;
        }
        tally.write(out)?;
        fails += tally.fails();
        inconclusive += tally.inconclusive();
    }
    if inconclusive > 0 {
        writeln!(
            err,
            "warning: {inconclusive} inconclusive verdicts; lengthen horizon or window for conclusive eventual properties"
        )?;
    }
    Ok(if fails > 0 { EXIT_FAIL } else { EXIT_OK })
}

fn cmd_check(trace: &Path, spec: &Path, check: &str, out: &mut dyn Write) -> Result<i32, Usage> {
    let scenario = load(spec)?;
    let trace =
        Trace::parse(&read(trace)?).map_err(|e| Usage(format!("{}: {e}", trace.display())))?;
    let resolved = scenario.resolve()?;
    let verdicts = select(check_all(&trace, &resolved), check);
    for v in &verdicts {
        writeln!(out, "{v}")?;
    }
    Ok(if any_fail(&verdicts) {
        EXIT_FAIL
    } else {
        EXIT_OK
    })
}
