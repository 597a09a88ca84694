//! Scenario files: sectioned `key = value` text describing one experiment.
//!
//! ```text
//! [system]
//! n = 3
//! ids = 1,1,2
//! [failures]
//! crash = p1@10
//! [timing]
//! model = partial_sync
//! gst = 20
//! [stack]
//! fd = dhp|homega_adapter
//! [run]
//! seed = 1
//! horizon = 400
//! window = 100
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::consensus::ConsensusKind;
use crate::kernel::{simulate, TimingModel, Trace, World};
use crate::model::{FailurePattern, Identity, ProcessKey, SystemSpec, Time};
use crate::oracles::{build_oracle, NoisePolicy, OracleConfig};
use crate::output::FdClass;
use crate::stack::{plan, Component, Plan};

pub const DEFAULT_HORIZON: Time = 200;
pub const DEFAULT_WINDOW: Time = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "key `{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

fn err(key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError {
        line: None,
        key: Some(key.to_string()),
        message: message.into(),
    }
}

/// A stabilization time, fixed or drawn per seed from an inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stab {
    Fixed(Time),
    Range(Time, Time),
}

impl fmt::Display for Stab {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stab::Fixed(t) => write!(f, "{t}"),
            Stab::Range(a, b) => write!(f, "{a}..{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSpec {
    pub class: FdClass,
    pub stabilize_at: Stab,
    pub noise: NoisePolicy,
    pub epoch: Time,
    pub leader: Option<ProcessKey>,
}

impl OracleSpec {
    pub fn new(class: FdClass) -> Self {
        let d = OracleConfig::default();
        Self {
            class,
            stabilize_at: Stab::Fixed(d.stabilize_at),
            noise: d.noise,
            epoch: d.epoch,
            leader: None,
        }
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:stabilize_at={},noise={},epoch={}",
            self.class, self.stabilize_at, self.noise, self.epoch
        )?;
        if let Some(k) = self.leader {
            write!(f, ",leader={k}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: SystemSpec,
    /// Declared bound on crashes; `None` means `n - 1`.
    pub t: Option<usize>,
    pub crashes: Vec<(ProcessKey, Time)>,
    pub random_crashes: Option<(usize, usize)>,
    pub crash_window: Option<(Time, Time)>,
    pub timing: TimingModel,
    pub oracles: Vec<OracleSpec>,
    pub pipelines: Vec<Vec<Component>>,
    pub consensus: Option<ConsensusKind>,
    pub proposals: Vec<u64>,
    pub seed: u64,
    pub horizon: Time,
    pub window: Time,
}

impl Scenario {
    /// A scenario with `spec`, no crashes, synchronous timing and an empty stack.
    pub fn new(spec: SystemSpec) -> Self {
        Self {
            spec,
            t: None,
            crashes: Vec::new(),
            random_crashes: None,
            crash_window: None,
            timing: TimingModel::Sync,
            oracles: Vec::new(),
            pipelines: Vec::new(),
            consensus: None,
            proposals: Vec::new(),
            seed: 0,
            horizon: DEFAULT_HORIZON,
            window: DEFAULT_WINDOW,
        }
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn max_faults(&self) -> usize {
        self.t.unwrap_or(self.n().saturating_sub(1))
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.pipelines.iter().flatten().copied()
    }

    pub fn plan(&self) -> Result<Plan, String> {
        let classes: Vec<FdClass> = self.oracles.iter().map(|o| o.class).collect();
        plan(&classes, &self.pipelines, self.consensus)
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario {
            seed,
            ..self.clone()
        }
    }

    fn crash_window_or_default(&self) -> (Time, Time) {
        self.crash_window.unwrap_or((1, (self.horizon / 4).max(1)))
    }

    /// Checks every semantic constraint; errors name the offending key.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.n();
        if n == 0 {
            return Err(err("n", "n must be at least 1"));
        }
        if let Some(t) = self.t {
            if t >= n {
                return Err(err("t", "t must be smaller than n"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (k, _) in &self.crashes {
            if k.0 >= n {
                return Err(err("crash", format!("{k} out of range for n={n}")));
            }
            if !seen.insert(*k) {
                return Err(err("crash", format!("{k} crashes twice")));
            }
        }
        let (rmin, rmax) = self.random_crashes.unwrap_or((0, 0));
        if rmin > rmax {
            return Err(err("random_crashes", "empty range"));
        }
        let worst = self.crashes.len() + rmax;
        if worst > self.max_faults() {
            return Err(err(
                "random_crashes",
                format!("up to {worst} crashes exceed t={}", self.max_faults()),
            ));
        }
        if worst >= n {
            return Err(err("crash", "at least one process must be correct"));
        }
        if let Some((a, b)) = self.crash_window {
            if a > b {
                return Err(err("crash_window", "empty range"));
            }
        }
        match self.timing {
            TimingModel::Sync => {}
            TimingModel::PartialSync {
                delta,
                step_gap,
                p_lose,
                ..
            } => {
                if delta == 0 {
                    return Err(err("delta", "must be at least 1"));
                }
                if step_gap == 0 {
                    return Err(err("step_gap", "must be at least 1"));
                }
                if !(0.0..=1.0).contains(&p_lose) {
                    return Err(err("p_lose", "must lie in [0, 1]"));
                }
            }
            TimingModel::Async {
                max_delay,
                step_gap,
            } => {
                if max_delay == 0 {
                    return Err(err("max_delay", "must be at least 1"));
                }
                if step_gap == 0 {
                    return Err(err("step_gap", "must be at least 1"));
                }
            }
        }
        if self.horizon == 0 {
            return Err(err("horizon", "must be positive"));
        }
        if self.window >= self.horizon {
            return Err(err("window", "window must be shorter than horizon"));
        }
        let mut classes = std::collections::BTreeSet::new();
        for o in &self.oracles {
            if !classes.insert(o.class) {
                return Err(err("oracle", format!("oracle {} declared twice", o.class)));
            }
            if let Stab::Range(a, b) = o.stabilize_at {
                if a > b {
                    return Err(err("oracle", "empty stabilize_at range"));
                }
            }
            if o.epoch == 0 {
                return Err(err("oracle", "epoch must be positive"));
            }
            if o.noise == NoisePolicy::Arbitrary
                && matches!(
                    o.class,
                    FdClass::Sigma | FdClass::ApBar | FdClass::ASigma | FdClass::HSigma
                )
            {
                return Err(err(
                    "oracle",
                    format!(
                        "noise=arbitrary would break the perpetual properties of {}",
                        o.class
                    ),
                ));
            }
            if matches!(o.class, FdClass::Sigma | FdClass::Omega | FdClass::Xi)
                && !self.spec.has_unique_ids()
            {
                return Err(err(
                    "oracle",
                    format!("{} requires unique identifiers", o.class),
                ));
            }
            if let Some(k) = o.leader {
                if k.0 >= n {
                    return Err(err("oracle", format!("leader {k} out of range")));
                }
                if self.crashes.iter().any(|(c, _)| *c == k) {
                    return Err(err("oracle", format!("leader {k} is scheduled to crash")));
                }
            }
        }
        for c in self.components() {
            match c {
                Component::HSigmaSync if self.timing != TimingModel::Sync => {
                    return Err(err("fd", format!("{c} requires model=sync")));
                }
                Component::Xi
                | Component::SigmaToHSigmaKnown
                | Component::SigmaToHSigmaUnknown
                | Component::HSigmaToSigma
                    if !self.spec.has_unique_ids() =>
                {
                    return Err(err("fd", format!("{c} requires unique identifiers")));
                }
                Component::ASigmaToHSigma | Component::ApToDhp | Component::ApToHSigma
                    if !self.spec.is_anonymous() =>
                {
                    return Err(err("fd", format!("{c} requires an anonymous system")));
                }
                Component::SigmaToHSigmaKnown if n > 10 => {
                    return Err(err("fd", format!("{c} supports at most 10 processes")));
                }
                Component::SigmaToHSigmaUnknown | Component::HSigmaToSigma if n > 12 => {
                    return Err(err("fd", format!("{c} supports at most 12 processes")));
                }
                _ => {}
            }
        }
        if let Some(kind) = self.consensus {
            if let TimingModel::PartialSync { gst, p_lose, .. } = self.timing {
                if gst > 0 && p_lose > 0.0 {
                    return Err(err(
                        "p_lose",
                        "consensus requires reliable links; set p_lose = 0",
                    ));
                }
            }
            if kind == ConsensusKind::Majority {
                let Some(t) = self.t else {
                    return Err(err("consensus", "majority consensus needs an explicit t"));
                };
                if 2 * t >= n {
                    return Err(err(
                        "t",
                        format!("majority consensus requires t < n/2 (n={n}, t={t})"),
                    ));
                }
            }
            if self.proposals.len() != n {
                return Err(err(
                    "proposals",
                    format!("expected {n} proposals, found {}", self.proposals.len()),
                ));
            }
        } else if !self.proposals.is_empty() {
            return Err(err("proposals", "proposals need a consensus algorithm"));
        }
        self.plan().map_err(|m| err("stack", m))?;
        Ok(())
    }

    /// Draws the per-seed parts (random crashes, stabilization times).
    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5ce7_a410_c0ff_ee00);
        let mut crashes = self.crashes.clone();
        if let Some((a, b)) = self.random_crashes {
            let k = rng.gen_range(a..=b);
            let leaders: Vec<ProcessKey> = self.oracles.iter().filter_map(|o| o.leader).collect();
            let mut pool: Vec<ProcessKey> = self
                .spec
                .keys()
                .filter(|p| !crashes.iter().any(|(c, _)| c == p) && !leaders.contains(p))
                .collect();
            pool.shuffle(&mut rng);
            let (lo, hi) = self.crash_window_or_default();
            for p in pool.into_iter().take(k) {
                crashes.push((p, rng.gen_range(lo..=hi)));
            }
        }
        let pattern =
            FailurePattern::new(crashes, &self.spec).map_err(|e| err("crash", e.to_string()))?;
        let stabilize = self
            .oracles
            .iter()
            .map(|o| match o.stabilize_at {
                Stab::Fixed(t) => t,
                Stab::Range(a, b) => rng.gen_range(a..=b),
            })
            .collect();
        Ok(Resolved {
            scenario: self.clone(),
            plan: self.plan().map_err(|m| err("stack", m))?,
            pattern,
            stabilize,
        })
    }

    /// Canonical text; `parse(render(s)) == s`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let ids: Vec<String> = self.spec.ids().iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "[system]\nn = {}\nids = {}", self.n(), ids.join(","));
        s.push_str("\n[failures]\n");
        if let Some(t) = self.t {
            let _ = writeln!(s, "t = {t}");
        }
        for (k, t) in &self.crashes {
            let _ = writeln!(s, "crash = {k}@{t}");
        }
        if let Some((a, b)) = self.random_crashes {
            let _ = writeln!(s, "random_crashes = {a}..{b}");
        }
        if let Some((a, b)) = self.crash_window {
            let _ = writeln!(s, "crash_window = {a}..{b}");
        }
        s.push_str("\n[timing]\n");
        let _ = writeln!(s, "model = {}", self.timing.name());
        match self.timing {
            TimingModel::Sync => {}
            TimingModel::PartialSync {
                gst,
                delta,
                step_gap,
                p_lose,
            } => {
                let _ = writeln!(
                    s,
                    "gst = {gst}\ndelta = {delta}\nstep_gap = {step_gap}\np_lose = {p_lose}"
                );
            }
            TimingModel::Async {
                max_delay,
                step_gap,
            } => {
                let _ = writeln!(s, "max_delay = {max_delay}\nstep_gap = {step_gap}");
            }
        }
        s.push_str("\n[stack]\n");
        for o in &self.oracles {
            let _ = writeln!(s, "oracle = {o}");
        }
        for p in &self.pipelines {
            let names: Vec<&str> = p.iter().map(|c| c.name()).collect();
            let _ = writeln!(s, "fd = {}", names.join("|"));
        }
        if let Some(c) = self.consensus {
            let _ = writeln!(s, "consensus = {c}");
        }
        if !self.proposals.is_empty() {
            let p: Vec<String> = self.proposals.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "\n[inputs]\nproposals = {}", p.join(","));
        }
        let _ = writeln!(
            s,
            "\n[run]\nseed = {}\nhorizon = {}\nwindow = {}",
            self.seed, self.horizon, self.window
        );
        s
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        parse(text)
    }

    /// Copy with every occurrence of `key` replaced by `key = value`, as if
    /// the file had been edited. Keys may be absent from the original.
    pub fn with_value(&self, key: &str, value: &str) -> Result<Scenario, ScenarioError> {
        let section = section_of(key).ok_or_else(|| err(key, "unknown key"))?;
        let mut out = String::new();
        let mut current = "";
        let mut placed = false;
        for line in self.render().lines() {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = section_of_name(name);
            } else if line.split_once('=').is_some_and(|(k, _)| k.trim() == key) {
                if !placed {
                    let _ = writeln!(out, "{key} = {value}");
                    placed = true;
                }
                continue;
            }
            out.push_str(line);
            out.push('\n');
            if !placed && current == section && line.starts_with('[') {
                let _ = writeln!(out, "{key} = {value}");
                placed = true;
            }
        }
        if !placed {
            let _ = writeln!(out, "[{section}]\n{key} = {value}");
        }
        parse(&out)
    }
}

fn section_of(key: &str) -> Option<&'static str> {
    Some(match key {
        "n" | "ids" => "system",
        "t" | "crash" | "random_crashes" | "crash_window" => "failures",
        "model" | "gst" | "delta" | "step_gap" | "max_delay" | "p_lose" => "timing",
        "oracle" | "fd" | "consensus" => "stack",
        "proposals" => "inputs",
        "seed" | "horizon" | "window" => "run",
        _ => return None,
    })
}

fn section_of_name(name: &str) -> &'static str {
    ["system", "failures", "timing", "stack", "inputs", "run"]
        .into_iter()
        .find(|s| *s == name)
        .unwrap_or("")
}

/// A scenario with its per-seed draws made.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub plan: Plan,
    pub pattern: FailurePattern,
    /// Stabilization time of each oracle, in declaration order.
    pub stabilize: Vec<Time>,
}

impl Resolved {
    /// Time after which crashes, link chaos and oracle noise are all over.
    pub fn stable_from(&self) -> Time {
        let s = &self.scenario;
        [
            self.pattern.last_crash().unwrap_or(0),
            s.timing.gst(),
            self.stabilize.iter().copied().max().unwrap_or(0),
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }

    /// Time the algorithms are granted to settle once the system is stable.
    pub fn settle_len(&self) -> Time {
        let t = &self.scenario.timing;
        4 * self.scenario.n() as Time * (t.delay_bound() + t.step_gap())
    }

    /// Whether "eventually forever" verdicts over the final window can be conclusive.
    pub fn window_conclusive(&self) -> bool {
        let s = &self.scenario;
        s.window >= self.settle_len()
            && s.horizon - s.window >= self.stable_from() + self.settle_len()
    }

    pub fn window_start(&self) -> Time {
        self.scenario.horizon - self.scenario.window
    }

    pub fn run(&self) -> Trace {
        let s = &self.scenario;
        let oracles = s
            .oracles
            .iter()
            .zip(&self.stabilize)
            .map(|(o, &t)| {
                build_oracle(
                    o.class,
                    &self.pattern,
                    &s.spec,
                    OracleConfig {
                        stabilize_at: t,
                        noise: o.noise,
                        epoch: o.epoch,
                        leader: o.leader,
                    },
                    s.seed,
                )
                .expect("validated oracle")
            })
            .collect();
        let world = World {
            spec: s.spec.clone(),
            pattern: self.pattern.clone(),
            timing: s.timing,
            seed: s.seed,
            horizon: s.horizon,
            oracles,
        };
        let t = s.max_faults();
        simulate(world, |key, id| {
            self.plan
                .instantiate(id, &s.spec, s.proposals.get(key.0).copied(), t)
        })
    }
}

/// Validates, resolves and runs a scenario.
pub fn run_scenario(s: &Scenario) -> Result<(Resolved, Trace), ScenarioError> {
    let r = s.resolve()?;
    let trace = r.run();
    Ok((r, trace))
}

fn parse_range<T: std::str::FromStr>(v: &str) -> Option<(T, T)> {
    let (a, b) = v.split_once("..")?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_oracle(v: &str) -> Result<OracleSpec, String> {
    let (class, params) = v.split_once(':').unwrap_or((v, ""));
    let class: FdClass = class.trim().parse().map_err(|e| format!("{e}"))?;
    let mut o = OracleSpec::new(class);
    for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, val) = kv
            .split_once('=')
            .ok_or_else(|| format!("oracle parameter `{kv}` is not key=value"))?;
        match k {
            "stabilize_at" => {
                o.stabilize_at = if val.contains("..") {
                    let (a, b) = parse_range(val).ok_or("bad stabilize_at range")?;
                    Stab::Range(a, b)
                } else {
                    Stab::Fixed(val.parse().map_err(|_| "bad stabilize_at")?)
                }
            }
            "noise" => o.noise = val.parse()?,
            "epoch" => o.epoch = val.parse().map_err(|_| "bad epoch")?,
            "leader" => o.leader = Some(val.parse().map_err(|_| "bad leader key")?),
            _ => return Err(format!("unknown oracle parameter `{k}`")),
        }
    }
    Ok(o)
}

fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    let mut section = String::new();
    let mut lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut entries: Vec<(String, String, String, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            if !["system", "failures", "timing", "stack", "inputs", "run"]
                .contains(&section.as_str())
            {
                return Err(ScenarioError {
                    line: Some(line_no),
                    key: None,
                    message: format!("unknown section [{section}]"),
                });
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ScenarioError {
                line: Some(line_no),
                key: None,
                message: "expected `key = value`".into(),
            });
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if section.is_empty() {
            return Err(ScenarioError {
                line: Some(line_no),
                key: Some(k),
                message: "key outside of any section".into(),
            });
        }
        lines.entry(k.clone()).or_insert(line_no);
        entries.push((section.clone(), k, v, line_no));
    }

    let at = |line: usize, key: &str, message: String| ScenarioError {
        line: Some(line),
        key: Some(key.to_string()),
        message,
    };
    let mut n: Option<usize> = None;
    let mut ids: Option<Vec<Identity>> = None;
    let mut model: Option<String> = None;
    let mut tparams: BTreeMap<String, (String, usize)> = BTreeMap::new();
    let mut s = Scenario::new(SystemSpec::anonymous(1).expect("one process"));
    for (sec, k, v, l) in &entries {
        let l = *l;
        let bad = |what: &str| at(l, k, format!("invalid {what} `{v}`"));
        match (sec.as_str(), k.as_str()) {
            ("system", "n") => n = Some(v.parse().map_err(|_| bad("count"))?),
            ("system", "ids") => {
                ids = Some(
                    v.split(',')
                        .map(|x| x.trim().parse::<Identity>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad("identity list"))?,
                )
            }
            ("failures", "t") => s.t = Some(v.parse().map_err(|_| bad("count"))?),
            ("failures", "crash") => {
                for item in v.split(',').map(str::trim) {
                    let (p, t) = item.split_once('@').ok_or_else(|| bad("crash entry"))?;
                    let p: ProcessKey = p.parse().map_err(|_| bad("process key"))?;
                    let t: Time = t.parse().map_err(|_| bad("crash time"))?;
                    s.crashes.push((p, t));
                }
            }
            ("failures", "random_crashes") => {
                s.random_crashes = Some(if v.contains("..") {
                    parse_range(v).ok_or_else(|| bad("range"))?
                } else {
                    let k: usize = v.parse().map_err(|_| bad("count"))?;
                    (k, k)
                })
            }
            ("failures", "crash_window") => {
                s.crash_window = Some(parse_range(v).ok_or_else(|| bad("range"))?)
            }
            ("timing", "model") => model = Some(v.clone()),
            ("timing", "gst" | "delta" | "step_gap" | "max_delay" | "p_lose") => {
                tparams.insert(k.clone(), (v.clone(), l));
            }
            ("stack", "oracle") => s.oracles.push(parse_oracle(v).map_err(|m| at(l, k, m))?),
            ("stack", "fd") => s.pipelines.push(
                v.split('|')
                    .map(|c| c.trim().parse::<Component>())
                    .collect::<Result<_, _>>()
                    .map_err(|m| at(l, k, m))?,
            ),
            ("stack", "consensus") => {
                s.consensus = Some(v.parse().map_err(|m: String| at(l, k, m))?)
            }
            ("inputs", "proposals") => {
                s.proposals = v
                    .split(',')
                    .map(|x| x.trim().parse::<u64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad("proposal list"))?
            }
            ("run", "seed") => s.seed = v.parse().map_err(|_| bad("seed"))?,
            ("run", "horizon") => s.horizon = v.parse().map_err(|_| bad("horizon"))?,
            ("run", "window") => s.window = v.parse().map_err(|_| bad("window"))?,
            _ => return Err(at(l, k, format!("unknown key in [{sec}]"))),
        }
    }

    let line_of = |k: &str| lines.get(k).copied();
    let n_val = match (n, &ids) {
        (Some(n), _) => n,
        (None, Some(ids)) => ids.len(),
        (None, None) => {
            return Err(ScenarioError {
                line: None,
                key: Some("n".into()),
                message: "missing process count".into(),
            })
        }
    };
    let ids = match ids {
        Some(ids) if ids.len() != n_val => {
            return Err(ScenarioError {
                line: line_of("ids"),
                key: Some("ids".into()),
                message: format!("ids length ≠ n ({} ids, n={n_val})", ids.len()),
            })
        }
        Some(ids) => ids,
        None => (1..=n_val as u64).map(Identity::Id).collect(),
    };
    s.spec = SystemSpec::new(ids).map_err(|e| ScenarioError {
        line: line_of("n"),
        key: Some("n".into()),
        message: e.to_string(),
    })?;

    let num = |key: &str, default: Time| -> Result<Time, ScenarioError> {
        match tparams.get(key) {
            None => Ok(default),
            Some((v, l)) => v
                .parse()
                .map_err(|_| at(*l, key, format!("invalid value `{v}`"))),
        }
    };
    let allowed: &[&str] = match model.as_deref().unwrap_or("sync") {
        "sync" => {
            s.timing = TimingModel::Sync;
            &[]
        }
        "partial_sync" => {
            let p_lose = match tparams.get("p_lose") {
                None => 0.5,
                Some((v, l)) => v
                    .parse()
                    .map_err(|_| at(*l, "p_lose", format!("invalid value `{v}`")))?,
            };
            s.timing = TimingModel::PartialSync {
                gst: num("gst", 0)?,
                delta: num("delta", 3)?,
                step_gap: num("step_gap", 2)?,
                p_lose,
            };
            &["gst", "delta", "step_gap", "p_lose"]
        }
        "async" => {
            s.timing = TimingModel::Async {
                max_delay: num("max_delay", 5)?,
                step_gap: num("step_gap", 2)?,
            };
            &["max_delay", "step_gap"]
        }
        other => {
            return Err(ScenarioError {
                line: line_of("model"),
                key: Some("model".into()),
                message: format!("unknown timing model `{other}`"),
            })
        }
    };
    for (k, (_, l)) in &tparams {
        if !allowed.contains(&k.as_str()) {
            return Err(at(
                *l,
                k,
                format!("not a parameter of model {}", s.timing.name()),
            ));
        }
    }

    s.validate().map_err(|mut e| {
        e.line = e.key.as_deref().and_then(line_of);
        e
    })?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = Scenario::parse("[system]\nn = 1\n[stack]\nfd = fig2\n").unwrap();
        assert_eq!(s.n(), 1);
        assert_eq!(s.spec.ids(), &[Identity::Id(1)]);
        assert_eq!(s.timing, TimingModel::Sync);
        assert_eq!(
            (s.seed, s.horizon, s.window),
            (0, DEFAULT_HORIZON, DEFAULT_WINDOW)
        );
        assert_eq!(s.pipelines, vec![vec![Component::HSigmaSync]]);
    }

    #[test]
    fn ids_length_must_match() {
        let e = Scenario::parse("[system]\nn = 2\nids = 1,1,2\n").unwrap_err();
        assert!(e.message.contains("ids length ≠ n"), "{e}");
        assert_eq!(e.line, Some(3));
        assert_eq!(e.key.as_deref(), Some("ids"));
    }

    #[test]
    fn majority_consensus_needs_minority_faults() {
        let text = "[system]\nn = 4\n[failures]\nt = 2\n[stack]\noracle = homega\nconsensus = fig3\n[inputs]\nproposals = 1,2,3,4\n";
        let e = Scenario::parse(text).unwrap_err();
        assert!(e.message.contains("requires t < n/2"), "{e}");
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn consensus_rejects_lossy_links() {
        let text = "[system]\nn = 3\n[timing]\nmodel = partial_sync\ngst = 10\n[stack]\noracle = homega\noracle = hsigma\nconsensus = fig4\n[inputs]\nproposals = 1,2,3\n";
        let e = Scenario::parse(text).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("p_lose"));
        assert!(Scenario::parse(&text.replace("gst = 10", "gst = 10\np_lose = 0")).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = Scenario::parse("[system]\nn = 2\ncolour = red\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(3), Some("colour")));
        let e = Scenario::parse("[system]\nn = 2\n[timing]\nmodel = async\ngst = 4\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("gst"));
    }

    #[test]
    fn render_is_reparsed_identically() {
        let text = "[system]\nn = 5\nids = 1,1,2,3,3\n[failures]\nt = 2\ncrash = p4@12\nrandom_crashes = 0..1\ncrash_window = 3..30\n[timing]\nmodel = partial_sync\ngst = 20\ndelta = 3\np_lose = 0\n[stack]\noracle = homega:stabilize_at=10..60,noise=arbitrary\nfd = fig1|homega_adapter\nconsensus = fig3\n[inputs]\nproposals = 3,1,4,1,5\n[run]\nseed = 9\nhorizon = 400\nwindow = 100\n";
        let s = Scenario::parse(text).unwrap();
        let back = Scenario::parse(&s.render()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn overrides_replace_or_add_keys() {
        let s = Scenario::parse("[system]\nn = 3\n[timing]\nmodel = partial_sync\n").unwrap();
        let g = s.with_value("gst", "50").unwrap();
        assert_eq!(g.timing.gst(), 50);
        let h = g
            .with_value("gst", "10")
            .unwrap()
            .with_value("horizon", "900")
            .unwrap();
        assert_eq!((h.timing.gst(), h.horizon), (10, 900));
        let crash = s.with_value("crash", "p1@4").unwrap();
        assert_eq!(crash.crashes, vec![(ProcessKey(1), 4)]);
        assert!(s.with_value("colour", "red").is_err());
    }

    #[test]
    fn resolution_is_deterministic_and_keeps_a_correct_process() {
        let text = "[system]\nn = 4\n[failures]\nrandom_crashes = 3\n[stack]\noracle = hsigma:stabilize_at=0..40\n[run]\nseed = 5\n";
        let s = Scenario::parse(text).unwrap();
        let a = s.resolve().unwrap();
        let b = s.resolve().unwrap();
        assert_eq!(a.pattern, b.pattern);
        assert_eq!(a.stabilize, b.stabilize);
        assert_eq!(a.pattern.faulty().len(), 3);
        assert!(a.stabilize[0] <= 40);
    }
}
