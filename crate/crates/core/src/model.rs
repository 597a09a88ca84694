//! Identities, identity multisets, system specifications and failure patterns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Simulation time in ticks.
pub type Time = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("process key p{key} out of range for n={n}")]
    KeyOutOfRange { key: usize, n: usize },
    #[error("system must contain at least one process")]
    Empty,
    #[error("every process crashes; at least one must be correct")]
    NoCorrectProcess,
    #[error("invalid identity `{0}`")]
    BadIdentity(String),
    #[error("invalid multiset `{0}`")]
    BadMultiset(String),
}

/// A process identifier as seen by algorithms. Several processes may share one.
///
/// `Bot` is the default identifier of anonymous processes and orders before
/// every numeric identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Identity {
    Bot,
    Id(u64),
}

impl Identity {
    pub const BOT: Identity = Identity::Bot;
}

impl From<u64> for Identity {
    fn from(v: u64) -> Self {
        Identity::Id(v)
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identity::Bot => f.write_str("bot"),
            Identity::Id(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Identity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("bot") {
            return Ok(Identity::Bot);
        }
        s.parse::<u64>()
            .map(Identity::Id)
            .map_err(|_| ModelError::BadIdentity(s.to_string()))
    }
}

/// Multiset of identities. Entries with multiplicity zero are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdMultiset {
    entries: BTreeMap<Identity, usize>,
}

impl IdMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    /// `id` repeated `count` times.
    pub fn repeated(id: Identity, count: usize) -> Self {
        let mut m = Self::new();
        m.insert_n(id, count);
        m
    }

    pub fn insert(&mut self, id: Identity) {
        self.insert_n(id, 1);
    }

    pub fn insert_n(&mut self, id: Identity, count: usize) {
        if count > 0 {
            *self.entries.entry(id).or_insert(0) += count;
        }
    }

    pub fn multiplicity(&self, id: &Identity) -> usize {
        self.entries.get(id).copied().unwrap_or(0)
    }

    /// Total size, counting multiplicities.
    pub fn len(&self) -> usize {
        self.entries.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distinct(&self) -> impl Iterator<Item = &Identity> + '_ {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Identity, usize)> + '_ {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    /// Smallest identity present.
    pub fn smallest(&self) -> Option<&Identity> {
        self.entries.keys().next()
    }

    /// Multiset inclusion: every multiplicity in `self` is at most the one in `other`.
    pub fn is_included_in(&self, other: &IdMultiset) -> bool {
        self.entries
            .iter()
            .all(|(id, &k)| k <= other.multiplicity(id))
    }

    pub fn sum(&self, other: &IdMultiset) -> IdMultiset {
        let mut out = self.clone();
        for (id, k) in other.iter() {
            out.insert_n(id.clone(), k);
        }
        out
    }

    /// Multiset with every identity of `set` once.
    pub fn from_set<'a>(set: impl IntoIterator<Item = &'a Identity>) -> Self {
        set.into_iter().cloned().collect()
    }

    pub fn to_set(&self) -> BTreeSet<Identity> {
        self.entries.keys().cloned().collect()
    }
}

impl FromIterator<Identity> for IdMultiset {
    fn from_iter<T: IntoIterator<Item = Identity>>(iter: T) -> Self {
        let mut m = IdMultiset::new();
        for id in iter {
            m.insert(id);
        }
        m
    }
}

/// Canonical rendering: `1^2+2^1`, identities ascending; the empty multiset is `{}`.
impl fmt::Display for IdMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("{}");
        }
        for (i, (id, k)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{id}^{k}")?;
        }
        Ok(())
    }
}

impl FromStr for IdMultiset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ModelError::BadMultiset(s.to_string());
        if s == "{}" {
            return Ok(IdMultiset::new());
        }
        let mut m = IdMultiset::new();
        for part in s.split('+') {
            let (id, k) = part.split_once('^').ok_or_else(bad)?;
            let id: Identity = id.parse().map_err(|_| bad())?;
            let k: usize = k.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            m.insert_n(id, k);
        }
        Ok(m)
    }
}

/// Simulation-internal process handle. Algorithms never see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProcessKey(pub usize);

impl fmt::Display for ProcessKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl FromStr for ProcessKey {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .strip_prefix('p')
            .and_then(|k| k.parse().ok())
            .map(ProcessKey)
            .ok_or_else(|| ModelError::BadIdentity(s.to_string()))
    }
}

/// The set of processes and the identity of each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemSpec {
    ids: Vec<Identity>,
}

impl SystemSpec {
    pub fn new(ids: Vec<Identity>) -> Result<Self, ModelError> {
        if ids.is_empty() {
            return Err(ModelError::Empty);
        }
        Ok(Self { ids })
    }

    /// Anonymous system: every process carries `Bot`.
    pub fn anonymous(n: usize) -> Result<Self, ModelError> {
        Self::new(vec![Identity::Bot; n])
    }

    pub fn from_ids(ids: &[u64]) -> Result<Self, ModelError> {
        Self::new(ids.iter().copied().map(Identity::Id).collect())
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[Identity] {
        &self.ids
    }

    pub fn id(&self, key: ProcessKey) -> &Identity {
        &self.ids[key.0]
    }

    pub fn keys(&self) -> impl Iterator<Item = ProcessKey> {
        (0..self.ids.len()).map(ProcessKey)
    }

    pub fn has_unique_ids(&self) -> bool {
        let set: BTreeSet<_> = self.ids.iter().collect();
        set.len() == self.ids.len()
    }

    pub fn is_anonymous(&self) -> bool {
        self.ids.iter().all(|i| *i == Identity::Bot)
    }

    /// I(Π).
    pub fn membership(&self) -> IdMultiset {
        self.ids.iter().cloned().collect()
    }
}

/// I(S): the multiset of identities of `keys`.
pub fn identity_multiset<'a>(
    keys: impl IntoIterator<Item = &'a ProcessKey>,
    spec: &SystemSpec,
) -> Result<IdMultiset, ModelError> {
    let mut m = IdMultiset::new();
    for key in keys {
        if key.0 >= spec.n() {
            return Err(ModelError::KeyOutOfRange {
                key: key.0,
                n: spec.n(),
            });
        }
        m.insert(spec.id(*key).clone());
    }
    Ok(m)
}

/// Crash times of faulty processes; processes without an entry are correct.
///
/// A process with crash time `τ` handles no event after `τ`. Everything it
/// broadcasts at the instant `τ` itself is subject to the crash-partial rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailurePattern {
    crash_time: BTreeMap<ProcessKey, Time>,
}

impl FailurePattern {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(
        crashes: impl IntoIterator<Item = (ProcessKey, Time)>,
        spec: &SystemSpec,
    ) -> Result<Self, ModelError> {
        let mut crash_time = BTreeMap::new();
        for (key, t) in crashes {
            if key.0 >= spec.n() {
                return Err(ModelError::KeyOutOfRange {
                    key: key.0,
                    n: spec.n(),
                });
            }
            crash_time.insert(key, t);
        }
        if crash_time.len() >= spec.n() {
            return Err(ModelError::NoCorrectProcess);
        }
        Ok(Self { crash_time })
    }

    pub fn crash_time(&self, key: ProcessKey) -> Option<Time> {
        self.crash_time.get(&key).copied()
    }

    pub fn crashes(&self) -> impl Iterator<Item = (ProcessKey, Time)> + '_ {
        self.crash_time.iter().map(|(k, t)| (*k, *t))
    }

    pub fn is_correct(&self, key: ProcessKey) -> bool {
        !self.crash_time.contains_key(&key)
    }

    pub fn correct(&self, spec: &SystemSpec) -> BTreeSet<ProcessKey> {
        spec.keys().filter(|k| self.is_correct(*k)).collect()
    }

    pub fn faulty(&self) -> BTreeSet<ProcessKey> {
        self.crash_time.keys().copied().collect()
    }

    /// Alive at `t`: not yet crashed, or crashing at exactly `t`.
    pub fn alive_at(&self, key: ProcessKey, t: Time) -> bool {
        self.crash_time(key).is_none_or(|c| t <= c)
    }

    /// Number of processes that have not crashed strictly before `t`.
    pub fn alive_count(&self, spec: &SystemSpec, t: Time) -> usize {
        spec.keys().filter(|k| self.alive_at(*k, t)).count()
    }

    pub fn last_crash(&self) -> Option<Time> {
        self.crash_time.values().copied().max()
    }

    /// I(Correct).
    pub fn correct_ids(&self, spec: &SystemSpec) -> IdMultiset {
        identity_multiset(&self.correct(spec), spec).expect("keys come from spec")
    }
}
