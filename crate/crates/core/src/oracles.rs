//! Ground-truth failure detectors computed from the failure pattern.
//!
//! Every oracle is a pure function of `(process, time)`. Before its
//! stabilization time it may emit noise, but only noise that keeps the
//! perpetual properties of its class intact.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{FailurePattern, IdMultiset, Identity, ProcessKey, SystemSpec, Time};
use crate::output::{FdClass, FdOutput, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisePolicy {
    /// Stable value from time zero.
    Stable,
    /// Noise that keeps every perpetual property of the class.
    Legal,
    /// Unconstrained values; only allowed for classes without perpetual properties.
    Arbitrary,
}

impl NoisePolicy {
    pub fn name(self) -> &'static str {
        match self {
            NoisePolicy::Stable => "stable",
            NoisePolicy::Legal => "legal",
            NoisePolicy::Arbitrary => "arbitrary",
        }
    }
}

impl fmt::Display for NoisePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoisePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stable" => Ok(NoisePolicy::Stable),
            "legal" => Ok(NoisePolicy::Legal),
            "arbitrary" => Ok(NoisePolicy::Arbitrary),
            _ => Err(format!("unknown noise policy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleConfig {
    pub stabilize_at: Time,
    pub noise: NoisePolicy,
    /// Noise is redrawn every `epoch` ticks.
    pub epoch: Time,
    /// Designated eventual leader for the leader classes.
    pub leader: Option<ProcessKey>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            stabilize_at: 0,
            noise: NoisePolicy::Legal,
            epoch: 5,
            leader: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{class} has perpetual properties; noise policy `arbitrary` would break them")]
    UnsafeNoise { class: FdClass },
    #[error("designated leader {0} is not a correct process")]
    LeaderNotCorrect(ProcessKey),
    #[error("{class} is only defined for systems with unique identifiers")]
    RequiresUniqueIds { class: FdClass },
    #[error("epoch must be positive")]
    ZeroEpoch,
}

const X0: Label = Label::Tag(0);
const XSTAR: Label = Label::Tag(1);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Oracle {
    class: FdClass,
    cfg: OracleConfig,
    spec: SystemSpec,
    pattern: FailurePattern,
    seed: u64,
    correct: BTreeSet<ProcessKey>,
    correct_ids: IdMultiset,
    designated: ProcessKey,
}

pub fn build_oracle(
    class: FdClass,
    pattern: &FailurePattern,
    spec: &SystemSpec,
    cfg: OracleConfig,
    seed: u64,
) -> Result<Oracle, OracleError> {
    if cfg.epoch == 0 {
        return Err(OracleError::ZeroEpoch);
    }
    let perpetual = matches!(
        class,
        FdClass::Sigma | FdClass::ApBar | FdClass::ASigma | FdClass::HSigma
    );
    if perpetual && cfg.noise == NoisePolicy::Arbitrary {
        return Err(OracleError::UnsafeNoise { class });
    }
    if matches!(class, FdClass::Sigma | FdClass::Omega | FdClass::Xi) && !spec.has_unique_ids() {
        return Err(OracleError::RequiresUniqueIds { class });
    }
    let correct = pattern.correct(spec);
    let designated = match cfg.leader {
        Some(k) if !pattern.is_correct(k) || k.0 >= spec.n() => {
            return Err(OracleError::LeaderNotCorrect(k))
        }
        Some(k) => k,
        None => *correct.iter().next().expect("at least one correct process"),
    };
    Ok(Oracle {
        class,
        correct_ids: pattern.correct_ids(spec),
        correct,
        cfg,
        spec: spec.clone(),
        pattern: pattern.clone(),
        seed,
        designated,
    })
}

impl Oracle {
    pub fn class(&self) -> FdClass {
        self.class
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn stabilize_at(&self) -> Time {
        self.cfg.stabilize_at
    }

    fn rng(&self, key: ProcessKey, salt: u64) -> ChaCha8Rng {
        let mut h = splitmix(self.seed);
        h = splitmix(h ^ self.class as u64);
        h = splitmix(h ^ key.0 as u64);
        h = splitmix(h ^ salt);
        ChaCha8Rng::seed_from_u64(h)
    }

    fn noise_rng(&self, key: ProcessKey, t: Time) -> ChaCha8Rng {
        self.rng(key, t / self.cfg.epoch)
    }

    fn noisy(&self, t: Time) -> bool {
        self.cfg.noise != NoisePolicy::Stable && t < self.cfg.stabilize_at
    }

    /// Time from which a correct process holds the eventual quorum label.
    fn join_time(&self, key: ProcessKey) -> Time {
        if self.cfg.noise == NoisePolicy::Stable {
            return 0;
        }
        self.rng(key, u64::MAX).gen_range(0..=self.cfg.stabilize_at)
    }

    /// Surplus carried by the eventual quorum before stabilization; shrinks to zero.
    fn surplus(&self, t: Time, max: usize) -> usize {
        let ts = self.cfg.stabilize_at;
        if !self.noisy(t) || ts == 0 {
            return 0;
        }
        (max as u64 * (ts - t)).div_ceil(ts) as usize
    }

    fn alive_keys(&self, t: Time) -> Vec<ProcessKey> {
        self.spec
            .keys()
            .filter(|k| self.pattern.alive_at(*k, t))
            .collect()
    }

    fn faulty_ids(&self) -> Vec<Identity> {
        self.pattern
            .faulty()
            .into_iter()
            .map(|k| self.spec.id(k).clone())
            .collect()
    }

    pub fn query(&self, key: ProcessKey, t: Time) -> FdOutput {
        let noisy = self.noisy(t);
        let arbitrary = self.cfg.noise == NoisePolicy::Arbitrary;
        let n = self.spec.n();
        match self.class {
            FdClass::Sigma => {
                let mut trusted = self.correct_ids.to_set();
                if noisy {
                    let ts = self.cfg.stabilize_at as f64;
                    let p = (ts - t as f64) / ts;
                    let mut rng = self.noise_rng(key, t);
                    for id in self.faulty_ids() {
                        if rng.gen_bool(p.clamp(0.0, 1.0)) {
                            trusted.insert(id);
                        }
                    }
                }
                FdOutput::Sigma { trusted }
            }
            FdClass::Omega => {
                let leader = if noisy {
                    let mut rng = self.noise_rng(key, t);
                    let pool = if arbitrary {
                        self.spec.keys().collect()
                    } else {
                        self.alive_keys(t)
                    };
                    self.spec
                        .id(*pool.choose(&mut rng).expect("someone alive"))
                        .clone()
                } else {
                    self.spec.id(self.designated).clone()
                };
                FdOutput::Omega { leader }
            }
            FdClass::AOmega => {
                let a_leader = if noisy {
                    self.noise_rng(key, t).gen_bool(0.5)
                } else {
                    key == self.designated
                };
                FdOutput::AOmega { a_leader }
            }
            FdClass::ApBar => {
                let alive = self.pattern.alive_count(&self.spec, t);
                let anap = if noisy {
                    alive + self.noise_rng(key, t).gen_range(0..=n - alive)
                } else {
                    alive
                };
                FdOutput::ApBar { anap }
            }
            FdClass::ASigma => {
                let mut a_sigma = BTreeSet::new();
                let stable = self.cfg.noise == NoisePolicy::Stable;
                if !stable {
                    a_sigma.insert((X0, n));
                }
                if self.correct.contains(&key) && t >= self.join_time(key) {
                    let c = self.correct.len();
                    a_sigma.insert((XSTAR, c + self.surplus(t, n - c)));
                }
                FdOutput::ASigma { a_sigma }
            }
            FdClass::HSigma => {
                let mut quora = BTreeSet::new();
                let mut labels = BTreeSet::new();
                if self.cfg.noise != NoisePolicy::Stable {
                    quora.insert((X0, self.spec.membership()));
                    labels.insert(X0);
                }
                if self.correct.contains(&key) && t >= self.join_time(key) {
                    let faulty = self.faulty_ids();
                    let extra = self.surplus(t, faulty.len());
                    let mut m = self.correct_ids.clone();
                    for id in faulty.into_iter().take(extra) {
                        m.insert(id);
                    }
                    quora.insert((XSTAR, m));
                    labels.insert(XSTAR);
                }
                FdOutput::HSigma { quora, labels }
            }
            FdClass::HOmega => {
                if noisy {
                    let mut rng = self.noise_rng(key, t);
                    if arbitrary {
                        let k = rng.gen_range(0..n);
                        FdOutput::HOmega {
                            leader: self.spec.id(ProcessKey(k)).clone(),
                            multiplicity: rng.gen_range(1..=n),
                        }
                    } else {
                        let alive = self.alive_keys(t);
                        let k = *alive.choose(&mut rng).expect("someone alive");
                        let leader = self.spec.id(k).clone();
                        let multiplicity = alive
                            .iter()
                            .filter(|a| *self.spec.id(**a) == leader)
                            .count();
                        FdOutput::HOmega {
                            leader,
                            multiplicity,
                        }
                    }
                } else {
                    let leader = self.correct_ids.smallest().expect("nonempty").clone();
                    FdOutput::HOmega {
                        multiplicity: self.correct_ids.multiplicity(&leader),
                        leader,
                    }
                }
            }
            FdClass::Dhp => {
                let trusted = if noisy {
                    let mut rng = self.noise_rng(key, t);
                    self.spec
                        .keys()
                        .filter(|_| rng.gen_bool(0.5))
                        .map(|k| self.spec.id(k).clone())
                        .collect()
                } else {
                    self.correct_ids.clone()
                };
                FdOutput::Dhp { trusted }
            }
            FdClass::Xi => {
                let alive = if noisy {
                    let mut ids: Vec<Identity> = self.spec.ids().to_vec();
                    ids.shuffle(&mut self.noise_rng(key, t));
                    ids
                } else {
                    let mut ids: Vec<Identity> = self.correct_ids.distinct().cloned().collect();
                    ids.extend(self.faulty_ids());
                    ids
                };
                FdOutput::Xi { alive }
            }
        }
    }

    /// Times in `1..horizon` at which the output at `key` differs from the previous tick.
    pub fn change_points(&self, key: ProcessKey, horizon: Time) -> Vec<Time> {
        let mut out = Vec::new();
        let mut prev = self.query(key, 0);
        for t in 1..horizon {
            let cur = self.query(key, t);
            if cur != prev {
                out.push(t);
                prev = cur;
            }
        }
        out
    }
}
