//! Timing models: message delays, loss before stabilization, step cadence.

use rand::Rng;

use crate::model::Time;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimingModel {
    /// Lockstep rounds: round k runs at time k, its messages arrive at k+1.
    Sync,
    /// Eventually timely links and eventually bounded steps.
    PartialSync {
        gst: Time,
        delta: Time,
        step_gap: Time,
        p_lose: f64,
    },
    /// Reliable links with bounded-but-unknown delays.
    Async { max_delay: Time, step_gap: Time },
}

impl TimingModel {
    pub fn name(&self) -> &'static str {
        match self {
            TimingModel::Sync => "sync",
            TimingModel::PartialSync { .. } => "partial_sync",
            TimingModel::Async { .. } => "async",
        }
    }

    /// Largest delay a message can take once the system is stable.
    pub fn delay_bound(&self) -> Time {
        match *self {
            TimingModel::Sync => 1,
            TimingModel::PartialSync { delta, .. } => delta,
            TimingModel::Async { max_delay, .. } => max_delay,
        }
    }

    pub fn step_gap(&self) -> Time {
        match *self {
            TimingModel::Sync => 1,
            TimingModel::PartialSync { step_gap, .. } | TimingModel::Async { step_gap, .. } => {
                step_gap
            }
        }
    }

    pub fn gst(&self) -> Time {
        match *self {
            TimingModel::PartialSync { gst, .. } => gst,
            _ => 0,
        }
    }

    /// Delivery time for one copy sent at `send`, or `None` if the link drops it.
    pub fn assign_delay<R: Rng>(&self, send: Time, horizon: Time, rng: &mut R) -> Option<Time> {
        let at = match *self {
            TimingModel::Sync => return Some(send + 1),
            TimingModel::PartialSync {
                gst, delta, p_lose, ..
            } => {
                if send >= gst {
                    send + rng.gen_range(1..=delta.max(1))
                } else {
                    if rng.gen_bool(p_lose.clamp(0.0, 1.0)) {
                        return None;
                    }
                    let latest = (send + 1).max(gst + delta);
                    rng.gen_range(send + 1..=latest)
                }
            }
            TimingModel::Async { max_delay, .. } => send + rng.gen_range(1..=max_delay.max(1)),
        };
        // Keep every message sent early enough deliverable inside the run.
        if send + 2 <= horizon {
            Some(at.min(horizon - 1))
        } else {
            Some(at)
        }
    }

    /// Interval until the next scheduler step of a process.
    pub fn next_step<R: Rng>(&self, now: Time, rng: &mut R) -> Time {
        match *self {
            TimingModel::Sync => 1,
            TimingModel::PartialSync { gst, step_gap, .. } => {
                let gap = if now >= gst { step_gap } else { 2 * step_gap };
                rng.gen_range(1..=gap.max(1))
            }
            TimingModel::Async { step_gap, .. } => rng.gen_range(1..=step_gap.max(1)),
        }
    }

    /// Actual firing delay of a timer armed for `delay` ticks.
    pub fn timer_delay<R: Rng>(&self, now: Time, delay: Time, rng: &mut R) -> Time {
        let jitter = match *self {
            TimingModel::Sync => 0,
            TimingModel::PartialSync { gst, step_gap, .. } => {
                if now >= gst {
                    rng.gen_range(0..step_gap.max(1))
                } else {
                    rng.gen_range(0..=2 * step_gap)
                }
            }
            TimingModel::Async { step_gap, .. } => rng.gen_range(0..step_gap.max(1)),
        };
        delay.max(1) + jitter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn post_gst_delay_is_bounded() {
        let m = TimingModel::PartialSync {
            gst: 0,
            delta: 3,
            step_gap: 2,
            p_lose: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let at = m.assign_delay(10, 1000, &mut rng).unwrap();
            assert!((11..=13).contains(&at));
        }
    }

    #[test]
    fn pre_gst_can_lose() {
        let m = TimingModel::PartialSync {
            gst: 20,
            delta: 3,
            step_gap: 2,
            p_lose: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(m.assign_delay(5, 1000, &mut rng), None);
    }

    #[test]
    fn sync_delivers_next_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(TimingModel::Sync.assign_delay(7, 100, &mut rng), Some(8));
    }

    #[test]
    fn late_sends_are_pulled_inside_horizon() {
        let m = TimingModel::Async {
            max_delay: 50,
            step_gap: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert!(m.assign_delay(95, 100, &mut rng).unwrap() <= 99);
        }
    }
}
