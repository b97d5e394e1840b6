//! Fixed-cycle, two-phase signal plans.
//!
//! The cycle is split between the two phases according to one of seven
//! predefined plans. Each phase's allocation ends with a yellow interval,
//! so a 60 s cycle with 6 s of yellow in total runs
//! `[green1, yellow 3, green2, yellow 3]` with
//! `green1 = round(split1 * 60) - 3` and `green2 = 60 - green1 - 6`.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Phase-1 share of the cycle for each plan of the action space.
pub const PLAN_SPLITS: [f64; 7] = [0.30, 0.37, 0.43, 0.50, 0.57, 0.63, 0.70];

pub const NUM_PLANS: usize = PLAN_SPLITS.len();
pub const NUM_PHASES: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("plan index {0} out of range 0..{NUM_PLANS}")]
    PlanIndex(usize),
    #[error("split {0} outside [{min}, {max}]", min = PLAN_SPLITS[0], max = PLAN_SPLITS[NUM_PLANS - 1])]
    Split(f64),
    #[error("a plan can only be committed at the start of a cycle (tick {0})")]
    MidCycleCommit(u32),
    #[error("invalid timing: {0}")]
    Timing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseColor {
    Green,
    Yellow,
    Red,
}

impl PhaseColor {
    pub fn is_green(self) -> bool {
        self == Self::Green
    }

    pub fn symbol(self) -> char {
        match self {
            Self::Green => 'G',
            Self::Yellow => 'y',
            Self::Red => 'r',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalTiming {
    pub cycle_s: u32,
    pub yellow_total_s: u32,
}

impl Default for SignalTiming {
    fn default() -> Self {
        Self { cycle_s: 60, yellow_total_s: 6 }
    }
}

impl SignalTiming {
    pub fn new(cycle_s: u32, yellow_total_s: u32) -> Result<Self, SignalError> {
        if yellow_total_s % NUM_PHASES as u32 != 0 {
            return Err(SignalError::Timing(format!(
                "yellow total {yellow_total_s} s does not divide evenly over {NUM_PHASES} transitions"
            )));
        }
        let timing = Self { cycle_s, yellow_total_s };
        let min_green = (0..NUM_PLANS)
            .map(|i| {
                let split = PLAN_SPLITS[i];
                let g1 = timing.green1(split) as i64;
                g1.min(cycle_s as i64 - g1 - yellow_total_s as i64)
            })
            .min()
            .unwrap();
        if min_green < 1 {
            return Err(SignalError::Timing(format!(
                "cycle {cycle_s} s with {yellow_total_s} s yellow leaves a plan without green time"
            )));
        }
        Ok(timing)
    }

    pub fn yellow_per_transition(&self) -> u32 {
        self.yellow_total_s / NUM_PHASES as u32
    }

    fn green1(&self, split1: f64) -> u32 {
        let alloc = (split1 * self.cycle_s as f64 + 0.5).floor() as i64;
        (alloc - self.yellow_per_transition() as i64).max(0) as u32
    }

    /// Green durations `(green1, green2)` for a given phase-1 split.
    pub fn greens(&self, split1: f64) -> (u32, u32) {
        let g1 = self.green1(split1);
        (g1, self.cycle_s - g1 - self.yellow_total_s)
    }
}

/// A two-phase split of the cycle. Plans from the action space carry their
/// index; controllers that compute splits directly (Webster) do not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub index: Option<usize>,
    pub split1: f64,
}

impl SignalPlan {
    pub fn from_index(index: usize) -> Result<Self, SignalError> {
        PLAN_SPLITS
            .get(index)
            .map(|&split1| Self { index: Some(index), split1 })
            .ok_or(SignalError::PlanIndex(index))
    }

    /// A plan with an arbitrary phase-1 split inside the action-space range.
    pub fn custom(split1: f64) -> Result<Self, SignalError> {
        let (lo, hi) = (PLAN_SPLITS[0], PLAN_SPLITS[NUM_PLANS - 1]);
        if !(split1 >= lo - 1e-12 && split1 <= hi + 1e-12) {
            return Err(SignalError::Split(split1));
        }
        Ok(Self { index: None, split1 })
    }

    pub fn splits(&self) -> (f64, f64) {
        (self.split1, 1.0 - self.split1)
    }

    /// Colors of both phases at `tick` within the cycle.
    pub fn phase_at(&self, timing: &SignalTiming, tick: u32) -> [PhaseColor; NUM_PHASES] {
        use PhaseColor::*;
        let (g1, g2) = timing.greens(self.split1);
        let y = timing.yellow_per_transition();
        let t = tick % timing.cycle_s;
        if t < g1 {
            [Green, Red]
        } else if t < g1 + y {
            [Yellow, Red]
        } else if t < g1 + y + g2 {
            [Red, Green]
        } else {
            [Red, Yellow]
        }
    }
}

impl fmt::Display for SignalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.splits();
        match self.index {
            Some(i) => write!(f, "plan {i} ({:.0}%, {:.0}%)", a * 100.0, b * 100.0),
            None => write!(f, "custom ({:.1}%, {:.1}%)", a * 100.0, b * 100.0),
        }
    }
}

/// The seven plans, in index order.
pub fn action_space() -> Vec<SignalPlan> {
    (0..NUM_PLANS).map(|i| SignalPlan::from_index(i).unwrap()).collect()
}

/// Shared cycle clock. Plans can only change at tick 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleClock {
    pub timing: SignalTiming,
    pub cycle: u64,
    pub tick: u32,
    pub plan: SignalPlan,
}

impl CycleClock {
    pub fn new(timing: SignalTiming, plan: SignalPlan) -> Self {
        Self { timing, cycle: 0, tick: 0, plan }
    }

    pub fn commit_plan(&mut self, plan: SignalPlan) -> Result<(), SignalError> {
        if self.tick != 0 {
            return Err(SignalError::MidCycleCommit(self.tick));
        }
        self.plan = plan;
        Ok(())
    }

    pub fn colors(&self) -> [PhaseColor; NUM_PHASES] {
        self.plan.phase_at(&self.timing, self.tick)
    }

    pub fn at_cycle_start(&self) -> bool {
        self.tick == 0
    }

    pub fn advance(&mut self) {
        self.tick += 1;
        if self.tick == self.timing.cycle_s {
            self.tick = 0;
            self.cycle += 1;
        }
    }
}

/// One row of a plan trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanRecord {
    pub cycle: u64,
    pub plan: SignalPlan,
}

/// Writes `cycle,plan_index,split1,split2`; custom plans get index -1.
pub fn write_plan_trace<W: Write>(out: W, records: &[PlanRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cycle", "plan_index", "split1", "split2"])?;
    for r in records {
        let (a, b) = r.plan.splits();
        let index = r.plan.index.map_or(-1, |i| i as i64);
        w.write_record([r.cycle.to_string(), index.to_string(), format!("{a:.4}"), format!("{b:.4}")])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use PhaseColor::*;

    fn timing() -> SignalTiming {
        SignalTiming::default()
    }

    #[test]
    fn plan_table() {
        let plans = action_space();
        assert_eq!(plans.len(), 7);
        assert_eq!(plans[0].splits().0, 0.30);
        assert!((plans[0].splits().1 - 0.70).abs() < 1e-12);
        assert_eq!(plans[3].splits(), (0.5, 0.5));
        assert_eq!(plans[6].splits().0, 0.70);
        assert!(SignalPlan::from_index(7).is_err());
    }

    #[test]
    fn schedule_examples() {
        let p3 = SignalPlan::from_index(3).unwrap();
        assert_eq!(timing().greens(p3.split1), (27, 27));
        assert_eq!(p3.phase_at(&timing(), 0), [Green, Red]);
        assert_eq!(p3.phase_at(&timing(), 28), [Yellow, Red]);
        let p0 = SignalPlan::from_index(0).unwrap();
        assert_eq!(timing().greens(p0.split1), (15, 39));
        assert_eq!(p0.phase_at(&timing(), 56), [Red, Green]);
        assert_eq!(p0.phase_at(&timing(), 57), [Red, Yellow]);
        assert_eq!(p0.phase_at(&timing(), 59), [Red, Yellow]);
    }

    #[test]
    fn every_plan_fills_the_cycle_with_min_green() {
        for p in action_space() {
            let (g1, g2) = timing().greens(p.split1);
            assert_eq!(g1 + g2 + 6, 60);
            assert!(g1.min(g2) >= 15, "{p}");
        }
    }

    #[test]
    fn colors_are_conflict_free() {
        for p in action_space() {
            for t in 0..60 {
                let c = p.phase_at(&timing(), t);
                assert_eq!(c.iter().filter(|&&c| c != Red).count(), 1);
            }
        }
    }

    #[test]
    fn color_table_snapshot() {
        let table: Vec<String> = action_space()
            .iter()
            .map(|p| {
                (0..60)
                    .map(|t| match p.phase_at(&timing(), t) {
                        [Green, Red] => '1',
                        [Yellow, Red] => 'y',
                        [Red, Green] => '2',
                        [Red, Yellow] => 'b',
                        _ => '?',
                    })
                    .collect()
            })
            .collect();
        let expected = [
            "111111111111111yyy222222222222222222222222222222222222222bbb",
            "1111111111111111111yyy22222222222222222222222222222222222bbb",
            "11111111111111111111111yyy2222222222222222222222222222222bbb",
            "111111111111111111111111111yyy222222222222222222222222222bbb",
            "1111111111111111111111111111111yyy22222222222222222222222bbb",
            "11111111111111111111111111111111111yyy2222222222222222222bbb",
            "111111111111111111111111111111111111111yyy222222222222222bbb",
        ];
        assert_eq!(table, expected);
    }

    #[test]
    fn commit_only_at_cycle_start() {
        let mut clock = CycleClock::new(timing(), SignalPlan::from_index(3).unwrap());
        clock.commit_plan(SignalPlan::from_index(5).unwrap()).unwrap();
        let mut seen = Vec::new();
        for _ in 0..60 {
            assert_eq!(clock.plan.index, Some(5));
            seen.push(clock.colors());
            clock.advance();
        }
        assert_eq!(clock.cycle, 1);
        assert!(clock.at_cycle_start());
        for _ in 0..30 {
            clock.advance();
        }
        assert_eq!(clock.commit_plan(SignalPlan::from_index(0).unwrap()), Err(SignalError::MidCycleCommit(30)));
    }

    #[test]
    fn consecutive_cycles_follow_their_schedules() {
        let mut clock = CycleClock::new(timing(), SignalPlan::from_index(0).unwrap());
        let mut trace = Vec::new();
        for plan in [0, 6] {
            clock.commit_plan(SignalPlan::from_index(plan).unwrap()).unwrap();
            for _ in 0..60 {
                trace.push(clock.colors());
                clock.advance();
            }
        }
        let (p0, p6) = (SignalPlan::from_index(0).unwrap(), SignalPlan::from_index(6).unwrap());
        for t in 0..60u32 {
            assert_eq!(trace[t as usize], p0.phase_at(&timing(), t));
            assert_eq!(trace[60 + t as usize], p6.phase_at(&timing(), t));
        }
        let differing = (0..60).filter(|&t| trace[t] != trace[60 + t]).count();
        // Ticks 15..=41 differ: plan 6 keeps phase 1 green while plan 0 has moved on.
        assert_eq!(differing, 27);
    }

    #[test]
    fn custom_splits_are_range_checked() {
        assert!(SignalPlan::custom(0.55).is_ok());
        assert!(SignalPlan::custom(0.25).is_err());
    }

    #[test]
    fn plan_trace_csv() {
        let mut buf = Vec::new();
        let recs = [
            PlanRecord { cycle: 0, plan: SignalPlan::from_index(2).unwrap() },
            PlanRecord { cycle: 1, plan: SignalPlan::custom(0.6).unwrap() },
        ];
        write_plan_trace(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "cycle,plan_index,split1,split2\n0,2,0.4300,0.5700\n1,-1,0.6000,0.4000\n");
    }
}
