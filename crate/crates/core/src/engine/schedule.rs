//! Scripted toppling orders and their legality-checked replay.

use std::collections::{BTreeMap, VecDeque};

use crate::config::{square, SandpileConfig};
use crate::error::{Result, SandpileError};
use crate::lattice::LatticePoint;
use crate::odometer::Odometer;

/// One round: every listed cell must topple exactly its multiplicity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Round {
    topplings: BTreeMap<LatticePoint, u64>,
}

impl Round {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `k >= 1` topplings of `p`; repeated cells accumulate.
    pub fn add(&mut self, p: LatticePoint, k: u64) {
        assert!(k >= 1, "multiplicities are positive");
        *self.topplings.entry(p).or_insert(0) += k;
    }

    pub fn topplings(&self) -> impl Iterator<Item = (&LatticePoint, u64)> {
        self.topplings.iter().map(|(p, k)| (p, *k))
    }

    pub fn len(&self) -> usize {
        self.topplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topplings.is_empty()
    }
}

impl FromIterator<(LatticePoint, u64)> for Round {
    fn from_iter<I: IntoIterator<Item = (LatticePoint, u64)>>(iter: I) -> Self {
        let mut round = Round::new();
        for (p, k) in iter {
            round.add(p, k);
        }
        round
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    rounds: Vec<Round>,
}

impl Schedule {
    pub fn new(rounds: Vec<Round>) -> Self {
        Schedule { rounds }
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn push(&mut self, round: Round) {
        self.rounds.push(round);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StuckCell {
    pub round: usize,
    pub point: LatticePoint,
    pub height: u64,
    pub remaining: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub legal: bool,
    pub rounds_completed: usize,
    pub stuck: Option<StuckCell>,
}

#[derive(Clone, Debug)]
pub struct Replay {
    pub config: SandpileConfig,
    pub odometer: Odometer,
    pub report: ReplayReport,
}

/// Executes the rounds in order. Within a round, any listed cell that is
/// currently active and still owes topplings fires; the round fails when
/// nothing listed can fire but some multiplicity is left.
///
/// Greedy is complete here: other topplings only ever add particles, so a
/// cell that can fire stays able to fire.
pub fn replay_schedule(c: &SandpileConfig, sched: &Schedule) -> Replay {
    let threshold = c.threshold();
    let mut config = c.clone();
    let mut odometer = Odometer::zero(c.bbox().clone());

    for (r, round) in sched.rounds().iter().enumerate() {
        let mut owed: BTreeMap<LatticePoint, u64> =
            round.topplings().map(|(p, k)| (p.clone(), k)).collect();
        let mut ready: VecDeque<LatticePoint> = owed
            .keys()
            .filter(|p| config.height(p) >= threshold)
            .cloned()
            .collect();

        while let Some(p) = ready.pop_front() {
            let left = owed[&p];
            let h = config.height(&p);
            if left == 0 || h < threshold {
                continue;
            }
            let k = left.min(h / threshold);
            config.set_height(&p, h - k * threshold);
            odometer.add(&p, k);
            owed.insert(p.clone(), left - k);
            for q in p.neighbors() {
                config.add_at(&q, k);
                if owed.get(&q).is_some_and(|&left| left > 0) && config.height(&q) >= threshold {
                    ready.push_back(q);
                }
            }
            if left > k && config.height(&p) >= threshold {
                ready.push_back(p);
            }
        }

        if let Some((p, &left)) = owed.iter().find(|(_, &left)| left > 0) {
            let stuck = StuckCell {
                round: r,
                point: p.clone(),
                height: config.height(p),
                remaining: left,
            };
            return Replay {
                config,
                odometer,
                report: ReplayReport {
                    legal: false,
                    rounds_completed: r,
                    stuck: Some(stuck),
                },
            };
        }
    }

    Replay {
        config,
        odometer,
        report: ReplayReport {
            legal: true,
            rounds_completed: sched.rounds().len(),
            stuck: None,
        },
    }
}

/// One round per square `S_r2, S_r2-1, ..., S_r1`, each cell toppled once.
pub fn staged_square_schedule(r1: u64, r2: u64, dim: usize) -> Result<Schedule> {
    if r1 > r2 {
        return Err(SandpileError::InvalidRadii { r1, r2 });
    }
    if r1 == 0 {
        return Err(SandpileError::InvalidInput(
            "staged schedule needs r1 >= 1".into(),
        ));
    }
    let rounds = (r1..=r2)
        .rev()
        .map(|r| {
            square(dim, r)
                .expect("r >= 1")
                .points()
                .map(|p| (p, 1))
                .collect()
        })
        .collect();
    Ok(Schedule::new(rounds))
}
