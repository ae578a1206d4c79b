use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{MONTH, WEEK, YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Train months 1-7, validate month 8, test months 9-12.
    Standard,
    /// Train the first three months minus their last three weeks, validate
    /// on those weeks, test months 4-12.
    Limited,
    /// Train months 1-8 of realizations 1-5, validate months 9-12 of the
    /// same, test the full year of realization 6.
    DriftGen,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Standard, Experiment::Limited, Experiment::DriftGen];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Standard => "standard",
            Experiment::Limited => "limited",
            Experiment::DriftGen => "drift-gen",
        }
    }

    pub fn required_realizations(self) -> usize {
        match self {
            Experiment::Standard | Experiment::Limited => 1,
            Experiment::DriftGen => 6,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment {s:?} (standard|limited|drift-gen)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

/// A contiguous block of timestamps of one realization (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub realization: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    fn new(realization: usize, range: Range<usize>) -> Self {
        Self {
            realization,
            start: range.start,
            end: range.end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, realization: usize, t: usize) -> bool {
        self.realization == realization && (self.start..self.end).contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSplit {
    pub experiment: Experiment,
    pub train: Vec<Segment>,
    pub validation: Vec<Segment>,
    pub test: Vec<Segment>,
}

impl ExperimentSplit {
    pub fn partition_of(&self, realization: usize, t: usize) -> Option<Partition> {
        let hit = |segs: &[Segment]| segs.iter().any(|s| s.contains(realization, t));
        if hit(&self.train) {
            Some(Partition::Train)
        } else if hit(&self.validation) {
            Some(Partition::Validation)
        } else if hit(&self.test) {
            Some(Partition::Test)
        } else {
            None
        }
    }

    pub fn segments(&self, partition: Partition) -> &[Segment] {
        match partition {
            Partition::Train => &self.train,
            Partition::Validation => &self.validation,
            Partition::Test => &self.test,
        }
    }

    /// Realizations touched by any partition, ascending.
    pub fn realizations(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .map(|s| s.realization)
            .collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    pub fn timesteps(&self, partition: Partition) -> usize {
        self.segments(partition).iter().map(Segment::len).sum()
    }
}

/// Builds the train/validation/test layout of an experiment over a dataset
/// of `timesteps` exported steps and `n_realizations` drift realizations.
pub fn make_split(timesteps: usize, n_realizations: usize, experiment: Experiment) -> Result<ExperimentSplit> {
    if timesteps < YEAR {
        return Err(Error::DatasetTooShort {
            experiment: experiment.name().into(),
            available: timesteps,
            required: YEAR,
        });
    }
    let needed = experiment.required_realizations();
    if n_realizations < needed {
        return Err(Error::NotEnoughRealizations {
            experiment: experiment.name().into(),
            available: n_realizations,
            required: needed,
        });
    }
    let month = |m: usize| m * MONTH;
    let one = |r: Range<usize>| vec![Segment::new(1, r)];
    let split = match experiment {
        Experiment::Standard => ExperimentSplit {
            experiment,
            train: one(0..month(7)),
            validation: one(month(7)..month(8)),
            test: one(month(8)..month(12)),
        },
        Experiment::Limited => {
            let val_start = month(3) - 3 * WEEK;
            ExperimentSplit {
                experiment,
                train: one(0..val_start),
                validation: one(val_start..month(3)),
                test: one(month(3)..month(12)),
            }
        }
        Experiment::DriftGen => ExperimentSplit {
            experiment,
            train: (1..=5).map(|r| Segment::new(r, 0..month(8))).collect(),
            validation: (1..=5).map(|r| Segment::new(r, month(8)..month(12))).collect(),
            test: vec![Segment::new(6, 0..month(12))],
        },
    };
    Ok(split)
}
