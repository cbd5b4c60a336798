use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The nine implicit sense classes, in descending training frequency.
/// The discriminant is the class id used by the output layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SenseLabel {
    Conjunction = 0,
    Expansion = 1,
    EntRel = 2,
    Causation = 3,
    Contrast = 4,
    Purpose = 5,
    Conditional = 6,
    Temporal = 7,
    Progression = 8,
}

pub const NUM_CLASSES: usize = 9;

impl SenseLabel {
    pub const ALL: [SenseLabel; NUM_CLASSES] = [
        SenseLabel::Conjunction,
        SenseLabel::Expansion,
        SenseLabel::EntRel,
        SenseLabel::Causation,
        SenseLabel::Contrast,
        SenseLabel::Purpose,
        SenseLabel::Conditional,
        SenseLabel::Temporal,
        SenseLabel::Progression,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SenseLabel::Conjunction => "Conjunction",
            SenseLabel::Expansion => "Expansion",
            SenseLabel::EntRel => "EntRel",
            SenseLabel::Causation => "Causation",
            SenseLabel::Contrast => "Contrast",
            SenseLabel::Purpose => "Purpose",
            SenseLabel::Conditional => "Conditional",
            SenseLabel::Temporal => "Temporal",
            SenseLabel::Progression => "Progression",
        }
    }
}

impl fmt::Display for SenseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SenseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::UnknownSense(s.to_string()))
    }
}
