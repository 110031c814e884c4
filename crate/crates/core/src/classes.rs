//! Drum class vocabulary and the 5-group evaluation mapping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of canonical drum classes.
pub const NUM_CLASSES: usize = 9;

/// The nine canonical drum classes, in model order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrumClass {
    Kick,
    Snare,
    HihatClosed,
    HihatOpen,
    HiTom,
    MidTom,
    LowTom,
    CrashLeft,
    Ride,
}

impl DrumClass {
    pub const ALL: [DrumClass; NUM_CLASSES] = [
        DrumClass::Kick,
        DrumClass::Snare,
        DrumClass::HihatClosed,
        DrumClass::HihatOpen,
        DrumClass::HiTom,
        DrumClass::MidTom,
        DrumClass::LowTom,
        DrumClass::CrashLeft,
        DrumClass::Ride,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// File and CSV token.
    pub fn token(self) -> &'static str {
        match self {
            DrumClass::Kick => "kick",
            DrumClass::Snare => "snare",
            DrumClass::HihatClosed => "hihat_closed",
            DrumClass::HihatOpen => "hihat_open",
            DrumClass::HiTom => "hi_tom",
            DrumClass::MidTom => "mid_tom",
            DrumClass::LowTom => "low_tom",
            DrumClass::CrashLeft => "crash_left",
            DrumClass::Ride => "ride",
        }
    }

    pub fn group(self) -> DrumGroup {
        match self {
            DrumClass::Kick => DrumGroup::Kd,
            DrumClass::Snare => DrumGroup::Sd,
            DrumClass::HihatClosed | DrumClass::HihatOpen => DrumGroup::Hh,
            DrumClass::HiTom | DrumClass::MidTom | DrumClass::LowTom => DrumGroup::Tt,
            DrumClass::CrashLeft | DrumClass::Ride => DrumGroup::Cy,
        }
    }
}

impl fmt::Display for DrumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for DrumClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DrumClass::ALL
            .iter()
            .copied()
            .find(|c| c.token() == s)
            .ok_or_else(|| Error::invalid(format!("unknown drum class `{s}`")))
    }
}

/// Five instrument groups used for the coarser evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DrumGroup {
    #[serde(rename = "KD")]
    Kd,
    #[serde(rename = "SD")]
    Sd,
    #[serde(rename = "HH")]
    Hh,
    #[serde(rename = "TT")]
    Tt,
    #[serde(rename = "CY")]
    Cy,
}

impl DrumGroup {
    pub const ALL: [DrumGroup; 5] = [
        DrumGroup::Kd,
        DrumGroup::Sd,
        DrumGroup::Hh,
        DrumGroup::Tt,
        DrumGroup::Cy,
    ];

    pub fn token(self) -> &'static str {
        match self {
            DrumGroup::Kd => "KD",
            DrumGroup::Sd => "SD",
            DrumGroup::Hh => "HH",
            DrumGroup::Tt => "TT",
            DrumGroup::Cy => "CY",
        }
    }

    pub fn members(self) -> impl Iterator<Item = DrumClass> {
        DrumClass::ALL.into_iter().filter(move |c| c.group() == self)
    }
}

/// Which label set evaluation rows are reported under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassGrouping {
    Nine,
    Five,
}

impl ClassGrouping {
    /// Row labels for this grouping, with the member classes summed into each.
    pub fn labels(self) -> Vec<(String, Vec<DrumClass>)> {
        match self {
            ClassGrouping::Nine => DrumClass::ALL
                .iter()
                .map(|c| (c.token().to_string(), vec![*c]))
                .collect(),
            ClassGrouping::Five => DrumGroup::ALL
                .iter()
                .map(|g| (g.token().to_string(), g.members().collect()))
                .collect(),
        }
    }
}

impl FromStr for ClassGrouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "9" => Ok(ClassGrouping::Nine),
            "5" => Ok(ClassGrouping::Five),
            other => Err(Error::invalid(format!(
                "grouping must be 9 or 5, got `{other}`"
            ))),
        }
    }
}
