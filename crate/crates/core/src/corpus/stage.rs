use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Legislative progression stage of a policy.
///
/// Variants are declared in legislative order; `Withdrawn` and `Blocked` share
/// the bottom of the ordinal scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageLabel {
    Withdrawn,
    Blocked,
    Announced,
    Tabled,
    CloseToAdoption,
    AdoptedCompleted,
}

impl StageLabel {
    pub const ALL: [StageLabel; 6] = [
        StageLabel::Withdrawn,
        StageLabel::Blocked,
        StageLabel::Announced,
        StageLabel::Tabled,
        StageLabel::CloseToAdoption,
        StageLabel::AdoptedCompleted,
    ];

    /// Fixed position on the 0-1 ordinal target scale.
    pub fn value(self) -> f64 {
        match self {
            StageLabel::Withdrawn | StageLabel::Blocked => 0.0,
            StageLabel::Announced => 0.25,
            StageLabel::Tabled => 0.5,
            StageLabel::CloseToAdoption => 0.75,
            StageLabel::AdoptedCompleted => 1.0,
        }
    }

    /// Canonical display spelling, as used by the legislative tracker.
    pub fn canonical(self) -> &'static str {
        match self {
            StageLabel::Withdrawn => "Withdrawn",
            StageLabel::Blocked => "Blocked",
            StageLabel::Announced => "Announced",
            StageLabel::Tabled => "Tabled",
            StageLabel::CloseToAdoption => "Close to Adoption",
            StageLabel::AdoptedCompleted => "Adopted/Completed",
        }
    }

    pub fn snake_case(self) -> &'static str {
        match self {
            StageLabel::Withdrawn => "withdrawn",
            StageLabel::Blocked => "blocked",
            StageLabel::Announced => "announced",
            StageLabel::Tabled => "tabled",
            StageLabel::CloseToAdoption => "close_to_adoption",
            StageLabel::AdoptedCompleted => "adopted_completed",
        }
    }
}

/// Map a stage label onto the ordinal regression target.
pub fn map_stage(label: StageLabel) -> f64 {
    label.value()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stage label {0:?}")]
pub struct UnknownStage(pub String);

impl FromStr for StageLabel {
    type Err = UnknownStage;

    /// Accepts, case-insensitively, the canonical spelling, the snake_case
    /// alias and the CamelCase variant name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.trim().to_ascii_lowercase();
        StageLabel::ALL
            .into_iter()
            .find(|label| {
                folded == label.canonical().to_ascii_lowercase()
                    || folded == label.snake_case()
                    || folded == label.snake_case().replace('_', "")
            })
            .ok_or_else(|| UnknownStage(s.to_string()))
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical())
    }
}

impl Serialize for StageLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.canonical())
    }
}

impl<'de> Deserialize<'de> for StageLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
