//! Shared domain types: calendar months, opaque identifiers, event and
//! outcome enums used across the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Calendar month with no day component. Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u8,
}

/// Valid year range for parsed dates.
pub const YEAR_MIN: i32 = 1980;
pub const YEAR_MAX: i32 = 2030;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DateError {
    #[error("month {0} outside 1..=12")]
    InvalidMonth(u8),
    #[error("year {0} outside {YEAR_MIN}..={YEAR_MAX}")]
    InvalidYear(i32),
    #[error("date must be formatted YYYY-MM, got {0:?}")]
    InvalidFormat(String),
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self, DateError> {
        if !(1..=12).contains(&month) {
            return Err(DateError::InvalidMonth(month));
        }
        if !(YEAR_MIN..=YEAR_MAX).contains(&year) {
            return Err(DateError::InvalidYear(year));
        }
        Ok(Self { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    /// Absolute month index; the basis for ordering and differences.
    pub fn index(&self) -> i32 {
        self.year * 12 + (self.month as i32 - 1)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(&self, other: YearMonth) -> i32 {
        other.index() - self.index()
    }

    /// The month `n` months after `self` (may leave the valid parse range;
    /// callers clamp where it matters).
    pub fn plus_months(&self, n: i32) -> YearMonth {
        let idx = self.index() + n;
        YearMonth {
            year: idx.div_euclid(12),
            month: (idx.rem_euclid(12) + 1) as u8,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = DateError;

    fn from_str(s: &str) -> Result<Self, DateError> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| DateError::InvalidFormat(s.to_string()))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(DateError::InvalidFormat(s.to_string()));
        }
        let year: i32 = y
            .parse()
            .map_err(|_| DateError::InvalidFormat(s.to_string()))?;
        let month: u8 = m
            .parse()
            .map_err(|_| DateError::InvalidFormat(s.to_string()))?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

macro_rules! token_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

token_type!(
    /// Pseudonymous student identifier.
    StudentId
);
token_type!(
    /// Opaque degree-programme identifier.
    MajorId
);
token_type!(
    /// Opaque subject code.
    SubjectCode
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Enrol,
    Exam,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Enrol => "ENROL",
            EventKind::Exam => "EXAM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExamResult {
    Pass,
    Fail,
    None,
}

impl ExamResult {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExamResult::Pass => "PASS",
            ExamResult::Fail => "FAIL",
            ExamResult::None => "NONE",
        }
    }
}

/// Curriculum field group of a subject within one degree programme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FieldGroup {
    Math,
    Physics,
    Chemistry,
    IntroEngineering,
    Computing,
    Language,
    Other,
}

impl FieldGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldGroup::Math => "MATH",
            FieldGroup::Physics => "PHYSICS",
            FieldGroup::Chemistry => "CHEMISTRY",
            FieldGroup::IntroEngineering => "INTRO_ENGINEERING",
            FieldGroup::Computing => "COMPUTING",
            FieldGroup::Language => "LANGUAGE",
            FieldGroup::Other => "OTHER",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "MATH" => Some(FieldGroup::Math),
            "PHYSICS" => Some(FieldGroup::Physics),
            "CHEMISTRY" => Some(FieldGroup::Chemistry),
            "INTRO_ENGINEERING" => Some(FieldGroup::IntroEngineering),
            "COMPUTING" => Some(FieldGroup::Computing),
            "LANGUAGE" => Some(FieldGroup::Language),
            "OTHER" => Some(FieldGroup::Other),
            _ => None,
        }
    }
}

/// Entry-period cohort relative to the 2006 curriculum reform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Cohort {
    Pre2006,
    Post2006,
}

impl Cohort {
    pub fn from_entry_year(year: i32) -> Self {
        if year >= 2006 {
            Cohort::Post2006
        } else {
            Cohort::Pre2006
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Cohort::Pre2006 => "PRE_2006",
            Cohort::Post2006 => "POST_2006",
        }
    }
}
