//! Episode load profiles: a synthetic voyage generator and CSV ingestion.
//!
//! A profile is a sailing segment (`spa = 0`) followed by a port segment
//! (`spa = 1`), sampled at a fixed step length.

mod csv_io;
mod generator;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{read_csv, read_dir, read_set, write_csv, write_set};
pub use generator::{generate, ClassBands, ClassMix, GeneratorConfig};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("empty profile")]
    Empty,
    #[error("line {line}: negative demand {value} kW")]
    NegativeDemand { line: u64, value: f64 },
    #[error("line {line}: demand {value} kW above plant ceiling {ceiling} kW")]
    AboveCeiling { line: u64, value: f64, ceiling: f64 },
    #[error("line {line}: shore-power flag must switch once from 0 to 1 and stay 1")]
    SpaPattern { line: u64 },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("invalid class mix: {0}")]
    InvalidClassMix(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 profiles to split, got {0}")]
    TooFew(usize),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Demand class of a voyage, by cruise plateau level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Low,
    Moderate,
    High,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Low, ClassLabel::Moderate, ClassLabel::High];

    /// Classifies a sailing-mean demand given as a fraction of the plant ceiling.
    pub fn from_load_fraction(frac: f64) -> Self {
        if frac < 0.45 {
            ClassLabel::Low
        } else if frac < 0.58 {
            ClassLabel::Moderate
        } else {
            ClassLabel::High
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::Low => "low",
            ClassLabel::Moderate => "moderate",
            ClassLabel::High => "high",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "low" => Ok(ClassLabel::Low),
            "moderate" => Ok(ClassLabel::Moderate),
            "high" => Ok(ClassLabel::High),
            other => Err(format!("unknown class label '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub p_dem_kw: f64,
    pub spa: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub id: String,
    pub samples: Vec<Sample>,
    pub step_seconds: f64,
    pub class_label: ClassLabel,
}

impl LoadProfile {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of leading sailing samples; index of the first port sample.
    pub fn sailing_len(&self) -> usize {
        self.samples.iter().take_while(|s| !s.spa).count()
    }

    pub fn sailing(&self) -> &[Sample] {
        &self.samples[..self.sailing_len()]
    }

    pub fn port(&self) -> &[Sample] {
        &self.samples[self.sailing_len()..]
    }

    /// Checks every structural invariant. Line numbers in errors are 1-based sample indices.
    pub fn validate(&self, ceiling_kw: f64) -> Result<(), ProfileError> {
        validate_samples(&self.samples, |i| i as u64 + 1)?;
        if let Some((i, s)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, s)| s.p_dem_kw > ceiling_kw)
        {
            return Err(ProfileError::AboveCeiling {
                line: i as u64 + 1,
                value: s.p_dem_kw,
                ceiling: ceiling_kw,
            });
        }
        if !(self.step_seconds > 0.0 && self.step_seconds.is_finite()) {
            return Err(ProfileError::InvalidConfig(format!(
                "step_seconds must be > 0, got {}",
                self.step_seconds
            )));
        }
        Ok(())
    }
}

/// Shared row checks: non-empty, finite non-negative demand, single 0 -> 1 switch.
pub(crate) fn validate_samples(
    samples: &[Sample],
    line_of: impl Fn(usize) -> u64,
) -> Result<(), ProfileError> {
    if samples.is_empty() {
        return Err(ProfileError::Empty);
    }
    for (i, s) in samples.iter().enumerate() {
        if !(s.p_dem_kw >= 0.0) || !s.p_dem_kw.is_finite() {
            return Err(ProfileError::NegativeDemand {
                line: line_of(i),
                value: s.p_dem_kw,
            });
        }
    }
    if samples[0].spa {
        return Err(ProfileError::SpaPattern { line: line_of(0) });
    }
    let mut in_port = false;
    for (i, s) in samples.iter().enumerate() {
        match (in_port, s.spa) {
            (false, true) => in_port = true,
            (true, false) => return Err(ProfileError::SpaPattern { line: line_of(i) }),
            _ => {}
        }
    }
    if !in_port {
        return Err(ProfileError::SpaPattern {
            line: line_of(samples.len() - 1),
        });
    }
    Ok(())
}

/// Train/validation split of generated or loaded profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub train: Vec<LoadProfile>,
    pub validation: Vec<LoadProfile>,
    pub seed: u64,
}

impl ProfileSet {
    pub fn all(&self) -> impl Iterator<Item = &LoadProfile> {
        self.train.iter().chain(self.validation.iter())
    }
}
