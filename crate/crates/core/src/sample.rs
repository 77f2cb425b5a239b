use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RkdError};
use crate::scalar::Real;

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Untreated = 0,
    Treated = 1,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Untreated, Arm::Treated];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn matches(self, treated: bool) -> bool {
        treated == (self == Arm::Treated)
    }

    pub fn from_u8(d: u8) -> Option<Self> {
        match d {
            0 => Some(Arm::Untreated),
            1 => Some(Arm::Treated),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// Side of the kink. Observations exactly at the kink belong to neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Plus, Side::Minus];

    #[inline]
    pub fn contains<T: Real>(self, x: T) -> bool {
        match self {
            Side::Plus => x > T::zero(),
            Side::Minus => x < T::zero(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }

    pub fn is_plus(self) -> bool {
        self == Side::Plus
    }
}

/// Observed (outcome, treatment, running variable) triplets with the kink
/// at x = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub y: Vec<T>,
    pub d: Vec<bool>,
    pub x: Vec<T>,
}

impl<T: Real> Sample<T> {
    pub fn new(y: Vec<T>, d: Vec<bool>, x: Vec<T>) -> Result<Self> {
        if d.len() != y.len() {
            return Err(RkdError::LengthMismatch {
                expected: y.len(),
                got: d.len(),
            });
        }
        if x.len() != y.len() {
            return Err(RkdError::LengthMismatch {
                expected: y.len(),
                got: x.len(),
            });
        }
        Ok(Self { y, d, x })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Outcomes of one arm.
    pub fn outcomes(&self, arm: Arm) -> Vec<T> {
        self.y
            .iter()
            .zip(&self.d)
            .filter(|(_, &d)| arm.matches(d))
            .map(|(&y, _)| y)
            .collect()
    }

    /// Shift the running variable so the kink sits at zero.
    pub fn recenter(&mut self, kink: T) {
        for x in &mut self.x {
            *x = *x - kink;
        }
    }
}
