use std::fmt;
use std::str::FromStr;

use crate::econ::ModelKind;
use crate::error::{Error, Result};
use crate::ml::MlKind;

/// Any of the eight forecasting methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Econ(ModelKind),
    Ml(MlKind),
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Econ(ModelKind::Lr),
        Method::Econ(ModelKind::Sar),
        Method::Econ(ModelKind::Car),
        Method::Econ(ModelKind::Glm),
        Method::Econ(ModelKind::Glmm),
        Method::Ml(MlKind::Rf),
        Method::Ml(MlKind::Gbm),
        Method::Ml(MlKind::Mlp),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Econ(k) => k.as_str(),
            Method::Ml(k) => k.as_str(),
        }
    }

    pub fn is_ml(self) -> bool {
        matches!(self, Method::Ml(_))
    }

    /// Position in [`Method::ALL`], used as a stream key.
    pub fn id(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

/// One forecast origin: fit on data up to `last_week`, forecast the week after.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub index: usize,
    pub last_week: u32,
    pub target_week: u32,
}

/// Rolling one-step-ahead schedule over a panel of `n_weeks` weeks: origins
/// t = h..T−1, forecasting weeks h+1..T.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvaluationPlan {
    pub n_weeks: u32,
    pub h: u32,
}

/// Weeks at the end of each ML training span held out for validation.
pub const VALIDATION_WEEKS: u32 = 2;

impl EvaluationPlan {
    /// `h` defaults to ⌊T/2⌋.
    pub fn new(n_weeks: u32, h: Option<u32>) -> Result<Self> {
        let h = h.unwrap_or(n_weeks / 2);
        if h < 2 {
            return Err(Error::InvalidArgument(format!(
                "minimum training length must be at least 2 weeks, got {h}"
            )));
        }
        if h >= n_weeks {
            return Err(Error::InvalidArgument(format!(
                "minimum training length {h} leaves no forecast week in a {n_weeks}-week panel"
            )));
        }
        Ok(Self { n_weeks, h })
    }

    pub fn windows(&self) -> Vec<Window> {
        (self.h..self.n_weeks)
            .enumerate()
            .map(|(index, t)| Window {
                index,
                last_week: t,
                target_week: t + 1,
            })
            .collect()
    }

    pub fn n_windows(&self) -> usize {
        (self.n_weeks - self.h) as usize
    }
}
