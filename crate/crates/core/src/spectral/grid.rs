use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Placement of equidistant design points on (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignConvention {
    /// x_i = (2i − 1)/(2n)
    #[default]
    Midpoint,
    /// x_i = i/n
    Right,
}

impl std::str::FromStr for DesignConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Self::Midpoint),
            "right" => Ok(Self::Right),
            other => Err(Error::InvalidArgument(format!(
                "unknown design convention `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for DesignConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Midpoint => "midpoint",
            Self::Right => "right",
        })
    }
}

/// Observation sites x_1 < … < x_n.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    convention: DesignConvention,
    x: Vec<f64>,
}

impl DesignGrid {
    pub fn new(n: usize, convention: DesignConvention) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("design grid needs n ≥ 1".into()));
        }
        let nf = n as f64;
        let x = (1..=n)
            .map(|i| match convention {
                DesignConvention::Midpoint => (2 * i - 1) as f64 / (2.0 * nf),
                DesignConvention::Right => i as f64 / nf,
            })
            .collect();
        Ok(Self { convention, x })
    }

    pub fn midpoint(n: usize) -> Result<Self> {
        Self::new(n, DesignConvention::Midpoint)
    }

    pub fn right(n: usize) -> Result<Self> {
        Self::new(n, DesignConvention::Right)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn convention(&self) -> DesignConvention {
        self.convention
    }

    pub fn points(&self) -> &[f64] {
        &self.x
    }
}
