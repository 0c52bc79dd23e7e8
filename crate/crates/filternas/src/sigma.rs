//! Registry of increasing functions applied to complexity ratios and
//! cross-entropy differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An increasing scalar function selected by name.
///
/// `hinge` and `exp` are anchored at 1 so that a configuration matching its
/// complexity target maps to 0 and 1 respectively; `identity`, `leaky-relu`
/// and `sigmoid` are the usual definitions and suit difference-valued inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sigma {
    /// x
    Identity,
    /// max(0, x - 1)
    #[default]
    Hinge,
    /// exp(x - 1)
    Exp,
    /// x for x >= 0, 0.01 x otherwise
    LeakyRelu,
    /// 1 / (1 + exp(-x))
    Sigmoid,
}

impl Sigma {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Sigma::Identity),
            "hinge" => Ok(Sigma::Hinge),
            "exp" => Ok(Sigma::Exp),
            "leaky-relu" => Ok(Sigma::LeakyRelu),
            "sigmoid" => Ok(Sigma::Sigmoid),
            other => Err(Error::UnknownSigma(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sigma::Identity => "identity",
            Sigma::Hinge => "hinge",
            Sigma::Exp => "exp",
            Sigma::LeakyRelu => "leaky-relu",
            Sigma::Sigmoid => "sigmoid",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Sigma::Identity => x,
            Sigma::Hinge => (x - 1.0).max(0.0),
            Sigma::Exp => (x - 1.0).exp(),
            Sigma::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    0.01 * x
                }
            }
            Sigma::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }
}
