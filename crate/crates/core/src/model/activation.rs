use std::fmt;
use std::str::FromStr;

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Sin,
    Cos,
    Relu,
}

/// Uniform bounds `|σ| ≤ psi0`, `|σ′| ≤ psi1`, `|σ″| ≤ psi2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub psi0: f64,
    pub psi1: f64,
    pub psi2: f64,
}

/// max |σ″| for the logistic sigmoid, attained where σ = (3 ± √3)/6.
pub const SIGMOID_PSI2: f64 = 0.096_225_044_864_937_64;
/// max |tanh″|, attained where tanh = ±1/√3.
pub const TANH_PSI2: f64 = 0.769_800_358_919_501_2;

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub const ALL: [Activation; 5] =
        [Activation::Sigmoid, Activation::Tanh, Activation::Sin, Activation::Cos, Activation::Relu];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => logistic(x),
            Activation::Tanh => x.tanh(),
            Activation::Sin => x.sin(),
            Activation::Cos => x.cos(),
            Activation::Relu => x.max(0.0),
        }
    }

    #[inline]
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sin => x.cos(),
            Activation::Cos => -x.sin(),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    pub fn deriv2(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = logistic(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Sin => -x.sin(),
            Activation::Cos => -x.cos(),
            Activation::Relu => 0.0,
        }
    }

    /// `None` for relu, which is not twice differentiable.
    pub fn bounds(self) -> Option<Bounds> {
        match self {
            Activation::Sigmoid => Some(Bounds { psi0: 1.0, psi1: 0.25, psi2: SIGMOID_PSI2 }),
            Activation::Tanh => Some(Bounds { psi0: 1.0, psi1: 1.0, psi2: TANH_PSI2 }),
            Activation::Sin | Activation::Cos => Some(Bounds { psi0: 1.0, psi1: 1.0, psi2: 1.0 }),
            Activation::Relu => None,
        }
    }

    pub fn is_smooth(self) -> bool {
        self.bounds().is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
            Activation::Cos => "cos",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown activation `{s}`")))
    }
}
