use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Positive per-layer, per-iteration parameter sequence such as ωᵢᵏ or τᵢᵏ.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// Linear from `start` at k = 0 to `end` at k = `steps`, then held.
    Ramp { start: f64, end: f64, steps: usize },
    /// Entry i−1 applies to layer i; the last entry covers deeper layers.
    PerLayer(Vec<Schedule>),
}

impl Schedule {
    /// Value for 1-based layer `i` at iteration index `k` (the update producing
    /// iterate k+1 reads index k).
    pub fn value(&self, i: usize, k: usize) -> f64 {
        match self {
            Schedule::Constant(c) => *c,
            Schedule::Ramp { start, end, steps } => {
                if *steps == 0 || k >= *steps {
                    *end
                } else {
                    start + (end - start) * k as f64 / *steps as f64
                }
            }
            Schedule::PerLayer(layers) => {
                let idx = i.saturating_sub(1).min(layers.len() - 1);
                layers[idx].value(i, k)
            }
        }
    }

    pub fn layer(&self, i: usize) -> &Schedule {
        match self {
            Schedule::PerLayer(layers) => layers[i.saturating_sub(1).min(layers.len() - 1)].layer(i),
            s => s,
        }
    }

    /// Smallest value taken on layer `i`.
    pub fn min(&self, i: usize) -> f64 {
        match self.layer(i) {
            Schedule::Constant(c) => *c,
            Schedule::Ramp { start, end, .. } => start.min(*end),
            Schedule::PerLayer(_) => unreachable!("layer() resolves nesting"),
        }
    }

    /// Largest value taken on layer `i`.
    pub fn max(&self, i: usize) -> f64 {
        match self.layer(i) {
            Schedule::Constant(c) => *c,
            Schedule::Ramp { start, end, .. } => start.max(*end),
            Schedule::PerLayer(_) => unreachable!("layer() resolves nesting"),
        }
    }

    pub fn is_nondecreasing(&self, i: usize) -> bool {
        match self.layer(i) {
            Schedule::Constant(_) => true,
            Schedule::Ramp { start, end, .. } => end >= start,
            Schedule::PerLayer(_) => unreachable!("layer() resolves nesting"),
        }
    }

    pub fn validate(&self, name: &str, layers: usize) -> Result<()> {
        if let Schedule::PerLayer(v) = self {
            if v.is_empty() {
                return Err(Error::InvalidHyper(format!("{name}: empty per-layer schedule")));
            }
        }
        for i in 1..=layers {
            let lo = self.min(i);
            if !(lo > 0.0) || !self.max(i).is_finite() {
                return Err(Error::InvalidHyper(format!("{name} on layer {i} must be positive and finite")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant(c) => write!(f, "{c}"),
            Schedule::Ramp { start, end, steps } => write!(f, "ramp:{start}:{end}:{steps}"),
            Schedule::PerLayer(v) => {
                let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `c`, `ramp:start:end:steps`, or a comma list of those (one per layer).
    fn from_str(s: &str) -> Result<Self> {
        let items: Vec<&str> = s.split(',').map(str::trim).collect();
        if items.len() > 1 {
            return Ok(Schedule::PerLayer(items.iter().map(|p| p.parse()).collect::<Result<_>>()?));
        }
        let bad = |e: &dyn fmt::Display| Error::Parse(format!("schedule `{s}`: {e}"));
        let item = items[0];
        if let Some(rest) = item.strip_prefix("ramp:") {
            let p: Vec<&str> = rest.split(':').collect();
            if p.len() != 3 {
                return Err(bad(&"expected ramp:start:end:steps"));
            }
            return Ok(Schedule::Ramp {
                start: p[0].parse().map_err(|e| bad(&e))?,
                end: p[1].parse().map_err(|e| bad(&e))?,
                steps: p[2].parse().map_err(|e| bad(&e))?,
            });
        }
        Ok(Schedule::Constant(item.parse().map_err(|e| bad(&e))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_and_layers() {
        let s = Schedule::Ramp { start: 1.0, end: 3.0, steps: 4 };
        assert_eq!(s.value(1, 0), 1.0);
        assert_eq!(s.value(1, 2), 2.0);
        assert_eq!(s.value(1, 9), 3.0);
        assert!(s.is_nondecreasing(1));
        let p: Schedule = "1, ramp:2:4:10".parse().unwrap();
        assert_eq!(p.value(1, 5), 1.0);
        assert_eq!(p.value(2, 5), 3.0);
        assert_eq!(p.value(7, 5), 3.0);
        assert_eq!((p.min(2), p.max(2)), (2.0, 4.0));
        assert_eq!(p.to_string().parse::<Schedule>().unwrap(), p);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(Schedule::Constant(0.0).validate("omega", 2).is_err());
        assert!(Schedule::Constant(1.0).validate("omega", 2).is_ok());
    }
}
