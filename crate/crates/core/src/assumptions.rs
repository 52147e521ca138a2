use std::fmt;

use crate::{Error, Result};

/// Whether violated parameter assumptions abort (`Strict`) or are only reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Strict,
    #[default]
    Permissive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub checks: Vec<Check>,
}

impl AssumptionReport {
    pub fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// In strict mode, any failed check becomes an error listing every failure.
    pub fn enforce(self, mode: Mode) -> Result<Self> {
        if mode == Mode::Strict && !self.all_passed() {
            let msg: Vec<String> = self.failures().map(|c| format!("  {}: {}", c.name, c.detail)).collect();
            return Err(Error::Assumption(msg.join("\n")));
        }
        Ok(self)
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}
