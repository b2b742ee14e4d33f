//! Certificates: named identities together with the residual that decided them.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub residual: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Certificate {
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `residual <= tol` under `name` and returns the verdict.
    pub fn record(&mut self, name: impl Into<String>, residual: f64, tol: f64) -> bool {
        let ok = residual.is_finite() && residual <= tol;
        self.checks.push(Check {
            name: name.into(),
            ok,
            residual,
            tol,
        });
        ok
    }

    /// Records a boolean fact; the residual is 0 for true and 1 for false.
    pub fn flag(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.checks.push(Check {
            name: name.into(),
            ok,
            residual: if ok { 0.0 } else { 1.0 },
            tol: 0.0,
        });
        ok
    }

    pub fn extend(&mut self, prefix: &str, other: Certificate) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
    }

    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.ok)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest residual among checks whose name starts with `prefix`.
    pub fn max_residual(&self, prefix: &str) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }

    /// Turns the first failed check into a tolerance error.
    pub fn require(self) -> Result<Self> {
        match self.first_failure() {
            Some(c) => Err(Error::tolerance(c.name.clone(), c.residual, c.tol)),
            None => Ok(self),
        }
    }
}
