use covkit::{Certificate, Tolerances};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// A certified identity; a false value fails the command.
    Check,
    /// An answer such as `extreme`; either value is a successful outcome.
    Decision,
}

/// `residual` is the number the value was decided on and `tol` the base tolerance it was
/// compared against (engines scale it by the problem's norm). For extremality decisions the
/// residual is the dimension of the witness space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub role: Role,
    pub value: bool,
    pub residual: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub name: String,
    pub provenance: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TolerancesDoc {
    pub psd_eig: f64,
    pub rank_rel: f64,
    pub unitary_fro: f64,
    pub recon_fro: f64,
}

impl From<&Tolerances> for TolerancesDoc {
    fn from(t: &Tolerances) -> Self {
        TolerancesDoc {
            psd_eig: t.psd_eig,
            rank_rel: t.rank_rel,
            unitary_fro: t.unitary_fro,
            recon_fro: t.recon_fro,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub kind: String,
    pub ok: bool,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<Artifact>,
    pub tolerances: TolerancesDoc,
}

impl Report {
    pub fn new(command: &str, kind: &str, tol: &Tolerances) -> Self {
        Report {
            command: command.into(),
            kind: kind.into(),
            ok: true,
            verdicts: Vec::new(),
            artifacts: Vec::new(),
            tolerances: tol.into(),
        }
    }

    pub fn verdict(&mut self, name: impl Into<String>, ok: bool, residual: f64, tol: f64) {
        self.ok &= ok;
        self.verdicts.push(Verdict {
            name: name.into(),
            role: Role::Check,
            value: ok,
            residual,
            tol,
        });
    }

    pub fn decision(&mut self, name: impl Into<String>, value: bool, residual: f64) {
        self.verdicts.push(Verdict {
            name: name.into(),
            role: Role::Decision,
            value,
            residual,
            tol: 0.0,
        });
    }

    pub fn certificate(&mut self, prefix: &str, cert: &Certificate) {
        for c in &cert.checks {
            let name = if prefix.is_empty() {
                c.name.clone()
            } else {
                format!("{prefix}: {}", c.name)
            };
            self.verdict(name, c.ok, c.residual, c.tol);
        }
    }

    pub fn artifact(&mut self, name: impl Into<String>, provenance: impl Into<String>, value: impl Serialize) {
        self.artifacts.push(Artifact {
            name: name.into(),
            provenance: provenance.into(),
            value: serde_json::to_value(value).expect("artifacts serialize"),
        });
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}
