//! The spec file format: one JSON document with a `kind` tag, `"version": "1"` and the
//! kind's payload fields. Complex numbers are `[re, im]`, matrices row-major nested arrays.
//!
//! The top level is a flat struct with every payload field optional, so serde_json keeps
//! line/column information for unknown fields and type errors. Which fields a kind needs
//! is checked after parsing.

use covkit::cpmaps::{CPMapSpec, CpSymmetry, SplitSpec};
use covkit::cstar::{FiniteCStarAlgebra, ModuleSpace, TensorSplit};
use covkit::fingroup::{heisenberg_rep, FiniteGroup, GroupAction, MultiplierRep, SubgroupData, TwoCocycle};
use covkit::instruments::{Covariance, InstrumentSpec, ObservableSpec};
use covkit::kernels::CovariantKernelSpec;
use covkit::numlin::{eigh, CMatrix, Tolerances, C64};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const VERSION: &str = "1";

pub type Cx = [f64; 2];
pub type Mat = Vec<Vec<Cx>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Group,
    Kernel,
    Cpmap,
    Observable,
    Instrument,
    PhaseSpace,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Group => "group",
            Kind::Kernel => "kernel",
            Kind::Cpmap => "cpmap",
            Kind::Observable => "observable",
            Kind::Instrument => "instrument",
            Kind::PhaseSpace => "phase_space",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Kind::Group => &["group"],
            Kind::Kernel => &["group", "action", "rep", "blocks"],
            Kind::Cpmap => &["algebra", "values"],
            Kind::Observable => &["group", "subgroup", "rep", "effects"],
            Kind::Instrument => &["group", "subgroup", "rep", "k_dim", "u_k", "choi"],
            Kind::PhaseSpace => &["d"],
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            Kind::Group => &["group", "action", "cocycle", "rep"],
            Kind::Kernel => &["group", "action", "alpha", "cocycle", "rep", "k", "blocks", "fixed"],
            Kind::Cpmap => &["group", "algebra", "k", "values", "symmetry", "split"],
            Kind::Observable => &["group", "subgroup", "rep", "effects"],
            Kind::Instrument => &["group", "subgroup", "rep", "k_dim", "u_k", "choi"],
            Kind::PhaseSpace => &["d", "b", "s"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupDoc {
    Cyclic(usize),
    /// Order 2n.
    Dihedral(usize),
    Symmetric(usize),
    /// Z_d × Z_d with (q, p) at index q·d + p.
    Heisenberg(usize),
    Table(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepDoc {
    pub matrices: Vec<Mat>,
    /// σ(g,h) indexed `[g][h]`; inferred from the matrices when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycle: Option<Vec<Vec<Cx>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryDoc {
    pub u_v: RepDoc,
    pub implementer: RepDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitDoc {
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_implementer: Option<RepDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_implementer: Option<RepDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupDoc>,
    /// `[g][x]` = g·x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<Vec<usize>>>,
    /// α(g, x) indexed `[g][x]`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Vec<Cx>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cocycle: Option<Vec<Vec<Cx>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep: Option<RepDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<Mat>>>,
    /// Pairs (x, y) on which competing kernels must agree; defaults to the diagonal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Mat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subgroup: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effects: Option<Vec<Mat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_k: Option<RepDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<Vec<Mat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Mat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Mat>,
}

/// A malformed document. `line` and `column` are 1-based; 0 means unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "parse error: {}", self.message)
        } else {
            write!(f, "parse error at line {}, column {}: {}", self.line, self.column, self.message)
        }
    }
}

impl std::error::Error for ParseError {}

/// Position of the first `"key"` in `text`, or (0, 0).
fn locate(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        None => (0, 0),
        Some(at) => {
            let before = &text[..at];
            let line = before.matches('\n').count() + 1;
            let column = before.rfind('\n').map_or(at, |nl| at - nl - 1) + 1;
            (line, column)
        }
    }
}

fn error_at(text: &str, key: &str, message: String) -> ParseError {
    let (line, column) = locate(text, key);
    ParseError { line, column, message }
}

impl SpecFile {
    pub fn blank(kind: Kind) -> Self {
        SpecFile {
            version: VERSION.into(),
            kind,
            group: None,
            action: None,
            alpha: None,
            cocycle: None,
            rep: None,
            k: None,
            blocks: None,
            fixed: None,
            algebra: None,
            values: None,
            symmetry: None,
            split: None,
            subgroup: None,
            effects: None,
            k_dim: None,
            u_k: None,
            choi: None,
            d: None,
            b: None,
            s: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let file: SpecFile = serde_json::from_str(text).map_err(|e| ParseError {
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?;
        if file.version != VERSION {
            return Err(error_at(
                text,
                "version",
                format!("unsupported version {:?}, expected \"{VERSION}\"", file.version),
            ));
        }
        let present = file.present_fields();
        for f in file.kind.required() {
            if !present.contains(f) {
                return Err(error_at(
                    text,
                    "kind",
                    format!("kind {} requires field `{f}`", file.kind.name()),
                ));
            }
        }
        for f in &present {
            if !file.kind.allowed().contains(f) {
                return Err(error_at(
                    text,
                    f,
                    format!("field `{f}` does not belong to kind {}", file.kind.name()),
                ));
            }
        }
        if file.kind == Kind::PhaseSpace && (file.b.is_some() == file.s.is_some()) {
            return Err(error_at(text, "kind", "phase_space needs exactly one of `b` and `s`".into()));
        }
        Ok(file)
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec files always serialize");
        s.push('\n');
        s
    }

    fn present_fields(&self) -> Vec<&'static str> {
        let flags = [
            ("group", self.group.is_some()),
            ("action", self.action.is_some()),
            ("alpha", self.alpha.is_some()),
            ("cocycle", self.cocycle.is_some()),
            ("rep", self.rep.is_some()),
            ("k", self.k.is_some()),
            ("blocks", self.blocks.is_some()),
            ("fixed", self.fixed.is_some()),
            ("algebra", self.algebra.is_some()),
            ("values", self.values.is_some()),
            ("symmetry", self.symmetry.is_some()),
            ("split", self.split.is_some()),
            ("subgroup", self.subgroup.is_some()),
            ("effects", self.effects.is_some()),
            ("k_dim", self.k_dim.is_some()),
            ("u_k", self.u_k.is_some()),
            ("choi", self.choi.is_some()),
            ("d", self.d.is_some()),
            ("b", self.b.is_some()),
            ("s", self.s.is_some()),
        ];
        flags.iter().filter(|(_, on)| *on).map(|(n, _)| *n).collect()
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

// ---- conversions to engine types ----

pub fn cx(z: &Cx) -> C64 {
    C64::new(z[0], z[1])
}

pub fn mat(m: &Mat) -> covkit::Result<CMatrix> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if m.iter().any(|r| r.len() != cols) {
        return Err(covkit::Error::Dimension("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| cx(&m[i][j])))
}

fn mats(ms: &[Mat]) -> covkit::Result<Vec<CMatrix>> {
    ms.iter().map(mat).collect()
}

pub fn group(doc: &GroupDoc) -> covkit::Result<FiniteGroup> {
    let positive = |n: usize, what: &str| {
        if n == 0 {
            Err(covkit::Error::Invalid(format!("{what} needs a positive parameter")))
        } else {
            Ok(())
        }
    };
    match doc {
        GroupDoc::Cyclic(n) => positive(*n, "cyclic").map(|_| FiniteGroup::cyclic(*n)),
        GroupDoc::Dihedral(n) => positive(*n, "dihedral").map(|_| FiniteGroup::dihedral(*n)),
        GroupDoc::Symmetric(n) => FiniteGroup::symmetric(*n),
        GroupDoc::Heisenberg(d) => positive(*d, "heisenberg").map(|_| heisenberg_rep(*d).group),
        GroupDoc::Table(t) => FiniteGroup::from_table(t),
    }
}

pub fn cocycle(table: &[Vec<Cx>]) -> covkit::Result<TwoCocycle> {
    let t: Vec<Vec<C64>> = table.iter().map(|r| r.iter().map(cx).collect()).collect();
    TwoCocycle::from_table(&t)
}

pub fn rep(g: &FiniteGroup, doc: &RepDoc, tol: &Tolerances) -> covkit::Result<MultiplierRep> {
    let m = mats(&doc.matrices)?;
    match &doc.cocycle {
        None => MultiplierRep::from_matrices(g.clone(), m, tol),
        Some(t) => MultiplierRep::new(g.clone(), cocycle(t)?, m, true, tol),
    }
}

fn need<'a, T>(field: &'a Option<T>, name: &str) -> covkit::Result<&'a T> {
    field
        .as_ref()
        .ok_or_else(|| covkit::Error::Invalid(format!("missing field `{name}`")))
}

impl SpecFile {
    pub fn group(&self) -> covkit::Result<FiniteGroup> {
        match &self.group {
            Some(g) => group(g),
            None => Ok(FiniteGroup::trivial()),
        }
    }

    pub fn kernel(&self, tol: &Tolerances) -> covkit::Result<CovariantKernelSpec> {
        let g = self.group()?;
        let action = GroupAction::new(g.clone(), need(&self.action, "action")?)?;
        let nx = action.set_size();
        let alpha = match &self.alpha {
            Some(a) => a.iter().map(|r| r.iter().map(cx).collect()).collect(),
            None => vec![vec![C64::new(1.0, 0.0); nx]; g.order()],
        };
        let sigma = match &self.cocycle {
            Some(t) => cocycle(t)?,
            None => TwoCocycle::trivial(g.order()),
        };
        let blocks = need(&self.blocks, "blocks")?
            .iter()
            .map(|row| mats(row))
            .collect::<covkit::Result<Vec<_>>>()?;
        let spec = CovariantKernelSpec {
            action,
            alpha,
            sigma,
            u: rep(&g, need(&self.rep, "rep")?, tol)?,
            k: self.k.unwrap_or(1),
            blocks,
        };
        spec.check_shapes()?;
        Ok(spec)
    }

    /// Z for kernel extremality.
    pub fn fixed_pairs(&self, nx: usize) -> Vec<(usize, usize)> {
        match &self.fixed {
            Some(p) => p.iter().map(|&[x, y]| (x, y)).collect(),
            None => (0..nx).map(|x| (x, x)).collect(),
        }
    }

    pub fn cpmap(&self, tol: &Tolerances) -> covkit::Result<CPMapSpec> {
        let algebra = FiniteCStarAlgebra::new(need(&self.algebra, "algebra")?.clone())?;
        let values = mats(need(&self.values, "values")?)?;
        let n_v = values.first().map_or(0, |v| v.nrows());
        let mut spec = CPMapSpec::new(algebra, ModuleSpace::new(self.k.unwrap_or(1), n_v), values)?;
        let g = self.group()?;
        if let Some(s) = &self.split {
            let split = TensorSplit::new(FiniteCStarAlgebra::new(s.b.clone())?, FiniteCStarAlgebra::new(s.c.clone())?);
            spec = spec.with_split(SplitSpec {
                split,
                b_implementer: s.b_implementer.as_ref().map(|r| rep(&g, r, tol)).transpose()?,
                c_implementer: s.c_implementer.as_ref().map(|r| rep(&g, r, tol)).transpose()?,
            })?;
        }
        if let Some(s) = &self.symmetry {
            spec = spec.with_symmetry(CpSymmetry {
                u_v: rep(&g, &s.u_v, tol)?,
                implementer: rep(&g, &s.implementer, tol)?,
            })?;
        }
        Ok(spec)
    }

    fn covariance(&self, tol: &Tolerances) -> covkit::Result<Covariance> {
        let g = self.group()?;
        let sub = SubgroupData::new(g.clone(), need(&self.subgroup, "subgroup")?)?;
        Covariance::new(sub, rep(&g, need(&self.rep, "rep")?, tol)?)
    }

    pub fn observable(&self, tol: &Tolerances) -> covkit::Result<ObservableSpec> {
        ObservableSpec::new(mats(need(&self.effects, "effects")?)?, self.covariance(tol)?)
    }

    pub fn instrument(&self, tol: &Tolerances) -> covkit::Result<InstrumentSpec> {
        let cov = self.covariance(tol)?;
        let u_k = rep(cov.sub.parent(), need(&self.u_k, "u_k")?, tol)?;
        InstrumentSpec::new(*need(&self.k_dim, "k_dim")?, mats(need(&self.choi, "choi")?)?, cov, u_k)
    }

    /// d and the operators B_j. A seed state S is factored through its eigenvectors,
    /// B_j = √(λ_j/d)·|v_j⟩⟨v_j|, keeping eigenvalues above the PSD tolerance.
    pub fn phase_space_seed(&self, tol: &Tolerances) -> covkit::Result<(usize, Vec<CMatrix>)> {
        let d = *need(&self.d, "d")?;
        if let Some(b) = &self.b {
            return Ok((d, mats(b)?));
        }
        let s = mat(need(&self.s, "s")?)?;
        if s.shape() != (d, d) {
            return Err(covkit::Error::Dimension(format!("s must be {d}x{d}")));
        }
        let (vals, vecs) = eigh(&s);
        let ops = (0..d)
            .filter(|&j| vals[j] > tol.psd_eig)
            .map(|j| {
                let v = vecs.column(j).into_owned();
                &v * v.adjoint() * C64::new((vals[j] / d as f64).sqrt(), 0.0)
            })
            .collect();
        Ok((d, ops))
    }
}

// ---- conversions from engine types ----

pub fn cx_doc(z: C64) -> Cx {
    [z.re, z.im]
}

pub fn mat_doc(m: &CMatrix) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| cx_doc(m[(i, j)])).collect())
        .collect()
}

pub fn rep_doc(r: &MultiplierRep) -> RepDoc {
    RepDoc {
        matrices: r.matrices().iter().map(mat_doc).collect(),
        cocycle: Some(cocycle_doc(r.cocycle())),
    }
}

pub fn cocycle_doc(c: &TwoCocycle) -> Vec<Vec<Cx>> {
    c.table().iter().map(|r| r.iter().map(|&z| cx_doc(z)).collect()).collect()
}

pub fn group_doc(g: &FiniteGroup) -> GroupDoc {
    GroupDoc::Table(g.table())
}

/// A group-kind file for a multiplier representation.
pub fn rep_file(group: Option<&GroupDoc>, r: &MultiplierRep) -> SpecFile {
    let mut f = SpecFile::blank(Kind::Group);
    f.group = Some(group.cloned().unwrap_or_else(|| group_doc(r.group())));
    f.rep = Some(rep_doc(r));
    f
}

fn covariance_fields(f: &mut SpecFile, group: Option<&GroupDoc>, cov: &Covariance) {
    f.group = Some(group.cloned().unwrap_or_else(|| group_doc(cov.sub.parent())));
    f.subgroup = Some(cov.sub.members().to_vec());
    f.rep = Some(rep_doc(&cov.u));
}

pub fn observable_file(group: Option<&GroupDoc>, spec: &ObservableSpec) -> SpecFile {
    let mut f = SpecFile::blank(Kind::Observable);
    covariance_fields(&mut f, group, &spec.covariance);
    f.effects = Some(spec.effects.iter().map(mat_doc).collect());
    f
}

pub fn instrument_file(group: Option<&GroupDoc>, spec: &InstrumentSpec) -> SpecFile {
    let mut f = SpecFile::blank(Kind::Instrument);
    covariance_fields(&mut f, group, &spec.covariance);
    f.k_dim = Some(spec.k_dim);
    f.u_k = Some(rep_doc(&spec.u_k));
    f.choi = Some(spec.choi.iter().map(mat_doc).collect());
    f
}

/// Kernel file with the template's symmetry and new blocks.
pub fn kernel_file(template: &SpecFile, spec: &CovariantKernelSpec) -> SpecFile {
    let mut f = template.clone();
    f.blocks = Some(spec.blocks.iter().map(|r| r.iter().map(mat_doc).collect()).collect());
    f
}

/// CP map file with the template's algebra and symmetry and new values.
pub fn cpmap_file(template: &SpecFile, spec: &CPMapSpec) -> SpecFile {
    let mut f = template.clone();
    f.values = Some(spec.values.iter().map(mat_doc).collect());
    f
}
