use crate::format::{
    self, cpmap_file, instrument_file, kernel_file, mat_doc, observable_file, rep_file, Kind, SpecFile,
};
use crate::report::Report;
use covkit::cpmaps::{cp_extremal, cp_validate, kraus_extract, ksgns, CPMapSpec};
use covkit::instruments::{
    instrument_extremal, kraus_to_choi, lambda_from_observable, naimark, observable_extremal,
    observable_extremal_cp, observable_extremal_kernel, phase_space, sample_many, validate_instrument,
    validate_observable, InstrumentSpec, ObservableSpec,
};
use covkit::kernels::{kernel_extremal, kolmogorov_decompose, validate_kernel, CovariantKernelSpec};
use covkit::numlin::{fro, identity, zeros, CMatrix};
use covkit::{Error, Tolerances};
use serde::Serialize;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// The offending file and what was wrong with it.
    Parse(String, format::ParseError),
    /// Bad invocation: unreadable file, wrong kind for the command, bad flags.
    Usage(String),
    Engine(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(..) | CliError::Usage(_) => 2,
            CliError::Engine(Error::Tolerance { .. }) => 3,
            CliError::Engine(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(path, e) => write!(f, "{path}: {e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn wrong_kind(command: &str, kind: Kind) -> CliError {
    CliError::Usage(format!("`{command}` does not accept files of kind {}", kind.name()))
}

fn mats(ms: &[CMatrix]) -> Vec<format::Mat> {
    ms.iter().map(mat_doc).collect()
}

fn spec_value(f: &SpecFile) -> serde_json::Value {
    serde_json::to_value(f).expect("spec files serialize")
}

// ---- validate ----

pub fn validate(file: &SpecFile, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new("validate", file.kind.name(), tol);
    match file.kind {
        Kind::Group => validate_group(file, tol, &mut r)?,
        Kind::Kernel => {
            let rep = validate_kernel(&file.kernel(tol)?, tol)?;
            r.verdict("positive (min eigenvalue)", rep.positive, rep.min_eig, tol.psd_eig);
            r.verdict("covariant", rep.covariant, rep.covariance_residual, tol.recon_fro);
            r.verdict("alpha cocycle identity", rep.alpha_ok, rep.alpha_residual, tol.recon_fro);
            diagnostic(&mut r, rep.first_violation);
        }
        Kind::Cpmap => {
            let rep = cp_validate(&file.cpmap(tol)?, tol)?;
            r.verdict("completely positive (min Choi eigenvalue)", rep.cp, rep.min_eig, tol.psd_eig);
            r.verdict("covariant", rep.covariant, rep.covariance_residual, tol.recon_fro);
            diagnostic(&mut r, rep.first_violation);
        }
        Kind::Observable => validate_observable_into(&file.observable(tol)?, tol, &mut r)?,
        Kind::Instrument => validate_instrument_into(&file.instrument(tol)?, tol, &mut r)?,
        Kind::PhaseSpace => {
            let (d, b) = file.phase_space_seed(tol)?;
            let ps = phase_space(d, b, tol)?;
            r.certificate("phase space", &ps.certificate);
            validate_instrument_into(&ps.instrument, tol, &mut r)?;
        }
    }
    Ok(r)
}

fn diagnostic(r: &mut Report, first: Option<String>) {
    if let Some(m) = first {
        r.artifact("first violation", "validator", m);
    }
}

fn validate_observable_into(spec: &ObservableSpec, tol: &Tolerances, r: &mut Report) -> Result<()> {
    let rep = validate_observable(spec, tol)?;
    r.verdict("positive (min eigenvalue)", rep.positive, rep.min_eig, tol.psd_eig);
    r.verdict("normalized", rep.normalized, rep.normalization_residual, tol.recon_fro);
    r.verdict("covariant", rep.covariant, rep.covariance_residual, tol.recon_fro);
    diagnostic(r, rep.first_violation);
    Ok(())
}

fn validate_instrument_into(spec: &InstrumentSpec, tol: &Tolerances, r: &mut Report) -> Result<()> {
    let rep = validate_instrument(spec, tol)?;
    r.verdict("completely positive (min Choi eigenvalue)", rep.cp, rep.min_eig, tol.psd_eig);
    r.verdict("normalized", rep.normalized, rep.normalization_residual, tol.recon_fro);
    r.verdict("covariant", rep.covariant, rep.covariance_residual, tol.recon_fro);
    diagnostic(r, rep.first_violation);
    Ok(())
}

fn validate_group(file: &SpecFile, tol: &Tolerances, r: &mut Report) -> Result<()> {
    let g = file.group()?;
    r.verdict("group axioms", true, 0.0, 0.0);
    if let Some(t) = &file.action {
        let res = covkit::fingroup::GroupAction::new(g.clone(), t);
        r.verdict("action axioms", res.is_ok(), if res.is_ok() { 0.0 } else { 1.0 }, 0.0);
    }
    if let Some(t) = &file.cocycle {
        let c = format::cocycle(t)?;
        let mut worst = 0.0f64;
        if c.order() == g.order() {
            for a in g.elements() {
                for b in g.elements() {
                    for k in g.elements() {
                        let lhs = c.get(a, g.mul(b, k)) * c.get(b, k);
                        let rhs = c.get(g.mul(a, b), k) * c.get(a, b);
                        worst = worst.max((lhs - rhs).norm());
                    }
                }
            }
        } else {
            worst = f64::INFINITY;
        }
        r.verdict("cocycle identity", c.validate(&g).is_ok(), worst, 1e-9);
    }
    if let Some(doc) = &file.rep {
        match format::rep(&g, doc, tol) {
            Ok(u) => {
                let mut hom = 0.0f64;
                let mut unit = 0.0f64;
                for a in g.elements() {
                    let m = u.get(a);
                    unit = unit.max(fro(&(m.adjoint() * m - identity(u.dim()))));
                    for b in g.elements() {
                        let lhs = m * u.get(b);
                        let rhs = u.get(g.mul(a, b)) * u.cocycle().get(a, b);
                        hom = hom.max(fro(&(lhs - rhs)));
                    }
                }
                r.verdict("multiplier homomorphism", true, hom, tol.recon_fro);
                r.verdict("unitary", true, unit, tol.unitary_fro);
            }
            Err(e) => {
                let residual = match &e {
                    Error::Tolerance { residual, .. } => *residual,
                    _ => f64::NAN,
                };
                r.verdict("representation", false, residual, tol.recon_fro);
                r.artifact("first violation", "validator", e.to_string());
            }
        }
    }
    Ok(())
}

// ---- dilate ----

pub fn dilate(file: &SpecFile, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new("dilate", file.kind.name(), tol);
    match file.kind {
        Kind::Kernel => {
            let spec = file.kernel(tol)?;
            let d = kolmogorov_decompose(&spec, tol)?;
            r.certificate("kolmogorov", &d.certificate);
            r.artifact("N", "minimal Kolmogorov decomposition", d.n);
            r.artifact("F", "F_x with F_x†F_y = T_{x,y}", mats(&d.f));
            r.artifact("utilde", "Ũ on the dilation space, as a group file", spec_value(&rep_file(None, &d.utilde)));
            let blocks: Vec<Vec<CMatrix>> =
                d.f.iter().map(|fx| d.f.iter().map(|fy| fx.adjoint() * fy).collect()).collect();
            let rebuilt = spec.with_blocks(blocks);
            r.artifact("kernel", "kernel rebuilt from F, as a kernel file", spec_value(&kernel_file(file, &rebuilt)));
        }
        Kind::Cpmap => ksgns_into(&file.cpmap(tol)?, tol, &mut r)?,
        Kind::Instrument => {
            let spec = file.instrument(tol)?;
            ksgns_into(&spec.as_cp_map(tol)?, tol, &mut r)?;
        }
        Kind::Observable => {
            let spec = file.observable(tol)?;
            let nd = naimark(&spec, tol)?;
            r.certificate("naimark", &nd.certificate);
            r.artifact("fibers", "fiber dimensions m(ω)", nd.fibers.clone());
            r.artifact("K", "Naimark isometry", mat_doc(&nd.k));
            r.artifact("projections", "spectral measure P_ω", mats(&nd.projections));
            r.artifact(
                "y",
                "system of imprimitivity representation, as a group file",
                spec_value(&rep_file(file.group.as_ref(), &nd.y_rep)),
            );
        }
        k => return Err(wrong_kind("dilate", k)),
    }
    Ok(r)
}

fn ksgns_into(spec: &CPMapSpec, tol: &Tolerances, r: &mut Report) -> Result<()> {
    let d = ksgns(spec, tol)?;
    r.certificate("ksgns", &d.certificate);
    r.artifact("N", "minimal KSGNS dilation", d.n);
    r.artifact("J", "J with S_b = J†π(b)J", mat_doc(&d.j));
    r.artifact("pi", "π on each matrix unit", mats(&d.pi));
    if spec.symmetry.is_some() {
        r.artifact("utilde", "Ũ on the dilation space, as a group file", spec_value(&rep_file(None, &d.utilde)));
    }
    if let Some(ub) = &d.ubar {
        r.artifact("ubar", "Ū commuting with π, as a group file", spec_value(&rep_file(None, ub)));
    }
    Ok(())
}

// ---- extremal ----

pub fn extremal(file: &SpecFile, seed: u64, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new("extremal", file.kind.name(), tol);
    match file.kind {
        Kind::Kernel => {
            let spec = file.kernel(tol)?;
            let d = kolmogorov_decompose(&spec, tol)?;
            let z = file.fixed_pairs(spec.x_size());
            let e = kernel_extremal(&spec, &z, &d, tol)?;
            r.decision("extreme", e.extreme, e.witness_dim as f64);
            if let Some(w) = &e.witness {
                r.artifact("witness", "D in the constrained commutant, ‖D‖ = 1", mat_doc(w));
            }
            if let Some((p, m)) = &e.split {
                split_kernels(file, &spec, &z, p, m, tol, &mut r)?;
            }
        }
        Kind::Cpmap => {
            let spec = file.cpmap(tol)?;
            let d = ksgns(&spec, tol)?;
            let e = cp_extremal(&spec, &d, tol)?;
            r.decision("extreme", e.extreme, e.witness_dim as f64);
            if let Some(w) = &e.witness {
                r.artifact("witness", "D in the constrained commutant, ‖D‖ = 1", mat_doc(w));
            }
            if let Some((p, m)) = &e.split {
                for (tag, s) in [("+", p), ("-", m)] {
                    let rep = cp_validate(s, tol)?;
                    r.verdict(format!("split {tag} is CP"), rep.cp, rep.min_eig, tol.psd_eig);
                    r.verdict(format!("split {tag} is covariant"), rep.covariant, rep.covariance_residual, tol.recon_fro);
                    r.artifact(format!("split {tag}"), "S with J†π(·)(I ± D)J", spec_value(&cpmap_file(file, s)));
                }
                let mid = midpoint(&p.values, &m.values, &spec.values);
                r.verdict("split midpoint", mid <= tol.recon_fro, mid, tol.recon_fro);
            }
        }
        Kind::Observable => {
            let spec = file.observable(tol)?;
            let kernel = observable_extremal_kernel(&spec, tol)?;
            let cp = observable_extremal_cp(&spec, tol)?;
            r.decision("extreme", kernel, 0.0);
            r.decision("extreme (kernel path)", kernel, 0.0);
            r.decision("extreme (CP path)", cp, 0.0);
            let mut agree = kernel == cp;
            let mut split = None;
            if spec.covariance.cocycle_trivial_on_sub() {
                let data = lambda_from_observable(&spec, seed, tol)?;
                let e = observable_extremal(&data, tol)?;
                r.decision("extreme (Λ path)", e.extreme, e.witness_dim as f64);
                r.verdicts[0].residual = e.witness_dim as f64;
                agree &= e.extreme == kernel;
                if let Some(w) = &e.witness {
                    r.artifact("witness", "D on M⁰ commuting with ρ, ‖D‖ = 1", mat_doc(w));
                }
                split = e.split;
            } else if !cp {
                let d = ksgns(&spec.as_cp_map()?, tol)?;
                let e = cp_extremal(&spec.as_cp_map()?, &d, tol)?;
                r.verdicts[0].residual = e.witness_dim as f64;
                if let Some(w) = &e.witness {
                    r.artifact("witness", "D in the constrained commutant, ‖D‖ = 1", mat_doc(w));
                }
                if let Some((p, m)) = e.split {
                    split = Some((
                        ObservableSpec::new(p.values, spec.covariance.clone())?,
                        ObservableSpec::new(m.values, spec.covariance.clone())?,
                    ));
                }
            }
            r.verdict("paths agree", agree, if agree { 0.0 } else { 1.0 }, 0.0);
            if let Some((p, m)) = split {
                for (tag, s) in [("+", &p), ("-", &m)] {
                    let mut sub = Report::new("validate", "observable", tol);
                    validate_observable_into(s, tol, &mut sub)?;
                    for v in sub.verdicts {
                        r.verdict(format!("split {tag}: {}", v.name), v.value, v.residual, v.tol);
                    }
                    r.artifact(
                        format!("split {tag}"),
                        "observable with effects built from I ± D",
                        spec_value(&observable_file(file.group.as_ref(), s)),
                    );
                }
                let mid = midpoint(&p.effects, &m.effects, &spec.effects);
                r.verdict("split midpoint", mid <= tol.recon_fro, mid, tol.recon_fro);
            }
        }
        Kind::Instrument => {
            let spec = file.instrument(tol)?;
            let e = instrument_extremal(&spec, tol)?;
            r.decision("extreme", e.extreme, 0.0);
            r.decision("extreme (CP path)", e.cp_verdict, 0.0);
            r.decision("extreme (ancilla path)", e.ancilla_verdict, 0.0);
            r.verdict("paths agree", e.cp_verdict == e.ancilla_verdict, 0.0, 0.0);
            if let Some(w) = &e.witness {
                r.artifact("witness", "D in the constrained commutant, ‖D‖ = 1", mat_doc(w));
            }
            if let Some((p, m)) = &e.split {
                for (tag, s) in [("+", p), ("-", m)] {
                    let mut sub = Report::new("validate", "instrument", tol);
                    validate_instrument_into(s, tol, &mut sub)?;
                    for v in sub.verdicts {
                        r.verdict(format!("split {tag}: {}", v.name), v.value, v.residual, v.tol);
                    }
                    r.artifact(
                        format!("split {tag}"),
                        "instrument built from I ± D",
                        spec_value(&instrument_file(file.group.as_ref(), s)),
                    );
                }
                let mid = midpoint(&p.choi, &m.choi, &spec.choi);
                r.verdict("split midpoint", mid <= tol.recon_fro, mid, tol.recon_fro);
            }
        }
        k => return Err(wrong_kind("extremal", k)),
    }
    Ok(r)
}

fn midpoint(p: &[CMatrix], m: &[CMatrix], orig: &[CMatrix]) -> f64 {
    p.iter()
        .zip(m)
        .zip(orig)
        .map(|((a, b), o)| fro(&((a + b) * covkit::C64::new(0.5, 0.0) - o)))
        .fold(0.0, f64::max)
}

fn split_kernels(
    file: &SpecFile,
    spec: &CovariantKernelSpec,
    z: &[(usize, usize)],
    p: &CovariantKernelSpec,
    m: &CovariantKernelSpec,
    tol: &Tolerances,
    r: &mut Report,
) -> Result<()> {
    for (tag, s) in [("+", p), ("-", m)] {
        let rep = validate_kernel(s, tol)?;
        r.verdict(format!("split {tag} is positive"), rep.positive, rep.min_eig, tol.psd_eig);
        r.verdict(format!("split {tag} is covariant"), rep.covariant, rep.covariance_residual, tol.recon_fro);
        let fixed = z
            .iter()
            .map(|&(x, y)| fro(&(&s.blocks[x][y] - &spec.blocks[x][y])))
            .fold(0.0, f64::max);
        r.verdict(format!("split {tag} agrees on the fixed pairs"), fixed <= tol.recon_fro, fixed, tol.recon_fro);
        r.artifact(format!("split {tag}"), "kernel built from I ± D", spec_value(&kernel_file(file, s)));
    }
    let flat = |k: &CovariantKernelSpec| k.blocks.iter().flatten().cloned().collect::<Vec<_>>();
    let mid = midpoint(&flat(p), &flat(m), &flat(spec));
    r.verdict("split midpoint", mid <= tol.recon_fro, mid, tol.recon_fro);
    Ok(())
}

// ---- kraus ----

pub fn kraus(file: &SpecFile, tol: &Tolerances) -> Result<Report> {
    let mut r = Report::new("kraus", file.kind.name(), tol);
    match file.kind {
        Kind::Cpmap => {
            let spec = file.cpmap(tol)?;
            let d = ksgns(&spec, tol)?;
            let ops = kraus_extract(&spec, &d, tol)?;
            let rank = spec.choi_rank(tol);
            r.verdict("Kraus count equals Choi rank", ops.len() == rank, ops.len().abs_diff(rank) as f64, 0.0);
            let mut worst = 0.0f64;
            for (u, value) in spec.values.iter().enumerate() {
                let e = spec.algebra.unit_matrix(u);
                let sum = ops.iter().fold(zeros(value.nrows(), value.ncols()), |acc, a| acc + a.adjoint() * &e * a);
                worst = worst.max(fro(&(sum - value)));
            }
            r.verdict("S_b = ΣA†bA on matrix units", worst <= tol.recon_fro * spec_scale(&spec.values), worst, tol.recon_fro);
            r.artifact("kraus", "Kraus operators A_i with S_b = ΣA_i†bA_i", mats(&ops));
        }
        Kind::Instrument => {
            let spec = file.instrument(tol)?;
            let mut worst = 0.0f64;
            let mut all = Vec::new();
            for w in 0..spec.omega_size() {
                let ops = spec.kraus(w, tol);
                let choi = kraus_to_choi(&ops, spec.k_dim, spec.v_dim())?;
                worst = worst.max(fro(&(choi - &spec.choi[w])));
                all.push(mats(&ops));
            }
            r.verdict("Choi matrices rebuilt from Kraus operators", worst <= tol.recon_fro * spec_scale(&spec.choi), worst, tol.recon_fro);
            r.artifact("kraus", "per-outcome Kraus operators from the Choi eigendecomposition", all);
        }
        k => return Err(wrong_kind("kraus", k)),
    }
    Ok(r)
}

fn spec_scale(ms: &[CMatrix]) -> f64 {
    ms.iter().map(fro).fold(1.0, f64::max)
}

// ---- phase-space and sample ----

pub fn phase_space_file(file: &SpecFile, tol: &Tolerances) -> Result<SpecFile> {
    if file.kind != Kind::PhaseSpace {
        return Err(wrong_kind("phase-space", file.kind));
    }
    let (d, b) = file.phase_space_seed(tol)?;
    let ps = phase_space(d, b, tol)?;
    Ok(instrument_file(None, &ps.instrument))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub outcome: usize,
    pub probability: f64,
    pub post_state: format::Mat,
}

pub fn sample(file: &SpecFile, state: &CMatrix, n: usize, seed: u64, tol: &Tolerances) -> Result<Vec<Record>> {
    let spec = match file.kind {
        Kind::Instrument => file.instrument(tol)?,
        Kind::PhaseSpace => {
            let (d, b) = file.phase_space_seed(tol)?;
            phase_space(d, b, tol)?.instrument
        }
        k => return Err(wrong_kind("sample", k)),
    };
    let draws = sample_many(&spec, state, n, seed, tol)?;
    Ok(draws
        .into_iter()
        .map(|s| Record {
            outcome: s.outcome,
            probability: s.probability,
            post_state: mat_doc(&s.post_state),
        })
        .collect())
}
