use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::instrument::{validate_instrument, InstrumentSpec};
use crate::error::{Error, Result};
use crate::numlin::{fro, min_eigenvalue, zeros, CMatrix, Tolerances, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub outcome: usize,
    pub probability: f64,
    /// Normalized state on ℂ^K.
    pub post_state: CMatrix,
}

fn check_state(state: &CMatrix, v: usize, tol: &Tolerances) -> Result<()> {
    if state.shape() != (v, v) {
        return Err(Error::dim(format!("state must be {v}x{v}")));
    }
    let h = fro(&(state - state.adjoint()));
    let e = min_eigenvalue(state)?;
    let t = state.trace();
    if h > tol.psd_eig || e < -tol.psd_eig || (t - C64::new(1.0, 0.0)).norm() > tol.recon_fro {
        return Err(Error::invalid(format!(
            "state must be PSD with trace 1 (min eigenvalue {e:.3e}, trace {:.6})",
            t.re
        )));
    }
    Ok(())
}

/// Γ̃_ω(ρ) with tr(Γ̃_ω(ρ) b) = tr(ρ Γ_ω(b)).
pub fn predual(spec: &InstrumentSpec, omega: usize, state: &CMatrix) -> CMatrix {
    let k = spec.k_dim;
    let mut out = zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut e = zeros(k, k);
            e[(a, b)] = C64::new(1.0, 0.0);
            out[(b, a)] = (state * spec.value(omega, &e)).trace();
        }
    }
    out
}

/// p(ω) = tr(ρ Γ_ω(I)), clipped at 0.
pub fn outcome_probabilities(spec: &InstrumentSpec, state: &CMatrix, tol: &Tolerances) -> Result<Vec<f64>> {
    let r = validate_instrument(spec, tol)?;
    if !r.ok() {
        return Err(Error::invalid(format!(
            "not a covariant instrument: {}",
            r.first_violation.unwrap_or_default()
        )));
    }
    check_state(state, spec.v_dim(), tol)?;
    Ok((0..spec.omega_size())
        .map(|w| (state * spec.unit_value(w)).trace().re.max(0.0))
        .collect())
}

fn draw(spec: &InstrumentSpec, state: &CMatrix, probs: &[f64], rng: &mut ChaCha8Rng) -> Result<SampleOutcome> {
    let dist = WeightedIndex::new(probs).map_err(|e| Error::invalid(format!("outcome distribution: {e}")))?;
    let outcome = dist.sample(rng);
    let probability = probs[outcome];
    let post_state = predual(spec, outcome, state) / C64::new(probability, 0.0);
    Ok(SampleOutcome {
        outcome,
        probability,
        post_state,
    })
}

pub fn sample(spec: &InstrumentSpec, state: &CMatrix, seed: u64, tol: &Tolerances) -> Result<SampleOutcome> {
    let probs = outcome_probabilities(spec, state, tol)?;
    draw(spec, state, &probs, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `n` independent draws from one seeded stream.
pub fn sample_many(
    spec: &InstrumentSpec,
    state: &CMatrix,
    n: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<SampleOutcome>> {
    let probs = outcome_probabilities(spec, state, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| draw(spec, state, &probs, &mut rng)).collect()
}
