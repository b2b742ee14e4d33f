//! Observables and instruments on a finite homogeneous space Ω = G/H.
//!
//! Measures follow the counting convention: each ω ∈ Ω has weight 1, H carries the
//! uniform probability and each element of G has weight 1/|H|. With these weights
//! Σ_{g∈G} f(g)/|H| = Σ_ω Σ_{h∈H} f(s(ω)h)/|H| holds identically.

mod decomposable;
mod imprimitivity;
mod instrument;
mod observable;
mod sampler;
mod square;

pub use decomposable::{decomposable_extract, fiber_projection, DecomposableOp};
pub use imprimitivity::{canonical_system, wigner_rotation, CanonicalSystem, WignerRotation};
pub use instrument::{
    b_from_instrument, b_via_lambda, check_b_family, instrument_extremal, instrument_from_b, kraus_to_choi,
    marginal_channel, marginal_observable, validate_instrument, CovariantInstrumentData, InstrumentExtremality,
    InstrumentReport, InstrumentSpec,
};
pub use observable::{
    lambda_from_observable, naimark, observable_extremal, observable_extremal_cp, observable_extremal_kernel,
    observable_from_lambda, validate_observable, CovariantObservableData, NaimarkData, ObservableExtremality,
    ObservableReport, ObservableSpec,
};
pub use sampler::{outcome_probabilities, predual, sample, sample_many, SampleOutcome};
pub use square::{phase_space, sq_constant, sq_structure, PhaseSpaceInstrument, SqStructure};

use crate::error::{Error, Result};
use crate::fingroup::{MultiplierRep, SubgroupData};

/// The symmetry of an outcome space Ω = G/H together with the representation U on ℂ^{V}.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub sub: SubgroupData,
    pub u: MultiplierRep,
}

impl Covariance {
    pub fn new(sub: SubgroupData, u: MultiplierRep) -> Result<Self> {
        if sub.parent().order() != u.group().order() {
            return Err(Error::dim("subgroup and representation live on different groups"));
        }
        Ok(Covariance { sub, u })
    }

    /// Ω = {pt} under the trivial group.
    pub fn trivial(v_dim: usize) -> Self {
        let g = crate::fingroup::FiniteGroup::trivial();
        Covariance {
            sub: SubgroupData::whole(g.clone()),
            u: MultiplierRep::trivial(g, v_dim),
        }
    }

    pub fn omega_size(&self) -> usize {
        self.sub.omega_size()
    }

    pub fn v_dim(&self) -> usize {
        self.u.dim()
    }

    /// U(s(ω)).
    pub fn u_at(&self, omega: usize) -> &crate::numlin::CMatrix {
        self.u.get(self.sub.section(omega))
    }

    /// Whether σ(h, h') = 1 for all h, h' in H, which the Λ-level description needs.
    pub fn cocycle_trivial_on_sub(&self) -> bool {
        let m = self.sub.members();
        m.iter()
            .all(|&a| m.iter().all(|&b| (self.u.cocycle().get(a, b) - crate::numlin::C64::new(1.0, 0.0)).norm() < 1e-9))
    }

    /// Permutation representation on Fun(Ω), e_ω ↦ e_{gω}.
    pub fn permutation(&self) -> MultiplierRep {
        MultiplierRep::permutation(&self.sub.action())
    }
}
