//! Finite groups, their actions and coset spaces, 2-cocycles, multiplier representations,
//! irreducible decompositions and the finite Fourier transform.

mod group;
mod heisenberg;
mod irrep;
mod rep;

pub use group::{FiniteGroup, GroupAction, SubgroupData};
pub use heisenberg::{clock, heisenberg_rep, shift, Heisenberg};
pub use irrep::{irrep_decompose, Irrep, IrrepBlock, IrrepDecomposition, IrrepSet};
pub use rep::{central_extension, CentralExtension, MultiplierRep, SubgroupRep, TwoCocycle};
