pub mod cpmaps;
pub mod cstar;
pub mod error;
pub mod fingroup;
pub mod instruments;
pub mod kernels;
pub mod numlin;
pub mod report;

pub use error::{Error, Result};
pub use numlin::{CMatrix, Tolerances, C64};
pub use report::{Certificate, Check};
