//! Dense complex linear algebra and seeded randomness for small Hilbert spaces.

mod eigh;
mod matrix;
mod rng;

pub(crate) use eigh::DEGENERACY_REL_TOL;
pub use eigh::{eigh, Eigh, DEFAULT_HERMITIAN_TOL};
pub use matrix::{ComplexMatrix, ComplexVector};
pub use rng::{haar_random_state, random_hermitian, random_unitary, sample_gaussian, SeededRng};

pub use num_complex::Complex64 as C64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
