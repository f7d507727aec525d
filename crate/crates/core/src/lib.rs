//! Exact computations on the moduli spaces of polarised K3 surfaces:
//! Picard groups via Jacobi forms, Noether–Lefschetz divisors and their cone,
//! boundary coefficients from lattice theta series, and theta ghosts.

pub mod exact;
pub mod par;
pub mod classical;
pub mod modular;
pub mod jacobi;
pub mod heegner;
pub mod nl;
pub mod optimize;
pub mod cone;
pub mod lattice;
pub mod boundary;
pub mod ghosts;
pub mod io;
pub mod kodaira;
