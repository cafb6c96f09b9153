//! Elaboration engine for a small dependent type theory: terms and
//! universes, an environment of checked declarations, reduction and
//! definitional equality, and a justification-tracking constraint solver
//! with higher-order unification used by the surface-language elaborator.

pub mod constraint;
pub mod elaborate;
pub mod env;
pub mod inductive;
pub mod justify;
pub mod level;
pub mod name;
pub mod pretty;
pub mod reduce;
pub mod preterm;
pub mod simp;
pub mod solver;
pub mod span;
pub mod term;
#[cfg(feature = "testing")]
pub mod testing;
pub mod typing;
