//! Hydrodynamic limit: characteristics, the `nu_t` family, the quantized
//! R-transform and the Markov–Krein map.

pub mod characteristic;
pub mod field;
pub mod inversion;
pub mod measure;
pub mod nu;
pub mod quadrature;
pub mod quantized;

pub use characteristic::{
    characteristic_forward, characteristic_inverse, characteristic_jet, in_omega, lifetime, limit_stieltjes,
    omega_membership, CharacteristicJet, LimitField,
};
pub use field::{AnalyticField, FnField, Jet, MarkovKreinTransform};
pub use inversion::{stieltjes_inverse, stieltjes_inversion};
pub use measure::{stieltjes_of, MeasureRep, StieltjesTransform};
pub use nu::{nu_t_density, nu_t_stieltjes_check, NuField};
pub use quantized::{additivity_residual, markov_krein_q, perelomov_popov, quantized_r};
