//! Currents as limits of regularized forms: bump test forms, pairings and their
//! extrapolation, simultaneous and iterated limits.

mod bump;
mod extrapolate;
mod limits;
mod pair;

pub use bump::{
    bump_form, bump_form_with, positivity_check, radial_cutoff, smooth_step, smooth_step_derivative,
    volume_coefficient, BumpForm, BumpSpec, Composition, TestForm,
};
pub use extrapolate::{extrapolate, richardson, Extrapolation, LevelReport, PairingReport, Verdict};
pub use limits::{
    check_codim, chern_character_current, chern_character_direct, chern_character_local, chern_current,
    exact_test_form, family_pairing, iterated_segre_limit, mass_estimate, segre_sign_structure,
    simultaneous_limit, test_form_mass, AssembledCurrent, Constituent, CurrentFactor, CurrentProductSpec,
    LimitMode, LimitOptions, MassRow, MassTable,
};
pub use pair::{pair, pair_nodewise};

#[cfg(test)]
mod tests;
