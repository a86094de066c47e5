//! Strong coupling: composite Gibbs states, the Hamiltonian of mean force,
//! effective potentials and the modified energy operator.

mod effective;
mod family;
mod model;

pub use effective::{
    exp_family_derivative, modified_energy_operator, potential_derivative, wilcox_derivative,
    EffectiveGibbs, ModifiedEnergy, DUAL_PATH_TOL,
};
pub use family::{
    continuity_defect, default_step, directional_derivative, directional_derivative_richardson,
    family_derivative, Dependency, DependencyMap, FnFamily, GibbsFamily, HmfFamily, LineFamily, OperatorFamily,
    PotentialSumFamily, DIFF_STEP,
};
pub use model::{
    composite_gibbs, effective_potential_sum, hmf, ChargedComposite, CompositeModel,
    CompositeModelJson, TotalCharge,
};
