//! Exact population values of the importance indices on finite joints and
//! linear-Gaussian models.

mod discrete;
mod exact;
pub mod fixtures;
mod gaussian;

pub use discrete::{DiscreteJoint, MAX_ATOMS};
pub use exact::{
    exact_cond_mean, exact_index, exact_pfi, exact_sc_sage, exact_shapley, exact_tsi,
    exact_tsi_r2, exact_value_function, exact_value_table, factorization_deviation,
    shapley_from_values, CondMeanTable, IndexValue, Marginalization, TsiForm,
};
pub use gaussian::{gaussian_linear_index, gaussian_shapley, gaussian_value};
