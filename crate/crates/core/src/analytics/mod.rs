//! Experience index, least squares, Welch tests and the table builders that
//! read simulated panels.

pub mod dist;
mod experience;
mod ols;
mod tables;
mod welch;

pub use experience::{experience_index, experience_weights, ExperienceIndex};
pub use ols::{design, ols, ols_clustered, OlsResult};
pub use tables::{
    annotate_experience, mpc_table, scarring_regression, write_mpc_table, write_scarring_table, MpcRow,
    ScarringOptions,
};
pub use welch::{mean_var, stars, welch_t, WelchResult};
