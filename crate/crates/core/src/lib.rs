//! Consumption-savings agents that learn their continuation value by
//! temporal-difference learning with a small ReLU network, together with the
//! full-information benchmark they are compared against and the statistics
//! used to read the simulated panels.

pub mod agent;
pub mod analytics;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod neural;
pub mod polyfit;
pub mod rational;
pub mod sim;

pub use error::{Error, Result};
pub use model::{AgentState, IncomeState, IncomeTransition, ModelParams, SavingsGrid};
pub use rational::RationalSolution;
pub use agent::{LearningAgent, Transition};
pub use neural::EVModel;
pub use polyfit::PolySmoothedEV;
