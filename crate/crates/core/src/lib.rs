pub mod data;
pub mod diagnosis;
pub mod error;
pub mod gaussian;
pub mod laplace;
pub mod linalg;
pub mod monitor;
pub mod pipeline;
pub mod serde_mat;
pub mod sim;
pub mod synth;
pub mod var;

pub use error::{Error, Result};
