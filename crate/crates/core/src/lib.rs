pub mod cli;
pub mod construction;
pub mod asymptotics;
pub mod curve_flow;
pub mod domain;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod legendre;
pub mod linalg;
pub mod reference;
pub mod stencil;

pub use error::{Error, Result};
