//! Numerical toolkit for quasi-equilibrium problems on convex regions:
//! coercivity verification, restricted solving with lifting, hypothesis
//! falsifiers, and QVI/GNEP reductions.

pub mod bifunction;
pub mod catalog;
pub mod cli;
pub mod coercivity;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod map;
pub mod properties;
pub mod reductions;
pub mod region;
pub mod report;
pub mod solver;

pub use bifunction::{Bifunction, QuadraticBifunction};
pub use error::{QeqError, Result};
pub use instance::{Numerics, ProblemInstance, ProblemKind};
pub use linalg::{Matrix, Point};
pub use map::SetValuedMap;
pub use region::ConvexRegion;
