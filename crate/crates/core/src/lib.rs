//! Classical ensemble dynamics and Feynman–Vernon closed forms for a harmonic
//! oscillator weakly coupled to the chaotic Nelson system.

pub mod ensemble;
pub mod error;
pub mod laplace;
pub mod model;
pub mod response;
pub mod series;
pub mod superprop;
pub mod symplectic;

pub use error::{Error, Result};
