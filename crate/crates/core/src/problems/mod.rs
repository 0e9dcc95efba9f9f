//! Test problems: the regularized quadratic family and SSD image
//! registration with curvature or elastic regularization.

mod image;
mod quadratic;
mod registration;

pub use image::{interp_bilinear, load_pgm, make_disc_pair, parse_pgm, write_pgm, ImageBuffer, PixelGradient};
pub use quadratic::QuadraticProblem;
pub use registration::{RegistrationProblem, Regularizer};
