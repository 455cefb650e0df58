//! Social navigation at desk scale: a 2D crowd simulator, reciprocal and
//! social-force pedestrian controllers, a diffusion policy trained by score
//! matching against critic gradients, posthoc action guidance, and an
//! evaluation bench.

pub mod controllers;
pub mod diffusion;
pub mod eval;
pub mod geom;
pub mod nets;
pub mod sim;
pub mod train;
pub mod util;
