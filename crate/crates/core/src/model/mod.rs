//! The multi-branch 1D convolutional classifier.

mod config;
mod io;
mod network;

pub use config::{ArchConfig, BranchLayout, BranchSpec, PoolSpec};
pub use io::{load, load_expecting, save};
pub use network::{Branch, FcBlock, ForwardPass, Gradients, ModelState};
