//! Planar parallel-jaw grasping simulator and an adversarial self-supervised
//! learning framework built on top of it.
//!
//! A *protagonist* convnet learns to pick planar grasps `(x, y, θ)` from image
//! patches; an *adversary* convnet learns to break successful grasps, either by
//! shaking the gripper or by snatching the object with a second gripper. The
//! adversary's confidence is folded back into the protagonist's labels so that
//! grasps which merely close on the object are worth less than grasps that
//! survive perturbation.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its arguments and seeds; file formats, the CLI and the
//! experiment runner live in the `advgrasp` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod math;
pub mod neural;
pub mod policy;
pub mod rng;
pub mod scene;
pub mod sim;
pub mod trainer;

pub use error::{Error, Result};
