//! Multiscale thermal modeling of chip interconnect (BEOL) stacks.
//!
//! The crate reads a GDSII layout and a process-stack description, builds
//! voxelized representative volume elements (RVEs) around sample points,
//! homogenizes each RVE into an anisotropic conductivity tensor and solves
//! the chip-scale steady heat equation with those tensors.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod gds;
pub mod geometry;
pub mod numerics;
pub mod stack;
pub mod hex8;
pub mod homogenize;
pub mod rve;
pub mod vtk;
pub mod synthetic;
pub mod macro_fem;
pub mod pipeline;
