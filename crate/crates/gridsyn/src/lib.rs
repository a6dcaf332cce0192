//! Simulation and distributed control of a grid-connected integrated energy
//! system (IES) that couples electricity and cooling production.
//!
//! The crate is organized around a pipeline:
//!
//! 1. [`plant`] — nonlinear dynamic model of the IES (23 states, 7 continuous
//!    inputs, 4 integer inputs, 4 disturbances, 2 outputs) with a fixed-step
//!    explicit integrator.
//! 2. [`netgraph`] — numeric Jacobians at an equilibrium, the augmented system
//!    matrix, and the binary adjacency matrix of the dynamics graph.
//! 3. [`decomp`] — vertical decomposition by dynamic time scale and horizontal
//!    decomposition by directed-modularity community detection.
//! 4. [`nlp`] — a dense SQP solver for the smooth constrained programs that
//!    every MPC agent solves.
//! 5. [`empc`] — the cooperative distributed economic MPC (one sequential slow
//!    agent, three iterative fast agents) plus supervisory-MPC baselines.
//! 6. [`scenario`] — external-condition profiles, prices, the regulation
//!    signal, a simplified day-ahead scheduler, and evaluation indices.
//!
//! With the `parallel` feature (default), community-detection restarts, the
//! per-iteration fast-agent solves, and sweep cells run on rayon; without it
//! everything runs sequentially through the same code paths.

pub mod decomp;
pub mod empc;
pub mod exec;
pub mod netgraph;
pub mod nlp;
pub mod plant;
pub mod scenario;

pub use plant::{ContinuousInput, Disturbance, IntegerInput, Output, PlantParams, PlantState};
