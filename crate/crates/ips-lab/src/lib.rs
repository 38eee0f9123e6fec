//! Simulation and verification laboratory for interacting particle systems.
//!
//! The crate bundles four families of tools that check each other:
//!
//! * [`lattice`] — finite windows of the countable groups the processes live
//!   on (tori, tree balls, hierarchical groups) with translation-invariant
//!   kernels and Liggett-Spitzer weights.
//! * [`oracle`] — exact transient analysis of tiny continuous-time Markov
//!   chains via uniformization; ground truth for every statistical check.
//! * [`contact`] and [`braco_resem`] — Harris graphical-representation
//!   simulation of contact processes, Gillespie simulation of
//!   branching-coalescing particle systems, Euler-Maruyama simulation of
//!   resampling-selection SDE systems, and the duality tests tying them
//!   together.
//! * [`wf_renorm`] and [`pde_solvers`] — Wright-Fisher diffusion machinery,
//!   Monte-Carlo log-Laplace renormalization operators, and deterministic
//!   solvers for the associated fixed-point PDE/ODE problems.
//!
//! The `examples/` directory carries one runnable program per capability;
//! the thin `ips-lab` binary drives the same operations from plain-text
//! configs (see [`cli_io`]).

pub mod bitset;
pub mod braco_resem;
pub mod cli_io;
pub mod contact;
pub mod error;
pub mod lattice;
pub mod oracle;
pub mod pde_solvers;
pub mod rngutil;
pub mod stats;
pub mod wf_renorm;

pub use error::{Error, Result};
