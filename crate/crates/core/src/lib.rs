//! Dense noisy quantum simulation and the quantum compressive sensing (QCS)
//! pipeline built on top of it.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`]: statevectors, density matrices, Pauli algebra, gates,
//!   measurement and postselection.
//! * [`noise`]: Kraus channels and their stochastic statevector unravelings.
//! * [`encoding`]: the pixel to qubit angle encoding and its inverse.
//! * [`bornmachine`]: quantum-average training (direct sum and the
//!   postselected circuit), noisy training mixtures and fidelity sweeps.
//! * [`qite`]: quantum imaginary time evolution with tomography-driven
//!   unitary fits, shot noise and the discard heuristic.
//! * [`pipeline`]: sensing, projection Hamiltonians, projection, sampling
//!   and sRMSE scoring.
//! * [`dataio`]: synthetic LIDAR quartile data, preprocessing and CSV IO.

pub mod bornmachine;
pub mod dataio;
pub mod encoding;
mod error;
pub mod noise;
pub mod pipeline;
pub mod qcore;
pub mod qite;
pub mod rng;

pub use error::{QcsError, Result};
