//! Online training of recurrent spiking networks with eligibility propagation.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod demo;
pub mod error;
pub mod features;
pub mod linalg;
pub mod network;
pub mod neuron;
pub mod oracle;
pub mod trainer;

pub use error::{Error, Result};
