//! Phasor neural networks trained with backpropagation and executed as
//! resonate-and-fire spiking networks, plus post-hoc spike sparsification.

pub mod data;
pub mod harness;
pub mod phasor;
pub mod seed;
pub mod sparsify;
pub mod spike;
pub mod trainer;
