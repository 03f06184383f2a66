//! Encrypted deep learning primitives: a leveled CKKS engine over the
//! negacyclic ring, interchangeable evaluation backends, an encrypted 1D-CNN
//! inference graph with polynomial activations, and the `EDLS` wire format.

pub mod backend;
pub mod ckks;
pub mod nn;
pub mod registry;
pub mod ring;
pub mod wire;
