//! Numerical and symbolic toolkit for averaged Green's functions of random
//! Schrödinger operators with Cauchy disorder.

pub mod cli;
pub mod config;
pub mod disorder;
pub mod grassmann;
pub mod lattice;
pub mod lloyd;
pub mod linalg;
pub mod mc;
pub mod quad;
pub mod resolvent;
pub mod superpolar;
pub mod verify;
