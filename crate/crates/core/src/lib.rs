//! Toolkit for measuring Kolmogorov-complexity extraction on a small
//! reference machine: a complexity oracle, exact finite-distribution
//! arithmetic, extractor-table generators, balance and rainbow checks, and
//! the complexity-based extraction demos built on top of them.

pub mod balance;
pub mod bits;
pub mod calibration;
pub mod cli;
pub mod dist;
pub mod error;
pub mod experiments;
pub mod gf2;
pub mod kx;
pub mod machine;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod table;

pub type Distribution64 = dist::Distribution<f64>;
pub type Distribution32 = dist::Distribution<f32>;
