//! Simulation toolkit for underwater acoustic DS-CDMA links.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod fec;
pub mod gf;
pub mod harness;
pub mod interleave;
pub mod macsim;
pub mod phy;
pub mod seed;
