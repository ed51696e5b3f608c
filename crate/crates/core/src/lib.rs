// range checks are written as `!(x > 0.0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod materials;
pub mod pfa;
pub mod quadrature;
pub mod roundtrip;
pub mod specfun;
pub mod spectrum;
