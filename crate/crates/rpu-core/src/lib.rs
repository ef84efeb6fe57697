//! Core of the RPU software stack.
//!
//! Everything here is `no_std` with `alloc`: modular arithmetic on words up
//! to 126 bits, reference ring kernels, the instruction set, the cycle
//! simulator, the NTT kernel generator and the chip-level performance model.
//! File formats, the command line and host IO live in the `rpu` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod codegen;
pub mod isa;
pub mod modmath;
pub mod perf;
pub mod ring;
pub mod sim;
