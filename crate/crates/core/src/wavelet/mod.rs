//! Two-channel filter-bank wavelet transforms.
//!
//! Both the decimated transform (DWT) and the undecimated a trous variant
//! (UWT) run over finite signals with periodic extension by default. A
//! decomposition to depth `J` holds `J + 1` detail arrays `d_0..d_J` and the
//! approximation `c_J`.

mod basis;
mod transform;

pub use basis::{basis_registry, Filter, WaveletBasis};
pub use transform::{
    default_levels, dwt_decompose, dwt_reconstruct, iuwt_reconstruct, uwt_decompose, Boundary,
    Mode, WaveletDecomposition,
};
