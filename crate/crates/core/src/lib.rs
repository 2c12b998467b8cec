//! # heatsphere
//!
//! Heat kernels on the unit hypersphere `S^{n-1}` and the kernel-SVM pipeline
//! built on them.
//!
//! Feature vectors are mapped onto the sphere ([`sphere`]), compared through
//! one of five kernels ([`kernel`]): linear, Gaussian RBF, cosine, the
//! Gaussian-factor "parametrix" kernel ([`parametrix`]) and the exact heat
//! kernel given by its Gegenbauer expansion ([`heat`], [`gegenbauer`]).
//! [`svm`] trains soft-margin SVMs on the resulting Gram matrices,
//! [`experiments`] runs balanced, stratified cross-validated grid searches and
//! [`diffusion`] checks the exact kernel against Brownian motion on the sphere.
//!
//! ```
//! use heatsphere::heat::{k_exact, sweet_spot_time, ExactKernelParams};
//!
//! let n = 100;
//! let params = ExactKernelParams::new(n, sweet_spot_time(n, 1.0).unwrap()).unwrap();
//! let k = k_exact(0.5, &params).unwrap();
//! assert!(k > 0.0 && k < 1.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod dd;
pub mod diffusion;
pub mod error;
pub mod experiments;
pub mod gegenbauer;
pub mod heat;
pub mod kernel;
pub mod parametrix;
pub mod quadrature;
pub mod sphere;
pub mod svm;

pub use error::{Error, Result};
pub use kernel::{gram_matrix, kernel_eval, psd_check, GramMatrix, KernelKind, KernelSpec};
pub use sphere::{sphere_map, SphereMapKind, UnitVector};

/// Version tag written into every JSON document this crate emits.
pub const SCHEMA_VERSION: u32 = 1;
