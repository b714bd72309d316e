pub mod analysis;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod system;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector};
pub use num_complex::Complex64;
pub use tensor::{build_parafac_tensor, SignalTensor3};
