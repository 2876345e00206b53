//! Chen iterated integrals and exponential iterated integrals of holomorphic
//! 1-forms along piecewise-smooth paths, their Hopf algebra, homotopy probes,
//! and the trefoil-complement example in which exponential iterated
//! integrals separate loops that ordinary ones cannot.

pub mod error;
pub mod expr;
pub mod geometry;
pub mod homotopy;
pub mod hopf;
pub mod ode;
pub mod quadrature;
pub mod scene;
pub mod transport;
pub mod trefoil;
pub mod word;

pub use error::{Error, Result};
pub use expr::Expr;
pub use geometry::{Domain, FormId, FormModule, FormTable, OneForm, Path, Side};
pub use hopf::{Algebra, ExpSum, TensorSum};
pub use num_complex::Complex64;
pub use transport::{Connection, Evaluator, Settings, TransportResult};
pub use word::{ExpWord, Exponent};
