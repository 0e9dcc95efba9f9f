//! Matrix-free limited-memory BFGS whose initial Hessian at every iteration
//! is `B0 = tau*I + A`, where `A` is the Hessian of the regularizer and
//! `tau` is fitted to the latest secant pair.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`], [`grid`] and [`operator`]: dense vector kernels and the
//!   matrix-free [`LinearOperator`] contract, including the finite-difference
//!   Laplacian, biharmonic (curvature) and elastic regularizer operators.
//! - [`krylov`]: Jacobi-preconditioned conjugate gradients, used to apply
//!   `B0^{-1}` inside the two-loop recursion.
//! - [`scaling`]: the secant-fitted scalars (Dp, Dz, Du, GM) and the classic
//!   Oren-Luenberger scalings; [`strategy`] wraps all eight initializations
//!   behind the [`InitStrategy`] trait and a name-keyed [`StrategyRegistry`].
//! - [`lbfgs`]: memory, two-loop recursion, Armijo backtracking, stopping
//!   tests and the L-BFGS / steepest-descent drivers.
//! - [`problems`]: the regularized quadratic family and a small SSD image
//!   registration objective.
//!
//! ```
//! use reginit::lbfgs::{lbfgs_minimize, OptimizerConfig};
//! use reginit::problems::QuadraticProblem;
//! use reginit::strategy::StrategyRegistry;
//!
//! let problem = QuadraticProblem::build(64, 1e-1, 14.0, 7).unwrap();
//! let strategy = StrategyRegistry::with_builtins().create("dp").unwrap();
//! let mut cfg = OptimizerConfig::new(strategy);
//! cfg.stopping.solution = Some(problem.minimizer().to_vec());
//! let run = lbfgs_minimize(&problem, &vec![0.0; 64], &cfg).unwrap();
//! assert!(run.record.final_rel_error.unwrap() <= 1e-5);
//! ```

pub mod error;
pub mod grid;
pub mod krylov;
pub mod lbfgs;
pub mod linalg;
pub mod objective;
pub mod operator;
pub mod problems;
pub mod scaling;
pub mod strategy;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use objective::Objective;
pub use operator::{LinearOperator, SharedOperator, ShiftedOperator};
pub use strategy::{InitStrategy, StrategyRegistry};
