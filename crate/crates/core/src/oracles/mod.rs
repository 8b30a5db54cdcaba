//! Classical reference solvers and analytic checks.

pub mod axisym;
pub mod manufactured;
pub mod nystrom;
pub mod sphere;

pub use axisym::{axisym_sphere_solve, gauss_legendre, AxisymSolution};
pub use manufactured::{check_manufactured, fd_bilaplacian, fd_laplacian, ManufacturedReport};
pub use nystrom::{nystrom_solve, LookupPotential, NystromSolution};
pub use sphere::{legendre, spherical_h, spherical_j, spherical_y, SphereSeries};
