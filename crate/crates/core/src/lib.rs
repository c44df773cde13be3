pub mod bessel;
pub mod chebyshev;
pub mod edge;
pub mod forward;
pub mod graph;
pub mod graphfile;
pub mod lstsq;
pub mod nsbf;
pub mod peel;
pub mod pipeline;
pub mod ode;
pub mod potential;
pub mod sheaf_inverse;
pub mod stencil;
pub mod weyl;
