pub mod coulomb_gas;
pub mod equilibrium;
pub mod error;
pub mod geom;
pub mod gibbs;
pub mod lattice;
pub mod potential;
pub mod quadrature;
pub mod renormalized;
pub mod special;
