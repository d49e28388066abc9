// Copyright 2026 The coulomb-gas authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.


//! Metropolis sampling of the Gibbs measure with density ∝ exp(−β H_n),
//! chain observables and a thermodynamic-integration estimate of log Z.

mod chain;
mod free_energy;
mod observables;

pub use chain::{
    acceptance_probability, metropolis_step, move_energy, run_chain, transition_density, ChainOptions, ChainState,
    ChainStats,
};
pub use free_energy::{free_energy_leading, geometric_grid, FreeEnergyEstimate, FreeEnergyOptions, GridPoint};
pub use observables::{integrated_autocorrelation, psi6, radial_cdf};
