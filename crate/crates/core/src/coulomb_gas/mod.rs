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


//! Discrete Coulomb/log gas: energy, minimizers, the splitting oracle and
//! window statistics.

mod config;
mod energy;
mod minimize;
mod splitting;
mod windows;

pub use config::PointConfiguration;
pub use energy::{gradient, hamiltonian, Confinement, QuadraticForm};
pub(crate) use energy::{energy_flat, kernel};
pub use minimize::{
    minimize_fekete, minimize_fekete_from, minimize_local_wn, radial_shells, MinimizationDiagnostics, MinimizeOptions, Minimizer,
    Shell, StartOutcome,
};
pub use splitting::{disk_zeta, splitting_check, SplittingReport, DISK_MEAN_FIELD_ENERGY};
pub use windows::{window_point_counts, WindowCount};
