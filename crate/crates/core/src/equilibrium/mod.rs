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

//! Mean-field solvers: equilibrium measures, the effective potential ζ, the
//! Meissner profile h_0 with λ_Ω, and the mean-field vortex obstacle problem.

pub mod conv;
mod grid;
mod measure;
mod meissner;
mod multigrid;

pub use crate::potential::PotentialSpec;
pub use grid::GridField;
pub use meissner::{
    solve_gl_obstacle, solve_gl_obstacle_with, solve_meissner_h0, solve_meissner_h0_with, unit_disk_lambda_omega, Domain,
    MeissnerSolution, RelaxationOptions, VortexObstacleSolution,
};
pub(crate) use measure::radial_support_estimate;
pub use measure::{
    effective_potential_report, effective_potential_zeta, mean_field_energy, solve_equilibrium_measure,
    solve_equilibrium_measure_with, zeta_tolerance, EquilibriumDiagnostics, EquilibriumMeasure, EquilibriumOptions,
    GridSpec, LevelReport, MeasureSampler, ZetaReport,
};
