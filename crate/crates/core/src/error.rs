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

//! Error type shared by every numerical module.

use thiserror::Error;

/// Failure modes of the numerical routines.
///
/// The CLI maps [`Error::Validation`] and [`Error::InvalidParameter`] to exit
/// code 1 and everything else to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular configuration: {0}")]
    Singularity(String),
    #[error("requested accuracy not reached: {0}")]
    Accuracy(String),
    #[error("series diverges: {0}")]
    Divergence(String),
    #[error("solver did not converge: {0}")]
    Convergence(String),
    #[error("computational domain too small: {0}")]
    Domain(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("observable undefined: {0}")]
    Undefined(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::InvalidParameter(_) | Error::Model(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
