use std::fmt;
use std::path::Path;

use spectrum_core::auction::AuctionError;
use spectrum_core::econometrics::EstimationError;
use spectrum_core::equilibrium::EquilibriumError;
use spectrum_core::market_data::MarketDataError;
use spectrum_core::montecarlo::MonteCarloError;

/// A validation or runtime failure, printed as `error[kind]: message` on one
/// line and mapped to exit status 1.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keep the diagnostic on a single line.
        let flat = self.message.replace(['\n', '\r'], " ");
        write!(f, "error[{}]: {}", self.kind, flat)
    }
}

macro_rules! from_core {
    ($ty:ty, $kind:literal) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new($kind, e.to_string())
            }
        }
    };
}

from_core!(AuctionError, "auction");
from_core!(EstimationError, "estimation");
from_core!(EquilibriumError, "model");
from_core!(MarketDataError, "data");
from_core!(MonteCarloError, "montecarlo");
from_core!(serde_json::Error, "json");
from_core!(csv::Error, "csv");

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
