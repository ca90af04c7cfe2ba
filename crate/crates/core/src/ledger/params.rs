use serde::{Deserialize, Serialize};

use super::LedgerError;
use crate::Percent;

/// Values fixed at deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractParams {
    /// Blocks per cycle.
    pub beta: u64,
    /// Report period, seconds.
    pub lambda: u64,
    /// Share of members whose signature is required.
    pub zeta: Percent,
    /// Tolerance for settlement entries.
    pub delta: Percent,
    /// Blocks a proposal anchor remains valid.
    pub xi: u64,
    /// Minimum ether value of a member's tokens, in wei.
    #[serde(with = "crate::units::ether")]
    pub tau: u128,
    /// Minimum join deposit, in wei.
    #[serde(with = "crate::units::ether")]
    pub phi: u128,
    /// Token subunits minted for the proposer on each settlement.
    #[serde(with = "crate::units::tokens")]
    pub reward: u64,
    /// Seconds per block.
    pub gamma: u64,
}

impl ContractParams {
    pub fn validate(&self) -> Result<(), LedgerError> {
        if !(5000..10_000).contains(&self.zeta.hundredths()) {
            return Err(LedgerError::Threshold(self.zeta));
        }
        if self.beta == 0 || self.gamma == 0 || self.lambda == 0 {
            return Err(LedgerError::InvalidParams(
                "beta, gamma and lambda must be positive",
            ));
        }
        if self.xi > self.beta {
            return Err(LedgerError::InvalidParams("xi must not exceed beta"));
        }
        if self.phi <= self.tau {
            return Err(LedgerError::InvalidParams("phi must exceed tau"));
        }
        Ok(())
    }

    pub fn cycle_seconds(&self) -> u64 {
        self.beta * self.gamma
    }

    /// Whole report periods per cycle.
    pub fn periods_per_cycle(&self) -> u64 {
        self.cycle_seconds() / self.lambda
    }
}
