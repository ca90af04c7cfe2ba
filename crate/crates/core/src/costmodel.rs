//! Closed-form storage and traffic estimates.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::dpifa::REPORT_MESSAGE_LEN;
use crate::musig::{combination_count, MuSigError, POINT_LEN};
use crate::netsim::MUSIG_BYTES_PER_SIGNER;
use crate::settlement::{announcement_len, stp_len, CONFIRMATION_LEN};
use crate::Percent;

const HASH_LEN: u64 = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error(transparent)]
    Threshold(#[from] MuSigError),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostInputs {
    /// Routers.
    pub n: usize,
    pub zeta: Percent,
    /// Average neighbors per router.
    pub nu: BigRational,
    /// Report period, seconds.
    pub lambda: u64,
    /// Settlement cycle length, seconds.
    pub cycle_seconds: u64,
}

impl CostInputs {
    pub fn validate(&self) -> Result<(), CostError> {
        if self.n == 0 {
            return Err(CostError::NonPositive("n"));
        }
        if self.lambda == 0 {
            return Err(CostError::NonPositive("lambda"));
        }
        if self.nu < BigRational::zero() {
            return Err(CostError::NonPositive("nu"));
        }
        combination_count(self.n, self.zeta)?;
        Ok(())
    }

    /// Whole report periods in a cycle.
    pub fn periods(&self) -> u64 {
        self.cycle_seconds / self.lambda
    }
}

/// Number of permitted cosigner subsets.
pub fn combo_count(n: usize, zeta: Percent) -> Result<BigUint, CostError> {
    Ok(combination_count(n, zeta)?)
}

/// Aggregated keys plus `2C - 1` tree hashes, as if the tree were unpadded.
pub fn musig_storage_bytes(n: usize, zeta: Percent) -> Result<BigUint, CostError> {
    let c = combo_count(n, zeta)?;
    Ok(&c * POINT_LEN as u64 + (&c * 2u32 - 1u32) * HASH_LEN)
}

/// Same, with the tree padded to a power-of-two leaf count as actually built.
pub fn musig_storage_bytes_as_built(n: usize, zeta: Percent) -> Result<BigUint, CostError> {
    let c = combo_count(n, zeta)?;
    let padded = if c.count_ones() == 1 {
        c.clone()
    } else {
        BigUint::from(1u8) << c.bits()
    };
    Ok(&c * POINT_LEN as u64 + (padded * 2u32 - 1u32) * HASH_LEN)
}

/// Reports kept for one cycle: `116 * nu * n * periods`, rounded down.
pub fn dpifa_storage_bytes(inputs: &CostInputs) -> u128 {
    let total = &inputs.nu
        * BigRational::from_integer(
            (REPORT_MESSAGE_LEN as u64 * inputs.n as u64 * inputs.periods()).into(),
        );
    total.floor().to_integer().to_u128().unwrap_or(u128::MAX)
}

/// Bytes put on the network in one cycle, broadcasts counted once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleTraffic {
    pub dpifa: u128,
    pub stp: u128,
    pub confirmation: u128,
    pub musig: u128,
}

impl CycleTraffic {
    pub fn total(&self) -> u128 {
        self.dpifa + self.stp + self.confirmation + self.musig
    }
}

/// Every member confirms each of the `proposers` proposals; the first one
/// gathers all members into the multi-signature.
pub fn cycle_traffic_bytes(inputs: &CostInputs, proposers: usize) -> CycleTraffic {
    let n = inputs.n;
    let others = n.saturating_sub(1);
    CycleTraffic {
        dpifa: dpifa_storage_bytes(inputs),
        stp: (proposers * stp_len(n)) as u128,
        confirmation: (proposers * others * CONFIRMATION_LEN + announcement_len(others)) as u128,
        musig: (n * MUSIG_BYTES_PER_SIGNER) as u128,
    }
}

/// `bytes` in binary megabytes with two decimals, e.g. `3.83 MiB`.
pub fn format_mib(bytes: u128) -> String {
    format!("{:.2} MiB", bytes as f64 / (1u64 << 20) as f64)
}
