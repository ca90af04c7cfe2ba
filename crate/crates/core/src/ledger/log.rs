use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Authorization, ContractParams, LedgerError};
use crate::musig::PublicKey;
use crate::settlement::Stp;
use crate::{Address, Hash32};

/// One applied ledger operation, as recorded in the operation log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerOp {
    Deploy {
        params: ContractParams,
        founder: PublicKey,
        deposit: u128,
    },
    Genesis {
        params: ContractParams,
        founders: Vec<(PublicKey, u128)>,
        #[serde(with = "crate::hexser")]
        root: Hash32,
    },
    Join {
        pubkey: PublicKey,
        deposit: u128,
        #[serde(with = "crate::hexser")]
        new_root: Hash32,
        auth: Authorization,
    },
    Leave {
        address: Address,
        #[serde(with = "crate::hexser")]
        new_root: Hash32,
        auth: Authorization,
    },
    Settle {
        #[serde(with = "stp_hex")]
        stp: Stp,
        auth: Authorization,
    },
    RegisterLinkPrice {
        owner: Address,
        neighbor: Address,
        price: u64,
    },
    BuyTokens {
        address: Address,
        wei: u128,
    },
    RedeemTokens {
        address: Address,
        tokens: u128,
    },
    AdvanceBlocks {
        blocks: u64,
    },
}

mod stp_hex {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::settlement::Stp;

    pub fn serialize<S: Serializer>(stp: &Stp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(stp.to_bytes()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Stp, D::Error> {
        let raw = hex::decode(String::deserialize(d)?).map_err(D::Error::custom)?;
        Stp::from_bytes(&raw).map_err(D::Error::custom)
    }
}

/// Writes one JSON record per line.
pub fn write_log<W: Write>(ops: &[LedgerOp], mut out: W) -> std::io::Result<()> {
    for op in ops {
        serde_json::to_writer(&mut out, op)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LedgerOp>, LedgerError> {
    let mut ops = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| LedgerError::Log(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        ops.push(
            serde_json::from_str(&line)
                .map_err(|e| LedgerError::Log(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(ops)
}
