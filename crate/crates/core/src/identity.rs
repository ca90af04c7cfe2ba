//! Router identities: the 4-byte id carried in accounting reports, the 20-byte
//! member address used by the contract, and ECDSA signing with the member key.

use std::fmt;

use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{Signature, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::musig::{KeyPair, PublicKey};

/// Router id as it appears in the RID/NID report fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RouterId(pub u32);

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// 20-byte member address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address(#[serde(with = "crate::hexser")] pub [u8; 20]);

impl Address {
    /// Last 20 bytes of SHA-256 over the compressed public key.
    pub fn from_public_key(key: &PublicKey) -> Self {
        let digest = Sha256::digest(key.to_bytes());
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest[12..]);
        Address(out)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0[..6]))
    }
}

/// Length of a compact `r || s` ECDSA signature.
pub const ECDSA_SIGNATURE_LEN: usize = 64;

/// ECDSA over SHA-256(message) with the key pair's secret.
pub fn ecdsa_sign(key: &KeyPair, message: &[u8]) -> [u8; ECDSA_SIGNATURE_LEN] {
    let signing = SigningKey::from(key.secret_scalar());
    let sig: Signature = signing.sign(message);
    let mut out = [0u8; ECDSA_SIGNATURE_LEN];
    out.copy_from_slice(&sig.to_bytes());
    out
}

pub fn ecdsa_verify(
    key: &PublicKey,
    message: &[u8],
    signature: &[u8; ECDSA_SIGNATURE_LEN],
) -> bool {
    let Ok(vk) = VerifyingKey::from_sec1_bytes(&key.to_bytes()) else {
        return false;
    };
    let Ok(sig) = Signature::from_slice(signature) else {
        return false;
    };
    vk.verify(message, &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn ecdsa_roundtrip_and_rejection() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = KeyPair::generate(&mut rng);
        let b = KeyPair::generate(&mut rng);
        let sig = ecdsa_sign(&a, b"report");
        assert!(ecdsa_verify(a.public(), b"report", &sig));
        assert!(!ecdsa_verify(b.public(), b"report", &sig));
        assert!(!ecdsa_verify(a.public(), b"repor7", &sig));
        let mut bad = sig;
        bad[10] ^= 1;
        assert!(!ecdsa_verify(a.public(), b"report", &bad));
    }

    #[test]
    fn address_is_stable() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a = KeyPair::generate(&mut rng);
        assert_eq!(
            Address::from_public_key(a.public()),
            Address::from_public_key(a.public())
        );
    }
}
