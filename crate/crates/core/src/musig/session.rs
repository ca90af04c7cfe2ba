use std::collections::BTreeMap;

use k256::ProjectivePoint;
use rand::{CryptoRng, RngCore};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::hash::{h_com, h_sig};
use super::keys::{aggregate_key, random_nonzero_scalar, scalar_from_bytes, scalar_to_bytes};
use super::keys::{AggregatedKey, KeyList, KeyPair, PublicKey, Scalar, POINT_LEN, SCALAR_LEN};
use super::MuSigError;
use crate::Hash32;

/// Encoded signature length: compressed `R` followed by `s`.
pub const SIGNATURE_LEN: usize = POINT_LEN + SCALAR_LEN;

/// Schnorr signature `(R, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiSignature {
    pub nonce_point: PublicKey,
    pub scalar_sum: Scalar,
}

impl MultiSignature {
    pub fn to_bytes(&self) -> [u8; SIGNATURE_LEN] {
        let mut out = [0u8; SIGNATURE_LEN];
        out[..POINT_LEN].copy_from_slice(&self.nonce_point.to_bytes());
        out[POINT_LEN..].copy_from_slice(&scalar_to_bytes(&self.scalar_sum));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MuSigError> {
        if bytes.len() != SIGNATURE_LEN {
            return Err(MuSigError::InvalidPoint);
        }
        let nonce_point = PublicKey::from_bytes(&bytes[..POINT_LEN])?;
        let scalar_sum = scalar_from_bytes(&bytes[POINT_LEN..])?;
        Ok(MultiSignature {
            nonce_point,
            scalar_sum,
        })
    }
}

impl Serialize for MultiSignature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for MultiSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(de::Error::custom)?;
        MultiSignature::from_bytes(&bytes).map_err(de::Error::custom)
    }
}

/// Accepts iff `g^s = R * X~^c` with `c = H_sig(X~, R, m)`.
pub fn verify(message: &[u8], key: &PublicKey, sig: &MultiSignature) -> bool {
    let c = h_sig(key, &sig.nonce_point, message);
    let lhs = ProjectivePoint::GENERATOR * sig.scalar_sum;
    let rhs = *sig.nonce_point.point() + *key.point() * c;
    lhs == rhs
}

/// Single-signer Schnorr signature verifiable with [`verify`] under the
/// signer's own public key.
pub fn schnorr_sign<R: RngCore + CryptoRng>(
    key: &KeyPair,
    message: &[u8],
    rng: &mut R,
) -> MultiSignature {
    loop {
        let r = random_nonzero_scalar(rng);
        let Ok(nonce_point) = PublicKey::from_point(ProjectivePoint::GENERATOR * r) else {
            continue;
        };
        let c = h_sig(key.public(), &nonce_point, message);
        return MultiSignature {
            nonce_point,
            scalar_sum: r + c * key.secret(),
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Fresh,
    Committed,
    Revealed,
    PartiallySigned,
    Complete,
    Aborted,
}

/// One signer's view of a three-round signing run.
///
/// Round 1 happens in [`MuSigSession::new`] (coefficients and `X~`). Round 2
/// is [`commit`](Self::commit) followed by [`reveal`](Self::reveal) once every
/// commitment arrived. Round 3 is [`partial_sign`](Self::partial_sign) and
/// [`combine`](Self::combine).
#[derive(Debug)]
pub struct MuSigSession {
    stage: Stage,
    message: Vec<u8>,
    own_key: KeyPair,
    aggregated: AggregatedKey,
    own_coefficient: Scalar,
    own_nonce: Option<Scalar>,
    own_public_nonce: Option<PublicKey>,
    commitments: BTreeMap<PublicKey, Hash32>,
    nonces: BTreeMap<PublicKey, PublicKey>,
    partials: BTreeMap<PublicKey, Scalar>,
    combined_nonce: Option<PublicKey>,
    challenge: Option<Scalar>,
}

impl MuSigSession {
    pub fn new(
        own_key: KeyPair,
        cosigners: KeyList,
        message: impl Into<Vec<u8>>,
    ) -> Result<Self, MuSigError> {
        let aggregated = aggregate_key(&cosigners)?;
        let own_coefficient = *aggregated
            .coefficient_of(own_key.public())
            .ok_or(MuSigError::NotACosigner)?;
        Ok(MuSigSession {
            stage: Stage::Fresh,
            message: message.into(),
            own_key,
            aggregated,
            own_coefficient,
            own_nonce: None,
            own_public_nonce: None,
            commitments: BTreeMap::new(),
            nonces: BTreeMap::new(),
            partials: BTreeMap::new(),
            combined_nonce: None,
            challenge: None,
        })
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn message(&self) -> &[u8] {
        &self.message
    }

    pub fn cosigners(&self) -> &KeyList {
        self.aggregated.source()
    }

    pub fn aggregated_key(&self) -> &AggregatedKey {
        &self.aggregated
    }

    pub fn own_public_key(&self) -> &PublicKey {
        self.own_key.public()
    }

    pub fn own_public_nonce(&self) -> Option<&PublicKey> {
        self.own_public_nonce.as_ref()
    }

    fn expect(&self, expected: Stage) -> Result<(), MuSigError> {
        if self.stage != expected {
            return Err(MuSigError::WrongStage {
                expected,
                found: self.stage,
            });
        }
        Ok(())
    }

    /// Draws a fresh nonce `r` and returns `t = H_com(g^r)`.
    pub fn commit<R: RngCore + CryptoRng>(&mut self, rng: &mut R) -> Result<Hash32, MuSigError> {
        self.expect(Stage::Fresh)?;
        let (r, big_r) = loop {
            let r = random_nonzero_scalar(rng);
            if let Ok(p) = PublicKey::from_point(ProjectivePoint::GENERATOR * r) {
                break (r, p);
            }
        };
        let t = h_com(&big_r);
        self.own_nonce = Some(r);
        self.own_public_nonce = Some(big_r);
        self.commitments.insert(*self.own_key.public(), t);
        self.stage = Stage::Committed;
        Ok(t)
    }

    /// Releases `R_1` only once a commitment from every cosigner is present.
    pub fn reveal(
        &mut self,
        commitments: &BTreeMap<PublicKey, Hash32>,
    ) -> Result<PublicKey, MuSigError> {
        self.expect(Stage::Committed)?;
        let own = *self.own_key.public();
        let mut collected = BTreeMap::new();
        for key in self.aggregated.source().iter() {
            let t = match commitments.get(key) {
                Some(t) => *t,
                None if *key == own => self.commitments[&own],
                None => return Err(MuSigError::MissingCommitment(key.to_string())),
            };
            if *key == own && t != self.commitments[&own] {
                return Err(MuSigError::OwnValueMismatch("commitment"));
            }
            collected.insert(*key, t);
        }
        self.commitments = collected;
        self.stage = Stage::Revealed;
        Ok(self.own_public_nonce.expect("set in commit"))
    }

    /// Checks every `R_i` against its commitment, then returns
    /// `s_1 = r_1 + c * a_1 * x_1`. Any mismatch aborts the session.
    pub fn partial_sign(
        &mut self,
        nonces: &BTreeMap<PublicKey, PublicKey>,
    ) -> Result<Scalar, MuSigError> {
        self.expect(Stage::Revealed)?;
        let own = *self.own_key.public();
        let own_nonce_point = self.own_public_nonce.expect("set in commit");
        let mut collected = BTreeMap::new();
        let mut big_r = ProjectivePoint::IDENTITY;
        for key in self.aggregated.source().iter() {
            let nonce = match nonces.get(key) {
                Some(n) => *n,
                None if *key == own => own_nonce_point,
                None => return Err(MuSigError::MissingNonce(key.to_string())),
            };
            if h_com(&nonce) != self.commitments[key] {
                self.stage = Stage::Aborted;
                return Err(MuSigError::CommitmentMismatch(key.to_string()));
            }
            big_r += *nonce.point();
            collected.insert(*key, nonce);
        }
        let combined = match PublicKey::from_point(big_r) {
            Ok(p) => p,
            Err(e) => {
                self.stage = Stage::Aborted;
                return Err(e);
            }
        };
        let c = h_sig(self.aggregated.point(), &combined, &self.message);
        let r = self.own_nonce.take().expect("set in commit");
        let s = r + c * self.own_coefficient * self.own_key.secret();
        self.nonces = collected;
        self.combined_nonce = Some(combined);
        self.challenge = Some(c);
        self.partials.insert(own, s);
        self.stage = Stage::PartiallySigned;
        Ok(s)
    }

    /// Sums all partial signatures into `(R, s)`.
    pub fn combine(
        &mut self,
        partials: &BTreeMap<PublicKey, Scalar>,
    ) -> Result<MultiSignature, MuSigError> {
        self.expect(Stage::PartiallySigned)?;
        let own = *self.own_key.public();
        let mut s = Scalar::ZERO;
        for key in self.aggregated.source().iter() {
            let part = match partials.get(key) {
                Some(p) => *p,
                None if *key == own => self.partials[&own],
                None => return Err(MuSigError::MissingPartial(key.to_string())),
            };
            if *key == own && part != self.partials[&own] {
                return Err(MuSigError::OwnValueMismatch("partial signature"));
            }
            s += part;
        }
        self.stage = Stage::Complete;
        Ok(MultiSignature {
            nonce_point: self.combined_nonce.expect("set in partial_sign"),
            scalar_sum: s,
        })
    }
}

/// Runs all three rounds locally for `signers` and returns the joint
/// signature with the aggregated key it verifies under.
pub fn sign_jointly<R: RngCore + CryptoRng>(
    signers: &[KeyPair],
    message: &[u8],
    rng: &mut R,
) -> Result<(MultiSignature, AggregatedKey), MuSigError> {
    let list = KeyList::new(signers.iter().map(|k| *k.public()).collect())?;
    let mut sessions = signers
        .iter()
        .map(|k| MuSigSession::new(k.clone(), list.clone(), message.to_vec()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut commitments = BTreeMap::new();
    for s in &mut sessions {
        commitments.insert(*s.own_public_key(), s.commit(rng)?);
    }
    let mut nonces = BTreeMap::new();
    for s in &mut sessions {
        nonces.insert(*s.own_public_key(), s.reveal(&commitments)?);
    }
    let mut partials = BTreeMap::new();
    for s in &mut sessions {
        partials.insert(*s.own_public_key(), s.partial_sign(&nonces)?);
    }
    let mut sig = None;
    for s in &mut sessions {
        let combined = s.combine(&partials)?;
        debug_assert!(sig.is_none_or(|x| x == combined));
        sig = Some(combined);
    }
    let sig = sig.ok_or(MuSigError::EmptyKeyList)?;
    Ok((sig, sessions.swap_remove(0).aggregated.clone()))
}
