use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use k256::elliptic_curve::group::GroupEncoding;
use k256::elliptic_curve::sec1::ToEncodedPoint;
use k256::elliptic_curve::{Field, PrimeField};
use k256::{AffinePoint, NonZeroScalar, ProjectivePoint};
use rand::{CryptoRng, RngCore};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::hash::agg_prefix;
use super::hash::scalar_from_digest;
use super::MuSigError;

pub use k256::Scalar;

/// Compressed SEC1 point length.
pub const POINT_LEN: usize = 33;
/// Big-endian scalar length.
pub const SCALAR_LEN: usize = 32;

/// A non-identity secp256k1 point together with its compressed encoding.
#[derive(Clone, Copy)]
pub struct PublicKey {
    point: ProjectivePoint,
    encoded: [u8; POINT_LEN],
}

impl PublicKey {
    pub fn from_point(point: ProjectivePoint) -> Result<Self, MuSigError> {
        if point == ProjectivePoint::IDENTITY {
            return Err(MuSigError::IdentityPoint);
        }
        let affine = point.to_affine();
        let enc = affine.to_encoded_point(true);
        let mut encoded = [0u8; POINT_LEN];
        encoded.copy_from_slice(enc.as_bytes());
        Ok(PublicKey { point, encoded })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MuSigError> {
        let arr: [u8; POINT_LEN] = bytes.try_into().map_err(|_| MuSigError::InvalidPoint)?;
        let affine = Option::<AffinePoint>::from(AffinePoint::from_bytes(&arr.into()))
            .ok_or(MuSigError::InvalidPoint)?;
        Self::from_point(ProjectivePoint::from(affine))
    }

    pub fn to_bytes(&self) -> [u8; POINT_LEN] {
        self.encoded
    }

    pub fn point(&self) -> &ProjectivePoint {
        &self.point
    }
}

impl PartialEq for PublicKey {
    fn eq(&self, other: &Self) -> bool {
        self.encoded == other.encoded
    }
}
impl Eq for PublicKey {}

impl PartialOrd for PublicKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PublicKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.encoded.cmp(&other.encoded)
    }
}

impl Hash for PublicKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.encoded.hash(state)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(self.encoded))
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", hex::encode(&self.encoded[..8]))
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.encoded))
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(de::Error::custom)?;
        PublicKey::from_bytes(&bytes).map_err(de::Error::custom)
    }
}

pub fn scalar_to_bytes(s: &Scalar) -> [u8; SCALAR_LEN] {
    s.to_bytes().into()
}

/// Parses a canonical big-endian scalar (strictly below the group order).
pub fn scalar_from_bytes(bytes: &[u8]) -> Result<Scalar, MuSigError> {
    let arr: [u8; SCALAR_LEN] = bytes.try_into().map_err(|_| MuSigError::InvalidScalar)?;
    Option::<Scalar>::from(Scalar::from_repr(arr.into())).ok_or(MuSigError::InvalidScalar)
}

/// Secret scalar in `[1, p-1]` and its public point `g^secret`.
#[derive(Clone)]
pub struct KeyPair {
    secret: NonZeroScalar,
    public: PublicKey,
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let secret = NonZeroScalar::random(rng);
        Self::from_nonzero(secret)
    }

    pub fn from_secret_bytes(bytes: &[u8]) -> Result<Self, MuSigError> {
        let scalar = scalar_from_bytes(bytes)?;
        let secret = Option::<NonZeroScalar>::from(NonZeroScalar::new(scalar))
            .ok_or(MuSigError::InvalidScalar)?;
        Ok(Self::from_nonzero(secret))
    }

    fn from_nonzero(secret: NonZeroScalar) -> Self {
        let public = PublicKey::from_point(ProjectivePoint::GENERATOR * *secret)
            .expect("non-zero scalar times generator is not the identity");
        KeyPair { secret, public }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn secret(&self) -> &Scalar {
        self.secret.as_ref()
    }

    pub(crate) fn secret_scalar(&self) -> NonZeroScalar {
        self.secret
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Canonically sorted list of distinct public keys. Its serialization `<L>`
/// is the concatenation of the compressed encodings in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyList {
    keys: Vec<PublicKey>,
}

impl KeyList {
    pub fn new(mut keys: Vec<PublicKey>) -> Result<Self, MuSigError> {
        if keys.is_empty() {
            return Err(MuSigError::EmptyKeyList);
        }
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(MuSigError::DuplicateKey);
        }
        Ok(KeyList { keys })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PublicKey> {
        self.keys.iter()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn as_slice(&self) -> &[PublicKey] {
        &self.keys
    }

    pub fn contains(&self, key: &PublicKey) -> bool {
        self.keys.binary_search(key).is_ok()
    }

    pub fn position(&self, key: &PublicKey) -> Option<usize> {
        self.keys.binary_search(key).ok()
    }

    /// The `<L>` encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.keys.len() * POINT_LEN);
        for k in &self.keys {
            out.extend_from_slice(&k.to_bytes());
        }
        out
    }

    /// Sub-list made of the keys at the given positions.
    pub fn select(&self, positions: &[usize]) -> Result<KeyList, MuSigError> {
        KeyList::new(positions.iter().map(|&i| self.keys[i]).collect())
    }
}

/// Aggregated key `X~ = prod X_i^{a_i}` with the list it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedKey {
    point: PublicKey,
    coefficients: Vec<Scalar>,
    source: KeyList,
}

impl AggregatedKey {
    pub fn point(&self) -> &PublicKey {
        &self.point
    }

    pub fn source(&self) -> &KeyList {
        &self.source
    }

    /// `a_i` for the key at position `i` of the source list.
    pub fn coefficient(&self, i: usize) -> &Scalar {
        &self.coefficients[i]
    }

    pub fn coefficient_of(&self, key: &PublicKey) -> Option<&Scalar> {
        self.source.position(key).map(|i| &self.coefficients[i])
    }
}

/// Aggregates a key list into `X~`.
pub fn aggregate_key(keys: &KeyList) -> Result<AggregatedKey, MuSigError> {
    if keys.is_empty() {
        return Err(MuSigError::EmptyKeyList);
    }
    let prefix = agg_prefix(keys);
    let mut acc = ProjectivePoint::IDENTITY;
    let mut coefficients = Vec::with_capacity(keys.len());
    for key in keys.iter() {
        let mut h = prefix.clone();
        sha2::Digest::update(&mut h, key.to_bytes());
        let a = scalar_from_digest(&sha2::Digest::finalize(h).into());
        acc += *key.point() * a;
        coefficients.push(a);
    }
    Ok(AggregatedKey {
        point: PublicKey::from_point(acc)?,
        coefficients,
        source: keys.clone(),
    })
}

pub(crate) fn random_nonzero_scalar<R: RngCore + CryptoRng>(rng: &mut R) -> Scalar {
    loop {
        let s = Scalar::random(&mut *rng);
        if !bool::from(s.is_zero()) {
            return s;
        }
    }
}
