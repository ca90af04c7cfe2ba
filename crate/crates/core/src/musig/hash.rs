use k256::elliptic_curve::ops::Reduce;
use k256::{FieldBytes, U256};
use sha2::{Digest, Sha256};

use super::keys::{KeyList, PublicKey, Scalar};
use crate::Hash32;

pub const TAG_COM: u8 = 0x01;
pub const TAG_AGG: u8 = 0x02;
pub const TAG_SIG: u8 = 0x03;
pub const TAG_TREE: u8 = 0x04;

/// Big-endian digest reduced modulo the group order.
pub fn scalar_from_digest(digest: &Hash32) -> Scalar {
    <Scalar as Reduce<U256>>::reduce_bytes(&FieldBytes::from(*digest))
}

/// Nonce commitment `t = H_com(R)`.
pub fn h_com(nonce: &PublicKey) -> Hash32 {
    let mut h = Sha256::new();
    h.update([TAG_COM]);
    h.update(nonce.to_bytes());
    h.finalize().into()
}

/// Key coefficient `a_i = H_agg(<L>, X_i)`.
pub fn h_agg(list: &KeyList, key: &PublicKey) -> Scalar {
    let mut h = agg_prefix(list);
    h.update(key.to_bytes());
    scalar_from_digest(&h.finalize().into())
}

/// Hasher state after absorbing the tag and `<L>`; cloned once per key.
pub(crate) fn agg_prefix(list: &KeyList) -> Sha256 {
    let mut h = Sha256::new();
    h.update([TAG_AGG]);
    for key in list.iter() {
        h.update(key.to_bytes());
    }
    h
}

/// Challenge `c = H_sig(X~, R, m)`.
pub fn h_sig(agg: &PublicKey, nonce: &PublicKey, message: &[u8]) -> Scalar {
    let mut h = Sha256::new();
    h.update([TAG_SIG]);
    h.update(agg.to_bytes());
    h.update(nonce.to_bytes());
    h.update(message);
    scalar_from_digest(&h.finalize().into())
}

/// Tree hash. Callers prepend the leaf (0x00) or node (0x01) marker.
pub fn h_tree(parts: &[&[u8]]) -> Hash32 {
    let mut h = Sha256::new();
    h.update([TAG_TREE]);
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}
