//! MuSig Schnorr multi-signatures over secp256k1 with SHA-256.
//!
//! Key aggregation, the three-round signing session, verification, and the
//! m-of-n extension: every permitted cosigner subset is aggregated and the
//! resulting keys are committed to in a complete binary Merkle tree. A verifier
//! that only stores the tree root accepts a signature when the signing key is
//! proven to be a leaf and the signature verifies under that key.

mod hash;
mod keys;
mod session;
mod tree;

pub use hash::{
    h_agg, h_com, h_sig, h_tree, scalar_from_digest, TAG_AGG, TAG_COM, TAG_SIG, TAG_TREE,
};
pub use keys::{
    aggregate_key, scalar_from_bytes, scalar_to_bytes, AggregatedKey, KeyList, KeyPair, PublicKey,
    Scalar, POINT_LEN, SCALAR_LEN,
};
pub use session::{
    schnorr_sign, sign_jointly, verify, MuSigSession, MultiSignature, Stage, SIGNATURE_LEN,
};
pub use tree::{
    build_tree, combination_count, combination_subsets, prove_membership, threshold_combinations,
    verify_membership, CombinationMerkleTree, MerkleProof, ProofStep, Side,
};

use crate::Percent;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MuSigError {
    #[error("invalid curve point encoding")]
    InvalidPoint,
    #[error("the identity point is not a valid key")]
    IdentityPoint,
    #[error("scalar is zero or not below the group order")]
    InvalidScalar,
    #[error("key list is empty")]
    EmptyKeyList,
    #[error("key list contains the same key twice")]
    DuplicateKey,
    #[error("signer key is not part of the cosigner list")]
    NotACosigner,
    #[error("session is in stage {found:?}, expected {expected:?}")]
    WrongStage { expected: Stage, found: Stage },
    #[error("missing commitment from cosigner {0}")]
    MissingCommitment(String),
    #[error("missing public nonce from cosigner {0}")]
    MissingNonce(String),
    #[error("missing partial signature from cosigner {0}")]
    MissingPartial(String),
    #[error("public nonce of cosigner {0} does not match its commitment; session aborted")]
    CommitmentMismatch(String),
    #[error("own {0} was altered by the caller")]
    OwnValueMismatch(&'static str),
    #[error("threshold {0}% is outside [50, 100)")]
    ThresholdOutOfRange(Percent),
    #[error("cannot build a tree without leaves")]
    EmptyTree,
    #[error("key is not a leaf of the tree")]
    NotALeaf,
    #[error("malformed merkle proof encoding")]
    MalformedProof,
}
