//! Cross-checks key aggregation, signing rounds and the membership tree
//! against textbook affine secp256k1 arithmetic over big integers.

use std::collections::BTreeMap;

use harpia_core::musig::{
    aggregate_key, scalar_to_bytes, verify, verify_membership, CombinationMerkleTree, KeyList,
    KeyPair, MuSigSession, PublicKey, Side,
};
use harpia_core::Percent;
use num_bigint::BigUint;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

fn hexnum(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).unwrap()
}

struct Curve {
    p: BigUint,
    n: BigUint,
    g: Pt,
}

type Pt = Option<(BigUint, BigUint)>;

impl Curve {
    fn new() -> Self {
        Curve {
            p: hexnum("FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFC2F"),
            n: hexnum("FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141"),
            g: Some((
                hexnum("79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798"),
                hexnum("483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8"),
            )),
        }
    }

    fn inv(&self, a: &BigUint) -> BigUint {
        a.modpow(&(&self.p - 2u32), &self.p)
    }

    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + &self.p - b % &self.p) % &self.p
    }

    fn add(&self, a: &Pt, b: &Pt) -> Pt {
        let (Some((x1, y1)), Some((x2, y2))) = (a, b) else {
            return a.clone().or_else(|| b.clone());
        };
        let p = &self.p;
        let lambda = if x1 == x2 {
            if (y1 + y2) % p == BigUint::zero() {
                return None;
            }
            (BigUint::from(3u32) * x1 * x1) % p * self.inv(&(BigUint::from(2u32) * y1 % p)) % p
        } else {
            self.sub(y2, y1) * self.inv(&self.sub(x2, x1)) % p
        };
        let x3 = self.sub(&self.sub(&(&lambda * &lambda % p), x1), x2);
        let y3 = self.sub(&(&lambda * self.sub(x1, &x3) % p), y1);
        Some((x3, y3))
    }

    fn mul(&self, k: &BigUint, pt: &Pt) -> Pt {
        let mut acc: Pt = None;
        for i in (0..k.bits()).rev() {
            acc = self.add(&acc, &acc);
            if k.bit(i) {
                acc = self.add(&acc, pt);
            }
        }
        acc
    }

    fn compress(&self, pt: &Pt) -> [u8; 33] {
        let (x, y) = pt.as_ref().unwrap();
        let mut out = [0u8; 33];
        out[0] = if y.bit(0) { 3 } else { 2 };
        let xb = x.to_bytes_be();
        out[33 - xb.len()..].copy_from_slice(&xb);
        out
    }

    fn decompress(&self, b: &[u8; 33]) -> Pt {
        let x = BigUint::from_bytes_be(&b[1..]);
        let rhs = (&x * &x * &x + 7u32) % &self.p;
        let mut y = rhs.modpow(&((&self.p + 1u32) / 4u32), &self.p);
        if y.bit(0) != (b[0] == 3) {
            y = &self.p - y;
        }
        Some((x, y))
    }

    fn hash_scalar(&self, parts: &[&[u8]]) -> BigUint {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        BigUint::from_bytes_be(&h.finalize()) % &self.n
    }
}

fn secrets() -> Vec<[u8; 32]> {
    [
        "1c0a4e6b2f33a0b7aa5e0f5d92bb1f0c7d5e3a1b9c8d7e6f5a4b3c2d1e0f1a2b",
        "00000000000000000000000000000000000000000000000000000000000000a7",
        "fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364140",
        "5f2d8e1c4b7a69384756a1b2c3d4e5f60718293a4b5c6d7e8f90a1b2c3d4e5f6",
    ]
    .iter()
    .map(|h| hex::decode(h).unwrap().try_into().unwrap())
    .collect()
}

/// Sorted keys, the coefficient of each, and the aggregate point.
fn oracle_aggregate(curve: &Curve, keys: &[[u8; 33]]) -> (Vec<[u8; 33]>, Vec<BigUint>, [u8; 33]) {
    let mut sorted = keys.to_vec();
    sorted.sort();
    let list: Vec<u8> = sorted.concat();
    let coeffs: Vec<BigUint> = sorted
        .iter()
        .map(|k| curve.hash_scalar(&[&[0x02], &list, k]))
        .collect();
    let mut acc: Pt = None;
    for (k, a) in sorted.iter().zip(&coeffs) {
        acc = curve.add(&acc, &curve.mul(a, &curve.decompress(k)));
    }
    let agg = curve.compress(&acc);
    (sorted, coeffs, agg)
}

#[test]
fn public_keys_match_scalar_multiplication() {
    let curve = Curve::new();
    for s in secrets() {
        let kp = KeyPair::from_secret_bytes(&s).unwrap();
        let expected = curve.compress(&curve.mul(&BigUint::from_bytes_be(&s), &curve.g));
        assert_eq!(kp.public().to_bytes(), expected);
    }
}

#[test]
fn aggregation_matches_oracle_for_every_prefix() {
    let curve = Curve::new();
    let kps: Vec<_> = secrets()
        .iter()
        .map(|s| KeyPair::from_secret_bytes(s).unwrap())
        .collect();
    for len in 1..=kps.len() {
        let publics: Vec<PublicKey> = kps[..len].iter().map(|k| *k.public()).collect();
        let encoded: Vec<[u8; 33]> = publics.iter().map(|k| k.to_bytes()).collect();
        let (sorted, coeffs, expected) = oracle_aggregate(&curve, &encoded);
        let agg = aggregate_key(&KeyList::new(publics).unwrap()).unwrap();
        assert_eq!(agg.point().to_bytes(), expected, "{len} keys");
        for (i, (k, a)) in sorted.iter().zip(&coeffs).enumerate() {
            assert_eq!(agg.source().as_slice()[i].to_bytes(), *k);
            assert_eq!(
                BigUint::from_bytes_be(&scalar_to_bytes(agg.coefficient(i))),
                *a
            );
        }
    }
}

#[test]
fn two_signer_rounds_replay_against_oracle() {
    let curve = Curve::new();
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let kps: Vec<_> = secrets()[..2]
        .iter()
        .map(|s| KeyPair::from_secret_bytes(s).unwrap())
        .collect();
    let list = KeyList::new(kps.iter().map(|k| *k.public()).collect()).unwrap();
    let msg = b"replay me";
    let mut sessions: Vec<_> = kps
        .iter()
        .map(|k| MuSigSession::new(k.clone(), list.clone(), &msg[..]).unwrap())
        .collect();

    let commitments: BTreeMap<_, _> = sessions
        .iter_mut()
        .map(|s| (*s.own_public_key(), s.commit(&mut rng).unwrap()))
        .collect();
    let nonces: BTreeMap<_, _> = sessions
        .iter_mut()
        .map(|s| (*s.own_public_key(), s.reveal(&commitments).unwrap()))
        .collect();
    for (k, r) in &nonces {
        let t: [u8; 32] = Sha256::new()
            .chain_update([0x01])
            .chain_update(r.to_bytes())
            .finalize()
            .into();
        assert_eq!(commitments[k], t);
    }
    let partials: BTreeMap<_, _> = sessions
        .iter_mut()
        .map(|s| (*s.own_public_key(), s.partial_sign(&nonces).unwrap()))
        .collect();
    let sig = sessions[0].combine(&partials).unwrap();
    assert_eq!(sessions[1].combine(&partials).unwrap(), sig);

    let encoded: Vec<_> = kps.iter().map(|k| k.public().to_bytes()).collect();
    let (sorted, coeffs, agg) = oracle_aggregate(&curve, &encoded);
    let r_sum = nonces.values().fold(None, |acc, r| {
        curve.add(&acc, &curve.decompress(&r.to_bytes()))
    });
    assert_eq!(sig.nonce_point.to_bytes(), curve.compress(&r_sum));
    let c = curve.hash_scalar(&[&[0x03], &agg, &curve.compress(&r_sum), msg]);

    let mut s_total = BigUint::zero();
    for (i, k) in sorted.iter().enumerate() {
        let pk = PublicKey::from_bytes(k).unwrap();
        let s_i = BigUint::from_bytes_be(&scalar_to_bytes(&partials[&pk]));
        // g^{s_i} = R_i * X_i^{a_i c}
        let lhs = curve.mul(&s_i, &curve.g);
        let e = &coeffs[i] * &c % &curve.n;
        let rhs = curve.add(
            &curve.decompress(&nonces[&pk].to_bytes()),
            &curve.mul(&e, &curve.decompress(k)),
        );
        assert_eq!(lhs, rhs);
        s_total = (s_total + s_i) % &curve.n;
    }
    assert_eq!(
        BigUint::from_bytes_be(&scalar_to_bytes(&sig.scalar_sum)),
        s_total
    );
    let lhs = curve.mul(&s_total, &curve.g);
    let rhs = curve.add(&r_sum, &curve.mul(&c, &curve.decompress(&agg)));
    assert_eq!(lhs, rhs);
    assert!(verify(msg, &PublicKey::from_bytes(&agg).unwrap(), &sig));
}

#[test]
fn four_leaf_tree_matches_hand_construction() {
    let curve = Curve::new();
    let kps: Vec<_> = secrets()[..3]
        .iter()
        .map(|s| KeyPair::from_secret_bytes(s).unwrap())
        .collect();
    let list = KeyList::new(kps.iter().map(|k| *k.public()).collect()).unwrap();
    let sorted: Vec<[u8; 33]> = list.iter().map(|k| k.to_bytes()).collect();
    // 2-of-3: {0,1} {0,2} {1,2} {0,1,2}
    let subsets: [&[usize]; 4] = [&[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]];
    let leaves: Vec<[u8; 33]> = subsets
        .iter()
        .map(|s| oracle_aggregate(&curve, &s.iter().map(|&i| sorted[i]).collect::<Vec<_>>()).2)
        .collect();
    let h = |parts: &[&[u8]]| -> [u8; 32] {
        let mut d = Sha256::new();
        d.update([0x04]);
        for p in parts {
            d.update(p);
        }
        d.finalize().into()
    };
    let lh: Vec<[u8; 32]> = leaves.iter().map(|l| h(&[&[0x00], l])).collect();
    let n01 = h(&[&[0x01], &lh[0], &lh[1]]);
    let n23 = h(&[&[0x01], &lh[2], &lh[3]]);
    let root = h(&[&[0x01], &n01, &n23]);

    let tree = CombinationMerkleTree::for_members(&list, Percent::from_whole(50)).unwrap();
    assert_eq!(tree.leaves().len(), 4);
    assert_eq!(tree.padded_leaf_count(), 4);
    assert_eq!(tree.root(), root);
    for (i, leaf) in leaves.iter().enumerate() {
        assert_eq!(tree.leaves()[i].point().to_bytes(), *leaf);
    }
    let proof = tree.proof_for_index(2);
    assert_eq!(proof.path.len(), 2);
    assert_eq!(
        (proof.path[0].sibling, proof.path[0].side),
        (lh[3], Side::Right)
    );
    assert_eq!(
        (proof.path[1].sibling, proof.path[1].side),
        (n01, Side::Left)
    );
    assert!(verify_membership(
        &root,
        &PublicKey::from_bytes(&leaves[2]).unwrap(),
        &proof
    ));
    assert!(!verify_membership(
        &root,
        &PublicKey::from_bytes(&leaves[1]).unwrap(),
        &proof
    ));
}
