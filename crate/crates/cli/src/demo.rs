use std::collections::BTreeMap;

use anyhow::anyhow;
use harpia_core::musig::{
    prove_membership, scalar_to_bytes, verify, verify_membership, CombinationMerkleTree, KeyList,
    KeyPair, MuSigSession,
};
use harpia_core::Percent;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::Failure;

/// Upper bound on members so the combination tree stays printable.
const MAX_MEMBERS: usize = 16;

pub fn run(
    n: usize,
    zeta: Percent,
    message: &str,
    signers: Option<usize>,
    seed: u64,
) -> Result<(), Failure> {
    if n == 0 || n > MAX_MEMBERS {
        return Err(anyhow!("--n must be between 1 and {MAX_MEMBERS}").into());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys: Vec<KeyPair> = (0..n).map(|_| KeyPair::generate(&mut rng)).collect();
    let members = KeyList::new(keys.iter().map(|k| *k.public()).collect())?;
    let tree = CombinationMerkleTree::for_members(&members, zeta)?;
    let m = tree.threshold_m();
    let k = signers.unwrap_or(m);
    if k < m || k > n {
        return Err(anyhow!("--signers must be between {m} and {n}").into());
    }

    println!("members (sorted):");
    for (i, key) in members.iter().enumerate() {
        println!("  [{i}] {}", hex(&key.to_bytes()));
    }
    println!(
        "threshold {m}-of-{n} at {zeta}%: {} combinations, root {}",
        tree.leaves().len(),
        hex(&tree.root())
    );

    let signing: Vec<KeyPair> = members
        .iter()
        .take(k)
        .map(|p| {
            keys.iter()
                .find(|kp| kp.public() == p)
                .expect("member key")
                .clone()
        })
        .collect();
    let cosigners = KeyList::new(signing.iter().map(|s| *s.public()).collect())?;
    let mut sessions = signing
        .iter()
        .map(|s| MuSigSession::new(s.clone(), cosigners.clone(), message.as_bytes()))
        .collect::<Result<Vec<_>, _>>()?;
    let agg = sessions[0].aggregated_key().clone();
    println!(
        "signers [0..{k}), aggregated key {}",
        hex(&agg.point().to_bytes())
    );
    for i in 0..k {
        println!(
            "  coefficient [{i}] {}",
            hex(&scalar_to_bytes(agg.coefficient(i)))
        );
    }

    println!("round 1: commitments");
    let mut commitments = BTreeMap::new();
    for (i, s) in sessions.iter_mut().enumerate() {
        let t = s.commit(&mut rng)?;
        println!("  [{i}] {}", hex(&t));
        commitments.insert(*s.own_public_key(), t);
    }
    println!("round 2: nonces");
    let mut nonces = BTreeMap::new();
    for (i, s) in sessions.iter_mut().enumerate() {
        let r = s.reveal(&commitments)?;
        println!("  [{i}] {}", hex(&r.to_bytes()));
        nonces.insert(*s.own_public_key(), r);
    }
    println!("round 3: partial signatures");
    let mut partials = BTreeMap::new();
    for (i, s) in sessions.iter_mut().enumerate() {
        let p = s.partial_sign(&nonces)?;
        println!("  [{i}] {}", hex(&scalar_to_bytes(&p)));
        partials.insert(*s.own_public_key(), p);
    }
    let sig = sessions[0].combine(&partials)?;
    println!("signature R {}", hex(&sig.nonce_point.to_bytes()));
    println!("          s {}", hex(&scalar_to_bytes(&sig.scalar_sum)));

    let sig_ok = verify(message.as_bytes(), agg.point(), &sig);
    let proof = prove_membership(&tree, agg.point())?;
    let proof_ok = verify_membership(&tree.root(), agg.point(), &proof);
    println!("signature verifies: {sig_ok}");
    println!(
        "membership proof ({} steps) verifies: {proof_ok}",
        proof.path.len()
    );
    if sig_ok && proof_ok {
        Ok(())
    } else {
        Err(Failure::Invalid(
            "session did not produce a valid authorization".into(),
        ))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
