//! The four-algorithm ciphertext-policy ABE suite: setup, attribute key
//! generation, encryption of a target-group element under an access tree, and
//! recursive threshold decryption, plus canonical JSON serialization of every
//! artifact.
//!
//! The construction splits the encryption secret `s` down the access tree
//! with one share polynomial per gate (degree `threshold - 1`), blinds the
//! message as `m · e(g,g)^{αs}`, and ties attribute keys together with a
//! per-key random `r` so that components of independently issued keys cannot
//! be mixed.

use crate::encoding::{b64d, b64e};
use crate::group::{
    hash_to_group, lagrange_coeff, pairing, GroupElementG0, GroupElementGT, Scalar,
    SharePolynomial, GROUP_ID,
};
use crate::policy::{
    min_satisfying_assignment, parse_postfix, serialize_policy, AccessTree, Attribute,
    AttributeSet, NodePath, PolicyError, PolicyNode,
};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Version tag of the artifact JSON envelopes.
pub const ARTIFACT_VERSION: u64 = 1;

pub const TYPE_PUBLIC_KEY: &str = "cpabe.public_key";
pub const TYPE_MASTER_KEY: &str = "cpabe.master_key";
pub const TYPE_PRIVATE_KEY: &str = "cpabe.private_key";
pub const TYPE_CIPHERTEXT: &str = "cpabe.ciphertext";

#[derive(Debug, thiserror::Error)]
pub enum CpabeError {
    /// The key's attributes do not satisfy the ciphertext policy. This is a
    /// single opaque outcome; no partial-match information is reported.
    #[error("policy not satisfied")]
    PolicyNotSatisfied,
    #[error("attribute set must not be empty")]
    EmptyAttributeSet,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(String),
    #[error("artifact version {found} is not supported")]
    VersionMismatch { found: u64 },
    #[error("artifact group id {found:?} does not match compiled group {GROUP_ID:?}")]
    GroupMismatch { found: String },
    #[error("artifact type {found:?}, expected {expected:?}")]
    WrongArtifactType {
        expected: &'static str,
        found: String,
    },
    #[error("invalid artifact: {0}")]
    InvalidArtifact(String),
    #[error("serialization: {0}")]
    Serialization(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Global public key `GPK`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub group_id: String,
    pub g: GroupElementG0,
    /// `g^β`
    pub h: GroupElementG0,
    /// `e(g,g)^α`
    pub egg_alpha: GroupElementGT,
}

/// Master secret key `MSK`, held only by the attribute authority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterKey {
    pub beta: Scalar,
    /// `g^α`
    pub g_alpha: GroupElementG0,
}

/// One per-attribute key component pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeKeyPair {
    pub attr: Attribute,
    /// `g^r · H(attr)^{r_j}`
    pub d_j: GroupElementG0,
    /// `g^{r_j}`
    pub dp_j: GroupElementG0,
}

/// Attribute-bound private key `PRK`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    pub attrs: AttributeSet,
    /// `g^{(α+r)/β}`
    pub d: GroupElementG0,
    /// Exactly one pair per attribute in `attrs`, in set order.
    pub components: Vec<AttributeKeyPair>,
}

/// Per-leaf ciphertext components, ordered by the policy's pre-order leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafCiphertext {
    /// `g^{q_y(0)}`
    pub c_y: GroupElementG0,
    /// `H(att(y))^{q_y(0)}`
    pub cp_y: GroupElementG0,
}

/// A CPABE ciphertext: the access tree plus the group-element header that
/// wraps one target-group message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpabeCiphertext {
    pub policy: AccessTree,
    /// `m · e(g,g)^{αs}`
    pub c_tilde: GroupElementGT,
    /// `h^s`
    pub c: GroupElementG0,
    pub leaves: Vec<LeafCiphertext>,
}

/// Creates a fresh key pair. Draws a random generator and uniform `α`, `β`
/// (with `β ≠ 0`) from the supplied entropy.
pub fn setup<R: RngCore + CryptoRng>(rng: &mut R) -> (PublicKey, MasterKey) {
    let g = GroupElementG0::generator().pow(&Scalar::random_nonzero(rng));
    let alpha = Scalar::random(rng);
    let beta = Scalar::random_nonzero(rng);
    let egg_alpha = pairing(&g, &g).pow(&alpha);
    (
        PublicKey {
            group_id: GROUP_ID.to_string(),
            g,
            h: g.pow(&beta),
            egg_alpha,
        },
        MasterKey {
            beta,
            g_alpha: g.pow(&alpha),
        },
    )
}

/// Issues a private key for an attribute set. Every call draws a fresh `r`
/// and per-attribute `r_j`, so two keys for the same attributes are
/// unlinkable and their components cannot be combined.
pub fn keygen<R: RngCore + CryptoRng>(
    pk: &PublicKey,
    mk: &MasterKey,
    attrs: &AttributeSet,
    rng: &mut R,
) -> Result<PrivateKey, CpabeError> {
    if attrs.is_empty() {
        return Err(CpabeError::EmptyAttributeSet);
    }
    let beta_inv = mk
        .beta
        .inverse()
        .ok_or_else(|| CpabeError::InvalidArtifact("master key beta is zero".into()))?;
    let r = Scalar::random(rng);
    let g_r = pk.g.pow(&r);
    let d = mk.g_alpha.mul(&g_r).pow(&beta_inv);
    let mut components = Vec::with_capacity(attrs.len());
    for attr in attrs.iter() {
        let r_j = Scalar::random(rng);
        let hashed = hash_to_group(attr.as_str().as_bytes());
        components.push(AttributeKeyPair {
            attr: attr.clone(),
            d_j: g_r.mul(&hashed.pow(&r_j)),
            dp_j: pk.g.pow(&r_j),
        });
    }
    Ok(PrivateKey {
        attrs: attrs.clone(),
        d,
        components,
    })
}

/// Derives the per-leaf secret shares: the root node receives `s`, each gate
/// splits its secret with a polynomial of degree `threshold - 1`, and child
/// `i` receives the evaluation at `i`. Returned in pre-order leaf order.
fn share_secrets<R: RngCore + CryptoRng>(
    node: &PolicyNode,
    secret: Scalar,
    rng: &mut R,
    out: &mut Vec<(Attribute, Scalar)>,
) {
    match node {
        PolicyNode::Leaf(attr) => out.push((attr.clone(), secret)),
        PolicyNode::Gate {
            threshold,
            children,
        } => {
            let poly = SharePolynomial::sample(threshold - 1, secret, rng);
            for (i, child) in children.iter().enumerate() {
                share_secrets(child, poly.share_at(i as u64 + 1), rng, out);
            }
        }
    }
}

/// Encrypts a target-group element under an access tree.
pub fn encrypt_element<R: RngCore + CryptoRng>(
    pk: &PublicKey,
    m: &GroupElementGT,
    tree: &AccessTree,
    rng: &mut R,
) -> CpabeCiphertext {
    let s = Scalar::random(rng);
    let mut shares = Vec::with_capacity(tree.leaf_count());
    share_secrets(tree.root(), s, rng, &mut shares);
    let leaves = shares
        .iter()
        .map(|(attr, q0)| LeafCiphertext {
            c_y: pk.g.pow(q0),
            cp_y: hash_to_group(attr.as_str().as_bytes()).pow(q0),
        })
        .collect();
    CpabeCiphertext {
        policy: tree.clone(),
        c_tilde: m.mul(&pk.egg_alpha.pow(&s)),
        c: pk.h.pow(&s),
        leaves,
    }
}

/// Decrypts a ciphertext with a key whose attributes satisfy its policy,
/// recovering the wrapped target-group element. Fails with the opaque
/// [`CpabeError::PolicyNotSatisfied`] otherwise.
pub fn decrypt_element(
    pk: &PublicKey,
    sk: &PrivateKey,
    ct: &CpabeCiphertext,
) -> Result<GroupElementGT, CpabeError> {
    if pk.group_id != GROUP_ID {
        return Err(CpabeError::GroupMismatch {
            found: pk.group_id.clone(),
        });
    }
    let leaf_order = ct.policy.leaves();
    if ct.leaves.len() != leaf_order.len() {
        return Err(CpabeError::MalformedCiphertext(format!(
            "{} leaf component pairs for {} policy leaves",
            ct.leaves.len(),
            leaf_order.len()
        )));
    }
    let assignment =
        min_satisfying_assignment(&ct.policy, &sk.attrs).ok_or(CpabeError::PolicyNotSatisfied)?;

    let leaf_index: HashMap<&NodePath, usize> = leaf_order
        .iter()
        .enumerate()
        .map(|(i, (path, _))| (path, i))
        .collect();
    let key_pair: HashMap<&str, &AttributeKeyPair> = sk
        .components
        .iter()
        .map(|pair| (pair.attr.as_str(), pair))
        .collect();

    fn node_value(
        node: &PolicyNode,
        path: &NodePath,
        ct: &CpabeCiphertext,
        assignment: &crate::policy::SatisfyingAssignment,
        leaf_index: &HashMap<&NodePath, usize>,
        key_pair: &HashMap<&str, &AttributeKeyPair>,
    ) -> Result<GroupElementGT, CpabeError> {
        match node {
            PolicyNode::Leaf(attr) => {
                let idx = *leaf_index
                    .get(path)
                    .ok_or_else(|| CpabeError::MalformedCiphertext("leaf path missing".into()))?;
                let leaf = &ct.leaves[idx];
                let pair = key_pair
                    .get(attr.as_str())
                    .ok_or(CpabeError::PolicyNotSatisfied)?;
                // F_y = e(d_j, c_y) / e(cp_y, dp_j); the hash-bearing factors
                // must occupy the first pairing slot so they cancel exactly.
                Ok(pairing(&pair.d_j, &leaf.c_y).div(&pairing(&leaf.cp_y, &pair.dp_j)))
            }
            PolicyNode::Gate { children, .. } => {
                let chosen = assignment
                    .chosen
                    .get(path)
                    .ok_or(CpabeError::PolicyNotSatisfied)?;
                let index_set: Vec<u64> = chosen.iter().map(|&i| i as u64).collect();
                let mut acc = GroupElementGT::identity();
                for &child_idx in chosen {
                    let mut child_path = path.clone();
                    child_path.push(child_idx);
                    let f_z = node_value(
                        &children[child_idx - 1],
                        &child_path,
                        ct,
                        assignment,
                        leaf_index,
                        key_pair,
                    )?;
                    let coeff = lagrange_coeff(child_idx as u64, &index_set, &Scalar::zero())
                        .map_err(|e| CpabeError::MalformedCiphertext(e.to_string()))?;
                    acc = acc.mul(&f_z.pow(&coeff));
                }
                Ok(acc)
            }
        }
    }

    // A = e(g,g)^{rs}
    let a = node_value(
        ct.policy.root(),
        &Vec::new(),
        ct,
        &assignment,
        &leaf_index,
        &key_pair,
    )?;
    // m = c_tilde · A / e(c, d)
    Ok(ct.c_tilde.mul(&a).div(&pairing(&ct.c, &sk.d)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpabeArtifact {
    PublicKey(PublicKey),
    MasterKey(MasterKey),
    PrivateKey(PrivateKey),
    Ciphertext(CpabeCiphertext),
}

#[derive(Serialize, Deserialize)]
struct WireHeader {
    v: u64,
    r#type: String,
    group_id: String,
}

#[derive(Serialize, Deserialize)]
struct WirePublicKey {
    v: u64,
    r#type: String,
    group_id: String,
    g: String,
    h: String,
    egg_alpha: String,
}

#[derive(Serialize, Deserialize)]
struct WireMasterKey {
    v: u64,
    r#type: String,
    group_id: String,
    beta: String,
    g_alpha: String,
}

#[derive(Serialize, Deserialize)]
struct WireKeyPair {
    attr: String,
    d_j: String,
    dp_j: String,
}

#[derive(Serialize, Deserialize)]
struct WirePrivateKey {
    v: u64,
    r#type: String,
    group_id: String,
    attrs: Vec<String>,
    d: String,
    components: Vec<WireKeyPair>,
}

#[derive(Serialize, Deserialize)]
struct WireLeaf {
    c_y: String,
    cp_y: String,
}

#[derive(Serialize, Deserialize)]
struct WireCiphertext {
    v: u64,
    r#type: String,
    group_id: String,
    policy: String,
    c_tilde: String,
    c: String,
    leaves: Vec<WireLeaf>,
}

fn ser_err(e: impl std::fmt::Display) -> CpabeError {
    CpabeError::Serialization(e.to_string())
}

fn check_header(v: u64, kind: &str, group_id: &str, expected: &'static str) -> Result<(), CpabeError> {
    if v != ARTIFACT_VERSION {
        return Err(CpabeError::VersionMismatch { found: v });
    }
    if kind != expected {
        return Err(CpabeError::WrongArtifactType {
            expected,
            found: kind.to_string(),
        });
    }
    if group_id != GROUP_ID {
        return Err(CpabeError::GroupMismatch {
            found: group_id.to_string(),
        });
    }
    Ok(())
}

fn g0_from(text: &str) -> Result<GroupElementG0, CpabeError> {
    GroupElementG0::from_bytes(&b64d(text).map_err(CpabeError::Serialization)?).map_err(ser_err)
}

fn gt_from(text: &str) -> Result<GroupElementGT, CpabeError> {
    GroupElementGT::from_bytes(&b64d(text).map_err(CpabeError::Serialization)?).map_err(ser_err)
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let wire = WirePublicKey {
            v: ARTIFACT_VERSION,
            r#type: TYPE_PUBLIC_KEY.into(),
            group_id: self.group_id.clone(),
            g: b64e(&self.g.to_bytes()),
            h: b64e(&self.h.to_bytes()),
            egg_alpha: b64e(&self.egg_alpha.to_bytes()),
        };
        serde_json::to_vec(&wire).expect("serializable")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CpabeError> {
        let header: WireHeader = serde_json::from_slice(bytes).map_err(ser_err)?;
        check_header(header.v, &header.r#type, &header.group_id, TYPE_PUBLIC_KEY)?;
        let wire: WirePublicKey = serde_json::from_slice(bytes).map_err(ser_err)?;
        let pk = PublicKey {
            group_id: wire.group_id,
            g: g0_from(&wire.g)?,
            h: g0_from(&wire.h)?,
            egg_alpha: gt_from(&wire.egg_alpha)?,
        };
        if pk.g.is_identity() || pk.h.is_identity() || pairing(&pk.g, &pk.h).is_identity() {
            return Err(CpabeError::InvalidArtifact(
                "public key elements must generate the group".into(),
            ));
        }
        Ok(pk)
    }
}

impl MasterKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let wire = WireMasterKey {
            v: ARTIFACT_VERSION,
            r#type: TYPE_MASTER_KEY.into(),
            group_id: GROUP_ID.into(),
            beta: b64e(&self.beta.to_bytes()),
            g_alpha: b64e(&self.g_alpha.to_bytes()),
        };
        serde_json::to_vec(&wire).expect("serializable")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CpabeError> {
        let header: WireHeader = serde_json::from_slice(bytes).map_err(ser_err)?;
        check_header(header.v, &header.r#type, &header.group_id, TYPE_MASTER_KEY)?;
        let wire: WireMasterKey = serde_json::from_slice(bytes).map_err(ser_err)?;
        let beta =
            Scalar::from_bytes(&b64d(&wire.beta).map_err(CpabeError::Serialization)?).map_err(ser_err)?;
        if beta.is_zero() {
            return Err(CpabeError::InvalidArtifact("beta must be invertible".into()));
        }
        Ok(MasterKey {
            beta,
            g_alpha: g0_from(&wire.g_alpha)?,
        })
    }
}

impl PrivateKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let wire = WirePrivateKey {
            v: ARTIFACT_VERSION,
            r#type: TYPE_PRIVATE_KEY.into(),
            group_id: GROUP_ID.into(),
            attrs: self.attrs.iter().map(|a| a.as_str().to_string()).collect(),
            d: b64e(&self.d.to_bytes()),
            components: self
                .components
                .iter()
                .map(|pair| WireKeyPair {
                    attr: pair.attr.as_str().to_string(),
                    d_j: b64e(&pair.d_j.to_bytes()),
                    dp_j: b64e(&pair.dp_j.to_bytes()),
                })
                .collect(),
        };
        serde_json::to_vec(&wire).expect("serializable")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CpabeError> {
        let header: WireHeader = serde_json::from_slice(bytes).map_err(ser_err)?;
        check_header(header.v, &header.r#type, &header.group_id, TYPE_PRIVATE_KEY)?;
        let wire: WirePrivateKey = serde_json::from_slice(bytes).map_err(ser_err)?;
        let attrs = AttributeSet::from_raw(&wire.attrs)?;
        if attrs.is_empty() {
            return Err(CpabeError::InvalidArtifact(
                "private key must carry at least one attribute".into(),
            ));
        }
        if attrs.len() != wire.attrs.len() {
            return Err(CpabeError::InvalidArtifact(
                "private key attribute list contains duplicates".into(),
            ));
        }
        let mut components = Vec::with_capacity(wire.components.len());
        for pair in &wire.components {
            components.push(AttributeKeyPair {
                attr: crate::policy::normalize_attribute(&pair.attr)?,
                d_j: g0_from(&pair.d_j)?,
                dp_j: g0_from(&pair.dp_j)?,
            });
        }
        // exactly one component pair per attribute
        let mut component_attrs: Vec<&str> =
            components.iter().map(|p| p.attr.as_str()).collect();
        component_attrs.sort_unstable();
        component_attrs.dedup();
        if component_attrs.len() != components.len()
            || components.len() != attrs.len()
            || !components.iter().all(|p| attrs.contains(&p.attr))
        {
            return Err(CpabeError::InvalidArtifact(
                "private key needs exactly one component pair per attribute".into(),
            ));
        }
        Ok(PrivateKey {
            attrs,
            d: g0_from(&wire.d)?,
            components,
        })
    }
}

impl CpabeCiphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let wire = WireCiphertext {
            v: ARTIFACT_VERSION,
            r#type: TYPE_CIPHERTEXT.into(),
            group_id: GROUP_ID.into(),
            policy: serialize_policy(&self.policy),
            c_tilde: b64e(&self.c_tilde.to_bytes()),
            c: b64e(&self.c.to_bytes()),
            leaves: self
                .leaves
                .iter()
                .map(|leaf| WireLeaf {
                    c_y: b64e(&leaf.c_y.to_bytes()),
                    cp_y: b64e(&leaf.cp_y.to_bytes()),
                })
                .collect(),
        };
        serde_json::to_vec(&wire).expect("serializable")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CpabeError> {
        let header: WireHeader = serde_json::from_slice(bytes).map_err(ser_err)?;
        check_header(header.v, &header.r#type, &header.group_id, TYPE_CIPHERTEXT)?;
        let wire: WireCiphertext = serde_json::from_slice(bytes).map_err(ser_err)?;
        let policy = parse_postfix(&wire.policy)?;
        if wire.leaves.len() != policy.leaf_count() {
            return Err(CpabeError::InvalidArtifact(format!(
                "{} leaf component pairs for {} policy leaves",
                wire.leaves.len(),
                policy.leaf_count()
            )));
        }
        let mut leaves = Vec::with_capacity(wire.leaves.len());
        for leaf in &wire.leaves {
            leaves.push(LeafCiphertext {
                c_y: g0_from(&leaf.c_y)?,
                cp_y: g0_from(&leaf.cp_y)?,
            });
        }
        Ok(CpabeCiphertext {
            policy,
            c_tilde: gt_from(&wire.c_tilde)?,
            c: g0_from(&wire.c)?,
            leaves,
        })
    }
}

/// Serializes any CPABE artifact into its JSON envelope.
pub fn serialize_artifact(artifact: &CpabeArtifact) -> Vec<u8> {
    match artifact {
        CpabeArtifact::PublicKey(pk) => pk.to_bytes(),
        CpabeArtifact::MasterKey(mk) => mk.to_bytes(),
        CpabeArtifact::PrivateKey(sk) => sk.to_bytes(),
        CpabeArtifact::Ciphertext(ct) => ct.to_bytes(),
    }
}

/// Parses any CPABE artifact, dispatching on the envelope's `type` field and
/// validating every invariant of the target type.
pub fn deserialize_artifact(bytes: &[u8]) -> Result<CpabeArtifact, CpabeError> {
    let header: WireHeader = serde_json::from_slice(bytes).map_err(ser_err)?;
    match header.r#type.as_str() {
        TYPE_PUBLIC_KEY => Ok(CpabeArtifact::PublicKey(PublicKey::from_bytes(bytes)?)),
        TYPE_MASTER_KEY => Ok(CpabeArtifact::MasterKey(MasterKey::from_bytes(bytes)?)),
        TYPE_PRIVATE_KEY => Ok(CpabeArtifact::PrivateKey(PrivateKey::from_bytes(bytes)?)),
        TYPE_CIPHERTEXT => Ok(CpabeArtifact::Ciphertext(CpabeCiphertext::from_bytes(bytes)?)),
        other => Err(CpabeError::WrongArtifactType {
            expected: "cpabe.*",
            found: other.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&seed.to_le_bytes());
        ChaCha20Rng::from_seed(s)
    }

    fn attrs(list: &str) -> AttributeSet {
        AttributeSet::parse_list(list).unwrap()
    }

    #[test]
    fn setup_consistency() {
        let mut r = rng(10);
        let (pk1, mk1) = setup(&mut r);
        let (pk2, _) = setup(&mut r);
        assert_ne!(pk1.egg_alpha, pk2.egg_alpha);
        // e(g^α, g) = e(g,g)^α
        assert_eq!(pairing(&mk1.g_alpha, &pk1.g), pk1.egg_alpha);
    }

    #[test]
    fn setup_beta_bookkeeping_with_seeded_entropy() {
        // replay the setup draws from the same seed to learn beta
        let mut r = rng(11);
        let (pk, mk) = setup(&mut r);
        let mut replay = rng(11);
        let _gen_exp = Scalar::random_nonzero(&mut replay);
        let _alpha = Scalar::random(&mut replay);
        let beta = Scalar::random_nonzero(&mut replay);
        assert_eq!(beta, mk.beta);
        // e(g, h)^{1/β} = e(g, g)
        let lhs = pairing(&pk.g, &pk.h).pow(&beta.inverse().unwrap());
        assert_eq!(lhs, pairing(&pk.g, &pk.g));
    }

    #[test]
    fn keygen_component_count_and_empty_set() {
        let mut r = rng(12);
        let (pk, mk) = setup(&mut r);
        let sk = keygen(&pk, &mk, &attrs("a, b"), &mut r).unwrap();
        assert_eq!(sk.components.len(), 2);
        assert!(matches!(
            keygen(&pk, &mk, &AttributeSet::new(), &mut r),
            Err(CpabeError::EmptyAttributeSet)
        ));
    }

    #[test]
    fn roundtrip_under_reference_policy() {
        let mut r = rng(13);
        let (pk, mk) = setup(&mut r);
        let tree = fixtures::policy_t();
        let m = GroupElementGT::random(&mut r);
        let ct = encrypt_element(&pk, &m, &tree, &mut r);
        assert_eq!(ct.leaves.len(), tree.leaf_count());
        assert_eq!(ct.leaves.len(), 7);

        // satisfying profile decrypts to the exact element
        let sk = keygen(&pk, &mk, &fixtures::attrs_s0(), &mut r).unwrap();
        assert_eq!(decrypt_element(&pk, &sk, &ct).unwrap(), m);

        // single-attribute profile is rejected with the opaque error
        let sk_no = keygen(&pk, &mk, &attrs("Position: Doctor"), &mut r).unwrap();
        assert!(matches!(
            decrypt_element(&pk, &sk_no, &ct),
            Err(CpabeError::PolicyNotSatisfied)
        ));
    }

    #[test]
    fn encryption_is_randomized() {
        let mut r = rng(14);
        let (pk, _) = setup(&mut r);
        let tree = crate::policy::parse_postfix("a b 2of2").unwrap();
        let m = GroupElementGT::random(&mut r);
        let ct1 = encrypt_element(&pk, &m, &tree, &mut r);
        let ct2 = encrypt_element(&pk, &m, &tree, &mut r);
        assert_ne!(ct1.c, ct2.c);
        assert_ne!(ct1.c_tilde, ct2.c_tilde);
    }

    #[test]
    fn threshold_gates_decrypt_with_partial_attributes() {
        let mut r = rng(15);
        let (pk, mk) = setup(&mut r);
        let tree = crate::policy::parse_postfix("a b c 2of3").unwrap();
        let m = GroupElementGT::random(&mut r);
        let ct = encrypt_element(&pk, &m, &tree, &mut r);
        for list in ["a, b", "a, c", "b, c", "a, b, c"] {
            let sk = keygen(&pk, &mk, &attrs(list), &mut r).unwrap();
            assert_eq!(decrypt_element(&pk, &sk, &ct).unwrap(), m, "set {list}");
        }
        let sk = keygen(&pk, &mk, &attrs("a"), &mut r).unwrap();
        assert!(decrypt_element(&pk, &sk, &ct).is_err());
    }

    #[test]
    fn collusion_mixing_recovers_nothing() {
        let mut r = rng(16);
        let (pk, mk) = setup(&mut r);
        let tree = fixtures::policy_t();
        let m = GroupElementGT::random(&mut r);
        let ct = encrypt_element(&pk, &m, &tree, &mut r);

        let sk_phd = keygen(&pk, &mk, &attrs("Position: PhD"), &mut r).unwrap();
        let sk_amu = keygen(&pk, &mk, &attrs("University: AMU"), &mut r).unwrap();
        assert!(decrypt_element(&pk, &sk_phd, &ct).is_err());
        assert!(decrypt_element(&pk, &sk_amu, &ct).is_err());

        // naive component merge: d from one key, pair lists concatenated
        let merged = PrivateKey {
            attrs: sk_phd.attrs.union(&sk_amu.attrs),
            d: sk_phd.d,
            components: sk_phd
                .components
                .iter()
                .chain(sk_amu.components.iter())
                .cloned()
                .collect(),
        };
        match decrypt_element(&pk, &merged, &ct) {
            Ok(wrong) => assert_ne!(wrong, m, "mixed components must not recover the message"),
            Err(_) => {}
        }
    }

    #[test]
    fn exponent_bookkeeping_with_seeded_entropy() {
        let (pk, mk) = setup(&mut rng(17));
        let user = attrs("a, b");

        let sk = keygen(&pk, &mk, &user, &mut rng(18)).unwrap();
        // keygen draws r first
        let r = Scalar::random(&mut rng(18));

        let tree = crate::policy::parse_postfix("a b 2of2").unwrap();
        let m = GroupElementGT::random(&mut rng(19));
        let mut enc_rng = rng(20);
        let ct = encrypt_element(&pk, &m, &tree, &mut enc_rng);
        // encrypt draws s first
        let s = Scalar::random(&mut rng(20));

        // e(c, d) = e(g,g)^{αs} · e(g,g)^{rs}
        let lhs = pairing(&ct.c, &sk.d);
        let rhs = pk
            .egg_alpha
            .pow(&s)
            .mul(&pairing(&pk.g, &pk.g).pow(&r.mul(&s)));
        assert_eq!(lhs, rhs);
        assert_eq!(decrypt_element(&pk, &sk, &ct).unwrap(), m);
    }

    #[test]
    fn artifact_round_trips() {
        let mut r = rng(21);
        let (pk, mk) = setup(&mut r);
        let sk = keygen(&pk, &mk, &fixtures::attrs_s2(), &mut r).unwrap();
        let m = GroupElementGT::random(&mut r);
        let ct = encrypt_element(&pk, &m, &fixtures::policy_t(), &mut r);

        assert_eq!(PublicKey::from_bytes(&pk.to_bytes()).unwrap(), pk);
        assert_eq!(MasterKey::from_bytes(&mk.to_bytes()).unwrap(), mk);
        assert_eq!(PrivateKey::from_bytes(&sk.to_bytes()).unwrap(), sk);
        assert_eq!(CpabeCiphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);

        match deserialize_artifact(&sk.to_bytes()).unwrap() {
            CpabeArtifact::PrivateKey(back) => assert_eq!(back, sk),
            other => panic!("wrong artifact kind: {other:?}"),
        }
        // decrypt after a serialization round trip
        let sk2 = PrivateKey::from_bytes(&sk.to_bytes()).unwrap();
        let ct2 = CpabeCiphertext::from_bytes(&ct.to_bytes()).unwrap();
        assert_eq!(decrypt_element(&pk, &sk2, &ct2).unwrap(), m);
    }

    #[test]
    fn artifact_validation_rejects_tampering() {
        let mut r = rng(22);
        let (pk, mk) = setup(&mut r);
        let sk = keygen(&pk, &mk, &attrs("a, b"), &mut r).unwrap();

        // foreign group id
        let tampered = String::from_utf8(pk.to_bytes())
            .unwrap()
            .replace("bls12-381", "bn254");
        assert!(matches!(
            PublicKey::from_bytes(tampered.as_bytes()),
            Err(CpabeError::GroupMismatch { .. })
        ));

        // unsupported version
        let old = String::from_utf8(pk.to_bytes())
            .unwrap()
            .replace("\"v\":1", "\"v\":2");
        assert!(matches!(
            PublicKey::from_bytes(old.as_bytes()),
            Err(CpabeError::VersionMismatch { found: 2 })
        ));

        // wrong artifact type
        assert!(matches!(
            MasterKey::from_bytes(&pk.to_bytes()),
            Err(CpabeError::WrongArtifactType { .. })
        ));

        // truncated component list
        let mut truncated = sk.clone();
        truncated.components.pop();
        assert!(matches!(
            PrivateKey::from_bytes(&truncated.to_bytes()),
            Err(CpabeError::InvalidArtifact(_))
        ));

        // corrupted group element bytes
        let json = String::from_utf8(sk.to_bytes()).unwrap();
        let wire: WirePrivateKey = serde_json::from_str(&json).unwrap();
        let mut broken = wire;
        broken.d = b64e(&[0u8; 144]);
        assert!(PrivateKey::from_bytes(&serde_json::to_vec(&broken).unwrap()).is_err());
    }

    #[test]
    fn ciphertext_leaf_count_must_match_policy() {
        let mut r = rng(23);
        let (pk, _) = setup(&mut r);
        let tree = crate::policy::parse_postfix("a b 2of2").unwrap();
        let m = GroupElementGT::random(&mut r);
        let mut ct = encrypt_element(&pk, &m, &tree, &mut r);
        ct.leaves.pop();
        assert!(CpabeCiphertext::from_bytes(&ct.to_bytes()).is_err());
    }
}
