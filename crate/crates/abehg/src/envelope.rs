//! Hybrid record envelopes: the record bytes go under AES-256-GCM with a
//! fresh content key, and the key's source element is wrapped by the CPABE
//! header. The canonical policy text and the record metadata are bound as
//! AEAD associated data, so neither can be swapped without breaking the tag.

use crate::cpabe::{decrypt_element, encrypt_element, CpabeCiphertext, CpabeError, PrivateKey, PublicKey};
use crate::encoding::{b64d, b64e};
use crate::group::GroupElementGT;
use crate::policy::{serialize_policy, AccessTree};
use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ENVELOPE_VERSION: u64 = 1;
pub const ENVELOPE_TYPE: &str = "ehr.envelope";
pub const NONCE_LEN: usize = 12;
pub const CONTENT_KEY_LEN: usize = 32;

/// Upper bound on plaintext size accepted by [`seal`].
pub const DEFAULT_MAX_PLAINTEXT: usize = 64 * 1024 * 1024;

const KDF_DOMAIN_TAG: &[u8] = b"cpabe:kdf:v1";

#[derive(Debug, thiserror::Error)]
pub enum EnvelopeError {
    /// The key's attributes do not satisfy the envelope's policy.
    #[error("policy not satisfied")]
    PolicyNotSatisfied,
    /// The body, nonce, policy text, or metadata fail to authenticate.
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("plaintext of {len} bytes exceeds the {max}-byte limit")]
    Oversize { len: usize, max: usize },
    #[error("envelope encoding: {0}")]
    Serialization(String),
    #[error(transparent)]
    Cpabe(CpabeError),
}

impl From<CpabeError> for EnvelopeError {
    fn from(e: CpabeError) -> Self {
        match e {
            CpabeError::PolicyNotSatisfied => EnvelopeError::PolicyNotSatisfied,
            other => EnvelopeError::Cpabe(other),
        }
    }
}

/// Record metadata carried in clear and authenticated by the body tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub content_type: String,
    /// Unix seconds.
    pub created_at: i64,
    pub owner_id: String,
}

/// A sealed record: CPABE header wrapping the content-key source element,
/// plus the AEAD body over the record bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordEnvelope {
    pub header: CpabeCiphertext,
    pub nonce: [u8; NONCE_LEN],
    pub body: Vec<u8>,
    pub meta: RecordMeta,
}

/// Content key derivation: SHA-256 over the domain tag and the canonical
/// encoding of the source element.
pub fn derive_content_key(m: &GroupElementGT) -> [u8; CONTENT_KEY_LEN] {
    let mut hasher = Sha256::new();
    hasher.update(KDF_DOMAIN_TAG);
    hasher.update(m.to_bytes());
    hasher.finalize().into()
}

/// Associated data binding the enforced policy and the metadata to the body.
/// Length-prefixed fields keep the concatenation unambiguous.
fn associated_data(policy_text: &str, meta: &RecordMeta) -> Vec<u8> {
    let mut out = Vec::new();
    for field in [policy_text.as_bytes(), meta.content_type.as_bytes()] {
        out.extend_from_slice(&(field.len() as u64).to_be_bytes());
        out.extend_from_slice(field);
    }
    out.extend_from_slice(&meta.created_at.to_be_bytes());
    let owner = meta.owner_id.as_bytes();
    out.extend_from_slice(&(owner.len() as u64).to_be_bytes());
    out.extend_from_slice(owner);
    out
}

/// Seals record bytes under an access tree with an explicit size limit.
pub fn seal_with_limit<R: RngCore + CryptoRng>(
    pk: &PublicKey,
    tree: &AccessTree,
    plaintext: &[u8],
    meta: RecordMeta,
    max_plaintext: usize,
    rng: &mut R,
) -> Result<RecordEnvelope, EnvelopeError> {
    if plaintext.len() > max_plaintext {
        return Err(EnvelopeError::Oversize {
            len: plaintext.len(),
            max: max_plaintext,
        });
    }
    let m = GroupElementGT::random(rng);
    let header = encrypt_element(pk, &m, tree, rng);
    let key = derive_content_key(&m);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ad = associated_data(&serialize_policy(tree), &meta);
    let cipher = Aes256Gcm::new((&key).into());
    let body = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: plaintext,
                aad: &ad,
            },
        )
        .map_err(|_| EnvelopeError::AuthenticationFailure)?;
    Ok(RecordEnvelope {
        header,
        nonce,
        body,
        meta,
    })
}

/// Seals record bytes under an access tree with the default size limit.
pub fn seal<R: RngCore + CryptoRng>(
    pk: &PublicKey,
    tree: &AccessTree,
    plaintext: &[u8],
    meta: RecordMeta,
    rng: &mut R,
) -> Result<RecordEnvelope, EnvelopeError> {
    seal_with_limit(pk, tree, plaintext, meta, DEFAULT_MAX_PLAINTEXT, rng)
}

/// Recovers the record bytes. Fails with [`EnvelopeError::PolicyNotSatisfied`]
/// when the key cannot unwrap the header, and
/// [`EnvelopeError::AuthenticationFailure`] when anything bound by the tag
/// was tampered with; no partial plaintext is ever released.
pub fn open(
    pk: &PublicKey,
    sk: &PrivateKey,
    env: &RecordEnvelope,
) -> Result<Vec<u8>, EnvelopeError> {
    let m = decrypt_element(pk, sk, &env.header)?;
    let key = derive_content_key(&m);
    let ad = associated_data(&serialize_policy(&env.header.policy), &env.meta);
    let cipher = Aes256Gcm::new((&key).into());
    cipher
        .decrypt(
            Nonce::from_slice(&env.nonce),
            Payload {
                msg: &env.body,
                aad: &ad,
            },
        )
        .map_err(|_| EnvelopeError::AuthenticationFailure)
}

#[derive(Serialize, Deserialize)]
struct WireEnvelope {
    v: u64,
    r#type: String,
    header: serde_json::Value,
    nonce: String,
    body: String,
    meta: RecordMeta,
}

impl RecordEnvelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header: serde_json::Value =
            serde_json::from_slice(&self.header.to_bytes()).expect("header is valid json");
        let wire = WireEnvelope {
            v: ENVELOPE_VERSION,
            r#type: ENVELOPE_TYPE.into(),
            header,
            nonce: b64e(&self.nonce),
            body: b64e(&self.body),
            meta: self.meta.clone(),
        };
        serde_json::to_vec(&wire).expect("serializable")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let wire: WireEnvelope =
            serde_json::from_slice(bytes).map_err(|e| EnvelopeError::Serialization(e.to_string()))?;
        if wire.v != ENVELOPE_VERSION {
            return Err(EnvelopeError::Serialization(format!(
                "envelope version {} is not supported",
                wire.v
            )));
        }
        if wire.r#type != ENVELOPE_TYPE {
            return Err(EnvelopeError::Serialization(format!(
                "expected type {ENVELOPE_TYPE:?}, got {:?}",
                wire.r#type
            )));
        }
        let header_bytes =
            serde_json::to_vec(&wire.header).map_err(|e| EnvelopeError::Serialization(e.to_string()))?;
        let header = CpabeCiphertext::from_bytes(&header_bytes)?;
        let nonce_vec = b64d(&wire.nonce).map_err(EnvelopeError::Serialization)?;
        let nonce: [u8; NONCE_LEN] = nonce_vec.try_into().map_err(|_| {
            EnvelopeError::Serialization(format!("nonce must be {NONCE_LEN} bytes"))
        })?;
        Ok(RecordEnvelope {
            header,
            nonce,
            body: b64d(&wire.body).map_err(EnvelopeError::Serialization)?,
            meta: wire.meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpabe::{keygen, setup};
    use crate::fixtures;
    use crate::policy::{parse_postfix, AttributeSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&seed.to_le_bytes());
        ChaCha20Rng::from_seed(s)
    }

    fn meta() -> RecordMeta {
        RecordMeta {
            content_type: "text/plain".into(),
            created_at: 1_700_000_000,
            owner_id: "owner-1".into(),
        }
    }

    #[test]
    fn content_key_is_deterministic_and_distinct() {
        let mut r = rng(30);
        let m1 = GroupElementGT::random(&mut r);
        let m2 = GroupElementGT::random(&mut r);
        assert_eq!(derive_content_key(&m1), derive_content_key(&m1));
        assert_ne!(derive_content_key(&m1), derive_content_key(&m2));
        assert_eq!(derive_content_key(&m1).len(), 32);
    }

    #[test]
    fn seal_open_round_trip() {
        let mut r = rng(31);
        let (pk, mk) = setup(&mut r);
        let tree = fixtures::policy_t();
        let sk = keygen(&pk, &mk, &fixtures::attrs_s0(), &mut r).unwrap();
        let plaintext = b"patient chart 42: bp 120/80";
        let env = seal(&pk, &tree, plaintext, meta(), &mut r).unwrap();
        assert_eq!(open(&pk, &sk, &env).unwrap(), plaintext);
    }

    #[test]
    fn empty_plaintext_round_trips() {
        let mut r = rng(32);
        let (pk, mk) = setup(&mut r);
        let tree = parse_postfix("a").unwrap();
        let sk = keygen(&pk, &mk, &AttributeSet::parse_list("a").unwrap(), &mut r).unwrap();
        let env = seal(&pk, &tree, b"", meta(), &mut r).unwrap();
        assert_eq!(open(&pk, &sk, &env).unwrap(), b"");
    }

    #[test]
    fn sealing_is_randomized() {
        let mut r = rng(33);
        let (pk, _) = setup(&mut r);
        let tree = parse_postfix("a").unwrap();
        let e1 = seal(&pk, &tree, b"same bytes", meta(), &mut r).unwrap();
        let e2 = seal(&pk, &tree, b"same bytes", meta(), &mut r).unwrap();
        assert_ne!(e1.body, e2.body);
        assert_ne!(e1.nonce, e2.nonce);
        assert_ne!(e1.header.c, e2.header.c);
    }

    #[test]
    fn oversize_plaintext_is_rejected() {
        let mut r = rng(34);
        let (pk, _) = setup(&mut r);
        let tree = parse_postfix("a").unwrap();
        let err = seal_with_limit(&pk, &tree, &[0u8; 32], meta(), 16, &mut r).unwrap_err();
        assert!(matches!(err, EnvelopeError::Oversize { len: 32, max: 16 }));
    }

    #[test]
    fn body_flip_fails_authentication() {
        let mut r = rng(35);
        let (pk, mk) = setup(&mut r);
        let tree = parse_postfix("a").unwrap();
        let sk = keygen(&pk, &mk, &AttributeSet::parse_list("a").unwrap(), &mut r).unwrap();
        let env = seal(&pk, &tree, b"sensitive", meta(), &mut r).unwrap();
        for i in 0..env.body.len() {
            let mut tampered = env.clone();
            tampered.body[i] ^= 0x01;
            assert!(matches!(
                open(&pk, &sk, &tampered),
                Err(EnvelopeError::AuthenticationFailure)
            ));
        }
    }

    #[test]
    fn metadata_is_bound_by_associated_data() {
        let mut r = rng(36);
        let (pk, mk) = setup(&mut r);
        let tree = parse_postfix("a").unwrap();
        let sk = keygen(&pk, &mk, &AttributeSet::parse_list("a").unwrap(), &mut r).unwrap();
        let env = seal(&pk, &tree, b"sensitive", meta(), &mut r).unwrap();

        let mut owner_swap = env.clone();
        owner_swap.meta.owner_id = "someone-else".into();
        assert!(matches!(
            open(&pk, &sk, &owner_swap),
            Err(EnvelopeError::AuthenticationFailure)
        ));

        let mut nonce_swap = env.clone();
        nonce_swap.nonce[0] ^= 0xff;
        assert!(matches!(
            open(&pk, &sk, &nonce_swap),
            Err(EnvelopeError::AuthenticationFailure)
        ));
    }

    #[test]
    fn policy_text_is_bound_by_associated_data() {
        let mut r = rng(37);
        let (pk, mk) = setup(&mut r);
        let tree = parse_postfix("a b 2of2").unwrap();
        let sk = keygen(&pk, &mk, &AttributeSet::parse_list("a, b").unwrap(), &mut r).unwrap();
        let env = seal(&pk, &tree, b"sensitive", meta(), &mut r).unwrap();
        assert_eq!(open(&pk, &sk, &env).unwrap(), b"sensitive");

        // weaken the embedded policy after sealing
        let json = String::from_utf8(env.to_bytes()).unwrap();
        let weakened = json.replace("a b 2of2", "a b 1of2");
        assert_ne!(json, weakened);
        let tampered = RecordEnvelope::from_bytes(weakened.as_bytes()).unwrap();
        assert!(matches!(
            open(&pk, &sk, &tampered),
            Err(EnvelopeError::AuthenticationFailure)
        ));
    }

    #[test]
    fn header_cannot_move_to_a_different_body() {
        let mut r = rng(38);
        let (pk, mk) = setup(&mut r);
        let tree = parse_postfix("a").unwrap();
        let sk = keygen(&pk, &mk, &AttributeSet::parse_list("a").unwrap(), &mut r).unwrap();
        let env1 = seal(&pk, &tree, b"record one", meta(), &mut r).unwrap();
        let env2 = seal(&pk, &tree, b"record two", meta(), &mut r).unwrap();
        let mut franken = env2.clone();
        franken.header = env1.header.clone();
        assert!(matches!(
            open(&pk, &sk, &franken),
            Err(EnvelopeError::AuthenticationFailure)
        ));
    }

    #[test]
    fn non_satisfying_key_reports_policy_error() {
        let mut r = rng(39);
        let (pk, mk) = setup(&mut r);
        let tree = fixtures::policy_t();
        let sk = keygen(&pk, &mk, &fixtures::attrs_s1(), &mut r).unwrap();
        let env = seal(&pk, &tree, b"sensitive", meta(), &mut r).unwrap();
        assert!(matches!(
            open(&pk, &sk, &env),
            Err(EnvelopeError::PolicyNotSatisfied)
        ));
    }

    #[test]
    fn envelope_json_round_trips() {
        let mut r = rng(40);
        let (pk, mk) = setup(&mut r);
        let tree = fixtures::policy_t();
        let sk = keygen(&pk, &mk, &fixtures::attrs_s2(), &mut r).unwrap();
        let env = seal(&pk, &tree, b"round trip me", meta(), &mut r).unwrap();
        let bytes = env.to_bytes();
        let back = RecordEnvelope::from_bytes(&bytes).unwrap();
        assert_eq!(back, env);
        assert_eq!(open(&pk, &sk, &back).unwrap(), b"round trip me");
        assert!(RecordEnvelope::from_bytes(b"{}").is_err());
    }
}
