//! Resource server and attribute-authority facade: stores sealed record
//! envelopes for bearer-token holders and issues attribute-bound private
//! keys to registered clients. The master key lives only in this process.
//!
//! Access enforcement is split on purpose: the bearer token gates transport
//! (who may fetch bytes), while the envelope's policy gates content (who can
//! open them). The server never evaluates record policies and never sees
//! plaintext or anyone's private key after handing it out.

use crate::authz::{AuthzServer, ClientInfo, Clock, Scope, TokenInfo};
use crate::cpabe::{keygen, MasterKey, PublicKey};
use crate::envelope::{RecordEnvelope, RecordMeta};
use crate::policy::serialize_policy;
use async_trait::async_trait;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

#[derive(Debug, thiserror::Error)]
pub enum ResourceError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("forbidden")]
    Forbidden,
    #[error("not found")]
    NotFound,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("storage: {0}")]
    Storage(String),
}

impl From<io::Error> for ResourceError {
    fn from(e: io::Error) -> Self {
        ResourceError::Storage(e.to_string())
    }
}

/// Token validation and client lookup, delegated to the authorization
/// server: an in-process call when co-hosted, HTTP when split.
#[async_trait]
pub trait AuthzFacade: Send + Sync {
    async fn introspect(&self, token: &str) -> Result<TokenInfo, ResourceError>;
    async fn client_info(&self, client_id: &str) -> Result<Option<ClientInfo>, ResourceError>;
}

/// Co-hosted facade over a shared [`AuthzServer`].
pub struct InProcessAuthz(pub Arc<AuthzServer>);

#[async_trait]
impl AuthzFacade for InProcessAuthz {
    async fn introspect(&self, token: &str) -> Result<TokenInfo, ResourceError> {
        self.0
            .introspect(&self.0.service_secret().to_string(), token)
            .map_err(|_| ResourceError::Unauthorized)
    }

    async fn client_info(&self, client_id: &str) -> Result<Option<ClientInfo>, ResourceError> {
        Ok(self.0.client_info(client_id))
    }
}

/// Key-value store standing in for the cloud: read-after-write consistent
/// within one instance, nothing more assumed.
pub trait StorageBackend: Send + Sync {
    fn put(&self, record_id: &str, bytes: &[u8]) -> io::Result<()>;
    fn get(&self, record_id: &str) -> io::Result<Option<Vec<u8>>>;
    fn delete(&self, record_id: &str) -> io::Result<bool>;
    fn list(&self) -> io::Result<Vec<String>>;
}

/// In-memory backend for tests.
#[derive(Default)]
pub struct MemoryBackend(Mutex<HashMap<String, Vec<u8>>>);

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }
}

impl StorageBackend for MemoryBackend {
    fn put(&self, record_id: &str, bytes: &[u8]) -> io::Result<()> {
        self.0
            .lock()
            .expect("backend poisoned")
            .insert(record_id.to_string(), bytes.to_vec());
        Ok(())
    }

    fn get(&self, record_id: &str) -> io::Result<Option<Vec<u8>>> {
        Ok(self.0.lock().expect("backend poisoned").get(record_id).cloned())
    }

    fn delete(&self, record_id: &str) -> io::Result<bool> {
        Ok(self
            .0
            .lock()
            .expect("backend poisoned")
            .remove(record_id)
            .is_some())
    }

    fn list(&self) -> io::Result<Vec<String>> {
        Ok(self.0.lock().expect("backend poisoned").keys().cloned().collect())
    }
}

/// Local-directory backend: one file per record, atomic replace via rename.
pub struct DirBackend {
    dir: PathBuf,
}

impl DirBackend {
    pub fn new(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(DirBackend { dir })
    }

    fn path_for(&self, record_id: &str) -> PathBuf {
        self.dir.join(format!("{record_id}.rec"))
    }
}

impl StorageBackend for DirBackend {
    fn put(&self, record_id: &str, bytes: &[u8]) -> io::Result<()> {
        let tmp = self.dir.join(format!("{record_id}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, self.path_for(record_id))
    }

    fn get(&self, record_id: &str) -> io::Result<Option<Vec<u8>>> {
        match std::fs::read(self.path_for(record_id)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn delete(&self, record_id: &str) -> io::Result<bool> {
        match std::fs::remove_file(self.path_for(record_id)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e),
        }
    }

    fn list(&self) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_string_lossy().strip_suffix(".rec") {
                out.push(id.to_string());
            }
        }
        Ok(out)
    }
}

/// A stored record: ownership, listing metadata, and the envelope bytes
/// verbatim as uploaded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredRecord {
    pub record_id: String,
    pub owner_client_id: String,
    pub policy_text: String,
    pub created_at: i64,
    pub updated_at: i64,
    pub seq: u64,
    pub envelope_json: String,
}

impl StoredRecord {
    fn parse(bytes: &[u8]) -> Result<Self, ResourceError> {
        let record: StoredRecord = serde_json::from_slice(bytes)
            .map_err(|e| ResourceError::Storage(format!("corrupt record: {e}")))?;
        let envelope = RecordEnvelope::from_bytes(record.envelope_json.as_bytes())
            .map_err(|e| ResourceError::Storage(format!("corrupt envelope: {e}")))?;
        if serialize_policy(&envelope.header.policy) != record.policy_text {
            return Err(ResourceError::Storage(
                "record policy text does not match its envelope header".into(),
            ));
        }
        Ok(record)
    }

    pub fn envelope(&self) -> Result<RecordEnvelope, ResourceError> {
        RecordEnvelope::from_bytes(self.envelope_json.as_bytes())
            .map_err(|e| ResourceError::Storage(format!("corrupt envelope: {e}")))
    }
}

/// Listing entry: metadata only, never envelope bodies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordListing {
    pub record_id: String,
    pub policy_text: String,
    pub owner_client_id: String,
    pub meta: RecordMeta,
    pub created_at: i64,
    pub updated_at: i64,
}

pub struct ResourceServer {
    authz: Arc<dyn AuthzFacade>,
    backend: Arc<dyn StorageBackend>,
    pk: PublicKey,
    msk: MasterKey,
    clock: Arc<dyn Clock>,
    seq: AtomicU64,
    write_lock: tokio::sync::Mutex<()>,
}

impl ResourceServer {
    pub fn new(
        authz: Arc<dyn AuthzFacade>,
        backend: Arc<dyn StorageBackend>,
        pk: PublicKey,
        msk: MasterKey,
        clock: Arc<dyn Clock>,
    ) -> io::Result<Self> {
        let mut max_seq = 0;
        for id in backend.list()? {
            if let Some(bytes) = backend.get(&id)? {
                if let Ok(record) = serde_json::from_slice::<StoredRecord>(&bytes) {
                    max_seq = max_seq.max(record.seq);
                }
            }
        }
        Ok(ResourceServer {
            authz,
            backend,
            pk,
            msk,
            clock,
            seq: AtomicU64::new(max_seq + 1),
            write_lock: tokio::sync::Mutex::new(()),
        })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    async fn active_token(&self, bearer: &str) -> Result<(String, Vec<Scope>), ResourceError> {
        let info = self.authz.introspect(bearer).await?;
        if !info.active {
            return Err(ResourceError::Unauthorized);
        }
        let client_id = info.client_id.ok_or(ResourceError::Unauthorized)?;
        let scope = info.scope.unwrap_or_default().into_iter().collect();
        Ok((client_id, scope))
    }

    /// Attribute-authority endpoint: issues a private key over the caller's
    /// registered attributes. The key is returned once and never persisted.
    pub async fn issue_private_key(&self, bearer: &str) -> Result<Vec<u8>, ResourceError> {
        let (client_id, _) = self.active_token(bearer).await?;
        let info = self
            .authz
            .client_info(&client_id)
            .await?
            .ok_or(ResourceError::NotFound)?;
        let sk = keygen(&self.pk, &self.msk, &info.attrs, &mut OsRng)
            .map_err(|e| ResourceError::BadRequest(e.to_string()))?;
        Ok(sk.to_bytes())
    }

    /// Stores an uploaded envelope. Requires write scope; the envelope must
    /// pass deserialization and its bytes are kept verbatim.
    pub async fn put_record(&self, bearer: &str, envelope_bytes: &[u8]) -> Result<String, ResourceError> {
        let (client_id, scope) = self.active_token(bearer).await?;
        if !scope.contains(&Scope::EhrWrite) {
            return Err(ResourceError::Forbidden);
        }
        let envelope = RecordEnvelope::from_bytes(envelope_bytes)
            .map_err(|e| ResourceError::BadRequest(e.to_string()))?;
        let envelope_json = String::from_utf8(envelope_bytes.to_vec())
            .map_err(|e| ResourceError::BadRequest(e.to_string()))?;
        let now = self.clock.now();
        let record = StoredRecord {
            record_id: new_record_id(),
            owner_client_id: client_id,
            policy_text: serialize_policy(&envelope.header.policy),
            created_at: now,
            updated_at: now,
            seq: self.seq.fetch_add(1, Ordering::SeqCst),
            envelope_json,
        };
        let _guard = self.write_lock.lock().await;
        self.backend
            .put(&record.record_id, &serde_json::to_vec(&record).expect("serializable"))?;
        Ok(record.record_id)
    }

    /// Returns the stored envelope bytes verbatim. Any active read-scope
    /// token may fetch any record; opening it is a matter of key attributes,
    /// which this server does not evaluate.
    pub async fn get_record(&self, bearer: &str, record_id: &str) -> Result<Vec<u8>, ResourceError> {
        let (_, scope) = self.active_token(bearer).await?;
        if !scope.contains(&Scope::EhrRead) {
            return Err(ResourceError::Forbidden);
        }
        let bytes = self.backend.get(record_id)?.ok_or(ResourceError::NotFound)?;
        let record = StoredRecord::parse(&bytes)?;
        Ok(record.envelope_json.into_bytes())
    }

    /// Metadata listing in upload order, optionally filtered by owner.
    pub async fn list_records(
        &self,
        bearer: &str,
        owner_filter: Option<&str>,
    ) -> Result<Vec<RecordListing>, ResourceError> {
        let (_, scope) = self.active_token(bearer).await?;
        if !scope.contains(&Scope::EhrRead) {
            return Err(ResourceError::Forbidden);
        }
        let mut records = Vec::new();
        for id in self.backend.list()? {
            let Some(bytes) = self.backend.get(&id)? else {
                continue;
            };
            let record = StoredRecord::parse(&bytes)?;
            if let Some(owner) = owner_filter {
                if record.owner_client_id != owner {
                    continue;
                }
            }
            records.push(record);
        }
        records.sort_by_key(|r| (r.created_at, r.seq));
        records
            .into_iter()
            .map(|r| {
                let meta = r.envelope()?.meta;
                Ok(RecordListing {
                    record_id: r.record_id,
                    policy_text: r.policy_text,
                    owner_client_id: r.owner_client_id,
                    meta,
                    created_at: r.created_at,
                    updated_at: r.updated_at,
                })
            })
            .collect()
    }

    /// Replaces a record's envelope. Only the original owner may mutate.
    pub async fn update_record(
        &self,
        bearer: &str,
        record_id: &str,
        envelope_bytes: &[u8],
    ) -> Result<(), ResourceError> {
        let (client_id, scope) = self.active_token(bearer).await?;
        if !scope.contains(&Scope::EhrWrite) {
            return Err(ResourceError::Forbidden);
        }
        let envelope = RecordEnvelope::from_bytes(envelope_bytes)
            .map_err(|e| ResourceError::BadRequest(e.to_string()))?;
        let envelope_json = String::from_utf8(envelope_bytes.to_vec())
            .map_err(|e| ResourceError::BadRequest(e.to_string()))?;
        let _guard = self.write_lock.lock().await;
        let bytes = self.backend.get(record_id)?.ok_or(ResourceError::NotFound)?;
        let mut record = StoredRecord::parse(&bytes)?;
        if record.owner_client_id != client_id {
            return Err(ResourceError::Forbidden);
        }
        record.policy_text = serialize_policy(&envelope.header.policy);
        record.envelope_json = envelope_json;
        record.updated_at = self.clock.now();
        self.backend
            .put(record_id, &serde_json::to_vec(&record).expect("serializable"))?;
        Ok(())
    }

    /// Removes a record. Only the original owner may mutate.
    pub async fn delete_record(&self, bearer: &str, record_id: &str) -> Result<(), ResourceError> {
        let (client_id, scope) = self.active_token(bearer).await?;
        if !scope.contains(&Scope::EhrWrite) {
            return Err(ResourceError::Forbidden);
        }
        let _guard = self.write_lock.lock().await;
        let bytes = self.backend.get(record_id)?.ok_or(ResourceError::NotFound)?;
        let record = StoredRecord::parse(&bytes)?;
        if record.owner_client_id != client_id {
            return Err(ResourceError::Forbidden);
        }
        self.backend.delete(record_id)?;
        Ok(())
    }
}

fn new_record_id() -> String {
    let mut bytes = [0u8; 16];
    OsRng.fill_bytes(&mut bytes);
    format!("r-{}", crate::encoding::b64e(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authz::{AuthzConfig, ManualClock, Role};
    use crate::cpabe::{decrypt_element, setup, PrivateKey};
    use crate::envelope::{open, seal};
    use crate::fixtures;
    use crate::group::GroupElementGT;
    use crate::policy::AttributeSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fixture {
        clock: Arc<ManualClock>,
        authz: Arc<AuthzServer>,
        resource: ResourceServer,
        backend: Arc<MemoryBackend>,
        pk: PublicKey,
        msk: MasterKey,
    }

    fn fixture() -> Fixture {
        let clock = Arc::new(ManualClock::new(1_000_000));
        let authz = Arc::new(AuthzServer::new(AuthzConfig::default(), clock.clone()));
        let backend = Arc::new(MemoryBackend::new());
        let mut rng = ChaCha20Rng::from_seed([42u8; 32]);
        let (pk, msk) = setup(&mut rng);
        let resource = ResourceServer::new(
            Arc::new(InProcessAuthz(authz.clone())),
            backend.clone(),
            pk.clone(),
            msk.clone(),
            clock.clone(),
        )
        .unwrap();
        Fixture {
            clock,
            authz,
            resource,
            backend,
            pk,
            msk,
        }
    }

    fn token_for(fx: &Fixture, role: Role, attrs: &str) -> (String, String) {
        let creds = fx
            .authz
            .register_client(role, AttributeSet::parse_list(attrs).unwrap(), None)
            .unwrap();
        let issued = fx
            .authz
            .issue_token(&creds.client_id, &creds.client_secret, None)
            .unwrap();
        (creds.client_id, issued.token)
    }

    fn sealed_envelope(fx: &Fixture, plaintext: &[u8]) -> Vec<u8> {
        let mut rng = ChaCha20Rng::from_seed([7u8; 32]);
        seal(
            &fx.pk,
            &fixtures::policy_t(),
            plaintext,
            RecordMeta {
                content_type: "text/plain".into(),
                created_at: fx.clock.now(),
                owner_id: "owner".into(),
            },
            &mut rng,
        )
        .unwrap()
        .to_bytes()
    }

    #[tokio::test]
    async fn key_issuance_matches_registered_attributes() {
        let fx = fixture();
        let (_, token) = token_for(&fx, Role::User, "Position: PhD, University: AMU");
        let key_bytes = fx.resource.issue_private_key(&token).await.unwrap();
        let sk = PrivateKey::from_bytes(&key_bytes).unwrap();
        assert_eq!(sk.components.len(), 2);

        // the issued key decrypts a reference-policy element
        let mut rng = ChaCha20Rng::from_seed([3u8; 32]);
        let m = GroupElementGT::random(&mut rng);
        let ct = crate::cpabe::encrypt_element(&fx.pk, &m, &fixtures::policy_t(), &mut rng);
        assert_eq!(decrypt_element(&fx.pk, &sk, &ct).unwrap(), m);
        let _ = &fx.msk;
    }

    #[tokio::test]
    async fn key_issuance_requires_an_active_token() {
        let fx = fixture();
        let (_, token) = token_for(&fx, Role::User, "a");
        fx.clock.advance(3600);
        assert!(matches!(
            fx.resource.issue_private_key(&token).await,
            Err(ResourceError::Unauthorized)
        ));
        assert!(matches!(
            fx.resource.issue_private_key("bogus").await,
            Err(ResourceError::Unauthorized)
        ));
    }

    #[tokio::test]
    async fn records_round_trip_byte_identical() {
        let fx = fixture();
        let (_, owner_token) = token_for(&fx, Role::Owner, "o");
        let envelope = sealed_envelope(&fx, b"chart");
        let id = fx.resource.put_record(&owner_token, &envelope).await.unwrap();
        let fetched = fx.resource.get_record(&owner_token, &id).await.unwrap();
        assert_eq!(fetched, envelope);
    }

    #[tokio::test]
    async fn transport_gates() {
        let fx = fixture();
        let (_, owner_token) = token_for(&fx, Role::Owner, "o");
        let (_, user_token) = token_for(&fx, Role::User, "position:student");
        let envelope = sealed_envelope(&fx, b"chart");

        // read-only role cannot upload
        assert!(matches!(
            fx.resource.put_record(&user_token, &envelope).await,
            Err(ResourceError::Forbidden)
        ));
        // garbage body is rejected
        assert!(matches!(
            fx.resource.put_record(&owner_token, b"{}").await,
            Err(ResourceError::BadRequest(_))
        ));

        let id = fx.resource.put_record(&owner_token, &envelope).await.unwrap();
        // any active read token can fetch, even a non-satisfying user's
        assert!(fx.resource.get_record(&user_token, &id).await.is_ok());
        assert!(matches!(
            fx.resource.get_record(&user_token, "r-missing").await,
            Err(ResourceError::NotFound)
        ));
        // revoked token cannot
        fx.authz.revoke(&user_token);
        assert!(matches!(
            fx.resource.get_record(&user_token, &id).await,
            Err(ResourceError::Unauthorized)
        ));
    }

    #[tokio::test]
    async fn fetched_but_not_openable_without_satisfying_attributes() {
        let fx = fixture();
        let (_, owner_token) = token_for(&fx, Role::Owner, "o");
        let (_, user_token) = token_for(&fx, Role::User, "Position: Student, University: AMU");
        let envelope = sealed_envelope(&fx, b"chart");
        let id = fx.resource.put_record(&owner_token, &envelope).await.unwrap();

        let fetched = fx.resource.get_record(&user_token, &id).await.unwrap();
        let env = RecordEnvelope::from_bytes(&fetched).unwrap();
        let key_bytes = fx.resource.issue_private_key(&user_token).await.unwrap();
        let sk = PrivateKey::from_bytes(&key_bytes).unwrap();
        assert!(matches!(
            open(&fx.pk, &sk, &env),
            Err(crate::envelope::EnvelopeError::PolicyNotSatisfied)
        ));
    }

    #[tokio::test]
    async fn listing_is_ordered_and_filterable() {
        let fx = fixture();
        let (owner_a, token_a) = token_for(&fx, Role::Owner, "o");
        let (_, token_b) = token_for(&fx, Role::Owner, "o");

        assert!(fx.resource.list_records(&token_a, None).await.unwrap().is_empty());

        let mut ids = Vec::new();
        for i in 0..3 {
            let env = sealed_envelope(&fx, format!("record {i}").as_bytes());
            let token = if i == 2 { &token_b } else { &token_a };
            ids.push(fx.resource.put_record(token, &env).await.unwrap());
            fx.clock.advance(1);
        }
        let listed = fx.resource.list_records(&token_a, None).await.unwrap();
        assert_eq!(
            listed.iter().map(|l| l.record_id.clone()).collect::<Vec<_>>(),
            ids
        );
        assert!(listed.iter().all(|l| !l.policy_text.is_empty()));

        let mine = fx.resource.list_records(&token_a, Some(&owner_a)).await.unwrap();
        assert_eq!(mine.len(), 2);
    }

    #[tokio::test]
    async fn ownership_gates_mutation() {
        let fx = fixture();
        let (_, owner_token) = token_for(&fx, Role::Owner, "o");
        let (_, other_token) = token_for(&fx, Role::Owner, "o");
        let envelope = sealed_envelope(&fx, b"v1");
        let id = fx.resource.put_record(&owner_token, &envelope).await.unwrap();

        // non-owner cannot update or delete
        let envelope2 = sealed_envelope(&fx, b"v2");
        assert!(matches!(
            fx.resource.update_record(&other_token, &id, &envelope2).await,
            Err(ResourceError::Forbidden)
        ));
        assert!(matches!(
            fx.resource.delete_record(&other_token, &id).await,
            Err(ResourceError::Forbidden)
        ));

        // owner update bumps updated_at and swaps bytes
        fx.clock.advance(10);
        fx.resource.update_record(&owner_token, &id, &envelope2).await.unwrap();
        assert_eq!(fx.resource.get_record(&owner_token, &id).await.unwrap(), envelope2);
        let listing = fx.resource.list_records(&owner_token, None).await.unwrap();
        assert!(listing[0].updated_at > listing[0].created_at);

        // owner delete removes it
        fx.resource.delete_record(&owner_token, &id).await.unwrap();
        assert!(matches!(
            fx.resource.get_record(&owner_token, &id).await,
            Err(ResourceError::NotFound)
        ));
        assert!(matches!(
            fx.resource.delete_record(&owner_token, &id).await,
            Err(ResourceError::NotFound)
        ));
    }

    #[tokio::test]
    async fn stored_bytes_never_contain_plaintext() {
        let fx = fixture();
        let (_, owner_token) = token_for(&fx, Role::Owner, "o");
        let sentinel = b"PLAINTEXT-SENTINEL-0451";
        let envelope = sealed_envelope(&fx, sentinel);
        fx.resource.put_record(&owner_token, &envelope).await.unwrap();

        for id in fx.backend.list().unwrap() {
            let bytes = fx.backend.get(&id).unwrap().unwrap();
            assert!(
                !bytes.windows(sentinel.len()).any(|w| w == sentinel),
                "sentinel leaked into stored bytes"
            );
        }
    }

    #[tokio::test]
    async fn corrupt_policy_text_is_refused() {
        let fx = fixture();
        let (_, owner_token) = token_for(&fx, Role::Owner, "o");
        let envelope = sealed_envelope(&fx, b"chart");
        let id = fx.resource.put_record(&owner_token, &envelope).await.unwrap();

        // tamper with the stored record's duplicated policy text
        let mut record: StoredRecord =
            serde_json::from_slice(&fx.backend.get(&id).unwrap().unwrap()).unwrap();
        record.policy_text = "a".into();
        fx.backend
            .put(&id, &serde_json::to_vec(&record).unwrap())
            .unwrap();
        assert!(matches!(
            fx.resource.get_record(&owner_token, &id).await,
            Err(ResourceError::Storage(_))
        ));
    }

    #[test]
    fn dir_backend_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let backend = DirBackend::new(dir.path()).unwrap();
        assert!(backend.list().unwrap().is_empty());
        backend.put("r-1", b"alpha").unwrap();
        backend.put("r-1", b"beta").unwrap();
        assert_eq!(backend.get("r-1").unwrap().unwrap(), b"beta");
        assert_eq!(backend.list().unwrap(), vec!["r-1".to_string()]);
        assert!(backend.delete("r-1").unwrap());
        assert!(!backend.delete("r-1").unwrap());
        assert!(backend.get("r-1").unwrap().is_none());
    }
}
