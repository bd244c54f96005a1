//! OAuth 2.0 authorization core: client registration, bearer-token issuance
//! through the client-credentials grant, single-use refresh rotation,
//! introspection for the resource server, and revocation.
//!
//! The flow has no owner-approval step anywhere: the authorization server
//! only authenticates clients and meters transport. Who can actually read a
//! record is enforced cryptographically by the key attributes, not here.
//!
//! Tokens are opaque server-side references (instantly revocable); only
//! salted hashes of client secrets and token values are stored.

use crate::policy::AttributeSet;
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum AuthzError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("invalid_scope")]
    InvalidScope,
    #[error("invalid_grant")]
    InvalidGrant,
    #[error("a data user must register at least one attribute")]
    EmptyAttributes,
    #[error("identity is already registered")]
    Conflict,
}

/// Injectable time source; production uses [`SystemClock`], expiry tests a
/// [`ManualClock`].
pub trait Clock: Send + Sync {
    /// Unix seconds.
    fn now(&self) -> i64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> i64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .expect("system clock before epoch")
            .as_secs() as i64
    }
}

/// Settable clock for tests.
#[derive(Debug)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start: i64) -> Self {
        ManualClock(AtomicI64::new(start))
    }

    pub fn set(&self, now: i64) {
        self.0.store(now, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Owner,
    User,
}

impl Role {
    pub fn allowed_scopes(&self) -> BTreeSet<Scope> {
        match self {
            Role::Owner => [Scope::EhrRead, Scope::EhrWrite].into(),
            Role::User => [Scope::EhrRead].into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    EhrRead,
    EhrWrite,
}

impl Scope {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scope::EhrRead => "ehr.read",
            Scope::EhrWrite => "ehr.write",
        }
    }

    pub fn parse(text: &str) -> Option<Scope> {
        match text {
            "ehr.read" => Some(Scope::EhrRead),
            "ehr.write" => Some(Scope::EhrWrite),
            _ => None,
        }
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct AuthzConfig {
    pub token_lifetime_secs: u64,
    pub refresh_lifetime_secs: u64,
}

impl Default for AuthzConfig {
    fn default() -> Self {
        AuthzConfig {
            token_lifetime_secs: 3600,
            refresh_lifetime_secs: 86_400,
        }
    }
}

/// Registration result; the secret is returned exactly once and never stored
/// in clear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub client_id: String,
    pub client_secret: String,
}

/// A freshly issued bearer token pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedToken {
    pub token: String,
    pub client_id: String,
    pub scope: BTreeSet<Scope>,
    pub issued_at: i64,
    pub expires_in: u64,
    pub refresh_token: String,
}

/// Introspection response: nothing beyond `active: false` is revealed for
/// unknown, expired, rotated, or revoked tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenInfo {
    pub active: bool,
    pub client_id: Option<String>,
    pub scope: Option<BTreeSet<Scope>>,
    pub expires_at: Option<i64>,
}

impl TokenInfo {
    pub fn inactive() -> Self {
        TokenInfo {
            active: false,
            client_id: None,
            scope: None,
            expires_at: None,
        }
    }
}

/// Registered-client view the attribute authority consumes for key issuance.
#[derive(Debug, Clone)]
pub struct ClientInfo {
    pub role: Role,
    pub attrs: AttributeSet,
}

#[derive(Debug)]
struct ClientRecord {
    client_id: String,
    secret_salt: [u8; 16],
    secret_hash: [u8; 32],
    role: Role,
    registered_attrs: AttributeSet,
    #[allow(dead_code)]
    created_at: i64,
}

#[derive(Debug)]
struct TokenEntry {
    client_id: String,
    scope: BTreeSet<Scope>,
    expires_at: i64,
    revoked: bool,
    refresh_key: String,
}

#[derive(Debug)]
struct RefreshEntry {
    client_id: String,
    scope: BTreeSet<Scope>,
    expires_at: i64,
    used: bool,
    revoked: bool,
    access_key: String,
}

#[derive(Default)]
struct State {
    clients: HashMap<String, ClientRecord>,
    identities: HashMap<String, String>,
    tokens: HashMap<String, TokenEntry>,
    refreshes: HashMap<String, RefreshEntry>,
}

/// The authorization server core. All mutating operations are linearized
/// through one lock; handlers stay freely concurrent around it.
pub struct AuthzServer {
    state: Mutex<State>,
    clock: Arc<dyn Clock>,
    config: AuthzConfig,
    service_secret: String,
}

fn random_opaque(len: usize) -> String {
    let mut bytes = vec![0u8; len];
    OsRng.fill_bytes(&mut bytes);
    crate::encoding::b64e(&bytes)
}

fn sha256_hex(data: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    format!("{:x}", hasher.finalize())
}

fn salted_hash(salt: &[u8; 16], secret: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(salt);
    hasher.update(secret.as_bytes());
    hasher.finalize().into()
}

impl AuthzServer {
    pub fn new(config: AuthzConfig, clock: Arc<dyn Clock>) -> Self {
        AuthzServer {
            state: Mutex::new(State::default()),
            clock,
            config,
            service_secret: random_opaque(32),
        }
    }

    pub fn with_service_secret(config: AuthzConfig, clock: Arc<dyn Clock>, secret: String) -> Self {
        AuthzServer {
            state: Mutex::new(State::default()),
            clock,
            config,
            service_secret: secret,
        }
    }

    /// Shared credential the resource server presents on the introspection
    /// channel.
    pub fn service_secret(&self) -> &str {
        &self.service_secret
    }

    /// Registers a client. Data users must bring a nonempty attribute set;
    /// an optional external identity enforces one registration per identity.
    pub fn register_client(
        &self,
        role: Role,
        attrs: AttributeSet,
        external_id: Option<&str>,
    ) -> Result<Credentials, AuthzError> {
        if role == Role::User && attrs.is_empty() {
            return Err(AuthzError::EmptyAttributes);
        }
        let mut state = self.state.lock().expect("authz state poisoned");
        if let Some(ext) = external_id {
            if state.identities.contains_key(ext) {
                return Err(AuthzError::Conflict);
            }
        }
        let client_id = format!("c-{}", random_opaque(16));
        let client_secret = random_opaque(32);
        let mut secret_salt = [0u8; 16];
        OsRng.fill_bytes(&mut secret_salt);
        let record = ClientRecord {
            client_id: client_id.clone(),
            secret_salt,
            secret_hash: salted_hash(&secret_salt, &client_secret),
            role,
            registered_attrs: attrs,
            created_at: self.clock.now(),
        };
        if let Some(ext) = external_id {
            state.identities.insert(ext.to_string(), client_id.clone());
        }
        state.clients.insert(client_id.clone(), record);
        Ok(Credentials {
            client_id,
            client_secret,
        })
    }

    /// Client-credentials grant: authenticates the client and issues a fresh
    /// token pair. There is no owner-approval step; requested scopes must stay
    /// within the client role's allowance (owner: read+write, user: read).
    pub fn issue_token(
        &self,
        client_id: &str,
        client_secret: &str,
        scope: Option<BTreeSet<Scope>>,
    ) -> Result<IssuedToken, AuthzError> {
        let mut state = self.state.lock().expect("authz state poisoned");
        let client = state.clients.get(client_id).ok_or(AuthzError::Unauthorized)?;
        if salted_hash(&client.secret_salt, client_secret) != client.secret_hash {
            return Err(AuthzError::Unauthorized);
        }
        let allowed = client.role.allowed_scopes();
        let scope = match scope {
            None => allowed,
            Some(requested) if requested.is_empty() => allowed,
            Some(requested) => {
                if !requested.is_subset(&allowed) {
                    return Err(AuthzError::InvalidScope);
                }
                requested
            }
        };
        let client_id = client.client_id.clone();
        Ok(self.mint(&mut state, client_id, scope))
    }

    /// Single-use refresh rotation: the presented refresh token is consumed,
    /// its access token revoked, and a fresh pair issued.
    pub fn refresh(&self, refresh_token: &str) -> Result<IssuedToken, AuthzError> {
        let mut state = self.state.lock().expect("authz state poisoned");
        let now = self.clock.now();
        let key = sha256_hex(refresh_token);
        let (client_id, scope, access_key) = {
            let entry = state.refreshes.get_mut(&key).ok_or(AuthzError::InvalidGrant)?;
            if entry.used || entry.revoked || now >= entry.expires_at {
                return Err(AuthzError::InvalidGrant);
            }
            entry.used = true;
            (
                entry.client_id.clone(),
                entry.scope.clone(),
                entry.access_key.clone(),
            )
        };
        if let Some(old) = state.tokens.get_mut(&access_key) {
            old.revoked = true;
        }
        Ok(self.mint(&mut state, client_id, scope))
    }

    /// Resource-server validation channel, gated by the shared service
    /// credential.
    pub fn introspect(&self, service_credential: &str, token: &str) -> Result<TokenInfo, AuthzError> {
        if service_credential != self.service_secret {
            return Err(AuthzError::Unauthorized);
        }
        let state = self.state.lock().expect("authz state poisoned");
        let now = self.clock.now();
        let entry = match state.tokens.get(&sha256_hex(token)) {
            Some(entry) => entry,
            None => return Ok(TokenInfo::inactive()),
        };
        if entry.revoked || now >= entry.expires_at {
            return Ok(TokenInfo::inactive());
        }
        Ok(TokenInfo {
            active: true,
            client_id: Some(entry.client_id.clone()),
            scope: Some(entry.scope.clone()),
            expires_at: Some(entry.expires_at),
        })
    }

    /// Revocation is idempotent and kills both halves of the pair. Either the
    /// access token or its refresh twin may be presented.
    pub fn revoke(&self, token: &str) {
        let mut state = self.state.lock().expect("authz state poisoned");
        let key = sha256_hex(token);
        if let Some(entry) = state.tokens.get_mut(&key) {
            entry.revoked = true;
            let refresh_key = entry.refresh_key.clone();
            if let Some(refresh) = state.refreshes.get_mut(&refresh_key) {
                refresh.revoked = true;
            }
            return;
        }
        if let Some(entry) = state.refreshes.get_mut(&key) {
            entry.revoked = true;
            let access_key = entry.access_key.clone();
            if let Some(access) = state.tokens.get_mut(&access_key) {
                access.revoked = true;
            }
        }
    }

    /// Registered role and attributes, consumed by the attribute authority.
    pub fn client_info(&self, client_id: &str) -> Option<ClientInfo> {
        let state = self.state.lock().expect("authz state poisoned");
        state.clients.get(client_id).map(|c| ClientInfo {
            role: c.role,
            attrs: c.registered_attrs.clone(),
        })
    }

    fn mint(&self, state: &mut State, client_id: String, scope: BTreeSet<Scope>) -> IssuedToken {
        let now = self.clock.now();
        let token = loop {
            let t = random_opaque(32);
            if !state.tokens.contains_key(&sha256_hex(&t)) {
                break t;
            }
        };
        let refresh_token = loop {
            let t = random_opaque(32);
            if !state.refreshes.contains_key(&sha256_hex(&t)) {
                break t;
            }
        };
        let token_key = sha256_hex(&token);
        let refresh_key = sha256_hex(&refresh_token);
        state.tokens.insert(
            token_key.clone(),
            TokenEntry {
                client_id: client_id.clone(),
                scope: scope.clone(),
                expires_at: now + self.config.token_lifetime_secs as i64,
                revoked: false,
                refresh_key: refresh_key.clone(),
            },
        );
        state.refreshes.insert(
            refresh_key,
            RefreshEntry {
                client_id: client_id.clone(),
                scope: scope.clone(),
                expires_at: now + self.config.refresh_lifetime_secs as i64,
                used: false,
                revoked: false,
                access_key: token_key,
            },
        );
        IssuedToken {
            token,
            client_id,
            scope,
            issued_at: now,
            expires_in: self.config.token_lifetime_secs,
            refresh_token,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn server() -> (Arc<ManualClock>, AuthzServer) {
        let clock = Arc::new(ManualClock::new(1_000_000));
        let srv = AuthzServer::new(AuthzConfig::default(), clock.clone());
        (clock, srv)
    }

    fn attrs(list: &str) -> AttributeSet {
        AttributeSet::parse_list(list).unwrap()
    }

    #[test]
    fn registration_rules() {
        let (_, srv) = server();
        let a = srv
            .register_client(Role::User, attrs("position:doctor, department:radiology"), None)
            .unwrap();
        let b = srv
            .register_client(Role::User, attrs("position:doctor, department:radiology"), None)
            .unwrap();
        assert_ne!(a.client_id, b.client_id);
        assert_eq!(
            srv.register_client(Role::User, AttributeSet::new(), None),
            Err(AuthzError::EmptyAttributes)
        );
        // owners may register without attributes
        assert!(srv.register_client(Role::Owner, AttributeSet::new(), None).is_ok());
        // duplicate external identity conflicts
        assert!(srv
            .register_client(Role::User, attrs("a"), Some("org-1"))
            .is_ok());
        assert_eq!(
            srv.register_client(Role::User, attrs("b"), Some("org-1")),
            Err(AuthzError::Conflict)
        );
    }

    #[test]
    fn token_issuance_and_scope_rules() {
        let (_, srv) = server();
        let user = srv.register_client(Role::User, attrs("a"), None).unwrap();
        let issued = srv
            .issue_token(&user.client_id, &user.client_secret, Some([Scope::EhrRead].into()))
            .unwrap();
        assert_eq!(issued.expires_in, 3600);
        assert_eq!(issued.scope, [Scope::EhrRead].into());

        // a user may not request write scope
        assert_eq!(
            srv.issue_token(
                &user.client_id,
                &user.client_secret,
                Some([Scope::EhrWrite].into())
            ),
            Err(AuthzError::InvalidScope)
        );
        // wrong secret is refused
        assert_eq!(
            srv.issue_token(&user.client_id, "not-the-secret", None),
            Err(AuthzError::Unauthorized)
        );
        assert_eq!(
            srv.issue_token("c-unknown", "whatever", None),
            Err(AuthzError::Unauthorized)
        );

        // omitted scope defaults to the role's full allowance
        let owner = srv.register_client(Role::Owner, attrs("o"), None).unwrap();
        let issued = srv
            .issue_token(&owner.client_id, &owner.client_secret, None)
            .unwrap();
        assert_eq!(issued.scope, Role::Owner.allowed_scopes());
    }

    #[test]
    fn introspection_and_expiry_boundary() {
        let (clock, srv) = server();
        let user = srv.register_client(Role::User, attrs("a"), None).unwrap();
        let issued = srv
            .issue_token(&user.client_id, &user.client_secret, None)
            .unwrap();
        let service = srv.service_secret().to_string();

        let info = srv.introspect(&service, &issued.token).unwrap();
        assert!(info.active);
        assert_eq!(info.client_id.as_deref(), Some(user.client_id.as_str()));
        assert_eq!(info.expires_at, Some(issued.issued_at + 3600));

        // strictly before expiry: active; at expiry: inactive
        clock.set(issued.issued_at + 3599);
        assert!(srv.introspect(&service, &issued.token).unwrap().active);
        clock.set(issued.issued_at + 3600);
        let info = srv.introspect(&service, &issued.token).unwrap();
        assert_eq!(info, TokenInfo::inactive());

        // unknown tokens and bad service credentials
        assert!(!srv.introspect(&service, "random-junk").unwrap().active);
        assert_eq!(
            srv.introspect("wrong-service-secret", &issued.token),
            Err(AuthzError::Unauthorized)
        );
    }

    #[test]
    fn refresh_rotates_and_is_single_use() {
        let (_, srv) = server();
        let user = srv.register_client(Role::User, attrs("a"), None).unwrap();
        let first = srv
            .issue_token(&user.client_id, &user.client_secret, None)
            .unwrap();
        let service = srv.service_secret().to_string();

        let second = srv.refresh(&first.refresh_token).unwrap();
        assert_ne!(second.token, first.token);
        assert!(!srv.introspect(&service, &first.token).unwrap().active);
        assert!(srv.introspect(&service, &second.token).unwrap().active);

        // single-use rotation
        assert_eq!(
            srv.refresh(&first.refresh_token),
            Err(AuthzError::InvalidGrant)
        );
        // a refresh token is not a bearer token
        assert!(!srv.introspect(&service, &second.refresh_token).unwrap().active);
        assert_eq!(srv.refresh("unknown"), Err(AuthzError::InvalidGrant));
    }

    #[test]
    fn expired_refresh_tokens_are_rejected() {
        let (clock, srv) = server();
        let user = srv.register_client(Role::User, attrs("a"), None).unwrap();
        let issued = srv
            .issue_token(&user.client_id, &user.client_secret, None)
            .unwrap();
        clock.advance(86_400);
        assert_eq!(
            srv.refresh(&issued.refresh_token),
            Err(AuthzError::InvalidGrant)
        );
    }

    #[test]
    fn revocation_is_idempotent_and_kills_the_pair() {
        let (_, srv) = server();
        let user = srv.register_client(Role::User, attrs("a"), None).unwrap();
        let issued = srv
            .issue_token(&user.client_id, &user.client_secret, None)
            .unwrap();
        let service = srv.service_secret().to_string();

        srv.revoke(&issued.token);
        assert!(!srv.introspect(&service, &issued.token).unwrap().active);
        assert_eq!(
            srv.refresh(&issued.refresh_token),
            Err(AuthzError::InvalidGrant)
        );
        srv.revoke(&issued.token);
        srv.revoke("never-issued");

        // revoking by refresh token also works
        let issued = srv
            .issue_token(&user.client_id, &user.client_secret, None)
            .unwrap();
        srv.revoke(&issued.refresh_token);
        assert!(!srv.introspect(&service, &issued.token).unwrap().active);
    }

    #[test]
    fn nothing_reactivates_a_dead_token() {
        let (clock, srv) = server();
        let user = srv.register_client(Role::User, attrs("a"), None).unwrap();
        let issued = srv
            .issue_token(&user.client_id, &user.client_secret, None)
            .unwrap();
        let service = srv.service_secret().to_string();
        srv.revoke(&issued.token);
        clock.advance(-3600); // even winding the clock back
        assert!(!srv.introspect(&service, &issued.token).unwrap().active);
    }

    #[test]
    fn client_info_serves_the_attribute_authority() {
        let (_, srv) = server();
        let user = srv
            .register_client(Role::User, attrs("position:phd, university:amu"), None)
            .unwrap();
        let info = srv.client_info(&user.client_id).unwrap();
        assert_eq!(info.role, Role::User);
        assert_eq!(info.attrs.len(), 2);
        assert!(srv.client_info("c-missing").is_none());
    }
}
