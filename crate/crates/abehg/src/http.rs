//! HTTP/1.1 + JSON surface of both services.
//!
//! Authorization server: `POST /oauth/register`, `POST /oauth/token`,
//! `POST /oauth/introspect`, `POST /oauth/revoke`, plus the
//! service-credential-protected `POST /oauth/client_info` lookup the
//! attribute authority uses when the two servers run split.
//!
//! Resource server: `GET /aa/pk`, `POST /aa/keys`, `PUT /records`,
//! `GET /records`, `GET /records/{id}`, `PUT /records/{id}`,
//! `DELETE /records/{id}`. Bearer tokens ride in `Authorization: Bearer`.

use crate::authz::{AuthzConfig, AuthzServer, ClientInfo, Clock, Role, Scope, SystemClock, TokenInfo};
use crate::config::ServiceConfig;
use crate::cpabe::{MasterKey, PublicKey};
use crate::policy::AttributeSet;
use crate::resource::{
    AuthzFacade, DirBackend, InProcessAuthz, RecordListing, ResourceError, ResourceServer,
};
use async_trait::async_trait;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    /// Configuration problems; CLI exit code 2.
    #[error("config: {0}")]
    Config(String),
    /// Attribute-authority key material is missing; CLI exit code 4.
    #[error("master key material missing: {0}")]
    MissingKeys(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_description: Option<String>,
}

fn error_response(status: StatusCode, code: &str, detail: Option<String>) -> Response {
    (
        status,
        Json(ErrorBody {
            error: code.to_string(),
            error_description: detail,
        }),
    )
        .into_response()
}

fn authz_error(e: crate::authz::AuthzError) -> Response {
    use crate::authz::AuthzError::*;
    match e {
        Unauthorized => error_response(StatusCode::UNAUTHORIZED, "unauthorized", None),
        InvalidScope => error_response(StatusCode::BAD_REQUEST, "invalid_scope", None),
        InvalidGrant => error_response(StatusCode::BAD_REQUEST, "invalid_grant", None),
        EmptyAttributes => error_response(
            StatusCode::BAD_REQUEST,
            "invalid_request",
            Some("a data user must register at least one attribute".into()),
        ),
        Conflict => error_response(StatusCode::CONFLICT, "conflict", None),
    }
}

fn resource_error(e: ResourceError) -> Response {
    match e {
        ResourceError::Unauthorized => error_response(StatusCode::UNAUTHORIZED, "unauthorized", None),
        ResourceError::Forbidden => error_response(StatusCode::FORBIDDEN, "forbidden", None),
        ResourceError::NotFound => error_response(StatusCode::NOT_FOUND, "not_found", None),
        ResourceError::BadRequest(detail) => {
            error_response(StatusCode::BAD_REQUEST, "bad_request", Some(detail))
        }
        ResourceError::Storage(detail) => {
            error_response(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", Some(detail))
        }
    }
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(|t| t.trim().to_string())
}

fn scope_string(scope: &BTreeSet<Scope>) -> String {
    scope
        .iter()
        .map(Scope::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_scope(text: &str) -> Result<BTreeSet<Scope>, String> {
    text.split_whitespace()
        .map(|s| Scope::parse(s).ok_or_else(|| format!("unknown scope {s:?}")))
        .collect()
}

// ---- authorization server wire types ----

#[derive(Serialize, Deserialize)]
pub struct RegisterRequest {
    pub role: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub external_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct RegisterResponse {
    pub client_id: String,
    pub client_secret: String,
}

#[derive(Serialize, Deserialize, Default)]
pub struct TokenRequest {
    pub grant_type: String,
    #[serde(default)]
    pub client_id: Option<String>,
    #[serde(default)]
    pub client_secret: Option<String>,
    #[serde(default)]
    pub refresh_token: Option<String>,
    /// Space-delimited scope list.
    #[serde(default)]
    pub scope: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct TokenResponse {
    pub access_token: String,
    pub token_type: String,
    pub expires_in: u64,
    pub refresh_token: String,
    pub scope: String,
}

#[derive(Serialize, Deserialize)]
pub struct IntrospectRequest {
    pub token: String,
}

#[derive(Serialize, Deserialize, Default)]
pub struct TokenInfoWire {
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expires_at: Option<i64>,
}

impl From<TokenInfo> for TokenInfoWire {
    fn from(info: TokenInfo) -> Self {
        TokenInfoWire {
            active: info.active,
            client_id: info.client_id,
            scope: info.scope.as_ref().map(scope_string),
            expires_at: info.expires_at,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct RevokeRequest {
    pub token: String,
}

#[derive(Serialize, Deserialize)]
pub struct ClientInfoRequest {
    pub client_id: String,
}

#[derive(Serialize, Deserialize)]
pub struct ClientInfoResponse {
    pub role: String,
    pub attributes: Vec<String>,
}

// ---- resource server wire types ----

#[derive(Serialize, Deserialize)]
pub struct PutRecordResponse {
    pub record_id: String,
}

#[derive(Serialize, Deserialize)]
pub struct RecordListResponse {
    pub records: Vec<RecordListing>,
}

#[derive(Serialize, Deserialize)]
pub struct IssueKeyResponse {
    pub private_key: serde_json::Value,
}

#[derive(Deserialize)]
pub struct ListQuery {
    pub owner: Option<String>,
}

// ---- authorization server routes ----

async fn handle_register(
    State(authz): State<Arc<AuthzServer>>,
    Json(req): Json<RegisterRequest>,
) -> Response {
    let role = match req.role.as_str() {
        "owner" => Role::Owner,
        "user" => Role::User,
        other => {
            return error_response(
                StatusCode::BAD_REQUEST,
                "invalid_request",
                Some(format!("unknown role {other:?}")),
            )
        }
    };
    let attrs = if req.attributes.is_empty() {
        AttributeSet::new()
    } else {
        match AttributeSet::from_raw(&req.attributes) {
            Ok(attrs) => attrs,
            Err(e) => {
                return error_response(StatusCode::BAD_REQUEST, "invalid_request", Some(e.to_string()))
            }
        }
    };
    match authz.register_client(role, attrs, req.external_id.as_deref()) {
        Ok(creds) => Json(RegisterResponse {
            client_id: creds.client_id,
            client_secret: creds.client_secret,
        })
        .into_response(),
        Err(e) => authz_error(e),
    }
}

async fn handle_token(
    State(authz): State<Arc<AuthzServer>>,
    Json(req): Json<TokenRequest>,
) -> Response {
    let issued = match req.grant_type.as_str() {
        "client_credentials" => {
            let (Some(client_id), Some(client_secret)) = (&req.client_id, &req.client_secret) else {
                return error_response(
                    StatusCode::BAD_REQUEST,
                    "invalid_request",
                    Some("client_id and client_secret are required".into()),
                );
            };
            let scope = match req.scope.as_deref() {
                None => None,
                Some(text) => match parse_scope(text) {
                    Ok(parsed) => Some(parsed),
                    Err(detail) => {
                        return error_response(StatusCode::BAD_REQUEST, "invalid_scope", Some(detail))
                    }
                },
            };
            authz.issue_token(client_id, client_secret, scope)
        }
        "refresh_token" => {
            let Some(refresh_token) = &req.refresh_token else {
                return error_response(
                    StatusCode::BAD_REQUEST,
                    "invalid_request",
                    Some("refresh_token is required".into()),
                );
            };
            authz.refresh(refresh_token)
        }
        other => {
            return error_response(
                StatusCode::BAD_REQUEST,
                "unsupported_grant_type",
                Some(format!("{other:?}")),
            )
        }
    };
    match issued {
        Ok(token) => Json(TokenResponse {
            access_token: token.token,
            token_type: "Bearer".into(),
            expires_in: token.expires_in,
            refresh_token: token.refresh_token,
            scope: scope_string(&token.scope),
        })
        .into_response(),
        Err(e) => authz_error(e),
    }
}

async fn handle_introspect(
    State(authz): State<Arc<AuthzServer>>,
    headers: HeaderMap,
    Json(req): Json<IntrospectRequest>,
) -> Response {
    let Some(credential) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    match authz.introspect(&credential, &req.token) {
        Ok(info) => Json(TokenInfoWire::from(info)).into_response(),
        Err(e) => authz_error(e),
    }
}

async fn handle_revoke(
    State(authz): State<Arc<AuthzServer>>,
    Json(req): Json<RevokeRequest>,
) -> Response {
    authz.revoke(&req.token);
    Json(serde_json::json!({})).into_response()
}

async fn handle_client_info(
    State(authz): State<Arc<AuthzServer>>,
    headers: HeaderMap,
    Json(req): Json<ClientInfoRequest>,
) -> Response {
    let Some(credential) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    if credential != authz.service_secret() {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    }
    match authz.client_info(&req.client_id) {
        Some(info) => Json(ClientInfoResponse {
            role: match info.role {
                Role::Owner => "owner".into(),
                Role::User => "user".into(),
            },
            attributes: info.attrs.iter().map(|a| a.as_str().to_string()).collect(),
        })
        .into_response(),
        None => error_response(StatusCode::NOT_FOUND, "not_found", None),
    }
}

async fn handle_healthz() -> &'static str {
    "ok"
}

pub fn authz_router(authz: Arc<AuthzServer>) -> Router {
    Router::new()
        .route("/oauth/register", post(handle_register))
        .route("/oauth/token", post(handle_token))
        .route("/oauth/introspect", post(handle_introspect))
        .route("/oauth/revoke", post(handle_revoke))
        .route("/oauth/client_info", post(handle_client_info))
        .route("/healthz", get(handle_healthz))
        .with_state(authz)
}

// ---- resource server routes ----

async fn handle_public_key(State(resource): State<Arc<ResourceServer>>) -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        resource.public_key().to_bytes(),
    )
        .into_response()
}

async fn handle_issue_key(
    State(resource): State<Arc<ResourceServer>>,
    headers: HeaderMap,
) -> Response {
    let Some(token) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    match resource.issue_private_key(&token).await {
        Ok(bytes) => {
            let value: serde_json::Value =
                serde_json::from_slice(&bytes).expect("key serializes to json");
            Json(IssueKeyResponse { private_key: value }).into_response()
        }
        Err(e) => resource_error(e),
    }
}

async fn handle_put_record(
    State(resource): State<Arc<ResourceServer>>,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let Some(token) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    match resource.put_record(&token, &body).await {
        Ok(record_id) => (StatusCode::CREATED, Json(PutRecordResponse { record_id })).into_response(),
        Err(e) => resource_error(e),
    }
}

async fn handle_list_records(
    State(resource): State<Arc<ResourceServer>>,
    headers: HeaderMap,
    Query(query): Query<ListQuery>,
) -> Response {
    let Some(token) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    match resource.list_records(&token, query.owner.as_deref()).await {
        Ok(records) => Json(RecordListResponse { records }).into_response(),
        Err(e) => resource_error(e),
    }
}

async fn handle_get_record(
    State(resource): State<Arc<ResourceServer>>,
    headers: HeaderMap,
    Path(record_id): Path<String>,
) -> Response {
    let Some(token) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    match resource.get_record(&token, &record_id).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => resource_error(e),
    }
}

async fn handle_update_record(
    State(resource): State<Arc<ResourceServer>>,
    headers: HeaderMap,
    Path(record_id): Path<String>,
    body: Bytes,
) -> Response {
    let Some(token) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    match resource.update_record(&token, &record_id, &body).await {
        Ok(()) => Json(serde_json::json!({})).into_response(),
        Err(e) => resource_error(e),
    }
}

async fn handle_delete_record(
    State(resource): State<Arc<ResourceServer>>,
    headers: HeaderMap,
    Path(record_id): Path<String>,
) -> Response {
    let Some(token) = bearer(&headers) else {
        return error_response(StatusCode::UNAUTHORIZED, "unauthorized", None);
    };
    match resource.delete_record(&token, &record_id).await {
        Ok(()) => Json(serde_json::json!({})).into_response(),
        Err(e) => resource_error(e),
    }
}

pub fn resource_router(resource: Arc<ResourceServer>) -> Router {
    Router::new()
        .route("/aa/pk", get(handle_public_key))
        .route("/aa/keys", post(handle_issue_key))
        .route("/records", put(handle_put_record).get(handle_list_records))
        .route(
            "/records/{id}",
            get(handle_get_record)
                .put(handle_update_record)
                .delete(handle_delete_record),
        )
        .route("/healthz", get(handle_healthz))
        .with_state(resource)
}

// ---- server lifecycle ----

/// A bound, running server; dropping the handle leaves it running, calling
/// [`ServerHandle::shutdown`] stops it gracefully.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    join: JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.join.await;
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

pub async fn serve(bind: &str, router: Router) -> Result<ServerHandle, ServeError> {
    let listener = TcpListener::bind(bind)
        .await
        .map_err(|e| ServeError::Config(format!("cannot bind {bind}: {e}")))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let join = tokio::spawn(async move {
        let result = axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
        if let Err(e) = result {
            eprintln!("server error: {e}");
        }
    });
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        join,
    })
}

/// Split-topology facade: the resource server validates tokens and looks up
/// client attributes over HTTP using the shared service credential.
pub struct HttpAuthzClient {
    base_url: String,
    service_secret: String,
    http: reqwest::Client,
}

impl HttpAuthzClient {
    pub fn new(base_url: String, service_secret: String) -> Self {
        HttpAuthzClient {
            base_url,
            service_secret,
            http: reqwest::Client::new(),
        }
    }
}

#[async_trait]
impl AuthzFacade for HttpAuthzClient {
    async fn introspect(&self, token: &str) -> Result<TokenInfo, ResourceError> {
        let resp = self
            .http
            .post(format!("{}/oauth/introspect", self.base_url))
            .bearer_auth(&self.service_secret)
            .json(&IntrospectRequest {
                token: token.to_string(),
            })
            .send()
            .await
            .map_err(|e| ResourceError::Storage(format!("introspection channel: {e}")))?;
        if resp.status() == StatusCode::UNAUTHORIZED {
            return Err(ResourceError::Unauthorized);
        }
        let wire: TokenInfoWire = resp
            .json()
            .await
            .map_err(|e| ResourceError::Storage(format!("introspection channel: {e}")))?;
        let scope = match wire.scope.as_deref() {
            None => None,
            Some(text) => Some(
                parse_scope(text).map_err(|e| ResourceError::Storage(format!("bad scope: {e}")))?,
            ),
        };
        Ok(TokenInfo {
            active: wire.active,
            client_id: wire.client_id,
            scope,
            expires_at: wire.expires_at,
        })
    }

    async fn client_info(&self, client_id: &str) -> Result<Option<ClientInfo>, ResourceError> {
        let resp = self
            .http
            .post(format!("{}/oauth/client_info", self.base_url))
            .bearer_auth(&self.service_secret)
            .json(&ClientInfoRequest {
                client_id: client_id.to_string(),
            })
            .send()
            .await
            .map_err(|e| ResourceError::Storage(format!("client lookup channel: {e}")))?;
        if resp.status() == StatusCode::NOT_FOUND {
            return Ok(None);
        }
        if !resp.status().is_success() {
            return Err(ResourceError::Unauthorized);
        }
        let wire: ClientInfoResponse = resp
            .json()
            .await
            .map_err(|e| ResourceError::Storage(format!("client lookup channel: {e}")))?;
        let role = match wire.role.as_str() {
            "owner" => Role::Owner,
            _ => Role::User,
        };
        let attrs = AttributeSet::from_raw(&wire.attributes)
            .map_err(|e| ResourceError::Storage(format!("bad attributes: {e}")))?;
        Ok(Some(ClientInfo { role, attrs }))
    }
}

// ---- service assembly used by the CLI ----

fn load_key_material(config: &ServiceConfig) -> Result<(PublicKey, MasterKey), ServeError> {
    let read = |path: &std::path::Path| -> Result<Vec<u8>, ServeError> {
        std::fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                ServeError::MissingKeys(path.display().to_string())
            } else {
                ServeError::Config(format!("cannot read {}: {e}", path.display()))
            }
        })
    };
    let pk = PublicKey::from_bytes(&read(&config.pk_path)?)
        .map_err(|e| ServeError::Config(format!("{}: {e}", config.pk_path.display())))?;
    let msk = MasterKey::from_bytes(&read(&config.msk_path)?)
        .map_err(|e| ServeError::Config(format!("{}: {e}", config.msk_path.display())))?;
    Ok((pk, msk))
}

pub fn build_authz(config: &ServiceConfig, clock: Arc<dyn Clock>) -> Arc<AuthzServer> {
    let authz_config = AuthzConfig {
        token_lifetime_secs: config.token_lifetime_secs,
        refresh_lifetime_secs: config.refresh_lifetime_secs,
    };
    Arc::new(match &config.service_secret {
        Some(secret) => AuthzServer::with_service_secret(authz_config, clock, secret.clone()),
        None => AuthzServer::new(authz_config, clock),
    })
}

fn build_resource(
    config: &ServiceConfig,
    facade: Arc<dyn AuthzFacade>,
    clock: Arc<dyn Clock>,
) -> Result<Arc<ResourceServer>, ServeError> {
    let (pk, msk) = load_key_material(config)?;
    let backend = Arc::new(
        DirBackend::new(&config.storage_dir)
            .map_err(|e| ServeError::Config(format!("storage dir: {e}")))?,
    );
    Ok(Arc::new(ResourceServer::new(
        facade, backend, pk, msk, clock,
    )?))
}

/// Starts the authorization server alone.
pub async fn start_authz(config: &ServiceConfig) -> Result<ServerHandle, ServeError> {
    let authz = build_authz(config, Arc::new(SystemClock));
    serve(&config.bind_authz, authz_router(authz)).await
}

/// Starts the resource server alone, validating tokens against a remote
/// authorization server; requires `service_secret` in the config.
pub async fn start_resource(config: &ServiceConfig) -> Result<ServerHandle, ServeError> {
    let secret = config.service_secret.clone().ok_or_else(|| {
        ServeError::Config(
            "service_secret is required when the resource server runs split from the \
             authorization server"
                .into(),
        )
    })?;
    let facade = Arc::new(HttpAuthzClient::new(config.authz_url(), secret));
    let resource = build_resource(config, facade, Arc::new(SystemClock))?;
    serve(&config.bind_resource, resource_router(resource)).await
}

/// Starts both servers co-hosted in this process, sharing the authorization
/// state through an in-process facade.
pub async fn start_all(config: &ServiceConfig) -> Result<(ServerHandle, ServerHandle), ServeError> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let authz = build_authz(config, clock.clone());
    let facade = Arc::new(InProcessAuthz(authz.clone()));
    let resource = build_resource(config, facade, clock)?;
    let authz_handle = serve(&config.bind_authz, authz_router(authz)).await?;
    let resource_handle = serve(&config.bind_resource, resource_router(resource)).await?;
    Ok((authz_handle, resource_handle))
}
