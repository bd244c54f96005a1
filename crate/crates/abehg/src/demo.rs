//! End-to-end protocol replay against running services: a data owner seals
//! and uploads a record bound to an access policy, a data user registers
//! attributes, obtains a bearer token and a private key, fetches the record,
//! and tries to open it. Step labels follow the owner/user numbering of the
//! service choreography (DO-1..3, AA, DU-5..8).

use crate::authz::{Clock, SystemClock};
use crate::cpabe::{PrivateKey, PublicKey};
use crate::envelope::{open, seal, RecordEnvelope, RecordMeta};
use crate::fixtures;
use crate::http::{
    IssueKeyResponse, PutRecordResponse, RegisterRequest, RegisterResponse, TokenRequest,
    TokenResponse,
};
use crate::policy::{parse_postfix, AttributeSet};
use rand::rngs::OsRng;

pub struct DemoOptions {
    pub authz_url: String,
    pub resource_url: String,
    /// Attributes the data user registers; the default profile satisfies the
    /// reference policy.
    pub user_attrs: AttributeSet,
    /// Postfix policy the owner binds to the record.
    pub policy_text: String,
    /// Record bytes the owner uploads.
    pub record: Vec<u8>,
}

impl DemoOptions {
    pub fn new(authz_url: String, resource_url: String) -> Self {
        DemoOptions {
            authz_url,
            resource_url,
            user_attrs: fixtures::attrs_s0(),
            policy_text: fixtures::POLICY_T_POSTFIX.to_string(),
            record: br#"{"patient":"demo-0042","observation":"blood pressure 120/80","unit":"mmHg"}"#
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoStep {
    pub label: &'static str,
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
#[error("step {step}: {message}")]
pub struct DemoError {
    pub step: &'static str,
    pub message: String,
}

fn fail(step: &'static str, message: impl std::fmt::Display) -> DemoError {
    DemoError {
        step,
        message: message.to_string(),
    }
}

/// Runs the full owner/user exchange, returning the transcript. The record
/// recovered at DU-8 must be byte-identical to the uploaded one.
pub async fn run(opts: &DemoOptions) -> Result<Vec<DemoStep>, DemoError> {
    let http = reqwest::Client::new();
    let mut transcript = Vec::new();
    let mut step = |label: &'static str, detail: String| {
        transcript.push(DemoStep { label, detail });
    };

    // AA: the application's attribute authority publishes its parameters
    let pk_bytes = http
        .get(format!("{}/aa/pk", opts.resource_url))
        .send()
        .await
        .map_err(|e| fail("AA", e))?
        .error_for_status()
        .map_err(|e| fail("AA", e))?
        .bytes()
        .await
        .map_err(|e| fail("AA", e))?;
    let pk = PublicKey::from_bytes(&pk_bytes).map_err(|e| fail("AA", e))?;
    step("AA", format!("fetched public parameters (group {})", pk.group_id));

    // DO-1: the data owner registers and is authorized for read+write
    let owner: RegisterResponse = post_json(
        &http,
        "DO-1",
        format!("{}/oauth/register", opts.authz_url),
        &RegisterRequest {
            role: "owner".into(),
            attributes: vec!["role:dataowner".into()],
            external_id: None,
        },
        None,
    )
    .await?;
    let owner_token: TokenResponse = post_json(
        &http,
        "DO-1",
        format!("{}/oauth/token", opts.authz_url),
        &TokenRequest {
            grant_type: "client_credentials".into(),
            client_id: Some(owner.client_id.clone()),
            client_secret: Some(owner.client_secret.clone()),
            ..Default::default()
        },
        None,
    )
    .await?;
    step(
        "DO-1",
        format!(
            "data owner registered as {} and authorized (scope: {})",
            owner.client_id, owner_token.scope
        ),
    );

    // DO-2: the owner seals the record under the access policy
    let tree = parse_postfix(&opts.policy_text).map_err(|e| fail("DO-2", e))?;
    let meta = RecordMeta {
        content_type: "application/json".into(),
        created_at: SystemClock.now(),
        owner_id: owner.client_id.clone(),
    };
    let envelope =
        seal(&pk, &tree, &opts.record, meta, &mut OsRng).map_err(|e| fail("DO-2", e))?;
    step(
        "DO-2",
        format!(
            "record sealed under policy \"{}\" ({} plaintext bytes)",
            opts.policy_text.trim(),
            opts.record.len()
        ),
    );

    // DO-3: the sealed envelope goes up to the resource server
    let put: PutRecordResponse = send_body(
        &http,
        "DO-3",
        http.put(format!("{}/records", opts.resource_url))
            .bearer_auth(&owner_token.access_token)
            .header("content-type", "application/json")
            .body(envelope.to_bytes()),
    )
    .await?;
    step("DO-3", format!("envelope uploaded as record {}", put.record_id));

    // AA: the data user registers its attribute set with the authority
    let user: RegisterResponse = post_json(
        &http,
        "AA",
        format!("{}/oauth/register", opts.authz_url),
        &RegisterRequest {
            role: "user".into(),
            attributes: opts.user_attrs.iter().map(|a| a.as_str().to_string()).collect(),
            external_id: None,
        },
        None,
    )
    .await?;
    step(
        "AA",
        format!(
            "data user registered with attributes [{}]",
            opts.user_attrs
        ),
    );

    // DU-5: the authorization grant is the client credential pair
    step(
        "DU-5",
        format!("authorization grant (client credentials) held for {}", user.client_id),
    );

    // DU-6: the user presents the grant and requests an access token
    let user_token: TokenResponse = post_json(
        &http,
        "DU-6",
        format!("{}/oauth/token", opts.authz_url),
        &TokenRequest {
            grant_type: "client_credentials".into(),
            client_id: Some(user.client_id.clone()),
            client_secret: Some(user.client_secret.clone()),
            scope: Some("ehr.read".into()),
            ..Default::default()
        },
        None,
    )
    .await?;
    step("DU-6", "access token requested over the client-credentials grant".into());

    // DU-7: the authorization server issued the token
    step(
        "DU-7",
        format!(
            "access token issued (scope: {}, expires in {}s)",
            user_token.scope, user_token.expires_in
        ),
    );

    // AA: the authority issues the user's attribute-bound private key
    let key: IssueKeyResponse = send_body(
        &http,
        "AA",
        http.post(format!("{}/aa/keys", opts.resource_url))
            .bearer_auth(&user_token.access_token),
    )
    .await?;
    let key_bytes = serde_json::to_vec(&key.private_key).map_err(|e| fail("AA", e))?;
    let sk = PrivateKey::from_bytes(&key_bytes).map_err(|e| fail("AA", e))?;
    step(
        "AA",
        format!("private key issued over {} attribute(s)", sk.components.len()),
    );

    // DU-8: fetch the envelope with the bearer token, then try to open it
    let fetched = http
        .get(format!("{}/records/{}", opts.resource_url, put.record_id))
        .bearer_auth(&user_token.access_token)
        .send()
        .await
        .map_err(|e| fail("DU-8", e))?
        .error_for_status()
        .map_err(|e| fail("DU-8", format!("fetch failed: {e}")))?
        .bytes()
        .await
        .map_err(|e| fail("DU-8", e))?;
    let fetched_env = RecordEnvelope::from_bytes(&fetched).map_err(|e| fail("DU-8", e))?;
    let recovered = open(&pk, &sk, &fetched_env)
        .map_err(|e| fail("DU-8", format!("record fetched but cannot be opened: {e}")))?;
    if recovered != opts.record {
        return Err(fail("DU-8", "recovered bytes differ from the uploaded record"));
    }
    step(
        "DU-8",
        format!(
            "record fetched and opened; {} bytes recovered byte-identical",
            recovered.len()
        ),
    );

    Ok(transcript)
}

async fn post_json<Req: serde::Serialize, Resp: serde::de::DeserializeOwned>(
    http: &reqwest::Client,
    step: &'static str,
    url: String,
    body: &Req,
    bearer: Option<&str>,
) -> Result<Resp, DemoError> {
    let mut req = http.post(url).json(body);
    if let Some(token) = bearer {
        req = req.bearer_auth(token);
    }
    send_body(http, step, req).await
}

async fn send_body<Resp: serde::de::DeserializeOwned>(
    _http: &reqwest::Client,
    step: &'static str,
    req: reqwest::RequestBuilder,
) -> Result<Resp, DemoError> {
    let resp = req.send().await.map_err(|e| fail(step, e))?;
    let status = resp.status();
    let bytes = resp.bytes().await.map_err(|e| fail(step, e))?;
    if !status.is_success() {
        return Err(fail(
            step,
            format!("{status}: {}", String::from_utf8_lossy(&bytes)),
        ));
    }
    serde_json::from_slice(&bytes).map_err(|e| fail(step, e))
}
