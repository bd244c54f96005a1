//! Service configuration, loaded from a TOML key/value file or built in code
//! by tests.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Authorization server bind address; port 0 picks an ephemeral port.
    #[serde(default = "default_bind_authz")]
    pub bind_authz: String,
    /// Resource server bind address.
    #[serde(default = "default_bind_resource")]
    pub bind_resource: String,
    /// Record storage directory for the local backend.
    #[serde(default = "default_storage_dir")]
    pub storage_dir: PathBuf,
    /// Public parameters of the attribute authority.
    #[serde(default = "default_pk_path")]
    pub pk_path: PathBuf,
    /// Master secret key of the attribute authority; loaded only by the
    /// resource process.
    #[serde(default = "default_msk_path")]
    pub msk_path: PathBuf,
    #[serde(default = "default_token_lifetime")]
    pub token_lifetime_secs: u64,
    #[serde(default = "default_refresh_lifetime")]
    pub refresh_lifetime_secs: u64,
    /// Shared credential for the introspection channel. Required when the
    /// authorization and resource servers run as separate processes;
    /// generated at random when co-hosted.
    #[serde(default)]
    pub service_secret: Option<String>,
    /// Base URLs for clients (demo) and for the split resource server; when
    /// absent they are derived from the bind addresses.
    #[serde(default)]
    pub authz_url: Option<String>,
    #[serde(default)]
    pub resource_url: Option<String>,
    /// Maximum accepted record size in bytes.
    #[serde(default = "default_max_record_bytes")]
    pub max_record_bytes: usize,
}

fn default_bind_authz() -> String {
    "127.0.0.1:7070".into()
}

fn default_bind_resource() -> String {
    "127.0.0.1:7071".into()
}

fn default_storage_dir() -> PathBuf {
    "records".into()
}

fn default_pk_path() -> PathBuf {
    "aa.gpk".into()
}

fn default_msk_path() -> PathBuf {
    "aa.msk".into()
}

fn default_token_lifetime() -> u64 {
    3600
}

fn default_refresh_lifetime() -> u64 {
    86_400
}

fn default_max_record_bytes() -> usize {
    crate::envelope::DEFAULT_MAX_PLAINTEXT
}

impl Default for ServiceConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn authz_url(&self) -> String {
        self.authz_url
            .clone()
            .unwrap_or_else(|| format!("http://{}", self.bind_authz))
    }

    pub fn resource_url(&self) -> String {
        self.resource_url
            .clone()
            .unwrap_or_else(|| format!("http://{}", self.bind_resource))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ServiceConfig::default();
        assert_eq!(cfg.token_lifetime_secs, 3600);
        assert_eq!(cfg.authz_url(), "http://127.0.0.1:7070");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abehg.toml");
        std::fs::write(
            &path,
            "bind_authz = \"127.0.0.1:9000\"\ntoken_lifetime_secs = 60\nmsk_path = \"keys/aa.msk\"\n",
        )
        .unwrap();
        let cfg = ServiceConfig::load(&path).unwrap();
        assert_eq!(cfg.bind_authz, "127.0.0.1:9000");
        assert_eq!(cfg.token_lifetime_secs, 60);
        assert_eq!(cfg.msk_path, PathBuf::from("keys/aa.msk"));
        assert_eq!(cfg.authz_url(), "http://127.0.0.1:9000");

        std::fs::write(&path, "token_lifetime_secs = \"sixty\"\n").unwrap();
        assert!(matches!(
            ServiceConfig::load(&path),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            ServiceConfig::load(Path::new("/nonexistent/abehg.toml")),
            Err(ConfigError::Io { .. })
        ));
    }
}
