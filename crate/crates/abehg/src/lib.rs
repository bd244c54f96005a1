//! Attribute-based encryption toolkit for sharing encrypted health records:
//! a ciphertext-policy ABE suite over threshold access trees, hybrid record
//! envelopes, and an OAuth 2.0 authorization layer with a bearer-token
//! resource service.
//!
//! Start from the runnable `examples/` directory: each example exercises one
//! capability (policy language, crypto round trip, envelopes, token
//! lifecycle, record service, the end-to-end exchange, benchmark trends).

mod encoding;

pub mod authz;
pub mod bench;
pub mod config;
pub mod cpabe;
pub mod demo;
pub mod envelope;
pub mod fixtures;
pub mod group;
pub mod http;
pub mod policy;
pub mod resource;

pub use cpabe::{decrypt_element, encrypt_element, keygen, setup};
pub use envelope::{open, seal};
pub use policy::{parse_infix, parse_postfix, satisfies, serialize_policy};
