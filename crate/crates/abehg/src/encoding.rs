//! Byte-string surface encoding: base64url without padding, as used by every
//! JSON artifact format.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;

pub fn b64e(bytes: &[u8]) -> String {
    URL_SAFE_NO_PAD.encode(bytes)
}

pub fn b64d(text: &str) -> Result<Vec<u8>, String> {
    URL_SAFE_NO_PAD
        .decode(text)
        .map_err(|e| format!("invalid base64url: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_padding_rejection() {
        assert_eq!(b64d(&b64e(b"hello")).unwrap(), b"hello");
        assert_eq!(b64e(b""), "");
        // padded or non-url alphabets are not canonical
        assert!(b64d("aGVsbG8=").is_err());
        assert!(b64d("a+b/").is_err());
    }
}
