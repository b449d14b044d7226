//! Output provenance: every file the toolkit writes embeds the toolkit
//! version and a digest of the exact inputs that produced it, so reruns are
//! byte-identical and results can be traced back to a case file and config.

use sha2::{Digest, Sha256};

use crate::model::hex_string;

/// Digest over an ordered list of (key, value) input descriptors.
pub fn config_digest<'a>(entries: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut hasher = Sha256::new();
    for (k, v) in entries {
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
        hasher.update(b"\n");
    }
    hex_string(&hasher.finalize())[..16].to_string()
}

/// Comment header line for CSV outputs.
pub fn csv_header(digest: &str) -> String {
    format!("# gridh {} config_digest={digest}\n", crate::VERSION)
}
