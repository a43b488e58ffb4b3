//! Digest helpers shared by every seeded choice in the pipeline.

use sha2::{Digest, Sha256};

/// Hex SHA-256 of `parts` joined with `|`.
///
/// All ranking digests go through this function, so the separator is part
/// of the reproducibility contract: changing it reshuffles every selection.
pub fn rank_digest(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            hasher.update(b"|");
        }
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Decimal rendering of a seed, the `seed_string` fed into every digest.
pub fn seed_string(seed: u64) -> String {
    seed.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(rank_digest(&["a", "bc"]), sha256_hex(b"a|bc"));
    }

    #[test]
    fn separator_disambiguates() {
        assert_ne!(rank_digest(&["ab", "c"]), rank_digest(&["a", "bc"]));
    }
}
