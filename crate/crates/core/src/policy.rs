//! Security policy URIs, their classification and their asymmetric algorithms.

use serde::{Deserialize, Serialize};

const PREFIX: &str = "http://opcfoundation.org/UA/SecurityPolicy#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SecurityPolicy {
    None,
    Basic128Rsa15,
    Basic256,
    Basic256Sha256,
    Aes128Sha256RsaOaep,
    Aes256Sha256RsaPss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyClass {
    Insecure,
    Deprecated,
    Accepted,
    Unknown,
}

impl PolicyClass {
    /// Relative strength; `None` for Unknown, which is not comparable.
    pub fn rank(self) -> Option<u8> {
        match self {
            PolicyClass::Insecure => Some(0),
            PolicyClass::Deprecated => Some(1),
            PolicyClass::Accepted => Some(2),
            PolicyClass::Unknown => None,
        }
    }
}

/// One row of the classification table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyClassification {
    pub security_policy_uri: String,
    pub class: PolicyClass,
}

pub fn classify_policy(uri: &str) -> PolicyClassification {
    PolicyClassification {
        security_policy_uri: uri.to_string(),
        class: SecurityPolicy::from_uri(uri).map_or(PolicyClass::Unknown, SecurityPolicy::class),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AsymmetricEncryption {
    RsaPkcs1v15,
    RsaOaepSha1,
    RsaOaepSha256,
}

impl AsymmetricEncryption {
    pub fn uri(self) -> &'static str {
        match self {
            AsymmetricEncryption::RsaPkcs1v15 => "http://www.w3.org/2001/04/xmlenc#rsa-1_5",
            AsymmetricEncryption::RsaOaepSha1 => "http://www.w3.org/2001/04/xmlenc#rsa-oaep",
            AsymmetricEncryption::RsaOaepSha256 => {
                "http://opcfoundation.org/UA/security/rsa-oaep-sha2-256"
            }
        }
    }

    pub fn from_uri(uri: &str) -> Option<Self> {
        [
            AsymmetricEncryption::RsaPkcs1v15,
            AsymmetricEncryption::RsaOaepSha1,
            AsymmetricEncryption::RsaOaepSha256,
        ]
        .into_iter()
        .find(|a| a.uri() == uri)
    }

    /// Octets of padding per block for a key of `key_len` octets.
    pub fn overhead(self) -> usize {
        match self {
            AsymmetricEncryption::RsaPkcs1v15 => 11,
            AsymmetricEncryption::RsaOaepSha1 => 42,
            AsymmetricEncryption::RsaOaepSha256 => 66,
        }
    }

    /// Plaintext octets that fit into one block.
    pub fn block_capacity(self, key_len: usize) -> usize {
        key_len.saturating_sub(self.overhead())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AsymmetricSignature {
    RsaPkcs1v15Sha1,
    RsaPkcs1v15Sha256,
    RsaPssSha256,
}

impl AsymmetricSignature {
    pub fn uri(self) -> &'static str {
        match self {
            AsymmetricSignature::RsaPkcs1v15Sha1 => "http://www.w3.org/2000/09/xmldsig#rsa-sha1",
            AsymmetricSignature::RsaPkcs1v15Sha256 => {
                "http://www.w3.org/2001/04/xmldsig-more#rsa-sha256"
            }
            AsymmetricSignature::RsaPssSha256 => {
                "http://opcfoundation.org/UA/security/rsa-pss-sha2-256"
            }
        }
    }

    pub fn from_uri(uri: &str) -> Option<Self> {
        [
            AsymmetricSignature::RsaPkcs1v15Sha1,
            AsymmetricSignature::RsaPkcs1v15Sha256,
            AsymmetricSignature::RsaPssSha256,
        ]
        .into_iter()
        .find(|a| a.uri() == uri)
    }
}

impl SecurityPolicy {
    pub const ALL: [SecurityPolicy; 6] = [
        SecurityPolicy::None,
        SecurityPolicy::Basic128Rsa15,
        SecurityPolicy::Basic256,
        SecurityPolicy::Basic256Sha256,
        SecurityPolicy::Aes128Sha256RsaOaep,
        SecurityPolicy::Aes256Sha256RsaPss,
    ];

    pub fn suffix(self) -> &'static str {
        match self {
            SecurityPolicy::None => "None",
            SecurityPolicy::Basic128Rsa15 => "Basic128Rsa15",
            SecurityPolicy::Basic256 => "Basic256",
            SecurityPolicy::Basic256Sha256 => "Basic256Sha256",
            SecurityPolicy::Aes128Sha256RsaOaep => "Aes128_Sha256_RsaOaep",
            SecurityPolicy::Aes256Sha256RsaPss => "Aes256_Sha256_RsaPss",
        }
    }

    pub fn uri(self) -> String {
        format!("{PREFIX}{}", self.suffix())
    }

    pub fn from_uri(uri: &str) -> Option<Self> {
        let suffix = uri.strip_prefix(PREFIX)?;
        Self::ALL.into_iter().find(|p| p.suffix() == suffix)
    }

    /// Accepts a full URI or the bare suffix ("Basic256Sha256").
    pub fn from_name(name: &str) -> Option<Self> {
        Self::from_uri(name).or_else(|| Self::ALL.into_iter().find(|p| p.suffix() == name))
    }

    pub fn class(self) -> PolicyClass {
        match self {
            SecurityPolicy::None => PolicyClass::Insecure,
            SecurityPolicy::Basic128Rsa15 | SecurityPolicy::Basic256 => PolicyClass::Deprecated,
            SecurityPolicy::Basic256Sha256
            | SecurityPolicy::Aes128Sha256RsaOaep
            | SecurityPolicy::Aes256Sha256RsaPss => PolicyClass::Accepted,
        }
    }

    pub fn asymmetric_encryption(self) -> Option<AsymmetricEncryption> {
        match self {
            SecurityPolicy::None => None,
            SecurityPolicy::Basic128Rsa15 => Some(AsymmetricEncryption::RsaPkcs1v15),
            SecurityPolicy::Basic256
            | SecurityPolicy::Basic256Sha256
            | SecurityPolicy::Aes128Sha256RsaOaep => Some(AsymmetricEncryption::RsaOaepSha1),
            SecurityPolicy::Aes256Sha256RsaPss => Some(AsymmetricEncryption::RsaOaepSha256),
        }
    }

    pub fn asymmetric_signature(self) -> Option<AsymmetricSignature> {
        match self {
            SecurityPolicy::None => None,
            SecurityPolicy::Basic128Rsa15 | SecurityPolicy::Basic256 => {
                Some(AsymmetricSignature::RsaPkcs1v15Sha1)
            }
            SecurityPolicy::Basic256Sha256 | SecurityPolicy::Aes128Sha256RsaOaep => {
                Some(AsymmetricSignature::RsaPkcs1v15Sha256)
            }
            SecurityPolicy::Aes256Sha256RsaPss => Some(AsymmetricSignature::RsaPssSha256),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_table() {
        let c = |s: &str| classify_policy(&format!("{PREFIX}{s}")).class;
        assert_eq!(c("None"), PolicyClass::Insecure);
        assert_eq!(c("Basic128Rsa15"), PolicyClass::Deprecated);
        assert_eq!(c("Basic256"), PolicyClass::Deprecated);
        assert_eq!(c("Basic256Sha256"), PolicyClass::Accepted);
        assert_eq!(c("Aes128_Sha256_RsaOaep"), PolicyClass::Accepted);
        assert_eq!(c("Aes256_Sha256_RsaPss"), PolicyClass::Accepted);
        assert_eq!(c("PubSub_Aes128_CTR"), PolicyClass::Unknown);
        assert_eq!(classify_policy("").class, PolicyClass::Unknown);
        assert_eq!(
            classify_policy("Basic256Sha256").class,
            PolicyClass::Unknown
        );
    }

    #[test]
    fn one_insecure_two_deprecated() {
        let count = |k| {
            SecurityPolicy::ALL
                .iter()
                .filter(|p| p.class() == k)
                .count()
        };
        assert_eq!(count(PolicyClass::Insecure), 1);
        assert_eq!(count(PolicyClass::Deprecated), 2);
    }

    #[test]
    fn uris_roundtrip() {
        for p in SecurityPolicy::ALL {
            assert_eq!(SecurityPolicy::from_uri(&p.uri()), Some(p));
            assert_eq!(SecurityPolicy::from_name(p.suffix()), Some(p));
        }
    }

    #[test]
    fn block_capacity_for_2048_bit_keys() {
        assert_eq!(AsymmetricEncryption::RsaPkcs1v15.block_capacity(256), 245);
        assert_eq!(AsymmetricEncryption::RsaOaepSha1.block_capacity(256), 214);
        assert_eq!(AsymmetricEncryption::RsaOaepSha256.block_capacity(256), 190);
    }
}
