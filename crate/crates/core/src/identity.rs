//! User identity tokens, credential lists and client certificates.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use rand::rngs::OsRng;
use rsa::pkcs1v15::{
    Signature as Pkcs1Signature, SigningKey as Pkcs1SigningKey, VerifyingKey as Pkcs1VerifyingKey,
};
use rsa::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePrivateKey, LineEnding};
use rsa::pss::{BlindedSigningKey, Signature as PssSignature, VerifyingKey as PssVerifyingKey};
use rsa::signature::{RandomizedSigner, SignatureEncoding, Signer, Verifier};
use rsa::traits::PublicKeyParts;
use rsa::{Oaep, Pkcs1v15Encrypt, RsaPrivateKey, RsaPublicKey};
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::Sha256;
use thiserror::Error;
use x509_cert::builder::{Builder, CertificateBuilder, Profile};
use x509_cert::der::asn1::Ia5String;
use x509_cert::der::{Decode, DecodePem, Encode, EncodePem};
use x509_cert::ext::pkix::name::GeneralName;
use x509_cert::ext::pkix::SubjectAltName;
use x509_cert::name::Name;
use x509_cert::serial_number::SerialNumber;
use x509_cert::spki::SubjectPublicKeyInfoOwned;
use x509_cert::time::Validity;
use x509_cert::Certificate;

use crate::codec::{
    ids, CodecError, ExtensionBody, ExtensionPayload, Reader, SignatureData, UserTokenType, Writer,
};
use crate::policy::{AsymmetricEncryption, AsymmetricSignature, SecurityPolicy};
use crate::services::{EndpointDescriptor, UserTokenPolicy};

/// Application URI announced by the client and embedded in its certificate.
pub const CLIENT_APPLICATION_URI: &str = "urn:uascan:client";

const DEFAULT_CREDENTIALS: &str = include_str!("../../../data/default-credentials.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("endpoint offers no {0:?} token policy")]
    NoSuchPolicy(UserTokenType),
    #[error("certificate cannot be parsed: {0}")]
    CertificateUnparseable(String),
    #[error("policy {0} cannot encrypt tokens")]
    PolicyUnsupportedForEncryption(String),
    #[error("policy {0} cannot sign tokens")]
    PolicyUnsupportedForSigning(String),
    #[error("private key does not match certificate")]
    KeyMismatch,
    #[error("server nonce is missing")]
    NonceMissing,
    #[error("key size {0} is not one of 2048, 3072, 4096")]
    InvalidKeySize(usize),
    #[error("invalid subject {0:?}")]
    InvalidSubject(String),
    #[error("credential list line {line}: {reason}")]
    CredentialSyntax { line: usize, reason: String },
    #[error("crypto failure: {0}")]
    Crypto(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type IdentityResult<T> = Result<T, IdentityError>;

fn crypto(e: impl std::fmt::Display) -> IdentityError {
    IdentityError::Crypto(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CredentialSource {
    DefaultList,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Credential {
    pub username: String,
    pub password: String,
    pub source: CredentialSource,
}

impl Credential {
    pub fn new(
        username: impl Into<String>,
        password: impl Into<String>,
        source: CredentialSource,
    ) -> Self {
        Credential {
            username: username.into(),
            password: password.into(),
            source,
        }
    }

    /// Parses `user:pass` lines. Blank lines and `#` comments are skipped;
    /// the password is everything after the first colon.
    pub fn parse_list(text: &str, source: CredentialSource) -> IdentityResult<Vec<Credential>> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let Some((user, pass)) = line.split_once(':') else {
                return Err(IdentityError::CredentialSyntax {
                    line: i + 1,
                    reason: "expected user:pass".into(),
                });
            };
            if user.is_empty() {
                return Err(IdentityError::CredentialSyntax {
                    line: i + 1,
                    reason: "empty username".into(),
                });
            }
            out.push(Credential::new(user, pass, source));
        }
        Ok(out)
    }

    pub fn load_list(path: &Path, source: CredentialSource) -> IdentityResult<Vec<Credential>> {
        let text = fs::read_to_string(path)
            .map_err(|e| IdentityError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_list(&text, source)
    }
}

/// The shipped list of vendor-default and commonly weak credentials.
pub fn default_credentials() -> Vec<Credential> {
    Credential::parse_list(DEFAULT_CREDENTIALS, CredentialSource::DefaultList)
        .expect("bundled credential list parses")
}

/// A token ready to be placed into ActivateSession.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdentityToken {
    Anonymous {
        policy_id: String,
    },
    UserName {
        policy_id: String,
        username: String,
        /// Plaintext when `encryption_algorithm` is empty.
        password: Vec<u8>,
        encryption_algorithm: String,
    },
    X509 {
        policy_id: String,
        certificate: Vec<u8>,
        signature: SignatureData,
    },
}

impl IdentityToken {
    pub fn token_type(&self) -> UserTokenType {
        match self {
            IdentityToken::Anonymous { .. } => UserTokenType::Anonymous,
            IdentityToken::UserName { .. } => UserTokenType::UserName,
            IdentityToken::X509 { .. } => UserTokenType::Certificate,
        }
    }

    pub fn policy_id(&self) -> &str {
        match self {
            IdentityToken::Anonymous { policy_id }
            | IdentityToken::UserName { policy_id, .. }
            | IdentityToken::X509 { policy_id, .. } => policy_id,
        }
    }

    pub fn to_extension(&self) -> Result<ExtensionBody, CodecError> {
        let mut w = Writer::new();
        let type_id = match self {
            IdentityToken::Anonymous { policy_id } => {
                w.string(Some(policy_id))?;
                ids::ANONYMOUS_IDENTITY_TOKEN
            }
            IdentityToken::UserName {
                policy_id,
                username,
                password,
                encryption_algorithm,
            } => {
                w.string(Some(policy_id))?;
                w.string(Some(username))?;
                w.byte_string(Some(password))?;
                w.string_or_null(encryption_algorithm)?;
                ids::USER_NAME_IDENTITY_TOKEN
            }
            IdentityToken::X509 {
                policy_id,
                certificate,
                ..
            } => {
                w.string(Some(policy_id))?;
                w.byte_string(Some(certificate))?;
                ids::X509_IDENTITY_TOKEN
            }
        };
        Ok(ExtensionBody::binary(type_id, w.into_inner()))
    }

    /// Parses the token carried by an ActivateSession request.
    pub fn from_extension(ext: &ExtensionBody) -> Result<IdentityToken, CodecError> {
        let body = match &ext.payload {
            ExtensionPayload::Binary(b) => b.as_slice(),
            ExtensionPayload::None => {
                return Ok(IdentityToken::Anonymous {
                    policy_id: String::new(),
                })
            }
            ExtensionPayload::Xml(_) => {
                return Err(CodecError::Malformed("XML identity token".into()))
            }
        };
        let mut r = Reader::new(body);
        let policy_id = r.string_or_empty()?;
        let token = match ext.type_id.as_ns0_numeric() {
            Some(ids::ANONYMOUS_IDENTITY_TOKEN) => IdentityToken::Anonymous { policy_id },
            Some(ids::USER_NAME_IDENTITY_TOKEN) => IdentityToken::UserName {
                policy_id,
                username: r.string_or_empty()?,
                password: r.bytes_or_empty()?,
                encryption_algorithm: r.string_or_empty()?,
            },
            Some(ids::X509_IDENTITY_TOKEN) => IdentityToken::X509 {
                policy_id,
                certificate: r.bytes_or_empty()?,
                signature: SignatureData::default(),
            },
            _ => {
                return Err(CodecError::Malformed(format!(
                    "unsupported identity token type {}",
                    ext.type_id
                )))
            }
        };
        Ok(token)
    }

    /// The user token signature accompanying this token.
    pub fn signature_data(&self) -> SignatureData {
        match self {
            IdentityToken::X509 { signature, .. } => signature.clone(),
            _ => SignatureData::default(),
        }
    }
}

fn find_policy(
    endpoint: &EndpointDescriptor,
    kind: UserTokenType,
) -> IdentityResult<&UserTokenPolicy> {
    endpoint
        .token_policy(kind)
        .ok_or(IdentityError::NoSuchPolicy(kind))
}

pub fn build_anonymous(endpoint: &EndpointDescriptor) -> IdentityResult<IdentityToken> {
    let policy = find_policy(endpoint, UserTokenType::Anonymous)?;
    Ok(IdentityToken::Anonymous {
        policy_id: policy.policy_id.clone(),
    })
}

/// Anonymous token for a policy id the server did not necessarily advertise.
pub fn anonymous_with_policy_id(policy_id: &str) -> IdentityToken {
    IdentityToken::Anonymous {
        policy_id: policy_id.to_string(),
    }
}

/// UserName token. The password is encrypted with the legacy scheme when the
/// effective token policy is not None.
pub fn build_username(
    endpoint: &EndpointDescriptor,
    credential: &Credential,
    server_certificate: &[u8],
    server_nonce: &[u8],
) -> IdentityResult<IdentityToken> {
    let policy = find_policy(endpoint, UserTokenType::UserName)?;
    let uri = policy.effective_policy_uri(endpoint);
    let sp = SecurityPolicy::from_uri(uri);
    let (password, encryption_algorithm) = match sp {
        Some(SecurityPolicy::None) => (credential.password.as_bytes().to_vec(), String::new()),
        Some(p) => {
            let alg = p
                .asymmetric_encryption()
                .ok_or_else(|| IdentityError::PolicyUnsupportedForEncryption(uri.to_string()))?;
            if server_nonce.is_empty() {
                return Err(IdentityError::NonceMissing);
            }
            let key = certificate_public_key(server_certificate)?;
            let ct = legacy_encrypt(&key, alg, credential.password.as_bytes(), server_nonce)?;
            (ct, alg.uri().to_string())
        }
        None => {
            return Err(IdentityError::PolicyUnsupportedForEncryption(
                uri.to_string(),
            ))
        }
    };
    Ok(IdentityToken::UserName {
        policy_id: policy.policy_id.clone(),
        username: credential.username.clone(),
        password,
        encryption_algorithm,
    })
}

/// `len(secret ++ nonce)` as u32 LE, then secret, then nonce, RSA-encrypted
/// block by block.
pub fn legacy_encrypt(
    key: &RsaPublicKey,
    alg: AsymmetricEncryption,
    secret: &[u8],
    nonce: &[u8],
) -> IdentityResult<Vec<u8>> {
    let mut plain = Vec::with_capacity(4 + secret.len() + nonce.len());
    plain.extend_from_slice(&((secret.len() + nonce.len()) as u32).to_le_bytes());
    plain.extend_from_slice(secret);
    plain.extend_from_slice(nonce);
    let block = alg.block_capacity(key.size());
    if block == 0 {
        return Err(IdentityError::Crypto("key too small for padding".into()));
    }
    let mut rng = OsRng;
    let mut out = Vec::new();
    for chunk in plain.chunks(block) {
        let ct = match alg {
            AsymmetricEncryption::RsaPkcs1v15 => key.encrypt(&mut rng, Pkcs1v15Encrypt, chunk),
            AsymmetricEncryption::RsaOaepSha1 => key.encrypt(&mut rng, Oaep::new::<Sha1>(), chunk),
            AsymmetricEncryption::RsaOaepSha256 => {
                key.encrypt(&mut rng, Oaep::new::<Sha256>(), chunk)
            }
        }
        .map_err(crypto)?;
        out.extend_from_slice(&ct);
    }
    Ok(out)
}

/// Inverse of [`legacy_encrypt`]; returns the secret with the trailing
/// `nonce_len` octets removed.
pub fn legacy_decrypt(
    key: &RsaPrivateKey,
    alg: AsymmetricEncryption,
    ciphertext: &[u8],
    nonce_len: usize,
) -> IdentityResult<(Vec<u8>, Vec<u8>)> {
    let k = key.size();
    if ciphertext.is_empty() || ciphertext.len() % k != 0 {
        return Err(IdentityError::Crypto(
            "ciphertext is not a whole number of blocks".into(),
        ));
    }
    let mut plain = Vec::new();
    for block in ciphertext.chunks(k) {
        let p = match alg {
            AsymmetricEncryption::RsaPkcs1v15 => key.decrypt(Pkcs1v15Encrypt, block),
            AsymmetricEncryption::RsaOaepSha1 => key.decrypt(Oaep::new::<Sha1>(), block),
            AsymmetricEncryption::RsaOaepSha256 => key.decrypt(Oaep::new::<Sha256>(), block),
        }
        .map_err(crypto)?;
        plain.extend_from_slice(&p);
    }
    if plain.len() < 4 {
        return Err(IdentityError::Crypto("plaintext too short".into()));
    }
    let declared = u32::from_le_bytes([plain[0], plain[1], plain[2], plain[3]]) as usize;
    let body = &plain[4..];
    if declared != body.len() || declared < nonce_len {
        return Err(IdentityError::Crypto("length prefix mismatch".into()));
    }
    let (secret, nonce) = body.split_at(declared - nonce_len);
    Ok((secret.to_vec(), nonce.to_vec()))
}

/// X509 token with a proof-of-possession signature over
/// `server_certificate ++ server_nonce`.
pub fn build_x509(
    endpoint: &EndpointDescriptor,
    certificate: &[u8],
    private_key: &RsaPrivateKey,
    server_certificate: &[u8],
    server_nonce: &[u8],
) -> IdentityResult<IdentityToken> {
    let policy = find_policy(endpoint, UserTokenType::Certificate)?;
    let uri = policy.effective_policy_uri(endpoint);
    let alg = SecurityPolicy::from_uri(uri)
        .and_then(SecurityPolicy::asymmetric_signature)
        .ok_or_else(|| IdentityError::PolicyUnsupportedForSigning(uri.to_string()))?;
    let public = certificate_public_key(certificate)?;
    if public != RsaPublicKey::from(private_key) {
        return Err(IdentityError::KeyMismatch);
    }
    let mut data = server_certificate.to_vec();
    data.extend_from_slice(server_nonce);
    let signature = sign(private_key, alg, &data)?;
    Ok(IdentityToken::X509 {
        policy_id: policy.policy_id.clone(),
        certificate: certificate.to_vec(),
        signature: SignatureData {
            algorithm: alg.uri().to_string(),
            signature,
        },
    })
}

pub fn sign(key: &RsaPrivateKey, alg: AsymmetricSignature, data: &[u8]) -> IdentityResult<Vec<u8>> {
    Ok(match alg {
        AsymmetricSignature::RsaPkcs1v15Sha1 => Pkcs1SigningKey::<Sha1>::new(key.clone())
            .try_sign(data)
            .map_err(crypto)?
            .to_vec(),
        AsymmetricSignature::RsaPkcs1v15Sha256 => Pkcs1SigningKey::<Sha256>::new(key.clone())
            .try_sign(data)
            .map_err(crypto)?
            .to_vec(),
        AsymmetricSignature::RsaPssSha256 => BlindedSigningKey::<Sha256>::new(key.clone())
            .try_sign_with_rng(&mut OsRng, data)
            .map_err(crypto)?
            .to_vec(),
    })
}

pub fn verify(key: &RsaPublicKey, alg: AsymmetricSignature, data: &[u8], signature: &[u8]) -> bool {
    match alg {
        AsymmetricSignature::RsaPkcs1v15Sha1 => Pkcs1Signature::try_from(signature)
            .map(|s| {
                Pkcs1VerifyingKey::<Sha1>::new(key.clone())
                    .verify(data, &s)
                    .is_ok()
            })
            .unwrap_or(false),
        AsymmetricSignature::RsaPkcs1v15Sha256 => Pkcs1Signature::try_from(signature)
            .map(|s| {
                Pkcs1VerifyingKey::<Sha256>::new(key.clone())
                    .verify(data, &s)
                    .is_ok()
            })
            .unwrap_or(false),
        AsymmetricSignature::RsaPssSha256 => PssSignature::try_from(signature)
            .map(|s| {
                PssVerifyingKey::<Sha256>::new(key.clone())
                    .verify(data, &s)
                    .is_ok()
            })
            .unwrap_or(false),
    }
}

/// RSA public key from a DER certificate.
pub fn certificate_public_key(der: &[u8]) -> IdentityResult<RsaPublicKey> {
    let cert = parse_certificate(der)?;
    let spki = cert
        .tbs_certificate
        .subject_public_key_info
        .to_der()
        .map_err(|e| IdentityError::CertificateUnparseable(e.to_string()))?;
    RsaPublicKey::from_public_key_der(&spki)
        .map_err(|e| IdentityError::CertificateUnparseable(e.to_string()))
}

pub fn parse_certificate(der: &[u8]) -> IdentityResult<Certificate> {
    Certificate::from_der(der).map_err(|e| IdentityError::CertificateUnparseable(e.to_string()))
}

/// Summary fields of a certificate, for evidence maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub subject: String,
    pub issuer: String,
    pub self_signed: bool,
    pub not_before: String,
    pub not_after: String,
    pub key_bits: usize,
    pub application_uri: Option<String>,
    pub sha1_thumbprint: String,
}

pub fn summarize_certificate(der: &[u8]) -> IdentityResult<CertificateSummary> {
    use sha1::Digest;
    let cert = parse_certificate(der)?;
    let tbs = &cert.tbs_certificate;
    let key_bits = certificate_public_key(der)
        .map(|k| k.size() * 8)
        .unwrap_or(0);
    Ok(CertificateSummary {
        subject: tbs.subject.to_string(),
        issuer: tbs.issuer.to_string(),
        self_signed: tbs.subject == tbs.issuer,
        not_before: tbs.validity.not_before.to_string(),
        not_after: tbs.validity.not_after.to_string(),
        key_bits,
        application_uri: application_uri_of(&cert),
        sha1_thumbprint: hex::encode(Sha1::digest(der)),
    })
}

fn application_uri_of(cert: &Certificate) -> Option<String> {
    let (_, san) = cert.tbs_certificate.get::<SubjectAltName>().ok()??;
    san.0.iter().find_map(|n| match n {
        GeneralName::UniformResourceIdentifier(u) => Some(u.to_string()),
        _ => None,
    })
}

/// Checks the certificate's own signature (RSA-SHA256) against its own key.
pub fn verify_self_signature(der: &[u8]) -> IdentityResult<bool> {
    let cert = parse_certificate(der)?;
    let key = certificate_public_key(der)?;
    let tbs = cert
        .tbs_certificate
        .to_der()
        .map_err(|e| IdentityError::CertificateUnparseable(e.to_string()))?;
    let Some(sig) = cert.signature.as_bytes() else {
        return Ok(false);
    };
    Ok(verify(
        &key,
        AsymmetricSignature::RsaPkcs1v15Sha256,
        &tbs,
        sig,
    ))
}

/// Self-signed client certificate with [`CLIENT_APPLICATION_URI`] in its SAN.
pub fn generate_self_signed(
    subject: &str,
    key_bits: usize,
    validity_days: u32,
) -> IdentityResult<(Vec<u8>, RsaPrivateKey)> {
    generate_self_signed_for(subject, CLIENT_APPLICATION_URI, key_bits, validity_days)
}

pub fn generate_self_signed_for(
    subject: &str,
    application_uri: &str,
    key_bits: usize,
    validity_days: u32,
) -> IdentityResult<(Vec<u8>, RsaPrivateKey)> {
    if ![2048, 3072, 4096].contains(&key_bits) {
        return Err(IdentityError::InvalidKeySize(key_bits));
    }
    let key = RsaPrivateKey::new(&mut OsRng, key_bits).map_err(crypto)?;
    let der = self_signed_with_key(subject, application_uri, &key, validity_days)?;
    Ok((der, key))
}

/// Self-signed certificate over an existing key.
pub fn self_signed_with_key(
    subject: &str,
    application_uri: &str,
    key: &RsaPrivateKey,
    validity_days: u32,
) -> IdentityResult<Vec<u8>> {
    let dn = if subject.contains('=') {
        subject.to_string()
    } else {
        format!("CN={subject}")
    };
    let name =
        Name::from_str(&dn).map_err(|_| IdentityError::InvalidSubject(subject.to_string()))?;
    let mut serial = [0u8; 16];
    rand::RngCore::fill_bytes(&mut OsRng, &mut serial);
    serial[0] = (serial[0] & 0x7F) | 0x01;
    let serial = SerialNumber::new(&serial).map_err(crypto)?;
    let validity = Validity::from_now(Duration::from_secs(u64::from(validity_days) * 86_400))
        .map_err(crypto)?;
    let public = RsaPublicKey::from(key);
    let spki = SubjectPublicKeyInfoOwned::from_key(public).map_err(crypto)?;
    let signer = Pkcs1SigningKey::<Sha256>::new(key.clone());
    let mut builder = CertificateBuilder::new(
        Profile::Leaf {
            issuer: name.clone(),
            enable_key_agreement: false,
            enable_key_encipherment: true,
        },
        serial,
        validity,
        name,
        spki,
        &signer,
    )
    .map_err(crypto)?;
    let uri = Ia5String::new(application_uri).map_err(crypto)?;
    builder
        .add_extension(&SubjectAltName(vec![
            GeneralName::UniformResourceIdentifier(uri),
        ]))
        .map_err(crypto)?;
    let cert = builder.build::<Pkcs1Signature>().map_err(crypto)?;
    cert.to_der().map_err(crypto)
}

/// Reads a DER or PEM certificate and returns DER.
pub fn load_certificate(path: &Path) -> IdentityResult<Vec<u8>> {
    let bytes =
        fs::read(path).map_err(|e| IdentityError::Io(format!("{}: {e}", path.display())))?;
    certificate_from_bytes(&bytes)
}

pub fn certificate_from_bytes(bytes: &[u8]) -> IdentityResult<Vec<u8>> {
    if bytes.starts_with(b"-----BEGIN") {
        let cert = Certificate::from_pem(bytes)
            .map_err(|e| IdentityError::CertificateUnparseable(e.to_string()))?;
        cert.to_der()
            .map_err(|e| IdentityError::CertificateUnparseable(e.to_string()))
    } else {
        parse_certificate(bytes)?;
        Ok(bytes.to_vec())
    }
}

pub fn certificate_to_pem(der: &[u8]) -> IdentityResult<String> {
    parse_certificate(der)?
        .to_pem(LineEnding::LF)
        .map_err(|e| IdentityError::CertificateUnparseable(e.to_string()))
}

/// Reads a PKCS#8 private key, PEM or DER.
pub fn load_private_key(path: &Path) -> IdentityResult<RsaPrivateKey> {
    let bytes =
        fs::read(path).map_err(|e| IdentityError::Io(format!("{}: {e}", path.display())))?;
    private_key_from_bytes(&bytes)
}

pub fn private_key_from_bytes(bytes: &[u8]) -> IdentityResult<RsaPrivateKey> {
    if bytes.starts_with(b"-----BEGIN") {
        let text = std::str::from_utf8(bytes).map_err(crypto)?;
        RsaPrivateKey::from_pkcs8_pem(text).map_err(crypto)
    } else {
        RsaPrivateKey::from_pkcs8_der(bytes).map_err(crypto)
    }
}

pub fn private_key_to_pem(key: &RsaPrivateKey) -> IdentityResult<String> {
    Ok(key
        .to_pkcs8_pem(LineEnding::LF)
        .map_err(crypto)?
        .to_string())
}

pub fn private_key_to_der(key: &RsaPrivateKey) -> IdentityResult<Vec<u8>> {
    Ok(key.to_pkcs8_der().map_err(crypto)?.as_bytes().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::services::SecurityMode;
    use std::sync::OnceLock;

    fn identity() -> &'static (Vec<u8>, RsaPrivateKey) {
        static ID: OnceLock<(Vec<u8>, RsaPrivateKey)> = OnceLock::new();
        ID.get_or_init(|| generate_self_signed("uascan-test", 2048, 30).unwrap())
    }

    fn endpoint(policy: SecurityPolicy, tokens: Vec<UserTokenPolicy>) -> EndpointDescriptor {
        EndpointDescriptor {
            endpoint_url: "opc.tcp://h:4840/".into(),
            application_uri: "urn:s".into(),
            product_uri: "urn:p".into(),
            server_certificate: identity().0.clone(),
            security_policy_uri: policy.uri(),
            message_security_mode: SecurityMode::SignAndEncrypt,
            security_level: 1,
            user_token_policies: tokens,
        }
    }

    #[test]
    fn parse_credentials() {
        let list = Credential::parse_list(
            "# comment\nadmin:admin\n\nop:pa:ss\nblank:\n",
            CredentialSource::UserSupplied,
        )
        .unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[1].password, "pa:ss");
        assert_eq!(list[2].password, "");
        assert!(Credential::parse_list("nocolon\n", CredentialSource::UserSupplied).is_err());
        assert!(Credential::parse_list(":x\n", CredentialSource::UserSupplied).is_err());
    }

    #[test]
    fn bundled_list_has_admin() {
        let list = default_credentials();
        assert!(list.len() >= 20);
        assert!(list
            .iter()
            .any(|c| c.username == "admin" && c.password == "admin"));
    }

    #[test]
    fn username_token_matches_capture_layout() {
        let ep = endpoint(
            SecurityPolicy::None,
            vec![UserTokenPolicy::new("username", UserTokenType::UserName)],
        );
        let cred = Credential::new("admin", "admin", CredentialSource::DefaultList);
        let tok = build_username(&ep, &cred, &[], &[]).unwrap();
        let golden = crate::codec::golden::reference_fixtures()
            .into_iter()
            .find(|(n, _)| *n == "activate_session_request")
            .unwrap()
            .1;
        let crate::codec::golden::Fixture::Body(crate::codec::ServiceBody::ActivateSessionRequest(
            r,
        )) = golden
        else {
            panic!("fixture kind");
        };
        assert_eq!(tok.to_extension().unwrap(), r.user_identity_token);
        assert_eq!(
            IdentityToken::from_extension(&r.user_identity_token).unwrap(),
            tok
        );
    }

    #[test]
    fn legacy_encryption_roundtrips_for_each_policy() {
        let (cert, key) = identity();
        let nonce: Vec<u8> = (0..32).collect();
        for p in [
            SecurityPolicy::Basic128Rsa15,
            SecurityPolicy::Basic256Sha256,
            SecurityPolicy::Aes256Sha256RsaPss,
        ] {
            let ep = endpoint(p, vec![UserTokenPolicy::new("u", UserTokenType::UserName)]);
            let cred = Credential::new("op", "s3cret", CredentialSource::UserSupplied);
            let tok = build_username(&ep, &cred, cert, &nonce).unwrap();
            let IdentityToken::UserName {
                password,
                encryption_algorithm,
                ..
            } = &tok
            else {
                panic!()
            };
            let alg = AsymmetricEncryption::from_uri(encryption_algorithm).unwrap();
            assert_eq!(Some(alg), p.asymmetric_encryption());
            let (secret, n) = legacy_decrypt(key, alg, password, nonce.len()).unwrap();
            assert_eq!(secret, b"s3cret");
            assert_eq!(n, nonce);
        }
    }

    #[test]
    fn long_secret_spans_blocks() {
        let (cert, key) = identity();
        let public = certificate_public_key(cert).unwrap();
        let secret = vec![b'x'; 500];
        let ct = legacy_encrypt(
            &public,
            AsymmetricEncryption::RsaOaepSha1,
            &secret,
            &[7; 32],
        )
        .unwrap();
        assert_eq!(ct.len(), 3 * 256);
        let (s, _) = legacy_decrypt(key, AsymmetricEncryption::RsaOaepSha1, &ct, 32).unwrap();
        assert_eq!(s, secret);
    }

    #[test]
    fn token_errors() {
        let ep = endpoint(SecurityPolicy::None, vec![]);
        let cred = Credential::new("a", "b", CredentialSource::UserSupplied);
        assert_eq!(
            build_username(&ep, &cred, &[], &[]),
            Err(IdentityError::NoSuchPolicy(UserTokenType::UserName))
        );
        let mut p = UserTokenPolicy::new("u", UserTokenType::UserName);
        p.security_policy_uri = "urn:bogus".into();
        let ep = endpoint(SecurityPolicy::None, vec![p]);
        assert!(matches!(
            build_username(&ep, &cred, &[], &[]),
            Err(IdentityError::PolicyUnsupportedForEncryption(_))
        ));
        let ep = endpoint(
            SecurityPolicy::Basic256Sha256,
            vec![UserTokenPolicy::new("u", UserTokenType::UserName)],
        );
        assert!(matches!(
            build_username(&ep, &cred, b"not a cert", &[1; 32]),
            Err(IdentityError::CertificateUnparseable(_))
        ));
        let ep = endpoint(
            SecurityPolicy::None,
            vec![UserTokenPolicy::new("c", UserTokenType::Certificate)],
        );
        let (cert, key) = identity();
        assert!(matches!(
            build_x509(&ep, cert, key, cert, &[1; 32]),
            Err(IdentityError::PolicyUnsupportedForSigning(_))
        ));
    }

    #[test]
    fn x509_signature_verifies_and_detects_mismatch() {
        let (cert, key) = identity();
        let nonce = [9u8; 32];
        for p in [
            SecurityPolicy::Basic256,
            SecurityPolicy::Basic256Sha256,
            SecurityPolicy::Aes256Sha256RsaPss,
        ] {
            let ep = endpoint(
                p,
                vec![UserTokenPolicy::new("c", UserTokenType::Certificate)],
            );
            let tok = build_x509(&ep, cert, key, cert, &nonce).unwrap();
            let sig = tok.signature_data();
            let alg = AsymmetricSignature::from_uri(&sig.algorithm).unwrap();
            let mut data = cert.clone();
            data.extend_from_slice(&nonce);
            let public = certificate_public_key(cert).unwrap();
            assert!(verify(&public, alg, &data, &sig.signature));
            data[0] ^= 1;
            assert!(!verify(&public, alg, &data, &sig.signature));
        }
        let other = RsaPrivateKey::new(&mut OsRng, 1024).unwrap();
        let ep = endpoint(
            SecurityPolicy::Basic256Sha256,
            vec![UserTokenPolicy::new("c", UserTokenType::Certificate)],
        );
        assert_eq!(
            build_x509(&ep, cert, &other, cert, &nonce),
            Err(IdentityError::KeyMismatch)
        );
    }

    #[test]
    fn self_signed_certificate_properties() {
        let (cert, key) = identity();
        assert!(verify_self_signature(cert).unwrap());
        let s = summarize_certificate(cert).unwrap();
        assert!(s.self_signed);
        assert_eq!(s.key_bits, 2048);
        assert_eq!(s.application_uri.as_deref(), Some(CLIENT_APPLICATION_URI));
        assert!(s.subject.contains("uascan-test"));
        assert_eq!(
            certificate_public_key(cert).unwrap(),
            RsaPublicKey::from(key)
        );
        assert_eq!(
            generate_self_signed("x", 1024, 1).unwrap_err(),
            IdentityError::InvalidKeySize(1024)
        );
    }

    #[test]
    fn pem_and_der_roundtrip() {
        let (cert, key) = identity();
        let pem = certificate_to_pem(cert).unwrap();
        assert_eq!(&certificate_from_bytes(pem.as_bytes()).unwrap(), cert);
        assert_eq!(&certificate_from_bytes(cert).unwrap(), cert);
        let kp = private_key_to_pem(key).unwrap();
        assert_eq!(&private_key_from_bytes(kp.as_bytes()).unwrap(), key);
        let kd = private_key_to_der(key).unwrap();
        assert_eq!(&private_key_from_bytes(&kd).unwrap(), key);
    }
}
