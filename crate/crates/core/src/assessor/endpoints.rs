//! Endpoint configuration scoring.

use std::collections::BTreeSet;

use crate::codec::UserTokenType;
use crate::evidence;
use crate::policy::{classify_policy, PolicyClass};
use crate::services::{EndpointDescriptor, SecurityMode};

use super::finding::{Finding, Rule, TargetRef};

pub const MIN_NONCE_LENGTH: usize = 32;

fn mode_name(m: SecurityMode) -> &'static str {
    match m {
        SecurityMode::None => "None",
        SecurityMode::Sign => "Sign",
        SecurityMode::SignAndEncrypt => "SignAndEncrypt",
    }
}

/// Scores an endpoint list. `observed_nonce_length` is the length of a
/// server nonce seen in CreateSession, when one was obtained.
pub fn assess_endpoints(
    target: &TargetRef,
    endpoints: &[EndpointDescriptor],
    observed_nonce_length: Option<usize>,
) -> Vec<Finding> {
    let mut out = Vec::new();
    let by_class = |class: PolicyClass| -> BTreeSet<String> {
        endpoints
            .iter()
            .filter(|e| classify_policy(&e.security_policy_uri).class == class)
            .map(|e| e.security_policy_uri.clone())
            .collect()
    };
    let count_with = |uri: &str| {
        endpoints
            .iter()
            .filter(|e| e.security_policy_uri == uri)
            .count()
    };

    for (class, rule) in [
        (PolicyClass::Insecure, Rule::InsecurePolicy),
        (PolicyClass::Deprecated, Rule::DeprecatedPolicy),
        (PolicyClass::Unknown, Rule::UnknownPolicy),
    ] {
        for uri in by_class(class) {
            out.push(Finding::new(
                rule,
                target,
                Some(uri.clone()),
                evidence! {"security_policy_uri" => uri, "endpoints" => count_with(&uri)},
            ));
        }
    }

    let none_mode: Vec<_> = endpoints
        .iter()
        .filter(|e| e.message_security_mode == SecurityMode::None)
        .collect();
    if !none_mode.is_empty() {
        out.push(Finding::new(
            Rule::ModeNone,
            target,
            None,
            evidence! {"endpoints" => none_mode.len()},
        ));
    }

    let secure: Vec<_> = endpoints
        .iter()
        .filter(|e| e.message_security_mode != SecurityMode::None)
        .collect();
    if !secure.is_empty()
        && secure
            .iter()
            .all(|e| e.message_security_mode == SecurityMode::Sign)
    {
        out.push(Finding::new(
            Rule::SignOnly,
            target,
            None,
            evidence! {"sign_endpoints" => secure.len()},
        ));
    }

    let anon_none: Vec<_> = none_mode
        .iter()
        .filter_map(|e| e.token_policy(UserTokenType::Anonymous))
        .map(|p| p.policy_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let anon_secure: Vec<_> = secure
        .iter()
        .filter_map(|e| e.token_policy(UserTokenType::Anonymous))
        .map(|p| p.policy_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !anon_none.is_empty() {
        out.push(Finding::new(
            Rule::AnonymousOnNone,
            target,
            None,
            evidence! {"policy_ids" => anon_none},
        ));
    } else if !anon_secure.is_empty() {
        out.push(Finding::new(
            Rule::AnonymousOnSecure,
            target,
            None,
            evidence! {"policy_ids" => anon_secure},
        ));
    }

    let mut inversions = Vec::new();
    for weak in endpoints {
        for strong in endpoints {
            let (Some(w), Some(s)) = (
                classify_policy(&weak.security_policy_uri).class.rank(),
                classify_policy(&strong.security_policy_uri).class.rank(),
            ) else {
                continue;
            };
            if w < s && weak.security_level > strong.security_level {
                inversions.push(format!(
                    "{}/{} level {} > {}/{} level {}",
                    suffix(&weak.security_policy_uri),
                    mode_name(weak.message_security_mode),
                    weak.security_level,
                    suffix(&strong.security_policy_uri),
                    mode_name(strong.message_security_mode),
                    strong.security_level,
                ));
            }
        }
    }
    if !inversions.is_empty() {
        inversions.sort();
        inversions.dedup();
        out.push(Finding::new(
            Rule::SecurityLevelInversion,
            target,
            None,
            evidence! {"inversions" => inversions},
        ));
    }

    if let Some(n) = observed_nonce_length.filter(|n| *n < MIN_NONCE_LENGTH) {
        out.push(Finding::new(
            Rule::ShortServerNonce,
            target,
            None,
            evidence! {"nonce_length" => n, "minimum" => MIN_NONCE_LENGTH},
        ));
    }
    out
}

fn suffix(uri: &str) -> &str {
    uri.rsplit_once('#').map_or(uri, |(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assessor::Severity;
    use crate::policy::SecurityPolicy;
    use crate::services::UserTokenPolicy;

    fn ep(
        policy: SecurityPolicy,
        mode: SecurityMode,
        level: u8,
        tokens: &[UserTokenType],
    ) -> EndpointDescriptor {
        EndpointDescriptor {
            endpoint_url: "opc.tcp://h:4840/".into(),
            application_uri: "urn:a".into(),
            product_uri: "urn:p".into(),
            server_certificate: Vec::new(),
            security_policy_uri: policy.uri(),
            message_security_mode: mode,
            security_level: level,
            user_token_policies: tokens
                .iter()
                .map(|t| UserTokenPolicy::new(format!("{t:?}").to_lowercase(), *t))
                .collect(),
        }
    }

    fn rules(f: &[Finding]) -> Vec<(&str, Severity)> {
        let mut v: Vec<_> = f.iter().map(|f| (f.rule.as_str(), f.severity)).collect();
        v.sort();
        v
    }

    fn t() -> TargetRef {
        TargetRef::new("h", 4840)
    }

    #[test]
    fn mixed_endpoint_set() {
        use SecurityPolicy::*;
        let eps = [
            ep(None, SecurityMode::None, 0, &[UserTokenType::UserName]),
            ep(
                Basic128Rsa15,
                SecurityMode::SignAndEncrypt,
                1,
                &[UserTokenType::UserName],
            ),
            ep(
                Basic256Sha256,
                SecurityMode::SignAndEncrypt,
                3,
                &[UserTokenType::UserName],
            ),
            ep(
                Aes128Sha256RsaOaep,
                SecurityMode::SignAndEncrypt,
                4,
                &[UserTokenType::UserName],
            ),
        ];
        let f = assess_endpoints(&t(), &eps, Some(32));
        assert_eq!(
            rules(&f),
            [
                ("endpoint.deprecated-policy", Severity::Medium),
                ("endpoint.insecure-policy", Severity::High),
                ("endpoint.mode-none", Severity::High),
            ]
        );
    }

    #[test]
    fn secure_baseline_has_nothing_above_info() {
        let eps = [ep(
            SecurityPolicy::Basic256Sha256,
            SecurityMode::SignAndEncrypt,
            3,
            &[UserTokenType::UserName],
        )];
        assert!(assess_endpoints(&t(), &eps, Some(32))
            .iter()
            .all(|f| f.severity == Severity::Info));
    }

    #[test]
    fn anonymous_on_secure_only_is_medium() {
        let eps = [ep(
            SecurityPolicy::Basic256Sha256,
            SecurityMode::SignAndEncrypt,
            3,
            &[UserTokenType::Anonymous],
        )];
        assert_eq!(
            rules(&assess_endpoints(&t(), &eps, None)),
            [("endpoint.anonymous-on-secure", Severity::Medium)]
        );
        let eps = [
            eps[0].clone(),
            ep(
                SecurityPolicy::None,
                SecurityMode::None,
                0,
                &[UserTokenType::Anonymous],
            ),
        ];
        let f = assess_endpoints(&t(), &eps, None);
        assert!(f.iter().any(|f| f.rule == "endpoint.anonymous-on-none"));
        assert!(!f.iter().any(|f| f.rule == "endpoint.anonymous-on-secure"));
    }

    #[test]
    fn sign_only_inversion_and_nonce() {
        let eps = [
            ep(SecurityPolicy::Basic256, SecurityMode::Sign, 5, &[]),
            ep(
                SecurityPolicy::Aes256Sha256RsaPss,
                SecurityMode::Sign,
                2,
                &[],
            ),
        ];
        let f = assess_endpoints(&t(), &eps, Some(16));
        assert_eq!(
            rules(&f),
            [
                ("endpoint.deprecated-policy", Severity::Medium),
                ("endpoint.security-level-inversion", Severity::Info),
                ("endpoint.sign-only", Severity::Low),
                ("transport.short-server-nonce", Severity::Medium),
            ]
        );
    }

    #[test]
    fn unknown_policy_is_never_accepted_silently() {
        let mut e = ep(
            SecurityPolicy::Basic256Sha256,
            SecurityMode::SignAndEncrypt,
            9,
            &[],
        );
        e.security_policy_uri = "http://example.com/UA/SecurityPolicy#Custom".into();
        let strong = ep(
            SecurityPolicy::Basic256Sha256,
            SecurityMode::SignAndEncrypt,
            1,
            &[],
        );
        let f = assess_endpoints(&t(), &[e, strong], None);
        assert_eq!(rules(&f), [("endpoint.unknown-policy", Severity::Info)]);
    }
}
