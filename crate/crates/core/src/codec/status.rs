use std::fmt;

use serde::{Deserialize, Serialize};

/// OPC UA status code. The top two bits carry the severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatusCode(pub u32);

macro_rules! status_codes {
    ($($name:ident = $value:expr, $text:expr;)*) => {
        impl StatusCode {
            $(pub const $name: StatusCode = StatusCode($value);)*

            /// Symbolic name for codes in the table.
            pub fn name(self) -> Option<&'static str> {
                match self.0 & 0xFFFF_0000 {
                    $($value => Some($text),)*
                    _ => None,
                }
            }
        }
    };
}

status_codes! {
    GOOD = 0x0000_0000, "Good";
    BAD_UNEXPECTED_ERROR = 0x8001_0000, "Bad_UnexpectedError";
    BAD_INTERNAL_ERROR = 0x8002_0000, "Bad_InternalError";
    BAD_COMMUNICATION_ERROR = 0x8005_0000, "Bad_CommunicationError";
    BAD_ENCODING_ERROR = 0x8006_0000, "Bad_EncodingError";
    BAD_DECODING_ERROR = 0x8007_0000, "Bad_DecodingError";
    BAD_TIMEOUT = 0x800A_0000, "Bad_Timeout";
    BAD_SERVICE_UNSUPPORTED = 0x800B_0000, "Bad_ServiceUnsupported";
    BAD_NOTHING_TO_DO = 0x800F_0000, "Bad_NothingToDo";
    BAD_TOO_MANY_OPERATIONS = 0x8010_0000, "Bad_TooManyOperations";
    BAD_CERTIFICATE_INVALID = 0x8012_0000, "Bad_CertificateInvalid";
    BAD_SECURITY_CHECKS_FAILED = 0x8013_0000, "Bad_SecurityChecksFailed";
    BAD_CERTIFICATE_UNTRUSTED = 0x801A_0000, "Bad_CertificateUntrusted";
    BAD_USER_ACCESS_DENIED = 0x801F_0000, "Bad_UserAccessDenied";
    BAD_IDENTITY_TOKEN_INVALID = 0x8020_0000, "Bad_IdentityTokenInvalid";
    BAD_IDENTITY_TOKEN_REJECTED = 0x8021_0000, "Bad_IdentityTokenRejected";
    BAD_SECURE_CHANNEL_ID_INVALID = 0x8022_0000, "Bad_SecureChannelIdInvalid";
    BAD_NONCE_INVALID = 0x8024_0000, "Bad_NonceInvalid";
    BAD_SESSION_ID_INVALID = 0x8025_0000, "Bad_SessionIdInvalid";
    BAD_SESSION_CLOSED = 0x8026_0000, "Bad_SessionClosed";
    BAD_SESSION_NOT_ACTIVATED = 0x8027_0000, "Bad_SessionNotActivated";
    BAD_REQUEST_HEADER_INVALID = 0x802A_0000, "Bad_RequestHeaderInvalid";
    BAD_NODE_ID_INVALID = 0x8033_0000, "Bad_NodeIdInvalid";
    BAD_NODE_ID_UNKNOWN = 0x8034_0000, "Bad_NodeIdUnknown";
    BAD_ATTRIBUTE_ID_INVALID = 0x8035_0000, "Bad_AttributeIdInvalid";
    BAD_NOT_READABLE = 0x803A_0000, "Bad_NotReadable";
    BAD_NOT_WRITABLE = 0x803B_0000, "Bad_NotWritable";
    BAD_OUT_OF_RANGE = 0x803C_0000, "Bad_OutOfRange";
    BAD_CONTINUATION_POINT_INVALID = 0x804A_0000, "Bad_ContinuationPointInvalid";
    BAD_NO_CONTINUATION_POINTS = 0x804B_0000, "Bad_NoContinuationPoints";
    BAD_SECURITY_MODE_REJECTED = 0x8054_0000, "Bad_SecurityModeRejected";
    BAD_SECURITY_POLICY_REJECTED = 0x8055_0000, "Bad_SecurityPolicyRejected";
    BAD_TOO_MANY_SESSIONS = 0x8056_0000, "Bad_TooManySessions";
    BAD_NO_DATA = 0x809B_0000, "Bad_NoData";
    BAD_USER_SIGNATURE_INVALID = 0x8057_0000, "Bad_UserSignatureInvalid";
    BAD_WRITE_NOT_SUPPORTED = 0x8073_0000, "Bad_WriteNotSupported";
    BAD_TYPE_MISMATCH = 0x8074_0000, "Bad_TypeMismatch";
    BAD_TCP_SERVER_TOO_BUSY = 0x807D_0000, "Bad_TcpServerTooBusy";
    BAD_TCP_MESSAGE_TYPE_INVALID = 0x807E_0000, "Bad_TcpMessageTypeInvalid";
    BAD_TCP_SECURE_CHANNEL_UNKNOWN = 0x807F_0000, "Bad_TcpSecureChannelUnknown";
    BAD_TCP_MESSAGE_TOO_LARGE = 0x8080_0000, "Bad_TcpMessageTooLarge";
    BAD_TCP_INTERNAL_ERROR = 0x8082_0000, "Bad_TcpInternalError";
    BAD_TCP_ENDPOINT_URL_INVALID = 0x8083_0000, "Bad_TcpEndpointUrlInvalid";
    BAD_SECURE_CHANNEL_CLOSED = 0x8086_0000, "Bad_SecureChannelClosed";
    BAD_SECURE_CHANNEL_TOKEN_UNKNOWN = 0x8087_0000, "Bad_SecureChannelTokenUnknown";
    BAD_SEQUENCE_NUMBER_INVALID = 0x8088_0000, "Bad_SequenceNumberInvalid";
    BAD_END_OF_STREAM = 0x80B0_0000, "Bad_EndOfStream";
    BAD_REQUEST_TOO_LARGE = 0x80B8_0000, "Bad_RequestTooLarge";
    BAD_RESPONSE_TOO_LARGE = 0x80B9_0000, "Bad_ResponseTooLarge";
    BAD_PROTOCOL_VERSION_UNSUPPORTED = 0x80BE_0000, "Bad_ProtocolVersionUnsupported";
}

impl StatusCode {
    pub fn is_good(self) -> bool {
        self.0 & 0xC000_0000 == 0
    }

    pub fn is_bad(self) -> bool {
        self.0 & 0x8000_0000 != 0
    }
}

impl fmt::Display for StatusCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => write!(f, "{n} (0x{:08X})", self.0),
            None => write!(f, "0x{:08X}", self.0),
        }
    }
}
