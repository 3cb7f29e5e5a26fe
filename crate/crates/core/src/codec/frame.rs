use std::fmt;

use super::{BinaryCodec, CodecError, CodecResult, Reader, StatusCode, Writer};

pub const FRAME_HEADER_LEN: usize = 8;
pub const DEFAULT_MAX_FRAME_SIZE: usize = 65_535;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageType {
    Hello,
    Acknowledge,
    Error,
    Open,
    Message,
    Close,
}

impl MessageType {
    pub const ALL: [MessageType; 6] = [
        MessageType::Hello,
        MessageType::Acknowledge,
        MessageType::Error,
        MessageType::Open,
        MessageType::Message,
        MessageType::Close,
    ];

    pub fn tag(self) -> [u8; 3] {
        *match self {
            MessageType::Hello => b"HEL",
            MessageType::Acknowledge => b"ACK",
            MessageType::Error => b"ERR",
            MessageType::Open => b"OPN",
            MessageType::Message => b"MSG",
            MessageType::Close => b"CLO",
        }
    }

    pub fn from_tag(tag: [u8; 3]) -> CodecResult<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag() == tag)
            .ok_or(CodecError::UnknownMessageType(tag))
    }

    /// Secure-conversation messages carry a channel id and sequence header.
    pub fn is_secure(self) -> bool {
        matches!(
            self,
            MessageType::Open | MessageType::Message | MessageType::Close
        )
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(&self.tag()).expect("ascii tag"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChunkFlag {
    Final,
    Intermediate,
    Abort,
}

impl ChunkFlag {
    pub fn octet(self) -> u8 {
        match self {
            ChunkFlag::Final => b'F',
            ChunkFlag::Intermediate => b'C',
            ChunkFlag::Abort => b'A',
        }
    }

    pub fn from_octet(b: u8) -> CodecResult<Self> {
        match b {
            b'F' => Ok(ChunkFlag::Final),
            b'C' => Ok(ChunkFlag::Intermediate),
            b'A' => Ok(ChunkFlag::Abort),
            other => Err(CodecError::malformed(format!(
                "illegal chunk flag 0x{other:02x}"
            ))),
        }
    }
}

/// One OPC UA TCP frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportFrame {
    pub message_type: MessageType,
    pub chunk: ChunkFlag,
    pub body: Vec<u8>,
}

impl TransportFrame {
    pub fn new(message_type: MessageType, body: Vec<u8>) -> Self {
        TransportFrame {
            message_type,
            chunk: ChunkFlag::Final,
            body,
        }
    }

    pub fn total_size(&self) -> usize {
        FRAME_HEADER_LEN + self.body.len()
    }
}

/// Parsed 8-octet frame header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub message_type: MessageType,
    pub chunk: ChunkFlag,
    pub size: usize,
}

impl FrameHeader {
    pub fn parse(buf: &[u8; FRAME_HEADER_LEN], max_frame_size: usize) -> CodecResult<Self> {
        let message_type = MessageType::from_tag([buf[0], buf[1], buf[2]])?;
        let chunk = ChunkFlag::from_octet(buf[3])?;
        let size = u32::from_le_bytes([buf[4], buf[5], buf[6], buf[7]]) as usize;
        if size < FRAME_HEADER_LEN {
            return Err(CodecError::SizeMismatch {
                declared: size,
                actual: FRAME_HEADER_LEN,
            });
        }
        if size > max_frame_size {
            return Err(CodecError::FrameTooLarge {
                size,
                max: max_frame_size,
            });
        }
        Ok(FrameHeader {
            message_type,
            chunk,
            size,
        })
    }
}

pub fn encode_frame(f: &TransportFrame) -> CodecResult<Vec<u8>> {
    encode_frame_with_max(f, DEFAULT_MAX_FRAME_SIZE)
}

pub fn encode_frame_with_max(f: &TransportFrame, max_frame_size: usize) -> CodecResult<Vec<u8>> {
    let size = f.total_size();
    if size > max_frame_size || size > u32::MAX as usize {
        return Err(CodecError::FrameTooLarge {
            size,
            max: max_frame_size,
        });
    }
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(&f.message_type.tag());
    out.push(f.chunk.octet());
    out.extend_from_slice(&(size as u32).to_le_bytes());
    out.extend_from_slice(&f.body);
    Ok(out)
}

/// Decodes exactly one frame occupying the whole buffer.
pub fn decode_frame(buf: &[u8]) -> CodecResult<TransportFrame> {
    decode_frame_with_max(buf, DEFAULT_MAX_FRAME_SIZE)
}

pub fn decode_frame_with_max(buf: &[u8], max_frame_size: usize) -> CodecResult<TransportFrame> {
    let head: &[u8; FRAME_HEADER_LEN] = buf
        .get(..FRAME_HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or(CodecError::Truncated {
            offset: 0,
            needed: FRAME_HEADER_LEN,
            available: buf.len(),
        })?;
    let header = FrameHeader::parse(head, max_frame_size)?;
    if header.size != buf.len() {
        return Err(CodecError::SizeMismatch {
            declared: header.size,
            actual: buf.len(),
        });
    }
    Ok(TransportFrame {
        message_type: header.message_type,
        chunk: header.chunk,
        body: buf[FRAME_HEADER_LEN..].to_vec(),
    })
}

/// Buffer sizes exchanged in Hello/Acknowledge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct BufferLimits {
    pub receive_buffer: u32,
    pub send_buffer: u32,
    pub max_message_size: u32,
    pub max_chunk_count: u32,
}

impl Default for BufferLimits {
    fn default() -> Self {
        BufferLimits {
            receive_buffer: DEFAULT_MAX_FRAME_SIZE as u32,
            send_buffer: DEFAULT_MAX_FRAME_SIZE as u32,
            max_message_size: 16 * 1024 * 1024,
            max_chunk_count: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloMessage {
    pub protocol_version: u32,
    pub limits: BufferLimits,
    pub endpoint_url: String,
}

impl BinaryCodec for HelloMessage {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.u32(self.protocol_version);
        w.u32(self.limits.receive_buffer);
        w.u32(self.limits.send_buffer);
        w.u32(self.limits.max_message_size);
        w.u32(self.limits.max_chunk_count);
        w.string(Some(&self.endpoint_url))
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        let protocol_version = r.u32()?;
        let limits = BufferLimits {
            receive_buffer: r.u32()?,
            send_buffer: r.u32()?,
            max_message_size: r.u32()?,
            max_chunk_count: r.u32()?,
        };
        Ok(HelloMessage {
            protocol_version,
            limits,
            endpoint_url: r.string_or_empty()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcknowledgeMessage {
    pub protocol_version: u32,
    pub limits: BufferLimits,
}

impl BinaryCodec for AcknowledgeMessage {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.u32(self.protocol_version);
        w.u32(self.limits.receive_buffer);
        w.u32(self.limits.send_buffer);
        w.u32(self.limits.max_message_size);
        w.u32(self.limits.max_chunk_count);
        Ok(())
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(AcknowledgeMessage {
            protocol_version: r.u32()?,
            limits: BufferLimits {
                receive_buffer: r.u32()?,
                send_buffer: r.u32()?,
                max_message_size: r.u32()?,
                max_chunk_count: r.u32()?,
            },
        })
    }
}

/// ERR frame body, also used as the payload of abort chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMessage {
    pub status: StatusCode,
    pub reason: String,
}

impl BinaryCodec for ErrorMessage {
    fn encode(&self, w: &mut Writer) -> CodecResult<()> {
        w.u32(self.status.0);
        w.string(Some(&self.reason))
    }

    fn decode(r: &mut Reader<'_>) -> CodecResult<Self> {
        Ok(ErrorMessage {
            status: StatusCode(r.u32()?),
            reason: r.string_or_empty()?,
        })
    }
}

/// Decodes a frame body that must be consumed completely.
pub fn decode_exact<T: BinaryCodec>(body: &[u8]) -> CodecResult<T> {
    let mut r = Reader::new(body);
    let v = T::decode(&mut r)?;
    if r.remaining() != 0 {
        return Err(CodecError::malformed(format!(
            "{} trailing octets",
            r.remaining()
        )));
    }
    Ok(v)
}

pub fn hello_frame(hello: &HelloMessage) -> CodecResult<TransportFrame> {
    Ok(TransportFrame::new(MessageType::Hello, hello.to_bytes()?))
}

pub fn error_frame(status: StatusCode, reason: &str) -> CodecResult<TransportFrame> {
    let msg = ErrorMessage {
        status,
        reason: reason.to_owned(),
    };
    Ok(TransportFrame::new(MessageType::Error, msg.to_bytes()?))
}

pub const SECURITY_POLICY_NONE_URI: &str = "http://opcfoundation.org/UA/SecurityPolicy#None";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecurityHeader {
    Asymmetric {
        policy_uri: String,
        sender_certificate: Vec<u8>,
        receiver_thumbprint: Vec<u8>,
    },
    Symmetric {
        token_id: u32,
    },
}

impl SecurityHeader {
    pub fn none_policy() -> Self {
        SecurityHeader::Asymmetric {
            policy_uri: SECURITY_POLICY_NONE_URI.to_owned(),
            sender_certificate: Vec::new(),
            receiver_thumbprint: Vec::new(),
        }
    }
}

/// Body of an OPN/MSG/CLO frame: channel id, security header, sequence
/// header, then a slice of the service payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureChunk {
    pub channel_id: u32,
    pub security: SecurityHeader,
    pub sequence_number: u32,
    pub request_id: u32,
    pub payload: Vec<u8>,
}

impl SecureChunk {
    /// Octets between the frame header and the payload.
    pub fn overhead(&self) -> CodecResult<usize> {
        let mut w = Writer::new();
        self.encode_headers(&mut w)?;
        Ok(w.len())
    }

    fn encode_headers(&self, w: &mut Writer) -> CodecResult<()> {
        w.u32(self.channel_id);
        match &self.security {
            SecurityHeader::Asymmetric {
                policy_uri,
                sender_certificate,
                receiver_thumbprint,
            } => {
                w.string(Some(policy_uri))?;
                w.bytes_or_null(sender_certificate)?;
                w.bytes_or_null(receiver_thumbprint)?;
            }
            SecurityHeader::Symmetric { token_id } => w.u32(*token_id),
        }
        w.u32(self.sequence_number);
        w.u32(self.request_id);
        Ok(())
    }

    pub fn encode_body(&self) -> CodecResult<Vec<u8>> {
        let mut w = Writer::new();
        self.encode_headers(&mut w)?;
        w.raw(&self.payload);
        Ok(w.into_inner())
    }

    pub fn decode_body(message_type: MessageType, body: &[u8]) -> CodecResult<Self> {
        let mut r = Reader::new(body);
        let channel_id = r.u32()?;
        let security = match message_type {
            MessageType::Open => SecurityHeader::Asymmetric {
                policy_uri: r.string_or_empty()?,
                sender_certificate: r.bytes_or_empty()?,
                receiver_thumbprint: r.bytes_or_empty()?,
            },
            MessageType::Message | MessageType::Close => {
                SecurityHeader::Symmetric { token_id: r.u32()? }
            }
            other => {
                return Err(CodecError::malformed(format!(
                    "{other} is not a secure conversation message"
                )))
            }
        };
        let sequence_number = r.u32()?;
        let request_id = r.u32()?;
        let payload = r.take(r.remaining())?.to_vec();
        Ok(SecureChunk {
            channel_id,
            security,
            sequence_number,
            request_id,
            payload,
        })
    }
}
