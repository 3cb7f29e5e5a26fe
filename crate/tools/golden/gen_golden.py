#!/usr/bin/env python3
"""Regenerate the golden wire captures with the asyncua reference stack.

Usage: python3 tools/golden/gen_golden.py [output_dir]

Every fixture below must stay field-for-field identical to the Rust
fixtures in crates/core/src/codec/golden.rs.
"""

import datetime
import sys
import uuid
from pathlib import Path

import asyncua
from asyncua import ua
from asyncua.ua.ua_binary import header_to_binary, struct_to_binary, uatcp_to_binary

T = datetime.datetime(2024, 1, 1)
EPOCH = datetime.datetime(1601, 1, 1)
NONE_URI = "http://opcfoundation.org/UA/SecurityPolicy#None"
B256SHA256_URI = "http://opcfoundation.org/UA/SecurityPolicy#Basic256Sha256"
BINARY_PROFILE = "http://opcfoundation.org/UA-Profile/Transport/uatcp-uasc-uabinary"
SESSION_GUID = uuid.UUID("72962b91-fa75-4ae6-8d28-b404dc7daf63")
AUTH = ua.NodeId(b"\xde\xad\xbe\xef", 0, ua.NodeIdType.ByteString)
CERT = b"\x30\x82\x01\x00"
CP = b"\x01\x00\x00\x00"


def req_header(handle, auth=None, timeout=5000):
    return ua.RequestHeader(
        AuthenticationToken=auth if auth is not None else ua.NodeId(),
        Timestamp=T,
        RequestHandle=handle,
        TimeoutHint=timeout,
    )


def resp_header(handle, status=0):
    return ua.ResponseHeader(Timestamp=T, RequestHandle=handle, ServiceResult=ua.StatusCode(status))


def secure_frame(msg_type, channel_id, security, seq, req_id, body):
    rest = struct_to_binary(security) + struct_to_binary(ua.SequenceHeader(seq, req_id)) + body
    hdr = ua.Header(msg_type, ua.ChunkType.Single, channel_id)
    hdr.body_size = len(rest)
    return header_to_binary(hdr) + rest


def asym_none():
    return ua.AsymmetricAlgorithmHeader(SecurityPolicyURI=NONE_URI)


APP = ua.ApplicationDescription(
    ApplicationUri="urn:mock:server",
    ProductUri="urn:mock:product",
    ApplicationName=ua.LocalizedText(Text="Mock Server", Locale="en"),
    ApplicationType=ua.ApplicationType.Server,
    DiscoveryUrls=["opc.tcp://h:4840/"],
)

APP_OTHER = ua.ApplicationDescription(
    ApplicationUri="urn:other:server",
    ProductUri="urn:other:product",
    ApplicationName=ua.LocalizedText(Text="Other"),
    ApplicationType=ua.ApplicationType.DiscoveryServer,
    DiscoveryUrls=["opc.tcp://other:4841/", "opc.tcp://other:4842/"],
)

EP_NONE = ua.EndpointDescription(
    EndpointUrl="opc.tcp://h:4840/",
    Server=APP,
    ServerCertificate=CERT,
    SecurityMode=ua.MessageSecurityMode.None_,
    SecurityPolicyUri=NONE_URI,
    UserIdentityTokens=[
        ua.UserTokenPolicy(PolicyId="anonymous", TokenType=ua.UserTokenType.Anonymous),
        ua.UserTokenPolicy(
            PolicyId="username",
            TokenType=ua.UserTokenType.UserName,
            SecurityPolicyUri=B256SHA256_URI,
        ),
    ],
    TransportProfileUri=BINARY_PROFILE,
    SecurityLevel=0,
)

EP_SECURE = ua.EndpointDescription(
    EndpointUrl="opc.tcp://h:4840/",
    Server=APP,
    ServerCertificate=CERT,
    SecurityMode=ua.MessageSecurityMode.SignAndEncrypt,
    SecurityPolicyUri=B256SHA256_URI,
    UserIdentityTokens=[
        ua.UserTokenPolicy(PolicyId="certificate", TokenType=ua.UserTokenType.Certificate),
        ua.UserTokenPolicy(
            PolicyId="issued",
            TokenType=ua.UserTokenType.IssuedToken,
            IssuedTokenType="http://opcfoundation.org/UA/UserToken#JWT",
            IssuerEndpointUrl="https://idp.example/",
        ),
    ],
    TransportProfileUri=BINARY_PROFILE,
    SecurityLevel=3,
)


def ref(ref_type, node, name, node_class, type_def):
    return ua.ReferenceDescription(
        ReferenceTypeId=ua.NodeId(ref_type, 0),
        IsForward=True,
        NodeId=ua.ExpandedNodeId(node.Identifier, node.NamespaceIndex, node.NodeIdType),
        BrowseName=ua.QualifiedName(name, node.NamespaceIndex),
        DisplayName=ua.LocalizedText(Text=name),
        NodeClass=node_class,
        TypeDefinition=ua.ExpandedNodeId(type_def, 0),
    )


def status_only(status):
    # DataValue.__post_init__ wraps a missing value in a null Variant, which
    # would set the value bit; clear it so only the status is encoded.
    dv = ua.DataValue(StatusCode=status)
    object.__setattr__(dv, "Value", None)
    return dv


def fixtures():
    out = {}
    out["hello"] = uatcp_to_binary(
        ua.MessageType.Hello,
        ua.Hello(0, 65535, 65535, 16777216, 0, "opc.tcp://h:4840"),
    )
    out["acknowledge"] = uatcp_to_binary(
        ua.MessageType.Acknowledge, ua.Acknowledge(0, 8192, 8192, 1048576, 64)
    )
    out["error"] = uatcp_to_binary(
        ua.MessageType.Error, ua.ErrorMessage(ua.StatusCode(0x80830000), "endpoint url rejected")
    )

    osc = ua.OpenSecureChannelRequest(
        RequestHeader=req_header(1, timeout=3000),
        Parameters=ua.OpenSecureChannelParameters(
            ClientProtocolVersion=0,
            RequestType=ua.SecurityTokenRequestType.Issue,
            SecurityMode=ua.MessageSecurityMode.None_,
            ClientNonce=None,
            RequestedLifetime=300000,
        ),
    )
    out["open_secure_channel_request"] = secure_frame(
        ua.MessageType.SecureOpen, 0, asym_none(), 1, 1, struct_to_binary(osc)
    )
    oscr = ua.OpenSecureChannelResponse(
        ResponseHeader=resp_header(1),
        Parameters=ua.OpenSecureChannelResult(
            ServerProtocolVersion=0,
            SecurityToken=ua.ChannelSecurityToken(7, 1, T, 300000),
            ServerNonce=None,
        ),
    )
    out["open_secure_channel_response"] = secure_frame(
        ua.MessageType.SecureOpen, 7, asym_none(), 1, 1, struct_to_binary(oscr)
    )
    csc = ua.CloseSecureChannelRequest(RequestHeader=req_header(12, timeout=3000))
    out["close_secure_channel_request"] = secure_frame(
        ua.MessageType.SecureClose, 7, ua.SymmetricAlgorithmHeader(TokenId=1), 12, 12,
        struct_to_binary(csc),
    )
    out["close_secure_channel_response"] = struct_to_binary(
        ua.CloseSecureChannelResponse(ResponseHeader=resp_header(12))
    )

    out["get_endpoints_request"] = struct_to_binary(
        ua.GetEndpointsRequest(
            RequestHeader=req_header(2),
            Parameters=ua.GetEndpointsParameters(EndpointUrl="opc.tcp://h:4840"),
        )
    )
    out["get_endpoints_response"] = struct_to_binary(
        ua.GetEndpointsResponse(ResponseHeader=resp_header(2), Endpoints=[EP_NONE, EP_SECURE])
    )
    out["find_servers_request"] = struct_to_binary(
        ua.FindServersRequest(
            RequestHeader=req_header(3),
            Parameters=ua.FindServersParameters(EndpointUrl="opc.tcp://h:4840"),
        )
    )
    out["find_servers_response"] = struct_to_binary(
        ua.FindServersResponse(ResponseHeader=resp_header(3), Servers=[APP, APP_OTHER])
    )

    out["create_session_request"] = struct_to_binary(
        ua.CreateSessionRequest(
            RequestHeader=req_header(4),
            Parameters=ua.CreateSessionParameters(
                ClientDescription=ua.ApplicationDescription(
                    ApplicationUri="urn:uascan:client",
                    ProductUri="urn:uascan",
                    ApplicationName=ua.LocalizedText(Text="uascan"),
                    ApplicationType=ua.ApplicationType.Client,
                ),
                ServerUri=None,
                EndpointUrl="opc.tcp://h:4840/",
                SessionName="uascan-session",
                ClientNonce=bytes(range(32)),
                ClientCertificate=None,
                RequestedSessionTimeout=60000.0,
                MaxResponseMessageSize=0,
            ),
        )
    )
    out["create_session_response"] = struct_to_binary(
        ua.CreateSessionResponse(
            ResponseHeader=resp_header(4),
            Parameters=ua.CreateSessionResult(
                SessionId=ua.NodeId(SESSION_GUID, 1, ua.NodeIdType.Guid),
                AuthenticationToken=AUTH,
                RevisedSessionTimeout=60000.0,
                ServerNonce=bytes(range(0xA0, 0xC0)),
                ServerCertificate=CERT,
                ServerEndpoints=[EP_NONE],
                ServerSoftwareCertificates=[],
                ServerSignature=ua.SignatureData(),
                MaxRequestMessageSize=0,
            ),
        )
    )

    def activate(handle, token):
        return struct_to_binary(
            ua.ActivateSessionRequest(
                RequestHeader=req_header(handle, AUTH),
                Parameters=ua.ActivateSessionParameters(
                    ClientSignature=ua.SignatureData(),
                    ClientSoftwareCertificates=[],
                    LocaleIds=["en"],
                    UserIdentityToken=token,
                    UserTokenSignature=ua.SignatureData(),
                ),
            )
        )

    out["activate_session_request"] = activate(
        5, ua.UserNameIdentityToken(PolicyId="username", UserName="admin", Password=b"admin")
    )
    out["activate_session_request_anonymous"] = activate(
        5, ua.AnonymousIdentityToken(PolicyId="anonymous")
    )
    out["activate_session_response"] = struct_to_binary(
        ua.ActivateSessionResponse(
            ResponseHeader=resp_header(5),
            Parameters=ua.ActivateSessionResult(ServerNonce=bytes(range(0xB0, 0xD0))),
        )
    )
    out["close_session_request"] = struct_to_binary(
        ua.CloseSessionRequest(RequestHeader=req_header(6, AUTH), DeleteSubscriptions=True)
    )
    out["close_session_response"] = struct_to_binary(
        ua.CloseSessionResponse(ResponseHeader=resp_header(6))
    )

    out["browse_request"] = struct_to_binary(
        ua.BrowseRequest(
            RequestHeader=req_header(7, AUTH),
            Parameters=ua.BrowseParameters(
                View=ua.ViewDescription(ViewId=ua.NodeId(), Timestamp=EPOCH, ViewVersion=0),
                RequestedMaxReferencesPerNode=1000,
                NodesToBrowse=[
                    ua.BrowseDescription(
                        NodeId=ua.NodeId(85, 0),
                        BrowseDirection=ua.BrowseDirection.Forward,
                        ReferenceTypeId=ua.NodeId(33, 0),
                        IncludeSubtypes=True,
                        NodeClassMask=0,
                        ResultMask=63,
                    )
                ],
            ),
        )
    )
    temperature = ua.NodeId(1001, 2)
    valve = ua.NodeId("Line1.Valve", 2)
    pressure = ua.NodeId(1002, 2)
    out["browse_response"] = struct_to_binary(
        ua.BrowseResponse(
            ResponseHeader=resp_header(7),
            Results=[
                ua.BrowseResult(
                    StatusCode=ua.StatusCode(0),
                    ContinuationPoint=CP,
                    References=[
                        ref(35, temperature, "Temperature", ua.NodeClass.Variable, 63),
                        ref(47, valve, "Valve", ua.NodeClass.Object, 61),
                    ],
                ),
                ua.BrowseResult(StatusCode=ua.StatusCode(0x80340000), ContinuationPoint=None),
            ],
        )
    )
    out["browse_next_request"] = struct_to_binary(
        ua.BrowseNextRequest(
            RequestHeader=req_header(8, AUTH),
            Parameters=ua.BrowseNextParameters(
                ReleaseContinuationPoints=False, ContinuationPoints=[CP]
            ),
        )
    )
    out["browse_next_response"] = struct_to_binary(
        ua.BrowseNextResponse(
            ResponseHeader=resp_header(8),
            Parameters=ua.BrowseNextResult(
                Results=[
                    ua.BrowseResult(
                        StatusCode=ua.StatusCode(0),
                        ContinuationPoint=None,
                        References=[ref(35, pressure, "Pressure", ua.NodeClass.Variable, 63)],
                    )
                ]
            ),
        )
    )

    out["read_request"] = struct_to_binary(
        ua.ReadRequest(
            RequestHeader=req_header(9, AUTH),
            Parameters=ua.ReadParameters(
                MaxAge=0.0,
                TimestampsToReturn=ua.TimestampsToReturn.Neither,
                NodesToRead=[
                    ua.ReadValueId(NodeId=ua.NodeId(2255, 0), AttributeId=13),
                    ua.ReadValueId(NodeId=temperature, AttributeId=17),
                    ua.ReadValueId(NodeId=valve, AttributeId=4),
                ],
            ),
        )
    )
    V = ua.VariantType
    good = ua.StatusCode(0)
    out["read_response"] = struct_to_binary(
        ua.ReadResponse(
            ResponseHeader=resp_header(9),
            Results=[
                ua.DataValue(
                    ua.Variant(["http://opcfoundation.org/UA/", "urn:mock:ns"], V.String),
                    StatusCode=good,
                    ServerTimestamp=T,
                ),
                ua.DataValue(ua.Variant(3, V.Byte), StatusCode=good),
                status_only(ua.StatusCode(0x80340000)),
                ua.DataValue(
                    ua.Variant(-1.5, V.Double), StatusCode=good, SourceTimestamp=T, ServerTimestamp=T
                ),
                ua.DataValue(ua.Variant(ua.LocalizedText(Text="Valve", Locale="en"), V.LocalizedText), StatusCode=None),
                ua.DataValue(ua.Variant(ua.NodeId(85, 0), V.NodeId), StatusCode=None),
                ua.DataValue(ua.Variant(True, V.Boolean), StatusCode=None),
                ua.DataValue(ua.Variant(b"\x01\x02", V.ByteString), StatusCode=None),
                ua.DataValue(ua.Variant([1, -2, 3], V.Int32), StatusCode=None),
                ua.DataValue(ua.Variant(2**40, V.UInt64), StatusCode=None),
                ua.DataValue(ua.Variant(SESSION_GUID, V.Guid), StatusCode=None),
                ua.DataValue(ua.Variant(ua.QualifiedName("Valve", 2), V.QualifiedName), StatusCode=None),
                ua.DataValue(ua.Variant(0.25, V.Float), StatusCode=None),
                ua.DataValue(ua.Variant(T, V.DateTime), StatusCode=None),
                ua.DataValue(ua.Variant(-7, V.Int16), StatusCode=None),
                ua.DataValue(ua.Variant(None, V.String), StatusCode=None),
            ],
        )
    )
    out["write_request"] = struct_to_binary(
        ua.WriteRequest(
            RequestHeader=req_header(10, AUTH),
            Parameters=ua.WriteParameters(
                NodesToWrite=[
                    ua.WriteValue(
                        NodeId=temperature,
                        AttributeId=13,
                        Value=ua.DataValue(ua.Variant(21.5, V.Double), StatusCode=None),
                    )
                ]
            ),
        )
    )
    out["write_response"] = struct_to_binary(
        ua.WriteResponse(
            ResponseHeader=resp_header(10),
            Results=[good, ua.StatusCode(0x803B0000), ua.StatusCode(0x801F0000)],
        )
    )
    out["service_fault"] = struct_to_binary(
        ua.ServiceFault(ResponseHeader=resp_header(11, 0x80560000))
    )
    return out


def main():
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[2] / "crates/core/tests/golden"
    target.mkdir(parents=True, exist_ok=True)
    for name, data in fixtures().items():
        lines = [f"# {name}", f"# generated by tools/golden/gen_golden.py with asyncua {asyncua.__version__}"]
        lines += [data[i : i + 16].hex() for i in range(0, len(data), 16)]
        (target / f"{name}.hex").write_text("\n".join(lines) + "\n")
        print(f"{name}: {len(data)} octets")


if __name__ == "__main__":
    main()
