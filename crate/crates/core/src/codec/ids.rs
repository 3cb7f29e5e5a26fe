//! Numeric identifiers from the standard namespace (ns=0).

// Binary encoding ids of service messages.
pub const SERVICE_FAULT: u32 = 397;
pub const FIND_SERVERS_REQUEST: u32 = 422;
pub const FIND_SERVERS_RESPONSE: u32 = 425;
pub const GET_ENDPOINTS_REQUEST: u32 = 428;
pub const GET_ENDPOINTS_RESPONSE: u32 = 431;
pub const OPEN_SECURE_CHANNEL_REQUEST: u32 = 446;
pub const OPEN_SECURE_CHANNEL_RESPONSE: u32 = 449;
pub const CLOSE_SECURE_CHANNEL_REQUEST: u32 = 452;
pub const CLOSE_SECURE_CHANNEL_RESPONSE: u32 = 455;
pub const CREATE_SESSION_REQUEST: u32 = 461;
pub const CREATE_SESSION_RESPONSE: u32 = 464;
pub const ACTIVATE_SESSION_REQUEST: u32 = 467;
pub const ACTIVATE_SESSION_RESPONSE: u32 = 470;
pub const CLOSE_SESSION_REQUEST: u32 = 473;
pub const CLOSE_SESSION_RESPONSE: u32 = 476;
pub const BROWSE_REQUEST: u32 = 527;
pub const BROWSE_RESPONSE: u32 = 530;
pub const BROWSE_NEXT_REQUEST: u32 = 533;
pub const BROWSE_NEXT_RESPONSE: u32 = 536;
pub const READ_REQUEST: u32 = 631;
pub const READ_RESPONSE: u32 = 634;
pub const WRITE_REQUEST: u32 = 673;
pub const WRITE_RESPONSE: u32 = 676;

// Identity token encodings.
pub const ANONYMOUS_IDENTITY_TOKEN: u32 = 321;
pub const USER_NAME_IDENTITY_TOKEN: u32 = 324;
pub const X509_IDENTITY_TOKEN: u32 = 327;
pub const ISSUED_IDENTITY_TOKEN: u32 = 940;

// Well-known nodes.
pub const OBJECTS_FOLDER: u32 = 85;
pub const SERVER: u32 = 2253;
pub const SERVER_SERVER_ARRAY: u32 = 2254;
pub const SERVER_NAMESPACE_ARRAY: u32 = 2255;
pub const SERVER_STATUS: u32 = 2256;
pub const BUILD_INFO: u32 = 2260;
pub const BUILD_INFO_PRODUCT_NAME: u32 = 2261;
pub const BUILD_INFO_PRODUCT_URI: u32 = 2262;
pub const BUILD_INFO_MANUFACTURER_NAME: u32 = 2263;
pub const BUILD_INFO_SOFTWARE_VERSION: u32 = 2264;
pub const BUILD_INFO_BUILD_NUMBER: u32 = 2265;
pub const BUILD_INFO_BUILD_DATE: u32 = 2266;

// Reference and type definitions.
pub const HIERARCHICAL_REFERENCES: u32 = 33;
pub const ORGANIZES: u32 = 35;
pub const HAS_PROPERTY: u32 = 46;
pub const HAS_COMPONENT: u32 = 47;
pub const BASE_DATA_VARIABLE_TYPE: u32 = 63;
pub const FOLDER_TYPE: u32 = 61;
pub const PROPERTY_TYPE: u32 = 68;

/// Attribute ids the toolkit reads or writes.
pub mod attribute {
    pub const NODE_CLASS: u32 = 2;
    pub const DISPLAY_NAME: u32 = 4;
    pub const VALUE: u32 = 13;
    pub const ACCESS_LEVEL: u32 = 17;
    pub const USER_ACCESS_LEVEL: u32 = 18;

    pub fn is_supported(id: u32) -> bool {
        matches!(
            id,
            NODE_CLASS | DISPLAY_NAME | VALUE | ACCESS_LEVEL | USER_ACCESS_LEVEL
        )
    }
}

/// AccessLevel bits.
pub mod access {
    pub const CURRENT_READ: u8 = 0x01;
    pub const CURRENT_WRITE: u8 = 0x02;
}

pub const STANDARD_NAMESPACE_URI: &str = "http://opcfoundation.org/UA/";
pub const TRANSPORT_PROFILE_BINARY: &str =
    "http://opcfoundation.org/UA-Profile/Transport/uatcp-uasc-uabinary";
