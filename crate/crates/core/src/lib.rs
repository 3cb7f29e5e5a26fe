//! Network security assessment of OPC UA deployments.
//!
//! The pipeline runs discovery, authentication testing, configuration and
//! permission auditing, and a session-exhaustion check against servers that
//! speak the binary protocol. A scenario-driven mock server implementing the
//! same protocol subset lives in [`mock`].

pub mod assessor;
mod b64;
pub mod codec;
pub mod discovery;
pub mod identity;
pub mod mock;
pub mod pipeline;
pub mod policy;
pub mod report;
pub mod services;
pub mod transport;
