//! A local emulated cloud for cloud-security capture-the-flag levels.
//!
//! [`Emulator`] holds the whole cloud: IAM, storage, compute and metadata,
//! functions, logging, source repositories and a container registry.
//! [`deploy`] creates and tears down level infrastructure, [`levels`] holds
//! the shipped levels and flag logic, [`hints`] the hint decks, and
//! [`api::Platform`] exposes everything as a REST surface.

pub mod api;
pub mod archive;
pub mod clock;
pub mod deploy;
pub mod emulator;
pub mod handler;
pub mod hints;
pub mod iam;
pub mod levels;
pub mod progress;
pub mod services;
pub mod state;

pub use api::{route, ApiError, ApiRequest, ApiResponse, Platform};
pub use emulator::{Emulator, MetadataMode, Settings};
pub use levels::{generate_flag, LevelModule, LevelRegistry, StartInfo};
pub use services::ServiceError;
