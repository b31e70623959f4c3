//! Pieces shared by every pluggable backend: the image handle they receive,
//! their concurrency declaration, and the failure type they report.

use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use thiserror::Error;

/// Whether a backend tolerates concurrent calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    /// Safe to call from many workers at once.
    Concurrent,
    /// Calls must be serialized by the caller.
    Serial,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("backend `{backend}` failed on `{subject}`: {message}")]
pub struct BackendError {
    pub backend: String,
    /// Image id or text the backend was working on.
    pub subject: String,
    pub message: String,
}

impl BackendError {
    pub fn new(
        backend: impl Into<String>,
        subject: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            backend: backend.into(),
            subject: subject.into(),
            message: message.into(),
        }
    }
}

/// Opaque handle to one screenshot on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRef {
    image_id: String,
    path: PathBuf,
    width: u32,
    height: u32,
}

impl ImageRef {
    /// Reads only the image header to learn its dimensions.
    pub fn open(
        image_id: impl Into<String>,
        path: impl Into<PathBuf>,
    ) -> Result<Self, BackendError> {
        let image_id = image_id.into();
        let path = path.into();
        let (width, height) = image::image_dimensions(&path).map_err(|e| {
            BackendError::new("image", &image_id, format!("{}: {e}", path.display()))
        })?;
        if width == 0 || height == 0 {
            return Err(BackendError::new("image", &image_id, "image has zero size"));
        }
        Ok(Self {
            image_id,
            path,
            width,
            height,
        })
    }

    /// Builds a handle without touching the filesystem.
    pub fn with_dimensions(
        image_id: impl Into<String>,
        path: impl Into<PathBuf>,
        width: u32,
        height: u32,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            path: path.into(),
            width,
            height,
        }
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Path of a sidecar file `<stem><suffix>` next to the image.
    pub fn sidecar(&self, suffix: &str) -> PathBuf {
        let stem = self
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.path.with_file_name(format!("{stem}{suffix}"))
    }
}

/// Serializes calls into a backend that declared itself [`Concurrency::Serial`].
#[derive(Debug, Default)]
pub struct CallGate {
    lock: Option<Mutex<()>>,
}

impl CallGate {
    pub fn new(mode: Concurrency) -> Self {
        Self {
            lock: match mode {
                Concurrency::Concurrent => None,
                Concurrency::Serial => Some(Mutex::new(())),
            },
        }
    }

    pub fn enter(&self) -> Option<MutexGuard<'_, ()>> {
        self.lock
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|poisoned| poisoned.into_inner()))
    }
}
