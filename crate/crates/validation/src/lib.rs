//! Acceptance suite for `pinning`, kept in its own package so that its
//! report runs after every other test binary in the workspace.
//!
//! Run it alone with `cargo test -p pinning-validation --test acceptance`.
