//! The user guide, attached as doc-tested modules.
//!
//! Each chapter of the mdbook guide in `book/src/` is included here verbatim
//! with `#[doc = include_str!(...)]`, so every fenced Rust snippet in the
//! book runs under `cargo test` and can never drift from the library.

// Placeholder until the book chapters land; each chapter becomes one
// `#[doc = include_str!("../../../book/src/<chapter>.md")] pub mod <name> {}`
// item.
