// Chapters of the guide under `book/src`, compiled so their Rust snippets
// run as doctests with `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/surprise.md")]
mod surprise {}
#[doc = include_str!("../../../book/src/uncertainty.md")]
mod uncertainty {}
#[doc = include_str!("../../../book/src/continuations.md")]
mod continuations {}
#[doc = include_str!("../../../book/src/evaluation.md")]
mod evaluation {}
#[doc = include_str!("../../../book/src/turning_points.md")]
mod turning_points {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
