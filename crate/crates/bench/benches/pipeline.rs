//! Placeholder bench harness; filled in once the pipeline lands.

fn main() {}
