//! Writes the generated three-class leaf corpus as PNG folders.
//!
//! ```bash
//! cargo run --release --example write_corpus -- /tmp/leaves 10
//! ```

use std::path::PathBuf;

use gccvit::synthetic::{write_dir, SyntheticSpec};

fn main() -> gccvit::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().unwrap_or_else(|| "leaves".into()));
    let per_class = args.next().and_then(|n| n.parse().ok()).unwrap_or(10);
    let spec = SyntheticSpec {
        per_class,
        ..SyntheticSpec::default()
    };
    write_dir(&root, &spec)?;
    println!("wrote {} images per class under {}", per_class, root.display());
    Ok(())
}
