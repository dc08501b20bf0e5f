//! Regenerates the shipped fixture model files.
//!
//! cargo run -p embednn --example write_fixtures [out_dir]

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;
    for (name, bytes) in embednn::fixtures::fixture_files() {
        let path = dir.join(&name);
        std::fs::write(&path, bytes)?;
        println!("{}", path.display());
    }
    Ok(())
}
