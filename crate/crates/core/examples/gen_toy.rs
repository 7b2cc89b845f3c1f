//! Regenerate the bundled toy dataset: `cargo run -p pqe-core --example gen_toy -- data/toy`.

use std::path::PathBuf;

use pqe_core::synth::{SynthConfig, SyntheticDataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("data/toy"), PathBuf::from);
    let ds = SyntheticDataset::generate(&SynthConfig::default());
    ds.write_to(&dir)?;
    println!(
        "wrote {} documents, {} users, {} topics to {}",
        ds.documents.len(),
        ds.users.len(),
        ds.topics.len(),
        dir.display()
    );
    Ok(())
}
