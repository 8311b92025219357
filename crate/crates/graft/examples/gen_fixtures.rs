//! Regenerate the bundled fixture tree.
//!
//! Run from the repository root: `cargo run -p graft --example gen_fixtures`

use graft::synth;

fn main() -> graft::Result<()> {
    let fixture = synth::build(20, 20);
    fixture.write_sparse_fixture("fixtures")?;
    fixture.write_dense_fixture("fixtures/dense", 16)?;
    fixture.write_learned_fixture("fixtures/learned")?;
    println!(
        "wrote fixtures/: {} documents, {} topics, {} generated records",
        fixture.documents.len(),
        fixture.topics.len(),
        fixture.generated.len()
    );
    Ok(())
}
