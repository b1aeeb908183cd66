//! Regenerates the bundled `demo/` scenario: `cargo run -p exheat-core --example write_demo`.

use std::path::PathBuf;

use exheat_core::ingest::{save_scenario, RunConfig};
use exheat_core::synth::demo_week;

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo");
    let run = RunConfig {
        capacities: vec![0.0, 300.0, 600.0, 900.0],
        ..RunConfig::default()
    };
    let path = save_scenario(
        &dir,
        "demo",
        &demo_week(),
        &run,
        Some("Synthetic one-week sinusoidal series for tests and quick-start; not measured data."),
    )
    .expect("write demo scenario");
    println!("wrote {}", path.display());
}
