//! Noisy three-class demo: prints the validation-loss drop after
//! simplification switches on, per seed.

use toposimp::neural::data::three_blobs;
use toposimp::neural::{train, TrainConfig};

fn main() -> toposimp::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    for seed in 0..seeds {
        let data = three_blobs(1000, 0.2, seed)?;
        let mut config = TrainConfig::three_blob_preset(seed);
        config.topo_learning_rate = std::env::args().nth(2).and_then(|s| s.parse().ok());
        let start = config.always_from_epoch.unwrap();
        let report = train(&config, &data)?;
        let v = &report.validation_losses;
        println!(
            "seed {seed}: val[{start}] = {:.4}, min after = {:.4}, drop = {:.1}%, phases = {}",
            v[start],
            v[start + 1..].iter().copied().fold(f64::INFINITY, f64::min),
            100.0 * report.validation_drop(start, 20).unwrap(),
            report.phases.len()
        );
        if let Some(p) = report.phases.first() {
            println!("  first phase: {p:?}");
        }
    }
    Ok(())
}
