//! Red wine quality regression without regularization, with weight decay,
//! and with topological phases. Prints test RMSD per seed.

use std::fs::File;

use toposimp::field::{read_csv, CsvOptions};
use toposimp::neural::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/winequality-red.csv");
    let data = read_csv(File::open(path)?, &CsvOptions::default())?;
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    for seed in 0..seeds {
        let pso = TrainConfig::wine_preset(seed);
        let none = TrainConfig { topo: false, ..pso.clone() };
        let l2 = TrainConfig { weight_decay: 1e-4, ..none.clone() };
        for (name, config) in [("none", none), ("l2", l2), ("pso", pso)] {
            let t = std::time::Instant::now();
            let r = train(&config, &data)?;
            println!(
                "seed {seed} {name:>4}: rmsd {:.4}, phases {}, {:.1}s",
                r.test.rmsd.unwrap(),
                r.phases.len(),
                t.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
