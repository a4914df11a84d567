// Builds the desk-scale zoo into the shared acceptance cache.
use zoo::{build_zoo, ZooConfig};

fn main() {
    let seed = 7;
    let dir = std::path::PathBuf::from(
        std::env::var("CARGO_TARGET_DIR").unwrap_or_else(|_| "target".into()),
    )
    .join("acceptance_cache")
    .join(format!("zoo-desk-{seed}"));
    std::fs::create_dir_all(&dir).unwrap();
    let config = ZooConfig::desk(seed);
    let start = std::time::Instant::now();
    let manifest = build_zoo(&config, &dir, 1).unwrap();
    println!(
        "built {} models in {:.1}s at {}",
        manifest.records.len(),
        start.elapsed().as_secs_f64(),
        dir.display()
    );
}
