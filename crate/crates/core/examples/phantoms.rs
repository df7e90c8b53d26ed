//! Builds the Shepp-Logan and random-ellipse phantoms and writes them as
//! 16-bit PGM images with raw f64 sidecars.
//!
//! ```text
//! cargo run --release --example phantoms -- [output_dir]
//! ```

use std::path::PathBuf;

use ldct_recon::io::export_image;
use ldct_recon::phantoms::shepp_logan_variant;
use ldct_recon::{random_ellipses, SheppLoganVariant};

fn main() -> ldct_recon::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-output/phantoms".into()));
    std::fs::create_dir_all(&dir)?;

    for (name, variant) in [("shepp_logan", SheppLoganVariant::Modified), ("shepp_logan_classical", SheppLoganVariant::Classical)] {
        let image = shepp_logan_variant(256, variant)?;
        export_image(&dir, name, &image, (0.0, 1.0))?;
        println!("{name}: min {:.3} max {:.3} mean {:.4}", image.min(), image.max(), image.sum() / image.len() as f64);
    }

    for seed in 0..3 {
        let phantom = random_ellipses(256, (3, 8), seed)?;
        let name = format!("ellipses_{seed}");
        export_image(&dir, &name, &phantom.image, (0.0, 1.0))?;
        println!("{name}: {} ellipses, scale {:.3}", phantom.ellipses.len(), phantom.scale);
    }
    println!("wrote {}", dir.display());
    Ok(())
}
