//! Fan-beam forward and back projection: sinogram of a phantom, an adjoint
//! check on random vectors, and the geometry of a few rays.

use ldct_recon::projector::forward_project_view;
use ldct_recon::{back_project, forward_project, shepp_logan, FanBeamGeometry, ImageGrid, Sinogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ldct_recon::Result<()> {
    let geometry = FanBeamGeometry::new(180, 256)?;
    println!(
        "{} views x {} cells, source-axis {:.4}, axis-detector {:.4}, cell spacing {:.5}",
        geometry.num_angles(),
        geometry.detector_cells(),
        geometry.source_axis_distance(),
        geometry.axis_detector_distance(),
        geometry.detector_cell_spacing()
    );
    for cell in [0, 64, 128, 255] {
        println!("  cell {cell:3}: ray passes {:+.4} from the centre", geometry.ray_offset(cell));
    }

    let truth = shepp_logan(128)?;
    let sinogram = forward_project(&truth, &geometry)?;
    let max = sinogram.values().iter().cloned().fold(0.0, f64::max);
    println!("sinogram of a 128² phantom: max line integral {max:.4}");
    let view = forward_project_view(&truth, &geometry, 45)?;
    println!("view 45 centre cells: {:?}", &view.values[126..130]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = ImageGrid::from_vec(128, (0..128 * 128).map(|_| rng.gen::<f64>()).collect())?;
    let y = Sinogram::from_vec(180, 256, (0..180 * 256).map(|_| rng.gen::<f64>()).collect())?;
    let ax = forward_project(&x, &geometry)?;
    let aty = back_project(&y, &geometry, 128)?;
    let lhs: f64 = ax.values().iter().zip(y.values()).map(|(a, b)| a * b).sum();
    let rhs = x.dot(&aty);
    println!("<Ax, y> = {lhs:.10}  <x, Aᵀy> = {rhs:.10}  relative gap {:.2e}", (lhs - rhs).abs() / lhs);
    Ok(())
}
