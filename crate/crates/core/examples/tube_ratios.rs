//! Lattice functional of random transverse tube scenes against the grid.

use mlkakeya::kakeya::{
    joint_grid, joint_volume, kakeya_ratio, lattice_grid, random_transverse_scene,
};
use mlkakeya::SampleBudget;

fn main() -> mlkakeya::Result<()> {
    println!("grid ratio {}", kakeya_ratio(&lattice_grid(2, 8)?)?.ratio);
    for seed in 0..6 {
        let n = 2 + seed as usize % 2;
        let r = kakeya_ratio(&random_transverse_scene(n, seed)?)?;
        println!(
            "n={n} seed={seed} A={:?} theta={:.3} lhs={:.1} ratio={:.4}",
            r.counts, r.theta, r.lhs, r.ratio
        );
    }
    for a in [2, 4, 8] {
        let v = joint_volume(&joint_grid(2, a)?, &SampleBudget::new(1, 1 << 18))?;
        println!(
            "A={a}: vol(I) = {:.2}, / A^2 = {:.4}",
            v.value,
            v.value / (a * a) as f64
        );
    }
    Ok(())
}
