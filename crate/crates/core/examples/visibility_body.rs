//! Visibility of a grid of segments and its John ellipsoid.

use mlkakeya::geom::Aabb;
use mlkakeya::visibility::visibility;
use mlkakeya::{FactoredPoly, SampleBudget};

fn main() -> mlkakeya::Result<()> {
    let (n1, n2) = (4, 2);
    let mut planes = Vec::new();
    for i in 0..n1 {
        planes.push((vec![1.0, 0.0], -0.5 + (i as f64 + 0.5) / n1 as f64));
    }
    for j in 0..n2 {
        planes.push((vec![0.0, 1.0], -0.5 + (j as f64 + 0.5) / n2 as f64));
    }
    let z = FactoredPoly::hyperplanes(2, &planes)?;
    let rep = visibility(
        &z,
        &Aabb::cube(2, -0.5, 0.5),
        &SampleBudget::new(1, 2048).stratified(),
    )?;
    println!(
        "vis = {:.3} (cross polytope gives {})",
        rep.vis,
        (n1 * n2) as f64 / 2.0
    );
    println!(
        "John ellipsoid volume {:.4}, body volume {:.4}",
        rep.john.volume(),
        rep.body.volume()
    );
    Ok(())
}
