//! Directed volume of a random quartic in a box, by fibres and by the
//! surface integral, against the cylinder bound along an axis tube.

use mlkakeya::dirvol::{cylinder_bound, directed_volume_fiber, directed_volume_surface};
use mlkakeya::geom::{Aabb, Tube};
use mlkakeya::poly::basis_len;
use mlkakeya::{rng, MultiPoly, SampleBudget};

fn main() -> mlkakeya::Result<()> {
    let mut r = rng::stream(5, 0);
    let p = MultiPoly::new(2, 4, rng::gaussian(&mut r, basis_len(2, 4)))?;
    let region = Aabb::cube(2, -1.0, 1.0);
    for v in [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]] {
        let f = directed_volume_fiber(&p, &region, &v, &SampleBudget::new(1, 1 << 16).stratified());
        let s = directed_volume_surface(&p, &region, &v, &SampleBudget::new(1, 1 << 18))?;
        println!(
            "v = {v:?}: fibres {:.4} ± {:.4}, surface {:.4} ± {:.4}",
            f.value, f.std_error, s.value, s.std_error
        );
    }
    let tube = Tube::new(0, vec![0.0, 0.0], vec![1.0, 0.0], 1.0, Some(20.0))?;
    let f = directed_volume_fiber(&p, &tube, &[1.0, 0.0], &SampleBudget::new(2, 4096));
    println!("tube: {:.4} <= {:.4}", f.value, cylinder_bound(2, 1.0, 4));
    Ok(())
}
