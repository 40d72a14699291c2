//! Find a union of lines with visibility at least one in each of four
//! unit squares.

use mlkakeya::region::Shape;
use mlkakeya::visibility::{find_high_visibility_surface, SearchOptions, VisTarget};
use mlkakeya::SampleBudget;

fn main() -> mlkakeya::Result<()> {
    let targets: Vec<VisTarget> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
        .iter()
        .map(|&(x, y)| VisTarget {
            region: Shape::Box {
                lo: vec![x, y],
                hi: vec![x + 1.0, y + 1.0],
            },
            m: 1.0,
        })
        .collect();
    let out = find_high_visibility_surface(
        &targets,
        32,
        &SearchOptions::default(),
        &SampleBudget::new(2, 2048),
    )?;
    println!("degree {} success {}", out.degree, out.success);
    for (d, r) in &out.sweep {
        println!("  checkpoint degree {d}: min ratio {r:.3}");
    }
    for (i, row) in out.table.iter().enumerate() {
        println!("square {i}: vis {:.3} / {:.1}", row.achieved, row.target);
    }
    Ok(())
}
