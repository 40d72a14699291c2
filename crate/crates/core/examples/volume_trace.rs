//! Run the staged volume argument on a 3 x 3 grid of strips and compare
//! mollified visibility with directed volumes on a tilted scene.

use mlkakeya::kakeya::{
    coordinate_hyperplanes, trace_grid, visibility_check, visibility_ratio_bound, volume_trace,
    Generator, TraceOptions, VisibilityCheckOptions,
};
use mlkakeya::SampleBudget;

fn main() -> mlkakeya::Result<()> {
    let t = volume_trace(
        &trace_grid(2, 3)?,
        &TraceOptions::default(),
        &SampleBudget::new(7, 1 << 15),
    )?;
    println!(
        "V = {}, degree {} ({:.2} V^(1/2))",
        t.v, t.degree, t.degree_ratio
    );
    println!(
        "popular tube {:?} carries {} cubes (need {})",
        t.popular, t.popular_count, t.required
    );
    println!(
        "enlarged tube: {:.3} <= cylinder {:.3}; min V_k {:.3}",
        t.enlarged_volume, t.cylinder, t.min_vk
    );
    println!(
        "V/A = {:.2} <= {:.2} V^(1/2): {}",
        t.lhs, t.c_measured, t.holds
    );

    let scene = Generator::Transversality {
        theta: 0.5,
        side: 3.0,
        tubes: 2,
        radius: 0.5,
    }
    .build(2, 1)?;
    let z = coordinate_hyperplanes(&[1, 1])?;
    let rep = visibility_check(
        &scene,
        &z,
        &VisibilityCheckOptions::default(),
        &SampleBudget::new(1, 256).stratified(),
    )?;
    println!("theta {:.3}, degree {}", rep.theta, rep.degree);
    for row in &rep.rows {
        println!(
            "cube {:?}: vis {:.3}, bound {:.3}, ratio {:.3}",
            row.cube, row.vis, row.bound, row.ratio
        );
    }
    println!(
        "max ratio {:.3} (hull bound {})",
        rep.max_ratio,
        visibility_ratio_bound(2)
    );
    Ok(())
}
