//! Build a box field for a bundle of five tubes at L = 10 and sweep the
//! containment dilation.

use mlkakeya::planiness::{build_box_field, sigma_sweep, tube_bundle, BoxOptions};
use mlkakeya::SampleBudget;

fn main() -> mlkakeya::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let spread = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.05);
    let tubes = tube_bundle(2, 10.0, 5, spread, seed)?;
    let budget = SampleBudget::new(seed, 1 << 16);
    let field = build_box_field(&tubes, 10.0, &BoxOptions::default(), &budget)?;
    println!(
        "vol(X) = {:.2}, M = {:.2}, cover = {}, degree = {}, min ratio = {:.3}",
        field.vol_x, field.target_m, field.targets, field.degree, field.min_ratio
    );
    let sweep = sigma_sweep(
        &tubes,
        &field,
        &[5.0, 10.0, 20.0, 40.0],
        &budget.with_count(200),
    )?;
    for (s, f) in sweep.sigmas.iter().zip(&sweep.fractions) {
        println!("sigma {s:>4}: containment {f:.3}");
    }
    println!(
        "sigma* = {:.2}, exponent = {:?}",
        sweep.sigma_star, sweep.exponent
    );
    Ok(())
}
