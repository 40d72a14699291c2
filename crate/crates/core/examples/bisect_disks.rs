//! Bisect five disks with one conic.

use mlkakeya::hamsandwich::{solve_bisection, BisectionProblem};
use mlkakeya::region::Shape;
use mlkakeya::SampleBudget;

fn main() -> mlkakeya::Result<()> {
    let sets = vec![
        Shape::ball(vec![1.0, 1.0], 0.8),
        Shape::ball(vec![4.0, 2.0], 1.2),
        Shape::ball(vec![2.0, 6.0], 0.6),
        Shape::ball(vec![7.0, 7.0], 1.5),
        Shape::ball(vec![8.0, 2.5], 0.9),
    ];
    let problem = BisectionProblem::new(sets, 2, 0.01)?;
    let res = solve_bisection(&problem, &SampleBudget::new(3, 1 << 18))?;
    println!(
        "restart {} after {} iterations",
        res.restart, res.iterations
    );
    for (i, d) in res.defects.iter().enumerate() {
        println!("disk {i}: defect {d:+.4}");
    }
    println!(
        "{}",
        serde_json::to_string(&res.poly).expect("poly serializes")
    );
    Ok(())
}
