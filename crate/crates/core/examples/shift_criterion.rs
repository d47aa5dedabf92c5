//! Which bilateral weighted shifts are generalized hyperbolic, and what
//! their decay constants look like.

use gh_conjugacy::operator::{check_shift_criterion, GhOperator, WeightSpec};

fn main() -> gh_conjugacy::Result<()> {
    let specs = [
        ("1/2 left, 2 right", WeightSpec::two_sided(0.5, 2.0)?),
        ("core bump", WeightSpec::new(-1, vec![3.0, 0.25], 0.5, 2.0)?),
        (
            "1/3 left, 3 right from n = 5",
            WeightSpec::constant_tails(1.0 / 3.0, 3.0, 5)?,
        ),
        ("constant 2", WeightSpec::two_sided(2.0, 2.0)?),
        ("constant 1/2", WeightSpec::two_sided(0.5, 0.5)?),
    ];
    for (name, w) in specs {
        let c = check_shift_criterion(&w);
        print!(
            "{name:<30} left {:.3} right {:.3} holds {}",
            c.left_margin, c.right_margin, c.holds
        );
        match GhOperator::shift(w) {
            Ok(op) => {
                let k = op.constants();
                println!("  c = {:.4} t = {:.4} d = {:.4}", k.c, k.t, k.d);
            }
            Err(e) => println!("  ({e})"),
        }
    }
    Ok(())
}
