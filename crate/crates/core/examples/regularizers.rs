//! Entropy versus quadratic regularization on an unconstrained two-action
//! problem: the entropic optimum is interior, the quadratic one sits on the
//! boundary of the simplex.

use cirl::forward::{frank_wolfe_solve, soft_value_iteration};
use cirl::numerics::Matrix;
use cirl::{regularizer_gradient, Cmdp, Regularizer};

fn main() -> cirl::Result<()> {
    let p = Matrix::from_rows(&[vec![1.0], vec![1.0]])?;
    let cmdp = Cmdp::unconstrained(1, 2, 0.9, vec![1.0], p, None)?;
    let r = [0.0, 2.0];

    let soft = soft_value_iteration(&cmdp, &r, 1.0, 1e-12, 10_000)?;
    println!("entropy:   policy {:?} ({} sweeps)", soft.policy.as_slice(), soft.iterations);
    println!("           gradient {:?}", regularizer_gradient(&soft.occupancy, &Regularizer::entropy(1.0)?)?);

    let quad = Regularizer::quadratic(1.0)?;
    let fw = frank_wolfe_solve(&cmdp, &r, &quad, 2_000)?;
    println!("quadratic: occupancy {:?} (gap {:.2e})", fw.occupancy.values(), fw.gap);
    println!("           gradient {:?}", regularizer_gradient(&fw.occupancy, &quad)?);
    Ok(())
}
