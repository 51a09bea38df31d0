use crate::error::{NmcError, Result};
use crate::problem::{Draw, NestedProblem};

/// Largest number of leaf paths the oracle will sum over.
pub const MAX_JOINT_OUTCOMES: usize = 64;

/// Exact `gamma_0` by summing over every joint outcome, innermost level first.
///
/// Every level must report its exact conditional law through
/// [`NestedProblem::support`].
pub fn enumeration_oracle<P: NestedProblem + ?Sized>(problem: &P) -> Result<f64> {
    let mut path = Vec::with_capacity(problem.depth() + 1);
    let mut leaves = 0;
    level_value(problem, 0, &mut path, &mut leaves)
}

fn level_value<P: NestedProblem + ?Sized>(problem: &P, level: usize, path: &mut Vec<Draw>, leaves: &mut usize) -> Result<f64> {
    let support = problem
        .support(level, path)
        .ok_or_else(|| NmcError::Unsupported(format!("level {level} sampler is not enumerable")))?;
    let mut total = 0.0;
    for (draw, p) in support {
        path.push(draw);
        let value = if level == problem.depth() {
            *leaves += 1;
            if *leaves > MAX_JOINT_OUTCOMES {
                return Err(NmcError::Unsupported(format!("more than {MAX_JOINT_OUTCOMES} joint outcomes")));
            }
            problem.leaf(path)
        } else {
            let inner = level_value(problem, level + 1, path, leaves)?;
            problem.combine(level, path, inner)
        };
        path.pop();
        total += p * value;
    }
    Ok(total)
}
