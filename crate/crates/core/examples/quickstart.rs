use terrace_core::{
    global_minimize_f, lambda, DMatrix, DVector, EnumerationBudget, FidelityModel,
    RegularizedObjective, SparsityLevel, Transform,
};

fn main() -> terrace_core::Result<()> {
    // g(x) = ||Ax - b||^2 with M = I on R^3
    let a = DMatrix::from_row_slice(4, 3, &[
        1.0, 0.2, 0.0,
        0.0, 1.0, 0.3,
        0.1, 0.0, 1.0,
        1.0, 1.0, 1.0,
    ]);
    let b = DVector::from_vec(vec![1.0, 0.05, -0.02, 1.1]);
    let model = FidelityModel::quadratic(a, b)?;
    let transform = Transform::identity(3);
    let budget = EnumerationBudget::default();

    // Which λ make a one-sparse point the global minimizer?
    let iv = lambda::lambda_interval_for_level(&model, &transform, SparsityLevel(1), &budget)?;
    println!("level 1 for λ in [{}, {}], feasible = {}", iv.lo, iv.hi, iv.feasible);

    let obj = RegularizedObjective::new(model, transform, 0.5 * (iv.lo + iv.hi))?;
    let report = global_minimize_f(&obj, &budget)?;
    println!("x = {:?}", report.minimizer.x.as_slice());
    println!("level {}, f = {}", report.achieved_level.0, report.value_f);
    Ok(())
}
