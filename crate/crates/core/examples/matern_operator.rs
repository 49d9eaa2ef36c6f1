//! Stationary isotropic operator on a periodic grid: compares the marginal
//! covariance of the discrete field with the Matérn (ν = 1) reference.

use mvspde::discretize::{
    assemble_operator, matern_reference, normalization_constant, precision_from_operator, BoundaryCondition,
    CoefficientFields, Grid2D, Normalization,
};
use mvspde::inference::Factorization;

fn main() -> mvspde::Result<()> {
    let grid = Grid2D::new(64, 64, 1.0)?;
    let kappa2 = 0.1;
    let coeffs = CoefficientFields::isotropic(&grid, kappa2);
    let l = assemble_operator(&grid, &coeffs, BoundaryCondition::Periodic)?;
    let c = normalization_constant(&coeffs, Normalization::None)?;
    let q = precision_from_operator(&l, 1.0, grid.h, c)?;
    println!("operator: {} nonzeros, at most {} per row", l.nnz(), l.max_row_nnz());

    // One column of Q⁻¹ gives the covariance with the node at the origin.
    let f = Factorization::new(&q)?;
    let mut e = vec![0.0; grid.len()];
    e[0] = 1.0;
    let col = f.solve(&e)?;

    let lags: Vec<f64> = (0..=12).map(|r| r as f64).collect();
    let reference = matern_reference(&lags, kappa2.sqrt(), 2.0, 2)?;
    println!("{:>4} {:>12} {:>12}", "lag", "discrete", "Matérn");
    for (r, m) in lags.iter().zip(&reference) {
        let k = *r as usize;
        println!("{k:>4} {:>12.6} {:>12.6}", col[grid.index(k, 0)], m);
    }
    Ok(())
}
