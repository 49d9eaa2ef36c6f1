//! Maximum-likelihood fit of the single-matrix and two-layer models to one
//! simulated data set; the two-layer model should win on log-likelihood.

use std::sync::Arc;

use mvspde::ava::{assemble_observation_operator, observe, ObservationScheme};
use mvspde::discretize::Grid2D;
use mvspde::inference::{fit_ml, sample_gmrf, Factorization};
use mvspde::prior::{build_model, HyperParams, Interface, ModelKind, PriorScale};

fn main() -> mvspde::Result<()> {
    let grid = Grid2D::new(32, 32, 1.0)?;
    let mut truth = HyperParams::new(0.1, PriorScale::Lambda2(0.5));
    truth.rho_above = [0.9, 0.8, 0.9];
    truth.rho_below = Some([-0.9, -0.8, 0.9]);
    truth.interface = Some(Interface::Flat { depth: 16.0 });

    let model = build_model(ModelKind::Model2, &truth, &grid)?;
    let m = sample_gmrf(&Factorization::new(model.q())?, 3);
    let op = Arc::new(assemble_observation_operator(&grid, &ObservationScheme::Identity, None, truth.sigma2)?);
    let obs = observe(&op, &m, 4)?;

    for kind in [ModelKind::Model1, ModelKind::Model2] {
        let mut init = truth.clone();
        init.rho_above = [0.0; 3];
        init.rho_below = (kind != ModelKind::Model1).then_some([0.0; 3]);
        let fit = fit_ml(std::slice::from_ref(&obs), kind, &grid, &init)?;
        let e = &fit.estimate;
        println!(
            "{}: loglik {:.2} after {} iterations (converged: {})",
            kind.label(),
            fit.loglik,
            fit.iterations,
            fit.converged
        );
        println!("  kappa2 {:.4} lambda2 {:.4} sigma2 {:.4}", e.kappa2, e.lambda2(), e.sigma2);
        println!("  rho above {:.3?}", e.rho_above);
        if let Some(b) = e.rho_below {
            println!("  rho below {b:.3?}");
        }
    }
    Ok(())
}
