//! Posterior mean reconstruction from noisy direct observations with the
//! true hyperparameters, under the true model and a misspecified one.

use std::sync::Arc;

use mvspde::ava::{assemble_observation_operator, observe, ObservationScheme};
use mvspde::discretize::Grid2D;
use mvspde::harness::krige;
use mvspde::inference::{relative_error, relative_error_scoped, sample_gmrf, ErrorScope, Factorization};
use mvspde::prior::{build_model, HyperParams, Interface, ModelKind, PriorScale};

fn main() -> mvspde::Result<()> {
    let grid = Grid2D::new(64, 64, 1.0)?;
    let mut truth = HyperParams::new(0.1, PriorScale::Lambda2(0.5));
    truth.rho_above = [0.99, 0.99, 0.99];
    truth.rho_below = Some([-0.99, -0.99, 0.99]);
    truth.interface = Some(Interface::Flat { depth: 32.0 });

    let model = build_model(ModelKind::Model2, &truth, &grid)?;
    let m = sample_gmrf(&Factorization::new(model.q())?, 21);
    let op = Arc::new(assemble_observation_operator(&grid, &ObservationScheme::Identity, None, truth.sigma2)?);
    let obs = observe(&op, &m, 22)?;
    println!("raw data error: {:.3}", relative_error(&obs.d, &m)?);

    let mut single = truth.clone();
    single.rho_below = None;
    single.interface = None;
    single.rho_above = [0.0; 3];
    for (kind, hyper) in [(ModelKind::Model2, &truth), (ModelKind::Model1, &single)] {
        let mean = krige(kind, hyper, &grid, &obs)?;
        println!(
            "{}: field-1 error {:.3}, joint error {:.3}",
            kind.label(),
            relative_error_scoped(&mean, &m, 3, ErrorScope::Field(0))?,
            relative_error(&mean, &m)?
        );
    }
    Ok(())
}
