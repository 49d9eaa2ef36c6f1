//! Recovers the width of the transition zone when the interface is only known
//! approximately: the truth follows a sine, the guess is flat.

use std::sync::Arc;

use mvspde::ava::{assemble_observation_operator, observe, ObservationScheme};
use mvspde::discretize::Grid2D;
use mvspde::inference::{estimate_blend_range, sample_gmrf, BlendSearch, Factorization};
use mvspde::prior::{build_model, HyperParams, Interface, ModelKind, PriorScale};

fn main() -> mvspde::Result<()> {
    let grid = Grid2D::new(32, 32, 1.0)?;
    let mut truth = HyperParams::new(0.1, PriorScale::Lambda2(0.5));
    truth.rho_above = [0.99, 0.99, 0.99];
    truth.rho_below = Some([-0.99, -0.99, 0.99]);
    truth.interface = Some(Interface::Sine { baseline: 16.0, amplitude: 8.0, period: 32.0, phase: 0.0 });

    let model = build_model(ModelKind::Model2, &truth, &grid)?;
    let m = sample_gmrf(&Factorization::new(model.q())?, 5);
    let op = Arc::new(assemble_observation_operator(&grid, &ObservationScheme::Identity, None, truth.sigma2)?);
    let obs = observe(&op, &m, 6)?;

    let mut guess = truth.clone();
    guess.interface = Some(Interface::Flat { depth: 16.0 });
    let est = estimate_blend_range(&obs, &guess, ModelKind::Model2, &grid, &BlendSearch::new(0.0, 32.0)?)?;
    println!("{:>8} {:>12}", "range", "loglik");
    for (r, ll) in &est.profile {
        println!("{r:>8.2} {ll:>12.2}");
    }
    println!("estimated blend range {:.2} (amplitude of the true interface: 8)", est.range);
    Ok(())
}
