//! Builds the AVA forward operator (linearised reflectivity convolved with a
//! Ricker wavelet) and synthesises noisy gathers from a prior sample.

use std::sync::Arc;

use mvspde::ava::{
    assemble_observation_operator, observe, reflectivity_coefficients, AvaConfig, ObservationScheme, WaveletSpec,
};
use mvspde::discretize::Grid2D;
use mvspde::inference::{sample_gmrf, Factorization};
use mvspde::prior::{build_model, HyperParams, Interface, ModelKind, PriorScale};

fn main() -> mvspde::Result<()> {
    let grid = Grid2D::new(64, 64, 1.0)?;
    let config = AvaConfig::default();
    println!("{:>6} {:>9} {:>9} {:>9}", "angle", "c1", "c2", "c3");
    for deg in &config.angles_deg {
        let c = reflectivity_coefficients(deg.to_radians(), config.gamma2)?;
        println!("{deg:>6.1} {:>9.4} {:>9.4} {:>9.4}", c[0], c[1], c[2]);
    }

    let wavelet = WaveletSpec::default().build()?;
    let scheme = ObservationScheme::Ava { config, wavelet: None };
    let sigma2 = 1.0;
    let op = Arc::new(assemble_observation_operator(&grid, &scheme, Some(&wavelet), sigma2)?);
    println!("G: {} x {}, {} nonzeros", op.n_obs(), op.n_latent(), op.g.nnz());

    let mut p = HyperParams::new(0.1, PriorScale::Lambda2(0.5));
    p.sigma2 = sigma2;
    p.rho_above = [0.99, 0.99, 0.99];
    p.rho_below = Some([-0.99, -0.99, 0.99]);
    p.interface = Some(Interface::Flat { depth: 32.0 });
    let model = build_model(ModelKind::Model2, &p, &grid)?;
    let m = sample_gmrf(&Factorization::new(model.q())?, 11);
    let clean = op.g.mul_vec(&m)?;
    let obs = observe(&op, &m, 12)?;

    let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64;
    println!("signal power {power:.4}, noise variance {sigma2}, SNR {:.2}", power / sigma2);
    println!("first trace samples: {:?}", &obs.d[..5]);
    Ok(())
}
