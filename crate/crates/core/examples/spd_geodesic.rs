//! Geodesic between two 3×3 correlation matrices under the affine-invariant
//! metric, and how far its interior points are from being correlations.

use mvspde::spd::{
    boltzmann_entropy, correlation_check, curve_length, geodesic_distance, geodesic_point, GeodesicParam, SpdMatrix,
};

fn main() -> mvspde::Result<()> {
    let above = SpdMatrix::correlation3(0.9, 0.9, 0.9)?;
    let below = SpdMatrix::correlation3(-0.9, -0.9, 0.9)?;

    let d = geodesic_distance(&above, &below)?;
    println!("geodesic distance: {d:.6}");

    let mut path = Vec::new();
    println!("{:>5} {:>10} {:>10} {:>10} {:>12}", "t", "r12", "r13", "r23", "max|diag-1|");
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let p = geodesic_point(&above, &below, GeodesicParam::new(t)?)?;
        let rep = correlation_check(&p, 1e-12);
        println!(
            "{t:>5.1} {:>10.4} {:>10.4} {:>10.4} {:>12.3e}",
            p.get(0, 1),
            p.get(0, 2),
            p.get(1, 2),
            rep.max_diag_deviation
        );
        path.push(p);
    }
    println!("polyline length over 11 points: {:.6}", curve_length(&path)?);
    println!("entropy at t = 0.5: {:.6}", boltzmann_entropy(&path[5]));
    Ok(())
}
