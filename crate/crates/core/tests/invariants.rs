//! Structural invariants of the operator, prior, forward model and fitting.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use mvspde::ava::{assemble_observation_operator, observe, AvaConfig, ObservationOperator, ObservationScheme, WaveletSpec};
use mvspde::discretize::{
    assemble_operator, constant_stencil, normalization_constant, precision_from_operator, BoundaryCondition,
    CoefficientFields, Grid2D, Normalization,
};
use mvspde::inference::{
    central_gradient, correlation_from_unconstrained, fit_ml, log_likelihood, posterior_mean, relative_error,
    sample_gmrf, unconstrained_from_correlation, Factorization,
};
use mvspde::prior::{build_model, HyperParams, Interface, ModelKind, PriorScale};
use mvspde::sparse::SparseMatrix;
use mvspde::spd::{curve_length, geodesic_distance, geodesic_point, GeodesicParam, SpdMatrix};

fn spd(v: &[f64], n: usize) -> SpdMatrix {
    let g = DMatrix::from_column_slice(n, n, &v[..n * n]);
    let m = &g * g.transpose() + DMatrix::identity(n, n) * 0.2;
    SpdMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn triangle_inequality(v in prop::collection::vec(-1.5f64..1.5, 27)) {
        let (a, b, c) = (spd(&v[..9], 3), spd(&v[9..18], 3), spd(&v[18..], 3));
        let ab = geodesic_distance(&a, &b).unwrap();
        let bc = geodesic_distance(&b, &c).unwrap();
        let ac = geodesic_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
    }

    /// Perturbing the interior of the geodesic never shortens it.
    #[test]
    fn perturbed_paths_are_longer(v in prop::collection::vec(-1.5f64..1.5, 27), eps in 0.01f64..0.3) {
        let (a, b) = (spd(&v[..9], 3), spd(&v[9..18], 3));
        let bump = DMatrix::from_column_slice(3, 3, &v[18..27]);
        let bump = (&bump + bump.transpose()) * 0.5;
        let d = geodesic_distance(&a, &b).unwrap();
        let path: Vec<SpdMatrix> = (0..=200)
            .map(|k| {
                let t = k as f64 / 200.0;
                let p = geodesic_point(&a, &b, GeodesicParam::new(t).unwrap()).unwrap();
                // a symmetric bump vanishing at both ends, scaled to stay positive definite
                let w = eps * (std::f64::consts::PI * t).sin() * p.eigenvalues().into_iter().fold(f64::INFINITY, f64::min) / (1.0 + bump.norm());
                SpdMatrix::new(p.as_matrix() + &bump * w).unwrap()
            })
            .collect();
        prop_assert!(curve_length(&path).unwrap() >= d - 1e-6);
    }

    /// Dyadic coefficients keep every partial sum exact.
    #[test]
    fn stencil_rows_sum_to_zero(a11 in 1i32..64, a12 in -32i32..32, a22 in 1i32..64) {
        let s = constant_stencil(a11 as f64 / 16.0, a12 as f64 / 16.0, a22 as f64 / 16.0, 1.0).unwrap();
        let total: f64 = s.iter().flatten().sum();
        prop_assert_eq!(total, 0.0);
    }

    #[test]
    fn periodic_constant_operator_is_circulant(a11 in 0.3f64..3.0, a22 in 0.3f64..3.0, frac in -0.9f64..0.9) {
        let grid = Grid2D::new(6, 5, 1.0).unwrap();
        let c = CoefficientFields::constant(&grid, a11, frac * (a11 * a22).sqrt(), a22, 0.2);
        let l = assemble_operator(&grid, &c, BoundaryCondition::Periodic).unwrap();
        let at = |k: usize, di: usize, dj: usize| {
            let (i, j) = grid.ij(k);
            l.get(k, grid.index((i + di) % grid.nx, (j + dj) % grid.ny))
        };
        for k in 0..grid.len() {
            for di in 0..grid.nx {
                for dj in 0..grid.ny {
                    prop_assert!((at(k, di, dj) - at(0, di, dj)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn raising_kappa2_only_moves_the_diagonal(seed in 0u64..1000, bump in 0.0f64..2.0) {
        let grid = Grid2D::new(7, 6, 1.0).unwrap();
        let mut c = CoefficientFields::isotropic(&grid, 0.1);
        for k in 0..grid.len() {
            let x = (k as f64 * 0.37 + seed as f64).sin();
            c.a11[k] = 1.0 + 0.5 * x;
            c.a12[k] = 0.3 * x;
            c.kappa2[k] = 0.1 + 0.05 * x * x;
        }
        let l0 = assemble_operator(&grid, &c, BoundaryCondition::Neumann).unwrap().to_dense();
        let mut c1 = c.clone();
        let deltas: Vec<f64> = (0..grid.len()).map(|k| bump * ((k % 5) as f64 + 1.0)).collect();
        for (k, d) in deltas.iter().enumerate() {
            c1.kappa2[k] += d;
        }
        let l1 = assemble_operator(&grid, &c1, BoundaryCondition::Neumann).unwrap().to_dense();
        let diff = l1 - l0;
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let want = if i == j { deltas[i] } else { 0.0 };
                prop_assert!((diff[(i, j)] - want).abs() < 1e-13);
            }
        }
    }

    /// Swapping fields 1 and 2 with correspondingly permuted correlations
    /// permutes the blocks of Q.
    #[test]
    fn field_permutation(above in prop::array::uniform3(-2.0f64..2.0), below in prop::array::uniform3(-2.0f64..2.0)) {
        let grid = Grid2D::new(5, 6, 1.0).unwrap();
        let mut p = HyperParams::new(0.2, PriorScale::Tau2(1.0));
        p.rho_above = correlation_from_unconstrained(above);
        p.rho_below = Some(correlation_from_unconstrained(below));
        p.interface = Some(Interface::Flat { depth: 3.0 });
        p.blend_range = 2.0;
        let swap = |r: [f64; 3]| [r[0], r[2], r[1]];
        let mut ps = p.clone();
        ps.rho_above = swap(p.rho_above);
        ps.rho_below = p.rho_below.map(swap);
        let q = build_model(ModelKind::Model2, &p, &grid).unwrap().q().to_dense();
        let qs = build_model(ModelKind::Model2, &ps, &grid).unwrap().q().to_dense();
        let n = grid.len();
        let perm = |k: usize| match k / n { 0 => k + n, 1 => k - n, _ => k };
        let scale = q.abs().max();
        for i in 0..3 * n {
            for j in 0..3 * n {
                prop_assert!((qs[(perm(i), perm(j))] - q[(i, j)]).abs() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn operator_sparsity_bounds() {
    let grid = Grid2D::new(20, 17, 1.0).unwrap();
    let mut c = CoefficientFields::isotropic(&grid, 0.1);
    c.a12.iter_mut().for_each(|v| *v = 0.2);
    for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet, BoundaryCondition::Periodic] {
        let l = assemble_operator(&grid, &c, bc).unwrap();
        assert!(l.nnz() <= 9 * grid.len());
        assert!(l.gram().nnz() <= 25 * grid.len());
    }
}

fn ava_operator(grid: &Grid2D, halfwidth: usize, sigma2: f64) -> Arc<ObservationOperator> {
    let spec = WaveletSpec::Ricker { peak_freq: 0.15, halfwidth };
    let scheme = ObservationScheme::Ava { config: AvaConfig::default(), wavelet: Some(spec.clone()) };
    Arc::new(assemble_observation_operator(grid, &scheme, Some(&spec.build().unwrap()), sigma2).unwrap())
}

#[test]
fn forward_model_is_linear_and_banded() {
    let grid = Grid2D::new(8, 30, 1.0).unwrap();
    let halfwidth = 4;
    let op = ava_operator(&grid, halfwidth, 0.5);
    assert!(op.g.max_row_nnz() <= (2 * halfwidth + 1) * 3);
    let n = 3 * grid.len();
    let m1: Vec<f64> = (0..n).map(|k| (k as f64 * 0.13).sin()).collect();
    let m2: Vec<f64> = (0..n).map(|k| (k as f64 * 0.07).cos()).collect();
    let (a, b) = (1.7, -0.4);
    let combo: Vec<f64> = m1.iter().zip(&m2).map(|(x, y)| a * x + b * y).collect();
    // the noise realisation is shared, so it cancels against the zero field
    let noise = observe(&op, &vec![0.0; n], 3).unwrap().d;
    let d = observe(&op, &combo, 3).unwrap().d;
    let (g1, g2) = (op.g.mul_vec(&m1).unwrap(), op.g.mul_vec(&m2).unwrap());
    for k in 0..d.len() {
        assert!((d[k] - noise[k] - (a * g1[k] + b * g2[k])).abs() < 1e-12);
    }
}

fn normalized_isotropic(grid: &Grid2D, kappa2: f64) -> SparseMatrix {
    let coeffs = CoefficientFields::isotropic(grid, kappa2);
    let l = assemble_operator(grid, &coeffs, BoundaryCondition::Periodic).unwrap();
    let c = normalization_constant(&coeffs, Normalization::MedianKappa).unwrap();
    precision_from_operator(&l, 1.0, grid.h, c).unwrap()
}

#[test]
fn normalized_field_has_unit_variance() {
    let grid = Grid2D::new(64, 64, 1.0).unwrap();
    let f = Factorization::new(&normalized_isotropic(&grid, 0.1)).unwrap();
    let mut acc = 0.0;
    for s in 0..2000 {
        acc += sample_gmrf(&f, s).iter().map(|v| v * v).sum::<f64>() / grid.len() as f64;
    }
    let var = acc / 2000.0;
    assert!((var - 1.0).abs() < 0.1, "variance {var}");
}

/// Deep inside each layer the sample cross-correlations match that layer's
/// correlation matrix.
#[test]
fn layer_cross_correlations() {
    let grid = Grid2D::new(64, 64, 1.0).unwrap();
    let mut p = HyperParams::new(0.1, PriorScale::Tau2(1.0));
    p.rho_above = [0.8, 0.5, 0.3];
    p.rho_below = Some([-0.6, 0.2, -0.4]);
    p.interface = Some(Interface::Flat { depth: 32.0 });
    let model = build_model(ModelKind::Model2, &p, &grid).unwrap();
    let f = Factorization::new(model.q()).unwrap();
    let n = grid.len();
    let nodes = [(grid.index(32, 10), p.rho_above), (grid.index(32, 54), p.rho_below.unwrap())];
    let mut sums = [[[0.0f64; 3]; 3]; 2];
    for s in 0..2000 {
        let x = sample_gmrf(&f, 100 + s);
        for (l, (k, _)) in nodes.iter().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    sums[l][a][b] += x[a * n + k] * x[b * n + k];
                }
            }
        }
    }
    for (l, (_, rho)) in nodes.iter().enumerate() {
        let c = &sums[l];
        let corr = |a: usize, b: usize| c[a][b] / (c[a][a] * c[b][b]).sqrt();
        for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            assert!((corr(a, b) - rho[k]).abs() < 0.1, "layer {l} ({a},{b}): {} vs {}", corr(a, b), rho[k]);
        }
    }
}

fn two_layer(grid: &Grid2D) -> HyperParams {
    let mut p = HyperParams::new(0.2, PriorScale::Lambda2(0.7));
    p.rho_above = [0.7, 0.4, 0.5];
    p.rho_below = Some([-0.6, -0.3, 0.5]);
    p.interface = Some(Interface::Flat { depth: grid.ny as f64 / 2.0 });
    p
}

/// The gradient used by the optimiser against a separately written central
/// difference at a hundredth of the step, through the correlation
/// reparametrisation.
#[test]
fn likelihood_gradient_through_reparametrisation() {
    let grid = Grid2D::new(10, 10, 1.0).unwrap();
    let truth = two_layer(&grid);
    let model = build_model(ModelKind::Model2, &truth, &grid).unwrap();
    let op = ava_operator(&grid, 3, truth.sigma2);
    let x = sample_gmrf(&Factorization::new(model.q()).unwrap(), 1);
    let obs = observe(&op, &x, 2).unwrap();

    let unpack = |z: &[f64]| {
        let mut h = truth.clone();
        h.kappa2 = z[0].exp();
        h.scale = PriorScale::Lambda2(z[1].exp());
        h.rho_above = correlation_from_unconstrained([z[2], z[3], z[4]]);
        h.rho_below = Some(correlation_from_unconstrained([z[5], z[6], z[7]]));
        h
    };
    let f = |z: &[f64]| log_likelihood(&unpack(z), &obs, ModelKind::Model2, &grid).map(|e| e.loglik);
    let ua = unconstrained_from_correlation([0.5, 0.2, 0.1]).unwrap();
    let ub = unconstrained_from_correlation([-0.4, -0.2, 0.3]).unwrap();
    let z0 = [0.1f64.ln(), 0.9f64.ln(), ua[0], ua[1], ua[2], ub[0], ub[1], ub[2]];
    let g = central_gradient(&f, &z0, f(&z0).unwrap(), 1e-4);
    for k in 0..z0.len() {
        let h = 1e-6 * z0[k].abs().max(1.0);
        let (mut up, mut dn) = (z0, z0);
        up[k] += h;
        dn[k] -= h;
        let fine = (f(&up).unwrap() - f(&dn).unwrap()) / (2.0 * h);
        assert!((g[k] - fine).abs() <= 1e-4 * fine.abs().max(1.0), "component {k}: {} vs {fine}", g[k]);
    }
}

/// Two independent looks at the same field never do worse on average than one.
#[test]
fn more_data_does_not_hurt() {
    let grid = Grid2D::new(16, 16, 1.0).unwrap();
    let mut p = two_layer(&grid);
    p.scale = PriorScale::Tau2(1.0);
    p.sigma2 = 2.0;
    let model = build_model(ModelKind::Model2, &p, &grid).unwrap();
    let f = Factorization::new(model.q()).unwrap();
    let n = 3 * grid.len();
    let single = Arc::new(assemble_observation_operator(&grid, &ObservationScheme::Identity, None, p.sigma2).unwrap());
    let eye = SparseMatrix::identity(n);
    let stacked = SparseMatrix::from_blocks(&[vec![Some(&eye)], vec![Some(&eye)]], &[n, n], &[n]).unwrap();
    let double = Arc::new(ObservationOperator::new(stacked, single.kind, p.sigma2).unwrap());
    let (mut e1, mut e2) = (0.0, 0.0);
    for r in 0..20 {
        let x = sample_gmrf(&f, 500 + r);
        let a = observe(&single, &x, 600 + r).unwrap();
        let b = observe(&single, &x, 700 + r).unwrap();
        let both = mvspde::ava::ObservationSet { d: [a.d.clone(), b.d].concat(), operator: double.clone(), seed: 0, truth_ref: None };
        e1 += relative_error(&posterior_mean(model.q(), &a).unwrap().mean, &x).unwrap();
        e2 += relative_error(&posterior_mean(model.q(), &both).unwrap().mean, &x).unwrap();
    }
    assert!(e2 <= e1, "two observation sets {:.4} vs one {:.4}", e2 / 20.0, e1 / 20.0);
}

#[test]
fn fits_are_bit_reproducible() {
    let grid = Grid2D::new(10, 10, 1.0).unwrap();
    let truth = two_layer(&grid);
    let model = build_model(ModelKind::Model2, &truth, &grid).unwrap();
    let op = Arc::new(assemble_observation_operator(&grid, &ObservationScheme::Identity, None, truth.sigma2).unwrap());
    let obs = observe(&op, &sample_gmrf(&Factorization::new(model.q()).unwrap(), 4), 5).unwrap();
    let mut init = truth.clone();
    init.rho_above = [0.0; 3];
    init.rho_below = Some([0.0; 3]);
    let a = fit_ml(std::slice::from_ref(&obs), ModelKind::Model2, &grid, &init).unwrap();
    let b = fit_ml(std::slice::from_ref(&obs), ModelKind::Model2, &grid, &init).unwrap();
    assert_eq!(format!("{:?}", a.estimate), format!("{:?}", b.estimate));
    assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
    assert_eq!(a.history.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.history.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
