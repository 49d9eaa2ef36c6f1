use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Taylor coefficients of `1/Γ(z) = Σ c_k z^k`, `k = 1..=26`.
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Even and odd parts of `1/Γ(1+μ)` for `|μ| ≤ ½`: returns
/// `(gam1, gam2)` with `gam1 = (1/Γ(1−μ) − 1/Γ(1+μ)) / 2μ` and
/// `gam2 = (1/Γ(1−μ) + 1/Γ(1+μ)) / 2`.
fn temme_gammas(mu: f64) -> (f64, f64) {
    let m2 = mu * mu;
    let (mut even, mut odd) = (0.0, 0.0);
    // 1/Γ(1+μ) = Σ c_{k+1} μ^k
    for k in (0..RGAMMA.len()).rev() {
        if k % 2 == 0 {
            even = even * m2 + RGAMMA[k];
        } else {
            odd = odd * m2 + RGAMMA[k];
        }
    }
    (-odd, even)
}

/// Modified Bessel function of the second kind `K_ν(x)` for `ν ≥ 0`, `x > 0`.
///
/// Temme's series for `x < 2`, Steed's continued fraction otherwise, then
/// upward recurrence in the order.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("bessel_k needs x > 0, got {x}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::domain(format!("bessel_k needs nu >= 0, got {nu}")));
    }
    const EPS: f64 = 1e-16;
    const MAXIT: usize = 10_000;
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    let (mut kmu, mut k1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2) = temme_gammas(mu);
        let gampl = gam2 - mu * gam1;
        let gammi = gam2 + mu * gam1;
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..=MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::domain("bessel_k series did not converge"));
        }
        kmu = sum;
        k1 = sum1 * xi2;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 1..=MAXIT {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::domain("bessel_k continued fraction did not converge"));
        }
        h *= a1;
        kmu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        k1 = kmu * (mu + x + 0.5 - h) * xi;
    }
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
    }
    Ok(kmu)
}

/// Stationary Matérn covariance of `(κ² − Δ)^{α/2} u = W` on `ℝ^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaternReference {
    pub kappa: f64,
    pub alpha: f64,
    pub dim: usize,
}

impl MaternReference {
    pub fn new(kappa: f64, alpha: f64, dim: usize) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
        }
        if dim == 0 {
            return Err(Error::arg("dimension must be at least 1"));
        }
        let nu = alpha - dim as f64 / 2.0;
        if !(nu > 0.0) {
            return Err(Error::domain(format!(
                "smoothness alpha - d/2 = {nu} must be positive for a finite variance"
            )));
        }
        Ok(MaternReference { kappa, alpha, dim })
    }

    pub fn nu(&self) -> f64 {
        self.alpha - self.dim as f64 / 2.0
    }

    /// Marginal variance `Γ(ν) / (Γ(α) (4π)^{d/2} κ^{2ν})`.
    pub fn variance(&self) -> f64 {
        let nu = self.nu();
        libm::tgamma(nu)
            / (libm::tgamma(self.alpha) * (4.0 * PI).powf(self.dim as f64 / 2.0) * self.kappa.powf(2.0 * nu))
    }

    /// Correlation `2^{1−ν}/Γ(ν) (κr)^ν K_ν(κr)`, equal to 1 at `r = 0`.
    pub fn correlation(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::arg(format!("distance must be non-negative, got {r}")));
        }
        if r == 0.0 {
            return Ok(1.0);
        }
        let nu = self.nu();
        let kr = self.kappa * r;
        Ok(2f64.powf(1.0 - nu) / libm::tgamma(nu) * kr.powf(nu) * bessel_k(nu, kr)?)
    }

    pub fn covariance(&self, r: f64) -> Result<f64> {
        Ok(self.variance() * self.correlation(r)?)
    }

    /// Distance `√(8ν)/κ` at which the correlation is close to 0.13.
    pub fn practical_range(&self) -> f64 {
        (8.0 * self.nu()).sqrt() / self.kappa
    }
}

/// Matérn covariance at each distance in `r`.
pub fn matern_reference(r: &[f64], kappa: f64, alpha: f64, dim: usize) -> Result<Vec<f64>> {
    let m = MaternReference::new(kappa, alpha, dim)?;
    r.iter().map(|&ri| m.covariance(ri)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_gamma_series() {
        for mu in [-0.5, -0.3, -1e-3, 0.0, 0.2, 0.5] {
            let (g1, g2) = temme_gammas(mu);
            let plus = g2 - mu * g1;
            assert!((plus - 1.0 / libm::tgamma(1.0 + mu)).abs() < 1e-13, "mu={mu}");
        }
    }

    #[test]
    fn half_order_closed_form() {
        for x in [0.05, 0.7, 1.9, 2.1, 9.0, 40.0] {
            let exact = (PI / (2.0 * x)).sqrt() * (-x).exp();
            let k = bessel_k(0.5, x).unwrap();
            assert!(((k - exact) / exact).abs() < 1e-13, "x={x}");
            let k32 = bessel_k(1.5, x).unwrap();
            let exact32 = exact * (1.0 + 1.0 / x);
            assert!(((k32 - exact32) / exact32).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_k(1.0, 0.0).is_err());
        assert!(MaternReference::new(1.0, 1.0, 2).is_err());
        assert!(MaternReference::new(1.0, 2.0, 2).is_ok());
    }

    #[test]
    fn range_correlation() {
        let m = MaternReference::new(0.3, 2.0, 2).unwrap();
        let rho = m.correlation(m.practical_range()).unwrap();
        assert!((rho - 0.139_667).abs() < 1e-5, "{rho}");
    }
}
