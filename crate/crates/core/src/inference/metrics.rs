use crate::error::{Error, Result};

/// `‖estimate − truth‖₂ / ‖truth‖₂`.
pub fn relative_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::arg(format!("lengths differ: {} vs {}", estimate.len(), truth.len())));
    }
    let den: f64 = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::domain("relative error against a zero truth"));
    }
    let num: f64 = estimate.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Which part of a stacked multi-field vector to score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorScope {
    Joint,
    /// Zero-based component field.
    Field(usize),
}

pub fn relative_error_scoped(estimate: &[f64], truth: &[f64], n_fields: usize, scope: ErrorScope) -> Result<f64> {
    match scope {
        ErrorScope::Joint => relative_error(estimate, truth),
        ErrorScope::Field(k) => {
            if n_fields == 0 || truth.len() % n_fields != 0 || k >= n_fields {
                return Err(Error::arg(format!("field {k} of {n_fields} in a vector of length {}", truth.len())));
            }
            let n = truth.len() / n_fields;
            let s = k * n..(k + 1) * n;
            relative_error(estimate.get(s.clone()).ok_or_else(|| Error::arg("estimate too short"))?, &truth[s])
        }
    }
}

/// `0.9 min(sd, IQR/1.34) n^(−1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::arg("bandwidth needs at least two samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::domain("samples have zero spread"));
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate at `points`.
pub fn gaussian_kde(samples: &[f64], points: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if samples.is_empty() || !(bandwidth > 0.0) {
        return Err(Error::arg("kde needs samples and a positive bandwidth"));
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    Ok(points
        .iter()
        .map(|x| norm * samples.iter().map(|s| (-0.5 * ((x - s) / bandwidth).powi(2)).exp()).sum::<f64>())
        .collect())
}

/// Number of strict local maxima of a sampled curve.
pub fn count_modes(values: &[f64]) -> usize {
    values.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}
