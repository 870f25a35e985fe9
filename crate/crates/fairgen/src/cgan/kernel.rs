//! Kernel density machinery for the generator's distribution-matching
//! penalty: a Gaussian kernel, the density estimate it induces at each real
//! sample, the dual-variable update that prices discriminator disagreement,
//! and a median-distance bandwidth heuristic.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Discriminator outputs are pulled this far inside (0, 1) before any log, so
/// saturated predictions cannot produce infinities. Matches the clamp used by
/// the cross-entropy loss.
pub const DIS_CLAMP: f64 = 1e-7;

/// Gaussian kernel evaluated at difference vector `u`.
///
/// Unnormalized form: `exp(-|u|^2 / (2 sigma^2))`. With `normalized`, the
/// value is divided by `(2 pi sigma^2)^(d/2)` so it integrates to one over
/// `d` dimensions.
pub fn gaussian_kernel(u: &[f64], sigma: f64, normalized: bool) -> f64 {
    let sq: f64 = u.iter().map(|v| v * v).sum();
    let k = (-sq / (2.0 * sigma * sigma)).exp();
    if normalized {
        k / (2.0 * std::f64::consts::PI * sigma * sigma).powf(u.len() as f64 / 2.0)
    } else {
        k
    }
}

/// Kernel density estimate of the generator's output distribution at each
/// real sample: `p[i] = (1/n2) sum_j k(fake[j] - real[i])`.
///
/// Rows of `fake` and `real` live in the same coordinate space (the
/// generated columns).
pub fn estimate_pgen(fake: &Matrix, real: &Matrix, sigma: f64, normalized: bool) -> Result<Vec<f64>> {
    if fake.cols() != real.cols() {
        return Err(Error::shape("estimate_pgen", fake.shape(), real.shape()));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
    }
    if fake.rows() == 0 {
        return Err(Error::param("fake", "no generated samples"));
    }
    let n2 = fake.rows() as f64;
    let mut diff = vec![0.0; fake.cols()];
    let mut out = Vec::with_capacity(real.rows());
    for i in 0..real.rows() {
        let xi = real.row(i);
        let mut acc = 0.0;
        for j in 0..fake.rows() {
            let yj = fake.row(j);
            for (d, slot) in diff.iter_mut().enumerate() {
                *slot = yj[d] - xi[d];
            }
            acc += gaussian_kernel(&diff, sigma, normalized);
        }
        out.push(acc / n2);
    }
    Ok(out)
}

/// One dual ascent step on the per-sample density targets:
/// `p_new[i] = p[i] - beta * ln(2 (1 - d[i]))` where `d[i]` is the
/// discriminator's output on real sample `i`.
///
/// At `d[i] = 0.5` the log term is exactly zero, so a discriminator that
/// cannot tell real from fake leaves the targets bitwise unchanged.
pub fn dual_update(p: &[f64], dis_real: &[f64], beta: f64) -> Result<Vec<f64>> {
    if p.len() != dis_real.len() {
        return Err(Error::shape("dual_update", format!("{}", p.len()), format!("{}", dis_real.len())));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::param("beta", format!("must be non-negative, got {beta}")));
    }
    Ok(p.iter()
        .zip(dis_real)
        .map(|(&pi, &di)| {
            let d = di.clamp(DIS_CLAMP, 1.0 - DIS_CLAMP);
            pi - beta * (2.0 * (1.0 - d)).ln()
        })
        .collect())
}

/// Kernel bandwidth from the median pairwise Euclidean distance between the
/// given points, floored at `1e-6` so duplicate-heavy batches cannot collapse
/// the kernel. Needs at least two points.
pub fn median_sigma(points: &Matrix) -> Result<f64> {
    if points.rows() < 2 {
        return Err(Error::param("points", "median bandwidth needs at least two points"));
    }
    let mut dists = Vec::with_capacity(points.rows() * (points.rows() - 1) / 2);
    for i in 0..points.rows() {
        for j in (i + 1)..points.rows() {
            let sq: f64 = points
                .row(i)
                .iter()
                .zip(points.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 { dists[mid] } else { (dists[mid - 1] + dists[mid]) / 2.0 };
    Ok(median.max(1e-6))
}
