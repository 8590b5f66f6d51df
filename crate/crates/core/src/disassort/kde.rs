use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Evaluation points per density.
pub const GRID_POINTS: usize = 512;
/// Lower bound on the bandwidth; degenerate samples fall back to it.
pub const MIN_BANDWIDTH: f64 = 1e-3;
/// Grid padding on each side, in bandwidths.
const GRID_PAD: f64 = 3.0;
/// Kernels are truncated beyond this many bandwidths (relative weight < 1e-13).
const KERNEL_CUTOFF: f64 = 8.0;
/// Densities are floored here inside logarithms.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Evenly spaced evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo || points < 2 {
            return Err(Error::Validation(format!(
                "invalid grid [{lo}, {hi}] with {points} points"
            )));
        }
        Ok(Grid { lo, hi, points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    /// Trapezoid rule over values sampled on this grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let inner: f64 = values.windows(2).map(|w| w[0] + w[1]).sum();
        0.5 * inner * self.step()
    }
}

/// A Gaussian KDE sampled on a grid and rescaled to unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeDensity {
    pub bandwidth: f64,
    pub num_samples: usize,
    pub grid: Grid,
    pub densities: Vec<f64>,
}

impl KdeDensity {
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.densities)
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Validation(format!(
            "density estimation needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("density samples must be finite".into()));
    }
    Ok(())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule, `0.9 * min(std, IQR / 1.34) * n^(-1/5)`, floored.
///
/// A zero IQR with non-zero spread (heavy ties) uses `std` alone instead of
/// collapsing to the floor.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    check_samples(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(bandwidth_sorted(&sorted))
}

fn bandwidth_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    (0.9 * spread * n.powf(-0.2)).max(MIN_BANDWIDTH)
}

/// Grid covering every sample set with `3 h_max` of padding.
pub fn shared_grid(sets: &[&[f64]], bandwidth: f64, points: usize) -> Result<Grid> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in sets {
        for &v in *s {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Grid::new(lo - GRID_PAD * bandwidth, hi + GRID_PAD * bandwidth, points)
}

/// Fits a KDE on `grid`, or on its own padded range when `grid` is `None`.
pub fn kde_fit(samples: &[f64], grid: Option<&Grid>) -> Result<KdeDensity> {
    check_samples(samples)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = bandwidth_sorted(&sorted);
    let grid = match grid {
        Some(g) => g.clone(),
        None => shared_grid(&[&sorted], h, GRID_POINTS)?,
    };
    evaluate(&sorted, h, grid)
}

fn evaluate(sorted: &[f64], h: f64, grid: Grid) -> Result<KdeDensity> {
    let norm = 1.0 / (sorted.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let reach = KERNEL_CUTOFF * h;
    let mut densities = par::map_range(grid.points, |i| {
        let x = grid.point(i);
        let start = sorted.partition_point(|&s| s < x - reach);
        let end = sorted.partition_point(|&s| s <= x + reach);
        let total: f64 = sorted[start..end]
            .iter()
            .map(|&s| {
                let z = (x - s) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        total * norm
    });
    let mass = grid.integrate(&densities);
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Numerical(format!(
            "density has mass {mass} on [{}, {}]; the grid is too coarse for bandwidth {h}",
            grid.lo, grid.hi
        )));
    }
    // grid sampling of a narrow kernel mis-states the mass; rescale to 1
    for d in &mut densities {
        *d /= mass;
    }
    Ok(KdeDensity {
        bandwidth: h,
        num_samples: sorted.len(),
        grid,
        densities,
    })
}

/// Fits two KDEs on one grid spanning both sample sets.
pub fn kde_pair(a: &[f64], b: &[f64]) -> Result<(KdeDensity, KdeDensity)> {
    check_samples(a)?;
    check_samples(b)?;
    let mut sa = a.to_vec();
    sa.sort_by(f64::total_cmp);
    let mut sb = b.to_vec();
    sb.sort_by(f64::total_cmp);
    let ha = bandwidth_sorted(&sa);
    let hb = bandwidth_sorted(&sb);
    let grid = shared_grid(&[&sa, &sb], ha.max(hb), GRID_POINTS)?;
    Ok((evaluate(&sa, ha, grid.clone())?, evaluate(&sb, hb, grid)?))
}

/// Jensen-Shannon distance in bits: `sqrt(KL(p||m)/2 + KL(q||m)/2)`.
pub fn js_distance(p: &KdeDensity, q: &KdeDensity) -> Result<f64> {
    if p.grid != q.grid {
        return Err(Error::Validation("densities must share one grid".into()));
    }
    let term = |a: f64, m: f64| {
        if a <= 0.0 {
            0.0
        } else {
            a * (a.max(DENSITY_FLOOR) / m.max(DENSITY_FLOOR)).log2()
        }
    };
    // each pointwise sum is symmetric in (p, q), so the result is too
    let integrand: Vec<f64> = p
        .densities
        .iter()
        .zip(&q.densities)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * (term(a, m) + term(b, m))
        })
        .collect();
    let js = p.grid.integrate(&integrand);
    if !js.is_finite() {
        return Err(Error::Numerical("JS divergence is not finite".into()));
    }
    Ok(js.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_samples_use_floor_bandwidth() {
        let k = kde_fit(&[0.5; 10], None).unwrap();
        assert_eq!(k.bandwidth, MIN_BANDWIDTH);
        assert_abs_diff_eq!(k.mass(), 1.0, epsilon = 1e-12);
        let peak = (0..k.grid.points)
            .max_by(|&a, &b| k.densities[a].total_cmp(&k.densities[b]))
            .unwrap();
        assert_abs_diff_eq!(k.grid.point(peak), 0.5, epsilon = k.grid.step());
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(quantile(&v, 0.25), 1.75);
        assert_abs_diff_eq!(quantile(&v, 0.75), 3.25);
    }

    #[test]
    fn bandwidth_matches_hand_evaluation() {
        // std = 1.2910, IQR = 1.5 -> min(1.2910, 1.1194) = 1.1194
        let h = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(h, 0.9 * (1.5 / 1.34) * 4f64.powf(-0.2), epsilon = 1e-12);
    }

    #[test]
    fn tied_quartiles_fall_back_to_std() {
        let mut s = vec![0.0; 20];
        s.push(1.0);
        let h = silverman_bandwidth(&s).unwrap();
        assert!(h > MIN_BANDWIDTH);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(kde_fit(&[1.0], None).is_err());
        assert!(kde_fit(&[1.0, f64::NAN], None).is_err());
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let s: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let (p, q) = kde_pair(&s, &s).unwrap();
        assert!(js_distance(&p, &q).unwrap() <= 1e-6);
    }

    #[test]
    fn distance_is_symmetric_and_bounded() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64).sqrt()).collect();
        let b: Vec<f64> = (0..70).map(|i| 3.0 + (i as f64 * 0.1).cos()).collect();
        let (p, q) = kde_pair(&a, &b).unwrap();
        let d1 = js_distance(&p, &q).unwrap();
        let (q2, p2) = kde_pair(&b, &a).unwrap();
        let d2 = js_distance(&q2, &p2).unwrap();
        assert_eq!(d1, d2);
        assert!((0.0..=1.0 + 1e-6).contains(&d1));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let p = kde_fit(&[0.0, 1.0, 2.0], None).unwrap();
        let q = kde_fit(&[0.0, 1.0, 5.0], None).unwrap();
        assert!(js_distance(&p, &q).is_err());
    }
}
