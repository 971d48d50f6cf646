//! Efficacy boundaries for a group-sequential Z test.
//!
//! The standardized statistics at looks n_1 < … < n_T form a Gaussian vector
//! with Cov(Q_t, Q_t') = sqrt(n_t / n_t') for t ≤ t'. Thresholds are found by
//! the classical recursion: carry the sub-density of Q_t on the continuation
//! region along a grid, push it through the independent Gaussian increment,
//! and solve for the threshold whose crossing mass equals the spending increment.

use super::spending::hsd_spending;
use crate::stats::{normal_pdf, normal_quantile, normal_sf};
use serde::Serialize;
use thiserror::Error;

const GRID: usize = 1024;
const LOWER: f64 = -8.0;
/// Threshold reported when a look has (numerically) nothing left to spend.
pub const CAPPED_THRESHOLD: f64 = 20.0;
const MIN_INCREMENT: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("invalid schedule: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySchedule {
    pub n: Vec<usize>,
    /// Cumulative spending α*(r_t).
    pub spent: Vec<f64>,
    /// ᾱ(r_t) = α*(r_t) − α*(r_{t−1}).
    pub increments: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// True where the increment was below 1e-10 and the threshold capped.
    pub capped: Vec<bool>,
}

impl BoundarySchedule {
    pub fn stages(&self) -> usize {
        self.thresholds.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,n,spent,increment,threshold,capped\n");
        for t in 0..self.stages() {
            s.push_str(&format!(
                "{},{},{:.10},{:.10},{:.6},{}\n",
                t + 1,
                self.n[t],
                self.spent[t],
                self.increments[t],
                self.thresholds[t],
                self.capped[t] as u8
            ));
        }
        s
    }
}

struct SubDensity {
    z: Vec<f64>,
    w: Vec<f64>,
    f: Vec<f64>,
}

impl SubDensity {
    fn on_grid(upper: f64, f: impl Fn(f64) -> f64) -> Self {
        let h = (upper - LOWER) / (GRID - 1) as f64;
        let z: Vec<f64> = (0..GRID).map(|i| LOWER + h * i as f64).collect();
        let w = (0..GRID)
            .map(|i| if i == 0 || i == GRID - 1 { 0.5 * h } else { h })
            .collect();
        let f = z.iter().map(|&x| f(x)).collect();
        Self { z, w, f }
    }

    /// P(previous looks continue, next statistic > c).
    fn crossing_mass(&self, c: f64, a: f64, s: f64) -> f64 {
        self.z
            .iter()
            .zip(&self.w)
            .zip(&self.f)
            .map(|((u, w), f)| w * f * normal_sf((c - a * u) / s))
            .sum()
    }
}

pub fn boundary_thresholds(n_schedule: &[usize], beta_e: f64, alpha: f64) -> Result<BoundarySchedule, BoundaryError> {
    if n_schedule.is_empty() || n_schedule[0] == 0 || n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BoundaryError::Invalid(format!(
            "n_schedule must be positive and strictly increasing: {n_schedule:?}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) || !beta_e.is_finite() {
        return Err(BoundaryError::Invalid(format!("need alpha in (0,1) and finite beta_E, got ({alpha}, {beta_e})")));
    }
    let t_max = n_schedule.len();
    let n_t = *n_schedule.last().unwrap() as f64;
    let spent: Vec<f64> = n_schedule
        .iter()
        .map(|&n| hsd_spending(n as f64 / n_t, beta_e, alpha))
        .collect();
    let increments: Vec<f64> = (0..t_max)
        .map(|t| spent[t] - if t == 0 { 0.0 } else { spent[t - 1] })
        .collect();
    let mut thresholds = Vec::with_capacity(t_max);
    let mut capped = Vec::with_capacity(t_max);

    let (z1, cap1) = if increments[0] < MIN_INCREMENT {
        (CAPPED_THRESHOLD, true)
    } else {
        (normal_quantile(1.0 - increments[0]), false)
    };
    thresholds.push(z1);
    capped.push(cap1);
    let mut dens = SubDensity::on_grid(z1, normal_pdf);

    for t in 1..t_max {
        let (n_prev, n_cur) = (n_schedule[t - 1] as f64, n_schedule[t] as f64);
        let a = (n_prev / n_cur).sqrt();
        let s = ((n_cur - n_prev) / n_cur).sqrt();
        let target = increments[t];
        let (zt, cap) = if target < MIN_INCREMENT {
            (CAPPED_THRESHOLD, true)
        } else {
            // crossing mass is decreasing in c; bisect on a wide bracket
            let (mut lo, mut hi) = (LOWER, CAPPED_THRESHOLD);
            if dens.crossing_mass(lo, a, s) < target {
                return Err(BoundaryError::Invalid(format!(
                    "look {}: spending increment exceeds the remaining continuation mass",
                    t + 1
                )));
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if dens.crossing_mass(mid, a, s) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (0.5 * (lo + hi), false)
        };
        thresholds.push(zt);
        capped.push(cap);
        if t + 1 < t_max {
            let prev = &dens;
            dens = SubDensity::on_grid(zt, |x| {
                prev.z
                    .iter()
                    .zip(&prev.w)
                    .zip(&prev.f)
                    .map(|((u, w), f)| w * f * normal_pdf((x - a * u) / s) / s)
                    .sum()
            });
        }
    }
    Ok(BoundarySchedule {
        n: n_schedule.to_vec(),
        spent,
        increments,
        thresholds,
        capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Gauss–Legendre nodes/weights on [-1, 1] by Newton iteration.
    pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            w[n - 1 - i] = w[i];
        }
        (x, w)
    }

    // Composite Gauss–Legendre on a rectangle of the bivariate normal density.
    fn bvn_rect(ax: f64, bx: f64, ay: f64, by: f64, rho: f64) -> f64 {
        let (gx, gw) = gauss_legendre(20);
        let panels = 60;
        let det = 1.0 - rho * rho;
        let dens = |u: f64, v: f64| {
            (-(u * u - 2.0 * rho * u * v + v * v) / (2.0 * det)).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        let hx = (bx - ax) / panels as f64;
        let hy = (by - ay) / panels as f64;
        let mut total = 0.0;
        for px in 0..panels {
            for (xi, wi) in gx.iter().zip(&gw) {
                let u = ax + hx * (px as f64 + 0.5 + 0.5 * xi);
                for py in 0..panels {
                    for (yj, wj) in gx.iter().zip(&gw) {
                        let v = ay + hy * (py as f64 + 0.5 + 0.5 * yj);
                        total += wi * wj * dens(u, v);
                    }
                }
            }
        }
        total * hx * hy / 4.0
    }

    #[test]
    fn single_look() {
        let b = boundary_thresholds(&[200], 2.0, 0.05).unwrap();
        assert_abs_diff_eq!(b.thresholds[0], 1.6448536269514722, epsilon = 1e-10);
    }

    #[test]
    fn two_looks_match_bivariate_oracle() {
        let b = boundary_thresholds(&[100, 200], 2.0, 0.05).unwrap();
        assert_abs_diff_eq!(b.thresholds[0], normal_quantile(1.0 - b.increments[0]), epsilon = 1e-10);
        // Φ⁻¹(1 − 0.05·(1 − e⁻¹)/(1 − e⁻²)), evaluated independently
        assert_abs_diff_eq!(b.thresholds[0], 1.7921692554871207, epsilon = 1e-9);
        assert_abs_diff_eq!(b.spent[1], 0.05, epsilon = 1e-12);
        // solve P(Q1 <= z1, Q2 > z2) = increment by bisection on the 2-D oracle
        let rho = 0.5f64.sqrt();
        let z1 = b.thresholds[0];
        let (mut lo, mut hi) = (1.0, 3.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if bvn_rect(-9.0, z1, mid, 9.0, rho) > b.increments[1] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((b.thresholds[1] - oracle).abs() < 1e-5, "{} vs {oracle}", b.thresholds[1]);
    }

    #[test]
    fn three_looks_spend_alpha_by_simulation() {
        use crate::rng::rng_from_seed;
        use rand_distr::{Distribution, StandardNormal};
        let n = [60usize, 130, 200];
        let b = boundary_thresholds(&n, -1.0, 0.05).unwrap();
        let mut rng = rng_from_seed(17);
        let reps = 400_000;
        let mut cross = [0usize; 3];
        for _ in 0..reps {
            let mut s = 0.0;
            let mut prev = 0usize;
            for t in 0..3 {
                let inc: f64 = StandardNormal.sample(&mut rng);
                s += inc * ((n[t] - prev) as f64).sqrt();
                prev = n[t];
                if s / (n[t] as f64).sqrt() > b.thresholds[t] {
                    cross[t] += 1;
                    break;
                }
            }
        }
        for t in 0..3 {
            let p = cross[t] as f64 / reps as f64;
            let se = (b.increments[t] / reps as f64).sqrt();
            assert!((p - b.increments[t]).abs() < 4.0 * se, "look {t}: {p} vs {}", b.increments[t]);
        }
    }

    #[test]
    fn tiny_increments_are_capped() {
        let b = boundary_thresholds(&[1, 200], 40.0, 0.05).unwrap();
        assert!(!b.capped[0]);
        let b = boundary_thresholds(&[1, 200], -60.0, 0.05).unwrap();
        assert!(b.capped[0]);
        assert_eq!(b.thresholds[0], CAPPED_THRESHOLD);
        assert!(b.thresholds.iter().all(|z| z.is_finite()));
        assert!(boundary_thresholds(&[100, 100], 1.0, 0.05).is_err());
        assert!(b.to_csv().starts_with("stage,n,spent"));
    }
}
