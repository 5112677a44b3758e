//! Closed-form field presets used by the verification campaigns and the CLI.
//!
//! All presets are smooth on the closed domain; the cosine family (and the
//! seeded random cosine series built on it) has zero derivative at both ends
//! of an interval, so it is compatible with the zero-flux condition.

use crate::extension::GridFunction;
use crate::geometry::{Domain, Grid};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub enum Preset1d {
    Const { c: f64 },
    /// amp * cos(k pi t) with t the normalized coordinate across the interval.
    Cosine { k: u32, amp: f64 },
    Gaussian { center: f64, width: f64, amp: f64 },
    /// Polynomial in the raw coordinate, lowest degree first.
    Poly { coeffs: Vec<f64> },
    /// Seeded cosine series with 1/(1+k^2) coefficient decay.
    RandomFourier { seed: u64, modes: u32, amp: f64 },
}

/// Coefficients of the seeded cosine series, c_k ~ U[-1, 1] / (1 + k^2).
pub fn random_fourier_coeffs(seed: u64, modes: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=modes)
        .map(|k| rng.gen_range(-1.0..1.0) / (1.0 + (k * k) as f64))
        .collect()
}

impl Preset1d {
    pub fn eval(&self, domain: &Domain, x: f64) -> Result<f64> {
        let (a, b) = match domain {
            Domain::Interval { a, b } => (*a, *b),
            d => {
                return Err(Error::DimensionUnsupported { op: "preset eval", dim: d.dim() });
            }
        };
        let t = (x - a) / (b - a);
        Ok(match self {
            Preset1d::Const { c } => *c,
            Preset1d::Cosine { k, amp } => amp * (*k as f64 * std::f64::consts::PI * t).cos(),
            Preset1d::Gaussian { center, width, amp } => {
                let z = (x - center) / width;
                amp * (-0.5 * z * z).exp()
            }
            Preset1d::Poly { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
            }
            Preset1d::RandomFourier { seed, modes, amp } => {
                let coeffs = random_fourier_coeffs(*seed, *modes);
                amp * coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| c * (k as f64 * std::f64::consts::PI * t).cos())
                    .sum::<f64>()
            }
        })
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Result<GridFunction> {
        // evaluate once per node; RandomFourier caches its coefficients
        let coeffs = match self {
            Preset1d::RandomFourier { seed, modes, .. } => {
                Some(random_fourier_coeffs(*seed, *modes))
            }
            _ => None,
        };
        let domain = grid.domain().clone();
        let vals: Result<Vec<f64>> = grid
            .interior_nodes()
            .iter()
            .map(|p| match (self, &coeffs) {
                (Preset1d::RandomFourier { amp, .. }, Some(c)) => {
                    let (a, b) = match &domain {
                        Domain::Interval { a, b } => (*a, *b),
                        _ => unreachable!("checked in eval"),
                    };
                    let t = (p.scalar() - a) / (b - a);
                    Ok(amp
                        * c.iter()
                            .enumerate()
                            .map(|(k, &ck)| ck * (k as f64 * std::f64::consts::PI * t).cos())
                            .sum::<f64>())
                }
                _ => self.eval(&domain, p.scalar()),
            })
            .collect();
        GridFunction::new(grid.clone(), vals?)
    }
}
