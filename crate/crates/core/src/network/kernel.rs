use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type KernelFn = dyn Fn(&[f64], &[f64], f64, f64) -> f64 + Send + Sync;

/// User supplied conductance. It must be symmetric under exchanging the two
/// endpoints and vanish beyond `range`.
#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    pub range: f64,
    pub func: Arc<KernelFn>,
}

/// Edge conductance `c(x, y, E_x, E_y)` of the resistor network.
#[derive(Clone)]
pub enum ConductanceKernel {
    /// `exp(-(2/gamma)|x-y| - (beta/2)(|E_x| + |E_y| + |E_x - E_y|))`.
    MillerAbrahams { beta: f64, gamma: f64 },
    /// `weight` for `0 < |x-y| <= range`, zero otherwise.
    NearestNeighbor { weight: f64, range: f64 },
    Custom(CustomKernel),
}

impl fmt::Debug for ConductanceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MillerAbrahams { beta, gamma } => {
                write!(f, "MillerAbrahams {{ beta: {beta}, gamma: {gamma} }}")
            }
            Self::NearestNeighbor { weight, range } => {
                write!(f, "NearestNeighbor {{ weight: {weight}, range: {range} }}")
            }
            Self::Custom(k) => write!(f, "Custom({}, range {})", k.name, k.range),
        }
    }
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn unit_sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // 2 pi^{d/2} / Gamma(d/2) via the recursion S_{d} = 2 pi S_{d-2} / (d-2)
            let even = d & 1 == 0;
            let mut s = if even { 2.0 * PI } else { 4.0 * PI };
            let mut k = if even { 2 } else { 3 };
            while k < d {
                s *= 2.0 * PI / k as f64;
                k += 2;
            }
            s
        }
    }
}

fn ball_volume(d: usize, r: f64) -> f64 {
    unit_sphere_area(d) * r.powi(d as i32) / d as f64
}

/// `int_r^inf rho^n e^{-a rho} d rho = e^{-a r} sum_k n!/k! r^k / a^{n-k+1}`.
fn upper_gamma_integral(n: usize, a: f64, r: f64) -> f64 {
    let mut coeff = 1.0 / a;
    let mut sum = 0.0;
    for k in (0..=n).rev() {
        sum += coeff * r.powi(k as i32);
        coeff *= k as f64 / a;
    }
    sum * (-a * r).exp()
}

impl ConductanceKernel {
    pub fn miller_abrahams(beta: f64, gamma: f64) -> Self {
        ConductanceKernel::MillerAbrahams { beta, gamma }
    }

    pub fn nearest_neighbor(weight: f64, range: f64) -> Self {
        ConductanceKernel::NearestNeighbor { weight, range }
    }

    pub fn custom<F>(name: &str, range: f64, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64, f64) -> f64 + Send + Sync + 'static,
    {
        ConductanceKernel::Custom(CustomKernel { name: name.to_string(), range, func: Arc::new(f) })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::MillerAbrahams { beta, gamma } => {
                if !(*beta >= 0.0 && beta.is_finite()) {
                    return Err(invalid(format!("beta={beta} must be >= 0")));
                }
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(invalid(format!("gamma={gamma} must be > 0")));
                }
            }
            Self::NearestNeighbor { weight, range } => {
                if !(*weight > 0.0 && weight.is_finite() && *range > 0.0) {
                    return Err(invalid("nearest-neighbour kernel needs weight > 0 and range > 0"));
                }
            }
            Self::Custom(k) => {
                if !(k.range > 0.0) {
                    return Err(invalid("custom kernel needs a positive range"));
                }
            }
        }
        Ok(())
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            Self::MillerAbrahams { beta, .. } => Some(*beta),
            _ => None,
        }
    }

    pub fn localization_length(&self) -> Option<f64> {
        match self {
            Self::MillerAbrahams { gamma, .. } => Some(*gamma),
            _ => None,
        }
    }

    /// Same kernel at a different inverse temperature. Non-MA kernels are
    /// returned unchanged.
    pub fn with_beta(&self, beta: f64) -> Self {
        match self {
            Self::MillerAbrahams { gamma, .. } => Self::MillerAbrahams { beta, gamma: *gamma },
            other => other.clone(),
        }
    }

    pub fn conductance(&self, x: &[f64], y: &[f64], ex: f64, ey: f64) -> f64 {
        if x == y {
            return 0.0;
        }
        match self {
            Self::MillerAbrahams { beta, gamma } => {
                let r = distance(x, y);
                Self::ma_weight(*beta, *gamma, r, ex, ey)
            }
            Self::NearestNeighbor { weight, range } => {
                if distance(x, y) <= *range {
                    *weight
                } else {
                    0.0
                }
            }
            Self::Custom(k) => (k.func)(x, y, ex, ey),
        }
    }

    #[inline]
    pub(crate) fn ma_weight(beta: f64, gamma: f64, r: f64, ex: f64, ey: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        (-(2.0 / gamma) * r - 0.5 * beta * (ex.abs() + ey.abs() + (ex - ey).abs())).exp()
    }

    /// Radius beyond which every weight is below `tol` (or exactly zero).
    pub fn cutoff_radius(&self, tol: f64) -> f64 {
        match self {
            Self::MillerAbrahams { gamma, .. } => 0.5 * gamma * (1.0 / tol).ln(),
            Self::NearestNeighbor { range, .. } => *range,
            Self::Custom(k) => k.range,
        }
    }

    /// Expected total weight a node sends beyond distance `r`, for a ground
    /// process of intensity `density` in dimension `d`. Mark factors are
    /// bounded by one.
    pub fn tail_mass(&self, r: f64, density: f64, d: usize) -> f64 {
        if !r.is_finite() {
            return 0.0;
        }
        match self {
            Self::MillerAbrahams { gamma, .. } => {
                density * unit_sphere_area(d) * upper_gamma_integral(d - 1, 2.0 / gamma, r.max(0.0))
            }
            Self::NearestNeighbor { weight, range } => {
                if r >= *range {
                    0.0
                } else {
                    weight * density * (ball_volume(d, *range) - ball_volume(d, r.max(0.0)))
                }
            }
            Self::Custom(k) => {
                if r >= k.range {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Serializable kernel description used by experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    MillerAbrahams { beta: f64, gamma: f64 },
    NearestNeighbor { weight: f64, range: f64 },
}

impl From<&KernelSpec> for ConductanceKernel {
    fn from(spec: &KernelSpec) -> Self {
        match *spec {
            KernelSpec::MillerAbrahams { beta, gamma } => Self::MillerAbrahams { beta, gamma },
            KernelSpec::NearestNeighbor { weight, range } => Self::NearestNeighbor { weight, range },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coincident_points_have_zero_conductance() {
        let k = ConductanceKernel::miller_abrahams(1.0, 1.0);
        assert_eq!(k.conductance(&[0.3, 0.1], &[0.3, 0.1], 0.2, -0.5), 0.0);
    }

    #[test]
    fn ma_closed_forms() {
        let k = ConductanceKernel::miller_abrahams(0.0, 2.0);
        let c = k.conductance(&[0.0, 0.0], &[0.6, 0.8], 0.9, -0.4);
        assert!((c - (-1.0f64).exp()).abs() < 1e-15);
        assert!((c - 0.3678794).abs() < 1e-7);

        let (beta, gamma, e) = (1.3, 0.7, -0.45);
        let k = ConductanceKernel::miller_abrahams(beta, gamma);
        let c = k.conductance(&[1.0], &[3.5], e, e);
        let expected = (-2.0 * 2.5 / gamma - beta * e.abs()).exp();
        assert!((c - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn tail_mass_matches_quadrature() {
        let k = ConductanceKernel::miller_abrahams(0.0, 1.3);
        for d in 1..=3 {
            let r0 = 2.0;
            let n = 400_000;
            let h = 60.0 / n as f64;
            let quad: f64 = (0..n)
                .map(|i| {
                    let rho = r0 + (i as f64 + 0.5) * h;
                    unit_sphere_area(d) * rho.powi(d as i32 - 1) * (-2.0 * rho / 1.3).exp() * h
                })
                .sum();
            let t = k.tail_mass(r0, 1.0, d);
            assert!((t - quad).abs() < 1e-6 * quad, "d={d}: {t} vs {quad}");
        }
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    fn point() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-20.0f64..20.0, 2)
    }

    proptest! {
        #[test]
        fn ma_is_symmetric(x in point(), y in point(), ex in -1.0f64..1.0, ey in -1.0f64..1.0,
                           beta in 0.0f64..10.0, gamma in 0.1f64..3.0) {
            let k = ConductanceKernel::miller_abrahams(beta, gamma);
            prop_assert_eq!(k.conductance(&x, &y, ex, ey), k.conductance(&y, &x, ey, ex));
        }

        #[test]
        fn ma_is_positive_off_diagonal(x in point(), y in point(), ex in -1.0f64..1.0, ey in -1.0f64..1.0) {
            prop_assume!(x != y && distance(&x, &y) < 50.0);
            let k = ConductanceKernel::miller_abrahams(2.0, 1.0);
            prop_assert!(k.conductance(&x, &y, ex, ey) > 0.0);
        }

        #[test]
        fn ma_is_nonincreasing_in_beta(x in point(), y in point(), ex in -1.0f64..1.0, ey in -1.0f64..1.0,
                                       b1 in 0.0f64..5.0, db in 0.0f64..5.0) {
            let lo = ConductanceKernel::miller_abrahams(b1, 1.0).conductance(&x, &y, ex, ey);
            let hi = ConductanceKernel::miller_abrahams(b1 + db, 1.0).conductance(&x, &y, ex, ey);
            prop_assert!(hi <= lo);
        }
    }
}
