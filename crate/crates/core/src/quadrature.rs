//! Quadrature on the reference triangle `{(xi, eta): xi, eta >= 0, xi + eta <= 1}`
//! and on the unit interval.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[0, 1]`; weights sum to 1.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            // map [-1, 1] -> [0, 1]
            nodes[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { nodes, weights }
    }

    /// Smallest rule exact for degree `d`.
    pub fn with_degree(d: usize) -> Self {
        Self::new(d / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `(P_n(x), P_n'(x))`
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Triangle rule; weights sum to the reference area `1/2`.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Smallest tabulated symmetric rule of degree at least `d`; falls back to
    /// a collapsed Gauss rule above degree 6.
    pub fn with_degree(d: usize) -> Self {
        match d {
            0 | 1 => Self::from_orbits(1, &[(1.0, Orbit::Centroid)]),
            2 => Self::from_orbits(2, &[(1.0 / 3.0, Orbit::Three(1.0 / 6.0))]),
            3 | 4 => Self::from_orbits(
                4,
                &[
                    (0.223_381_589_678_011, Orbit::Three(0.445_948_490_915_965)),
                    (0.109_951_743_655_322, Orbit::Three(0.091_576_213_509_771)),
                ],
            ),
            5 | 6 => Self::from_orbits(
                6,
                &[
                    (0.116_786_275_726_379, Orbit::Three(0.249_286_745_170_910)),
                    (0.050_844_906_370_207, Orbit::Three(0.063_089_014_491_502)),
                    (
                        0.082_851_075_618_374,
                        Orbit::Six(0.053_145_049_844_817, 0.310_352_451_033_784),
                    ),
                ],
            ),
            _ => Self::collapsed_gauss(d / 2 + 1),
        }
    }

    /// Duffy-collapsed tensor Gauss rule with `n^2` points, exact to degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let g = GaussLegendre::new(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&u, &wu) in g.nodes.iter().zip(&g.weights) {
            for (&v, &wv) in g.nodes.iter().zip(&g.weights) {
                points.push([u, v * (1.0 - u)]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    // Weights given normalized to total 1; scaled to the reference area here.
    fn from_orbits(degree: usize, orbits: &[(f64, Orbit)]) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(w, orbit) in orbits {
            let bary: Vec<[f64; 3]> = match orbit {
                Orbit::Centroid => vec![[1.0 / 3.0; 3]],
                Orbit::Three(a) => {
                    let b = 1.0 - 2.0 * a;
                    vec![[a, a, b], [a, b, a], [b, a, a]]
                }
                Orbit::Six(a, b) => {
                    let c = 1.0 - a - b;
                    vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
                }
            };
            for l in bary {
                points.push([l[1], l[2]]);
                weights.push(0.5 * w);
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy)]
enum Orbit {
    Centroid,
    Three(f64),
    Six(f64, f64),
}
