//! Gauss-Jacobi quadrature rules.
//!
//! Nodes and weights for the weight function (1 - x)^alpha (1 + x)^beta on
//! [-1, 1], computed with the Golub-Welsch algorithm: the three-term
//! recurrence coefficients of the Jacobi polynomials form a symmetric
//! tridiagonal matrix whose eigenvalues are the nodes and whose first
//! eigenvector components give the weights. The eigenproblem is solved with
//! an implicit-shift QL sweep; only the first row of the eigenvector matrix
//! is accumulated.
//!
//! `beta = 0` yields plain Gauss-Legendre, which is what the regular
//! (singularity-free) subintervals of the compound Schwarz-Christoffel rule
//! use.

use crate::error::{Error, Result};

/// A quadrature rule on [-1, 1] with weight (1 - x)^alpha (1 + x)^beta.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    pub alpha: f64,
    pub beta: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    /// Builds an `n`-point rule. Requires `n >= 2` and `alpha, beta > -1`.
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("quadrature order must be at least 2".into()));
        }
        if !(alpha > -1.0) || !(beta > -1.0) {
            return Err(Error::Domain(format!(
                "Jacobi exponents must exceed -1 (got alpha={alpha}, beta={beta})"
            )));
        }
        let ab = alpha + beta;
        // Diagonal and squared off-diagonal recurrence coefficients.
        let mut diag = vec![0.0; n];
        let mut offsq = vec![0.0; n];
        diag[0] = (beta - alpha) / (ab + 2.0);
        for k in 1..n {
            let kf = k as f64;
            let den = 2.0 * kf + ab;
            diag[k] = (beta * beta - alpha * alpha) / (den * (den + 2.0));
            offsq[k] = if k == 1 {
                4.0 * (alpha + 1.0) * (beta + 1.0) / ((ab + 2.0) * (ab + 2.0) * (ab + 3.0))
            } else {
                4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab)
                    / (den * den * (den + 1.0) * (den - 1.0))
            };
        }
        let mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0)
            + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0);
        let mu0 = mu0.exp();

        let mut d = diag;
        let mut e: Vec<f64> = offsq.iter().map(|&s| s.sqrt()).collect();
        e.rotate_left(1); // e[i] couples d[i] and d[i+1]
        let mut z = vec![0.0; n];
        z[0] = 1.0;
        tql_first_row(&mut d, &mut e, &mut z)?;

        let mut pairs: Vec<(f64, f64)> = d
            .iter()
            .zip(z.iter())
            .map(|(&x, &zz)| (x, mu0 * zz * zz))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self {
            alpha,
            beta,
            nodes,
            weights,
        })
    }

    /// Gauss-Legendre rule (alpha = beta = 0).
    pub fn legendre(n: usize) -> Result<Self> {
        Self::new(n, 0.0, 0.0)
    }
}

/// Implicit-shift QL for a symmetric tridiagonal matrix, accumulating the
/// first eigenvector row in `z`. `d` holds the diagonal (replaced by the
/// eigenvalues), `e` the subdiagonal in `e[0..n-1]`.
fn tql_first_row(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::Numerical(
                    "tridiagonal QL failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(if g >= 0.0 { 1.0 } else { -1.0 }));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Natural log of the gamma function (Lanczos approximation), valid for
/// positive arguments.
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn legendre_5_matches_tabulated() {
        let rule = GaussJacobi::legendre(5).unwrap();
        let x = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683_1,
            0.0,
            0.538_469_310_105_683_1,
            0.906_179_845_938_664,
        ];
        let w = [
            0.236_926_885_056_189_08,
            0.478_628_670_499_366_47,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_47,
            0.236_926_885_056_189_08,
        ];
        for i in 0..5 {
            close(rule.nodes[i], x[i], 1e-14);
            close(rule.weights[i], w[i], 1e-14);
        }
    }

    #[test]
    fn jacobi_5_alpha0_beta1_matches_tabulated() {
        let rule = GaussJacobi::new(5, 0.0, 1.0).unwrap();
        let x = [
            -0.802_929_828_402_347_2,
            -0.390_928_546_707_272_2,
            0.0,
            0.603_973_164_252_783_7,
            0.920_380_285_897_062_6,
        ];
        let w = [
            0.062_991_658_086_769_1,
            0.295_635_480_290_466_66,
            0.585_547_948_338_679_2,
            0.668_698_552_377_478_2,
            0.387_126_360_906_606_74,
        ];
        for i in 0..5 {
            close(rule.nodes[i], x[i], 1e-13);
            close(rule.weights[i], w[i], 1e-13);
        }
    }

    #[test]
    fn weight_sums_match_zeroth_moment() {
        // sum(w) = integral of (1-x)^a (1+x)^b over [-1,1]
        for &(a, b) in &[(0.0, -0.5), (0.0, 1.0), (-0.25, -0.75), (0.0, 0.0)] {
            let rule = GaussJacobi::new(12, a, b).unwrap();
            let total: f64 = rule.weights.iter().sum();
            let exact = ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0)
                + ln_gamma(b + 1.0)
                - ln_gamma(a + b + 2.0))
            .exp();
            close(total, exact, 1e-13 * exact.abs());
        }
    }

    #[test]
    fn polynomial_exactness() {
        // An n-point rule integrates x^k exactly for k <= 2n-1.
        let rule = GaussJacobi::new(6, 0.0, -0.5).unwrap();
        for k in 0..=11u32 {
            let approx: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| w * x.powi(k as i32))
                .sum();
            // Reference by very fine midpoint rule with the singular factor.
            let m = 4_000_000;
            let mut exact = 0.0;
            for j in 0..m {
                let x = -1.0 + (j as f64 + 0.5) * (2.0 / m as f64);
                exact += (1.0 + x).powf(-0.5) * x.powi(k as i32) * (2.0 / m as f64);
            }
            close(approx, exact, 2e-4);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GaussJacobi::new(1, 0.0, 0.0).is_err());
        assert!(GaussJacobi::new(8, -1.0, 0.0).is_err());
        assert!(GaussJacobi::new(8, 0.0, -1.5).is_err());
    }
}
