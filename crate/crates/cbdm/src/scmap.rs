//! Numerical Schwarz-Christoffel maps from the unit disk to a simply
//! connected polygon.
//!
//! The derivative of the map is
//!
//! ```text
//! f(t) = C * prod_k (1 - t / t_k)^(alpha_k - 1)
//! ```
//!
//! with prevertices `t_k` on the unit circle. Each base `1 - t/t_k` stays in
//! the right half-plane for `|t| <= 1`, so principal powers make `f` single
//! valued on the closed disk; the constant factor relative to the
//! `(t_k - t)^(alpha_k - 1)` form is absorbed into `C`.
//!
//! The parameter problem is solved in unconstrained log-gap variables with a
//! damped Newton iteration on side-length ratios plus a conformal-center
//! condition (the anchor `t = 0` maps to a chosen interior point). Integrals
//! use compound Gauss-Jacobi quadrature with the half-distance rule: no
//! subinterval endpoint lies closer to a singular prevertex than half its
//! distance to the nearest other prevertex.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::quad::GaussJacobi;

/// Prevertex gap below which the crowding warning is raised, radians.
pub const CROWDING_GAP: f64 = 1e-6;

const DEFAULT_ORDER: usize = 16;

#[derive(Debug, Clone)]
pub struct DiskMap {
    pub polygon: Polygon,
    /// Prevertex angles, strictly increasing, last entry = 2*pi.
    pub angles: Vec<f64>,
    /// Prevertices `exp(i * angles[k])`, unit modulus.
    pub prevertices: Vec<Complex64>,
    /// Multiplicative constant of the derivative product.
    pub c: Complex64,
    /// Image of the anchor `t = 0` (the conformal center).
    pub center: Complex64,
    /// Quadrature order per subinterval.
    pub order: usize,
    /// Tolerance the parameter problem was solved to.
    pub tolerance: f64,
    /// Smallest prevertex gap, radians.
    pub min_gap: f64,
    /// Raised when `min_gap < CROWDING_GAP`.
    pub crowding: bool,
    /// Max |F(t_k) - z_k| over all vertices, evaluated from the anchor.
    pub vertex_residual: f64,
    /// Max relative side-length mismatch.
    pub side_residual: f64,
    rules: Vec<Option<GaussJacobi>>,
    legendre: GaussJacobi,
    anchors: Vec<(Complex64, Complex64)>,
}

/// Solves the parameter problem with the polygon centroid as conformal
/// center. `tolerance` bounds the side-length ratio and center residuals.
pub fn solve_parameters(polygon: &Polygon, tolerance: f64) -> Result<DiskMap> {
    solve_parameters_anchored(polygon, polygon.centroid(), tolerance, DEFAULT_ORDER)
}

/// Solves the parameter problem sending `t = 0` to `center`.
pub fn solve_parameters_anchored(
    polygon: &Polygon,
    center: Complex64,
    tolerance: f64,
    order: usize,
) -> Result<DiskMap> {
    if !(tolerance > 0.0) {
        return Err(Error::Domain("map tolerance must be positive".into()));
    }
    let interior_margin = 1e-7 * polygon.diameter();
    if !polygon.contains(center) || polygon.boundary_distance(center) < interior_margin {
        return Err(Error::Domain(format!(
            "conformal center {center} must lie strictly inside the polygon"
        )));
    }

    let sys = ParamSystem::new(polygon, center, order)?;
    let n = polygon.len();
    let seeds: Vec<Vec<f64>> = vec![vec![0.0; n - 1], sys.length_weighted_seed()];
    let mut last_err: Option<Error> = None;
    for seed in seeds {
        match sys.newton(seed, tolerance) {
            Ok(y) => return sys.build_map(&y, tolerance),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

/// Gap parametrization: `y` (n-1 free entries) -> strictly increasing angles
/// with the last pinned at 2*pi. `y = 0` gives equal gaps.
fn angles_from_y(y: &[f64]) -> Vec<f64> {
    let n = y.len() + 1;
    let mut p = Vec::with_capacity(n);
    for &yi in y {
        p.push(yi.exp());
    }
    p.push(1.0);
    let total: f64 = p.iter().sum();
    let mut angles = Vec::with_capacity(n);
    let mut acc = 0.0;
    for pi in p {
        acc += 2.0 * std::f64::consts::PI * pi / total;
        angles.push(acc);
    }
    angles[n - 1] = 2.0 * std::f64::consts::PI;
    angles
}

struct ParamSystem<'a> {
    polygon: &'a Polygon,
    center: Complex64,
    order: usize,
    rules: Vec<Option<GaussJacobi>>,
    legendre: GaussJacobi,
    diam: f64,
}

impl<'a> ParamSystem<'a> {
    fn new(polygon: &'a Polygon, center: Complex64, order: usize) -> Result<Self> {
        let mut rules = Vec::with_capacity(polygon.len());
        for &alpha in &polygon.alphas {
            let beta = alpha - 1.0;
            rules.push(if beta == 0.0 {
                None
            } else {
                Some(GaussJacobi::new(order, 0.0, beta)?)
            });
        }
        Ok(ParamSystem {
            polygon,
            center,
            order,
            rules,
            legendre: GaussJacobi::legendre(order)?,
            diam: polygon.diameter(),
        })
    }

    fn length_weighted_seed(&self) -> Vec<f64> {
        // Gap i sits ahead of prevertex i; weight it with the adjacent side.
        let n = self.polygon.len();
        let mut y = Vec::with_capacity(n - 1);
        let len = |k: usize| self.polygon.side_length(k % n).max(1e-6 * self.diam);
        let last = len(n + n - 2); // side ahead of the pinned prevertex
        for i in 0..n - 1 {
            y.push((len(n + i - 1) / last).ln());
        }
        y
    }

    fn residual(&self, y: &[f64]) -> Result<Vec<f64>> {
        let angles = angles_from_y(y);
        let tks: Vec<Complex64> = angles
            .iter()
            .map(|&a| Complex64::from_polar(1.0, a))
            .collect();
        let n = tks.len();
        let quad = Quadrature {
            prevertices: &tks,
            alphas: &self.polygon.alphas,
            rules: &self.rules,
            legendre: &self.legendre,
        };

        let side_integral = |k: usize| -> Result<Complex64> {
            quad.integrate(tks[k], Some(k), tks[(k + 1) % n], Some((k + 1) % n))
        };

        let i0 = side_integral(0)?;
        if i0.norm() < 1e-300 {
            return Err(Error::Numerical("degenerate reference side".into()));
        }
        let l0 = self.polygon.vertices[1] - self.polygon.vertices[0];
        let c = l0 / i0;

        let mut r = Vec::with_capacity(n - 1);
        for k in 1..=n.saturating_sub(3) {
            let ik = side_integral(k)?;
            let lk = self.polygon.side_length(k);
            r.push((ik.norm() / i0.norm()).ln() - (lk / l0.norm()).ln());
        }
        // Center condition: F(0) must land on the requested anchor.
        let to_last = quad.integrate(Complex64::new(0.0, 0.0), None, tks[n - 1], Some(n - 1))?;
        let z0 = self.polygon.vertices[n - 1] - c * to_last;
        let gap = (z0 - self.center) / self.diam;
        r.push(gap.re);
        r.push(gap.im);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite parameter residual".into()));
        }
        Ok(r)
    }

    fn newton(&self, mut y: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
        let m = y.len();
        let mut r = self.residual(&y)?;
        let mut norm = inf_norm(&r);
        let mut trace = vec![norm];
        for _ in 0..80 {
            if norm <= tol {
                return Ok(y);
            }
            // Forward-difference Jacobian.
            let mut jac = vec![vec![0.0; m]; m];
            let h = 1e-7;
            for j in 0..m {
                let mut yj = y.clone();
                yj[j] += h;
                let rj = self.residual(&yj)?;
                for i in 0..m {
                    jac[i][j] = (rj[i] - r[i]) / h;
                }
            }
            let step = lu_solve(&mut jac, &r.iter().map(|v| -v).collect::<Vec<_>>()).ok_or_else(
                || Error::Numerical("singular Jacobian in parameter problem".into()),
            )?;
            // Damped line search.
            let mut lambda = 1.0f64;
            let mut improved = false;
            for _ in 0..25 {
                let yt: Vec<f64> = y
                    .iter()
                    .zip(&step)
                    .map(|(a, d)| a + lambda * d)
                    .collect();
                if let Ok(rt) = self.residual(&yt) {
                    let nt = inf_norm(&rt);
                    if nt < norm {
                        y = yt;
                        r = rt;
                        norm = nt;
                        improved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            trace.push(norm);
            if !improved {
                break;
            }
        }
        if norm <= tol {
            Ok(y)
        } else {
            Err(Error::ParameterProblem {
                iterations: trace.len(),
                trace,
            })
        }
    }

    fn build_map(&self, y: &[f64], tol: f64) -> Result<DiskMap> {
        let angles = angles_from_y(y);
        let prevertices: Vec<Complex64> = angles
            .iter()
            .map(|&a| Complex64::from_polar(1.0, a))
            .collect();
        let n = prevertices.len();
        let quad = Quadrature {
            prevertices: &prevertices,
            alphas: &self.polygon.alphas,
            rules: &self.rules,
            legendre: &self.legendre,
        };
        let i0 = quad.integrate(prevertices[0], Some(0), prevertices[1], Some(1))?;
        let c = (self.polygon.vertices[1] - self.polygon.vertices[0]) / i0;
        let to_last =
            quad.integrate(Complex64::new(0.0, 0.0), None, prevertices[n - 1], Some(n - 1))?;
        let center = self.polygon.vertices[n - 1] - c * to_last;

        let mut min_gap = f64::INFINITY;
        for k in 0..n {
            let next = if k + 1 < n {
                angles[k + 1]
            } else {
                angles[0] + 2.0 * std::f64::consts::PI
            };
            min_gap = min_gap.min(next - angles[k]);
        }

        let mut map = DiskMap {
            polygon: self.polygon.clone(),
            angles,
            prevertices,
            c,
            center,
            order: self.order,
            tolerance: tol,
            min_gap,
            crowding: min_gap < CROWDING_GAP,
            vertex_residual: 0.0,
            side_residual: 0.0,
            rules: self.rules.clone(),
            legendre: self.legendre.clone(),
            anchors: Vec::new(),
        };

        // Global consistency: walk to every vertex from the anchor and check
        // all side lengths (including the two left out of the residual).
        let mut vres = 0.0f64;
        for k in 0..n {
            let fk = map.forward_from(Complex64::new(0.0, 0.0), None, map.center, map.prevertices[k], Some(k))?;
            vres = vres.max((fk - map.polygon.vertices[k]).norm());
        }
        map.vertex_residual = vres;
        let mut sres = 0.0f64;
        for k in 0..n {
            let ik = map.quadrature().integrate(
                map.prevertices[k],
                Some(k),
                map.prevertices[(k + 1) % n],
                Some((k + 1) % n),
            )?;
            sres = sres.max(((map.c * ik).norm() / map.polygon.side_length(k) - 1.0).abs());
        }
        map.side_residual = sres;
        if sres > 100.0 * tol {
            return Err(Error::Numerical(format!(
                "parameter solution failed side verification (residual {sres:.3e})"
            )));
        }

        map.anchors = map.build_anchor_cache()?;
        Ok(map)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Dense LU solve with partial pivoting; returns `None` when singular.
fn lu_solve(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut x = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut imax, mut vmax) = (k, a[k][k].abs());
        for i in k + 1..n {
            if a[i][k].abs() > vmax {
                imax = i;
                vmax = a[i][k].abs();
            }
        }
        if vmax < 1e-300 {
            return None;
        }
        a.swap(k, imax);
        piv.swap(k, imax);
        x.swap(k, imax);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            a[i][k] = f;
            for j in k + 1..n {
                a[i][j] -= f * a[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            let xj = x[j];
            x[i] -= a[i][j] * xj;
        }
        x[i] /= a[i][i];
    }
    Some(x)
}

/// Compound quadrature over straight segments in the closed disk.
struct Quadrature<'a> {
    prevertices: &'a [Complex64],
    alphas: &'a [f64],
    rules: &'a [Option<GaussJacobi>],
    legendre: &'a GaussJacobi,
}

impl Quadrature<'_> {
    /// Derivative product without the constant: prod (1 - t/t_k)^(alpha_k-1).
    fn fhat(&self, t: Complex64) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for (tk, &alpha) in self.prevertices.iter().zip(self.alphas) {
            let base = Complex64::new(1.0, 0.0) - t / tk;
            let beta = alpha - 1.0;
            if beta == 0.0 {
                continue;
            } else if beta == 1.0 {
                acc *= base;
            } else {
                acc *= base.powf(beta);
            }
        }
        acc
    }

    /// Same with one factor (index `skip`) removed.
    fn fhat_skip(&self, t: Complex64, skip: usize) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for (k, (tk, &alpha)) in self.prevertices.iter().zip(self.alphas).enumerate() {
            if k == skip {
                continue;
            }
            let base = Complex64::new(1.0, 0.0) - t / tk;
            let beta = alpha - 1.0;
            if beta == 0.0 {
                continue;
            } else if beta == 1.0 {
                acc *= base;
            } else {
                acc *= base.powf(beta);
            }
        }
        acc
    }

    fn nearest_prevertex_distance(&self, p: Complex64, skip: Option<usize>) -> f64 {
        let mut d = f64::INFINITY;
        for (k, tk) in self.prevertices.iter().enumerate() {
            if Some(k) == skip {
                continue;
            }
            d = d.min((tk - p).norm());
        }
        d
    }

    /// Integral of `fhat` along the chord from `a` to `b`. `sing_*` names the
    /// prevertex index when an endpoint is one.
    fn integrate(
        &self,
        a: Complex64,
        sing_a: Option<usize>,
        b: Complex64,
        sing_b: Option<usize>,
    ) -> Result<Complex64> {
        if (b - a).norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match (sing_a, sing_b) {
            (_, None) => self.integrate_half(a, sing_a, b),
            (None, Some(_)) => Ok(-self.integrate_half(b, sing_b, a)?),
            (Some(_), Some(_)) => {
                let mid = 0.5 * (a + b);
                Ok(self.integrate_half(a, sing_a, mid)? - self.integrate_half(b, sing_b, mid)?)
            }
        }
    }

    /// One-sided compound rule: Gauss-Jacobi leg leaving `a`, then plain
    /// Gauss-Legendre legs limited by the half-distance rule.
    fn integrate_half(&self, a: Complex64, sing_a: Option<usize>, b: Complex64) -> Result<Complex64> {
        let total = (b - a).norm();
        if total == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let dir = (b - a) / total;
        let d0 = self.nearest_prevertex_distance(a, sing_a);
        let first = total.min(0.5 * d0);
        let m = a + dir * first;
        let mut acc = self.endpoint_leg(a, sing_a, m);
        let mut cur = m;
        let mut remaining = total - first;
        let mut legs = 0;
        while remaining > 1e-15 * total {
            legs += 1;
            if legs > 256 {
                return Err(Error::Numerical(
                    "compound quadrature failed to advance".into(),
                ));
            }
            let d = self.nearest_prevertex_distance(cur, None);
            let step = remaining.min(0.5 * d).max(1e-15 * total);
            let next = cur + dir * step;
            acc += self.legendre_leg(cur, next);
            cur = next;
            remaining -= step;
        }
        Ok(acc)
    }

    /// Leg starting at `a`; when `a` is prevertex `k` the singular factor
    /// `(1 - tau/t_k)^(alpha_k - 1)` is absorbed into the Jacobi weight.
    fn endpoint_leg(&self, a: Complex64, sing_a: Option<usize>, m: Complex64) -> Complex64 {
        match sing_a {
            None => self.legendre_leg(a, m),
            Some(k) => {
                let rule = match &self.rules[k] {
                    Some(r) => r,
                    None => return self.legendre_leg(a, m), // alpha = 1: regular
                };
                let beta = self.alphas[k] - 1.0;
                let half = 0.5 * (m - a);
                // 1 - tau/t_k = cfac * (1 + x) along tau = a + half*(1 + x).
                let cfac = -half / self.prevertices[k];
                let mut sum = Complex64::new(0.0, 0.0);
                for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let tau = a + half * (x + 1.0);
                    sum += w * self.fhat_skip(tau, k);
                }
                half * cfac.powf(beta) * sum
            }
        }
    }

    fn legendre_leg(&self, a: Complex64, b: Complex64) -> Complex64 {
        let half = 0.5 * (b - a);
        let midp = 0.5 * (a + b);
        let mut sum = Complex64::new(0.0, 0.0);
        for (&x, &w) in self.legendre.nodes.iter().zip(&self.legendre.weights) {
            sum += w * self.fhat(midp + half * x);
        }
        half * sum
    }
}

impl DiskMap {
    fn quadrature(&self) -> Quadrature<'_> {
        Quadrature {
            prevertices: &self.prevertices,
            alphas: &self.polygon.alphas,
            rules: &self.rules,
            legendre: &self.legendre,
        }
    }

    pub fn len(&self) -> usize {
        self.prevertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prevertices.is_empty()
    }

    /// Angular interval of the arc that maps onto side `k`; the end of the
    /// last side wraps past 2*pi.
    pub fn side_arc(&self, k: usize) -> (f64, f64) {
        let n = self.len();
        let start = self.angles[k];
        let end = if k + 1 < n {
            self.angles[k + 1]
        } else {
            self.angles[0] + 2.0 * std::f64::consts::PI
        };
        (start, end)
    }

    /// Map derivative `f(t) = C * prod (1 - t/t_k)^(alpha_k - 1)`.
    pub fn derivative(&self, t: Complex64) -> Result<Complex64> {
        if t.norm() > 1.0 + 1e-9 {
            return Err(Error::Domain(format!("|t| = {} exceeds 1", t.norm())));
        }
        for (k, tk) in self.prevertices.iter().enumerate() {
            if self.polygon.alphas[k] < 1.0 && (t - tk).norm() < 1e-13 {
                return Err(Error::Domain(format!(
                    "derivative is singular at prevertex {k}"
                )));
            }
        }
        Ok(self.c * self.quadrature().fhat(t))
    }

    /// Forward map `z = F(t)`, `|t| <= 1`. Integrates from the nearest of
    /// the prevertices and the anchor, so vertex images are exact.
    pub fn forward(&self, t: Complex64) -> Result<Complex64> {
        if t.norm() > 1.0 + 1e-9 {
            return Err(Error::Domain(format!("|t| = {} exceeds 1", t.norm())));
        }
        let mut start = Complex64::new(0.0, 0.0);
        let mut sing = None;
        let mut base = self.center;
        let mut best = t.norm();
        for (k, tk) in self.prevertices.iter().enumerate() {
            let d = (t - tk).norm();
            if d < best {
                best = d;
                start = *tk;
                sing = Some(k);
                base = self.polygon.vertices[k];
            }
        }
        let sing_t = self.prevertex_near(t);
        self.forward_from(start, sing, base, t, sing_t)
    }

    fn prevertex_near(&self, t: Complex64) -> Option<usize> {
        self.prevertices
            .iter()
            .position(|tk| (t - tk).norm() < 1e-13)
    }

    fn forward_from(
        &self,
        start: Complex64,
        sing_start: Option<usize>,
        base: Complex64,
        t: Complex64,
        sing_t: Option<usize>,
    ) -> Result<Complex64> {
        if sing_start == sing_t && sing_start.is_some() {
            return Ok(base);
        }
        let integral = self.quadrature().integrate(start, sing_start, t, sing_t)?;
        Ok(base + self.c * integral)
    }

    fn build_anchor_cache(&self) -> Result<Vec<(Complex64, Complex64)>> {
        let mut anchors = vec![(Complex64::new(0.0, 0.0), self.center)];
        for &r in &[0.45, 0.75, 0.92, 0.985] {
            for j in 0..24 {
                let th = (j as f64 + 0.37) * (2.0 * std::f64::consts::PI / 24.0);
                let t = Complex64::from_polar(r, th);
                anchors.push((t, self.forward(t)?));
            }
        }
        Ok(anchors)
    }

    /// Inverse map `t = F^{-1}(z)` for `z` in the closed polygon. A Newton
    /// iteration runs from the best cached anchor; on failure the initial
    /// guess is rebuilt by integrating `dt/dz = 1/f(t)` along the straight
    /// segment from the anchor image to `z`.
    pub fn inverse(&self, z: Complex64) -> Result<Complex64> {
        let diam = self.polygon.diameter();
        let tol = 10.0 * self.tolerance.max(f64::EPSILON * diam);
        let on_boundary = self.polygon.boundary_hit(z, 1e-9 * diam).is_some();
        if !self.polygon.contains(z) && !on_boundary {
            return Err(Error::Domain(format!("z = {z} lies outside the polygon")));
        }

        let mut order: Vec<usize> = (0..self.anchors.len()).collect();
        order.sort_by(|&i, &j| {
            let di = (self.anchors[i].1 - z).norm();
            let dj = (self.anchors[j].1 - z).norm();
            di.partial_cmp(&dj).unwrap()
        });
        for &i in order.iter().take(4) {
            let (t0, z0) = self.anchors[i];
            if let Some(t) = self.newton_refine(t0, z, tol) {
                return Ok(t);
            }
            if let Some(t_ode) = self.ode_guess(t0, z0, z) {
                if let Some(t) = self.newton_refine(t_ode, z, tol) {
                    return Ok(t);
                }
            }
        }
        Err(Error::Inversion { z })
    }

    fn newton_refine(&self, mut t: Complex64, z: Complex64, tol: f64) -> Option<Complex64> {
        let mut fz = self.forward(t).ok()?;
        let mut res = (fz - z).norm();
        for _ in 0..60 {
            if res <= tol {
                return Some(t);
            }
            let f = self.c * self.quadrature().fhat(t);
            if !f.is_finite() || f.norm() < 1e-300 {
                return None;
            }
            let full = (z - fz) / f;
            let mut lambda = 1.0;
            let mut advanced = false;
            for _ in 0..12 {
                let mut tn = t + lambda * full;
                if tn.norm() > 1.0 {
                    tn = tn / tn.norm() * (2.0 - tn.norm()).max(1.0 - 1e-12);
                }
                if let Ok(fn_) = self.forward(tn) {
                    let rn = (fn_ - z).norm();
                    if rn < res {
                        t = tn;
                        fz = fn_;
                        res = rn;
                        advanced = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !advanced {
                return None;
            }
        }
        if res <= tol {
            Some(t)
        } else {
            None
        }
    }

    fn ode_guess(&self, t0: Complex64, z0: Complex64, z: Complex64) -> Option<Complex64> {
        let steps = 32;
        let dz = (z - z0) / steps as f64;
        let quad = self.quadrature();
        let mut t = t0;
        let clamp = |t: Complex64| {
            let n = t.norm();
            if n > 1.0 - 1e-13 {
                t / n * (1.0 - 1e-13)
            } else {
                t
            }
        };
        let slope = |t: Complex64| -> Option<Complex64> {
            let f = self.c * quad.fhat(t);
            if !f.is_finite() || f.norm() < 1e-14 {
                None
            } else {
                Some(dz / f)
            }
        };
        for _ in 0..steps {
            let k1 = slope(t)?;
            let k2 = slope(clamp(t + 0.5 * k1))?;
            let k3 = slope(clamp(t + 0.5 * k2))?;
            let k4 = slope(clamp(t + k3))?;
            t = clamp(t + (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0);
        }
        Some(t)
    }

    /// Disk angle of the boundary point at arclength `s` along side `k`.
    /// Safeguarded Newton on the monotone arclength parametrization.
    pub fn side_angle(&self, k: usize, s: f64) -> Result<f64> {
        let (a, b) = self.polygon.side_endpoints(k);
        let len = (b - a).norm();
        if !(0.0..=len).contains(&s) {
            return Err(Error::Domain(format!(
                "arclength {s} outside side {k} of length {len}"
            )));
        }
        let u = (b - a) / len;
        let (mut lo, mut hi) = self.side_arc(k);
        let (arc_lo, arc_hi) = (lo, hi);
        let mut th = lo + (hi - lo) * s / len;
        let target = s;
        let eval = |th: f64| -> Result<f64> {
            let t = Complex64::from_polar(1.0, th);
            let f = self.forward(t)?;
            Ok(((f - a) * u.conj()).re)
        };
        let mut g = eval(th)? - target;
        for _ in 0..80 {
            if g.abs() <= 1e-12 * len.max(1.0) {
                return Ok(th);
            }
            if g > 0.0 {
                hi = th;
            } else {
                lo = th;
            }
            let t = Complex64::from_polar(1.0, th);
            let speed = (self.c * self.quadrature().fhat(t)).norm();
            let mut next = if speed > 1e-14 {
                th - g / speed
            } else {
                0.5 * (lo + hi)
            };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            th = next;
            g = eval(th)? - target;
        }
        if g.abs() <= 1e-8 * len.max(1.0) {
            Ok(th.clamp(arc_lo, arc_hi))
        } else {
            Err(Error::Inversion {
                z: a + u * s,
            })
        }
    }

    /// Rebuilds the map with a different quadrature order, keeping the solved
    /// parameters. Used to check quadrature saturation.
    pub fn with_order(&self, order: usize) -> Result<DiskMap> {
        let mut rules = Vec::with_capacity(self.len());
        for &alpha in &self.polygon.alphas {
            let beta = alpha - 1.0;
            rules.push(if beta == 0.0 {
                None
            } else {
                Some(GaussJacobi::new(order, 0.0, beta)?)
            });
        }
        let mut map = DiskMap {
            order,
            rules,
            legendre: GaussJacobi::legendre(order)?,
            anchors: Vec::new(),
            ..self.clone()
        };
        map.anchors = map.build_anchor_cache()?;
        Ok(map)
    }

    /// Serializes parameters (prevertices, constant, anchor, residuals) in a
    /// plain-text format reusable across runs.
    pub fn dump(&self) -> String {
        let mut out = String::from("cbdm-diskmap v1\n");
        out.push_str(&format!("n {}\n", self.len()));
        for (v, &alpha) in self.polygon.vertices.iter().zip(&self.polygon.alphas) {
            out.push_str(&format!("vertex {:.17e} {:.17e} {:.17e}\n", v.re, v.im, alpha));
        }
        for &a in &self.angles {
            out.push_str(&format!("angle {a:.17e}\n"));
        }
        out.push_str(&format!("c {:.17e} {:.17e}\n", self.c.re, self.c.im));
        out.push_str(&format!(
            "center {:.17e} {:.17e}\n",
            self.center.re, self.center.im
        ));
        out.push_str(&format!("order {}\n", self.order));
        out.push_str(&format!("tolerance {:.17e}\n", self.tolerance));
        out.push_str(&format!(
            "residuals {:.17e} {:.17e}\n",
            self.vertex_residual, self.side_residual
        ));
        out
    }

    /// Rebuilds a map from [`DiskMap::dump`] output, verifying it against the
    /// polygon it is supposed to represent.
    pub fn from_dump(text: &str, polygon: &Polygon) -> Result<DiskMap> {
        let mut angles = Vec::new();
        let mut c = None;
        let mut center = None;
        let mut order = DEFAULT_ORDER;
        let mut tolerance = 1e-9;
        let mut verts: Vec<Complex64> = Vec::new();
        for line in text.lines() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Numerical(format!("bad number in map dump: {s}")))
            };
            match parts.as_slice() {
                ["angle", a] => angles.push(parse(a)?),
                ["vertex", re, im, _alpha] => {
                    verts.push(Complex64::new(parse(re)?, parse(im)?))
                }
                ["c", re, im] => c = Some(Complex64::new(parse(re)?, parse(im)?)),
                ["center", re, im] => center = Some(Complex64::new(parse(re)?, parse(im)?)),
                ["order", o] => {
                    order = o
                        .parse()
                        .map_err(|_| Error::Numerical("bad order in map dump".into()))?
                }
                ["tolerance", t] => tolerance = parse(t)?,
                _ => {}
            }
        }
        let (c, center) = match (c, center) {
            (Some(c), Some(z0)) => (c, z0),
            _ => return Err(Error::Numerical("incomplete map dump".into())),
        };
        if verts.len() != polygon.len()
            || verts
                .iter()
                .zip(&polygon.vertices)
                .any(|(a, b)| (a - b).norm() > 1e-9 * polygon.diameter())
        {
            return Err(Error::Geometry(
                "map dump does not match the polygon".into(),
            ));
        }
        let mut rules = Vec::with_capacity(polygon.len());
        for &alpha in &polygon.alphas {
            let beta = alpha - 1.0;
            rules.push(if beta == 0.0 {
                None
            } else {
                Some(GaussJacobi::new(order, 0.0, beta)?)
            });
        }
        let prevertices: Vec<Complex64> = angles
            .iter()
            .map(|&a| Complex64::from_polar(1.0, a))
            .collect();
        let mut min_gap = f64::INFINITY;
        let n = angles.len();
        if n != polygon.len() {
            return Err(Error::Numerical("map dump angle count mismatch".into()));
        }
        for k in 0..n {
            let next = if k + 1 < n {
                angles[k + 1]
            } else {
                angles[0] + 2.0 * std::f64::consts::PI
            };
            min_gap = min_gap.min(next - angles[k]);
        }
        let mut map = DiskMap {
            polygon: polygon.clone(),
            angles,
            prevertices,
            c,
            center,
            order,
            tolerance,
            min_gap,
            crowding: min_gap < CROWDING_GAP,
            vertex_residual: 0.0,
            side_residual: 0.0,
            rules,
            legendre: GaussJacobi::legendre(order)?,
            anchors: Vec::new(),
        };
        let mut vres = 0.0f64;
        for k in 0..n {
            let fk = map.forward(map.prevertices[k])?;
            vres = vres.max((fk - map.polygon.vertices[k]).norm());
        }
        map.vertex_residual = vres;
        map.anchors = map.build_anchor_cache()?;
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::validate_polygon;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn unit_square() -> Polygon {
        validate_polygon(&[c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.)]).unwrap()
    }

    fn slit_fixture_polygon() -> Polygon {
        validate_polygon(&[
            c(0., 0.),
            c(2., 0.),
            c(2., 1.),
            c(1., 1.),
            c(2., 1.),
            c(2., 2.),
            c(0., 2.),
        ])
        .unwrap()
    }

    #[test]
    fn square_prevertices_equally_spaced() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let q = std::f64::consts::FRAC_PI_2;
        for k in 0..4 {
            let (lo, hi) = map.side_arc(k);
            assert!(
                ((hi - lo) - q).abs() < 1e-8,
                "gap {k} = {} (expected pi/2)",
                hi - lo
            );
        }
        assert!((map.center - c(0.5, 0.5)).norm() < 1e-9);
    }

    #[test]
    fn square_derivative_at_zero_has_modulus_c() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let f0 = map.derivative(c(0.0, 0.0)).unwrap();
        assert!((f0.norm() - map.c.norm()).abs() < 1e-14);
    }

    #[test]
    fn vertex_images_exact() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        assert!(map.vertex_residual < 1e-9, "{}", map.vertex_residual);
        for k in 0..4 {
            let z = map.forward(map.prevertices[k]).unwrap();
            assert!((z - map.polygon.vertices[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn anchor_maps_to_center() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let z0 = map.forward(c(0.0, 0.0)).unwrap();
        assert!((z0 - map.center).norm() < 1e-12);
    }

    #[test]
    fn arc_midpoints_land_on_sides() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        for k in 0..4 {
            let (lo, hi) = map.side_arc(k);
            let z = map
                .forward(Complex64::from_polar(1.0, 0.5 * (lo + hi)))
                .unwrap();
            let (a, b) = map.polygon.side_endpoints(k);
            let u = (b - a) / (b - a).norm();
            let off = ((z - a) * u.conj()).im.abs();
            assert!(off < 1e-8, "side {k}: offset {off}");
        }
    }

    #[test]
    fn slit_map_reproduces_tip() {
        let poly = slit_fixture_polygon();
        let map = solve_parameters_anchored(&poly, c(1.5, 0.5), 1e-9, 16).unwrap();
        assert_eq!(map.polygon.alphas[3], 2.0);
        let tip = map.forward(map.prevertices[3]).unwrap();
        assert!((tip - c(1.0, 1.0)).norm() < 1e-8);
        assert!(!map.crowding, "min gap {}", map.min_gap);

        // Derivative vanishes linearly toward the tip prevertex.
        let tk = map.prevertices[3];
        let f1 = map.derivative(tk * 0.999).unwrap().norm();
        let f2 = map.derivative(tk * 0.9999).unwrap().norm();
        assert!(f1 / f2 > 5.0 && f1 / f2 < 20.0, "ratio {}", f1 / f2);
    }

    #[test]
    fn conjugate_symmetry_of_derivative() {
        // Square centered on the real axis with conjugate-symmetric data.
        let poly = validate_polygon(&[c(0., -0.5), c(1., -0.5), c(1., 0.5), c(0., 0.5)]).unwrap();
        let map = solve_parameters_anchored(&poly, c(0.5, 0.0), 1e-10, 16).unwrap();
        for &t in &[c(0.3, 0.2), c(-0.1, 0.6), c(0.0, 0.0)] {
            let a = map.derivative(t).unwrap();
            let b = map.derivative(t.conj()).unwrap();
            assert!((a.conj() - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn inverse_round_trip_square() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let z0 = map.inverse(map.center).unwrap();
        assert!(z0.norm() < 1e-10);
        for i in 0..10 {
            for j in 0..10 {
                let z = c(0.05 + 0.1 * i as f64, 0.05 + 0.1 * j as f64);
                let t = map.inverse(z).unwrap();
                assert!(t.norm() <= 1.0 + 1e-12);
                let back = map.forward(t).unwrap();
                assert!((back - z).norm() < 1e-8, "z = {z}");
            }
        }
    }

    #[test]
    fn inverse_rejects_exterior() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        assert!(matches!(
            map.inverse(c(1.5, 0.5)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn derivative_rejects_singular_prevertex() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let t = map.prevertices[0];
        assert!(map.derivative(t).is_err());
    }

    #[test]
    fn conformality_at_interior_points() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let t = c(0.3, -0.4);
        let h = 1e-6;
        let base = map.forward(t).unwrap();
        let mut args = Vec::new();
        for dir in [c(1.0, 0.0), c(0.0, 1.0), c(0.7, 0.7)] {
            let d = dir / dir.norm() * h;
            let fwd = map.forward(t + d).unwrap();
            args.push(((fwd - base) / d).arg());
        }
        for w in args.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-4);
        }
    }

    #[test]
    fn quadrature_order_saturated() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let fine = map.with_order(32).unwrap();
        for &t in &[c(0.2, 0.3), c(-0.7, 0.1), c(0.0, 0.95), c(0.5, -0.5)] {
            let a = map.forward(t).unwrap();
            let b = fine.forward(t).unwrap();
            assert!((a - b).norm() < 1e-9, "order sensitivity at {t}");
        }
    }

    #[test]
    fn side_angle_matches_forward() {
        let poly = slit_fixture_polygon();
        let map = solve_parameters_anchored(&poly, c(1.5, 0.5), 1e-9, 16).unwrap();
        for k in [1usize, 4] {
            let len = map.polygon.side_length(k);
            for frac in [0.25, 0.5, 0.9] {
                let th = map.side_angle(k, frac * len).unwrap();
                let z = map.forward(Complex64::from_polar(1.0, th)).unwrap();
                let (a, b) = map.polygon.side_endpoints(k);
                let u = (b - a) / len;
                let s = ((z - a) * u.conj()).re;
                assert!((s - frac * len).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let map = solve_parameters(&unit_square(), 1e-10).unwrap();
        let text = map.dump();
        let back = DiskMap::from_dump(&text, &map.polygon).unwrap();
        assert!((back.c - map.c).norm() < 1e-15);
        for &t in &[c(0.2, 0.3), c(-0.5, 0.1)] {
            let a = map.forward(t).unwrap();
            let b = back.forward(t).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
    }
}
