//! Polygons, boundary conditions and problem definitions.
//!
//! A [`Polygon`] is a counterclockwise vertex chain with per-vertex interior
//! angle fractions. Slits are traversed as two coincident sides meeting at a
//! tip vertex with angle fraction 2. A [`ProblemSpec`] is a list of
//! subdomains (polygon + permittivity + per-side boundary conditions) whose
//! union is the problem domain.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Interior-angle fraction at a slit tip.
pub const SLIT_TIP_ALPHA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    /// Counterclockwise vertex chain. Slit sides appear twice, once per face.
    pub vertices: Vec<Complex64>,
    /// Interior angle at vertex k is `alphas[k] * pi`, each in (0, 2].
    pub alphas: Vec<f64>,
}

/// Boundary condition attached to one polygon side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    /// Fixed potential, volts.
    Dirichlet { value: f64 },
    /// Prescribed normal derivative. Only `gamma = 0` is accepted.
    Neumann { gamma: f64 },
    /// Material interface shared with another subdomain.
    Interface { neighbor: usize },
}

/// One polygon side: its condition plus the discretization step used when the
/// side carries finite-difference nodes (Neumann and interface sides only).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Side {
    pub kind: BoundaryKind,
    pub step: Option<f64>,
}

impl Side {
    pub fn dirichlet(value: f64) -> Self {
        Side {
            kind: BoundaryKind::Dirichlet { value },
            step: None,
        }
    }
    pub fn neumann(step: f64) -> Self {
        Side {
            kind: BoundaryKind::Neumann { gamma: 0.0 },
            step: Some(step),
        }
    }
    pub fn interface(neighbor: usize, step: f64) -> Self {
        Side {
            kind: BoundaryKind::Interface { neighbor },
            step: Some(step),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub polygon: Polygon,
    /// Permittivity, farads per meter.
    pub permittivity: f64,
    /// One entry per polygon side, in side order.
    pub sides: Vec<Side>,
    /// Interior point used as the conformal center of the disk map.
    pub anchor: Option<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Disk-map tolerance (parameter problem and inversion).
    pub map: f64,
    /// SOR residual tolerance, applied to max |xi| and (scaled) to sum xi.
    pub sor: f64,
    pub max_iterations: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            map: 1e-9,
            sor: 1e-6,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub subdomains: Vec<Subdomain>,
    pub tolerances: Tolerances,
}

/// Diagonal interface for the microstrip fixture: runs from `(0, y_left)` on
/// the left wall to `(W, y_right)` on the symmetry wall, both strictly below
/// the strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSpec {
    pub y_left: f64,
    pub y_right: f64,
}

impl Polygon {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Side `k` runs from vertex `k` to vertex `k + 1` (cyclic).
    pub fn side_endpoints(&self, k: usize) -> (Complex64, Complex64) {
        let n = self.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    pub fn side_length(&self, k: usize) -> f64 {
        let (a, b) = self.side_endpoints(k);
        (b - a).norm()
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((b - a).norm());
            }
        }
        d
    }

    /// Signed area (positive for counterclockwise orientation). Slit sides
    /// cancel.
    pub fn signed_area(&self) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            acc += a.re * b.im - b.re * a.im;
        }
        0.5 * acc
    }

    /// Area centroid. Not necessarily interior for slit polygons.
    pub fn centroid(&self) -> Complex64 {
        let n = self.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let w = a.re * b.im - b.re * a.im;
            cx += (a.re + b.re) * w;
            cy += (a.im + b.im) * w;
        }
        let area = self.signed_area();
        Complex64::new(cx / (6.0 * area), cy / (6.0 * area))
    }

    /// Crossing-number interior test. Points on the boundary are not
    /// reliably classified; use [`Polygon::boundary_hit`] for those.
    pub fn contains(&self, z: Complex64) -> bool {
        let n = self.len();
        let mut inside = false;
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            if (a.im > z.im) != (b.im > z.im) {
                let x_cross = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                if z.re < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Returns `(side, arclength parameter in [0, L])` when `z` lies within
    /// `tol` of a side, preferring the first matching side.
    pub fn boundary_hit(&self, z: Complex64, tol: f64) -> Option<(usize, f64)> {
        for k in 0..self.len() {
            let (a, b) = self.side_endpoints(k);
            let d = b - a;
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let u = d / len;
            let s = ((z - a) * u.conj()).re;
            if (-tol..=len + tol).contains(&s) {
                let perp = ((z - a) * u.conj()).im.abs();
                if perp <= tol {
                    return Some((k, s.clamp(0.0, len)));
                }
            }
        }
        None
    }

    /// Minimum distance from `z` to the polygon boundary.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..self.len() {
            let (a, b) = self.side_endpoints(k);
            let d = b - a;
            let len2 = d.norm_sqr();
            let t = if len2 == 0.0 {
                0.0
            } else {
                (((z - a) * d.conj()).re / len2).clamp(0.0, 1.0)
            };
            best = best.min((z - (a + d * t)).norm());
        }
        best
    }
}

/// Builds a validated polygon from a counterclockwise (or reversed, which is
/// normalized) vertex chain: computes the interior-angle fractions, checks
/// the angle-sum identity and rejects self-intersecting chains other than
/// slit back-tracking.
pub fn validate_polygon(vertices: &[Complex64]) -> Result<Polygon> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::Geometry(format!(
            "polygon needs at least 3 vertices, got {n}"
        )));
    }
    let scale = vertices
        .iter()
        .flat_map(|v| [v.re.abs(), v.im.abs()])
        .fold(0.0f64, f64::max)
        .max(1e-30);
    for k in 0..n {
        let a = vertices[k];
        let b = vertices[(k + 1) % n];
        if (b - a).norm() <= 1e-14 * scale {
            return Err(Error::Geometry(format!(
                "repeated consecutive vertices at index {k} ({a})"
            )));
        }
    }

    let mut verts = vertices.to_vec();
    let mut poly = Polygon {
        vertices: verts.clone(),
        alphas: vec![],
    };
    if poly.signed_area() < 0.0 {
        verts.reverse();
        poly.vertices = verts;
    }

    let alphas = compute_alphas(&poly.vertices)?;
    let sum: f64 = alphas.iter().sum();
    let expect = n as f64 - 2.0;
    if (sum - expect).abs() > 1e-9 {
        return Err(Error::Inconsistency(format!(
            "angle fractions sum to {sum}, expected {expect}"
        )));
    }
    poly.alphas = alphas;

    check_self_intersection(&poly, scale)?;
    Ok(poly)
}

fn compute_alphas(vertices: &[Complex64]) -> Result<Vec<f64>> {
    let n = vertices.len();
    let mut alphas = Vec::with_capacity(n);
    for k in 0..n {
        let prev = vertices[(k + n - 1) % n];
        let cur = vertices[k];
        let next = vertices[(k + 1) % n];
        let din = cur - prev;
        let dout = next - cur;
        let ratio = dout / din;
        // Anti-parallel directions mark a slit tip (interior angle 2*pi).
        let alpha = if ratio.im.abs() <= 1e-12 * ratio.norm() && ratio.re < 0.0 {
            SLIT_TIP_ALPHA
        } else {
            1.0 - ratio.arg() / std::f64::consts::PI
        };
        if !(alpha > 0.0 && alpha <= 2.0 + 1e-12) {
            return Err(Error::Geometry(format!(
                "interior angle fraction {alpha} out of (0, 2] at vertex {k}"
            )));
        }
        alphas.push(alpha.min(2.0));
    }
    Ok(alphas)
}

fn check_self_intersection(poly: &Polygon, scale: f64) -> Result<()> {
    let n = poly.len();
    let eps = 1e-12 * scale * scale;
    let orient = |a: Complex64, b: Complex64, c: Complex64| -> f64 {
        (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
    };
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue; // adjacent across the wrap
            }
            let (a1, a2) = poly.side_endpoints(i);
            let (b1, b2) = poly.side_endpoints(j);
            let s1 = orient(a1, a2, b1);
            let s2 = orient(a1, a2, b2);
            let s3 = orient(b1, b2, a1);
            let s4 = orient(b1, b2, a2);
            // Proper transversal crossing only; collinear overlap (slits) and
            // endpoint contact are allowed.
            if s1 * s2 < -eps && s3 * s4 < -eps {
                return Err(Error::Geometry(format!(
                    "sides {i} and {j} cross"
                )));
            }
        }
    }
    Ok(())
}

impl Subdomain {
    /// Anchor point used as the conformal center; defaults to the centroid.
    pub fn map_anchor(&self) -> Complex64 {
        self.anchor.unwrap_or_else(|| self.polygon.centroid())
    }
}

impl ProblemSpec {
    /// Structural checks: side counts, interface pairing, Neumann data.
    pub fn validate(&self) -> Result<()> {
        for (si, sub) in self.subdomains.iter().enumerate() {
            if sub.sides.len() != sub.polygon.len() {
                return Err(Error::Geometry(format!(
                    "subdomain {si}: {} sides for {} vertices",
                    sub.sides.len(),
                    sub.polygon.len()
                )));
            }
            if !(sub.permittivity > 0.0) {
                return Err(Error::Domain(format!(
                    "subdomain {si}: nonpositive permittivity"
                )));
            }
            for (k, side) in sub.sides.iter().enumerate() {
                match side.kind {
                    BoundaryKind::Neumann { gamma } => {
                        if gamma != 0.0 {
                            return Err(Error::Domain(format!(
                                "subdomain {si} side {k}: only homogeneous Neumann conditions are supported"
                            )));
                        }
                        self.check_step(si, k, side)?;
                    }
                    BoundaryKind::Interface { neighbor } => {
                        self.check_step(si, k, side)?;
                        self.check_interface_pairing(si, k, neighbor)?;
                    }
                    BoundaryKind::Dirichlet { value } => {
                        if !value.is_finite() {
                            return Err(Error::Domain(format!(
                                "subdomain {si} side {k}: non-finite Dirichlet value"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_step(&self, si: usize, k: usize, side: &Side) -> Result<()> {
        let len = self.subdomains[si].polygon.side_length(k);
        match side.step {
            Some(h) if h > 0.0 && h < 0.5 * len => Ok(()),
            Some(h) => Err(Error::Discretization(format!(
                "subdomain {si} side {k}: step {h} must be positive and below half the side length {len}"
            ))),
            None => Err(Error::Discretization(format!(
                "subdomain {si} side {k}: discretized side needs a step"
            ))),
        }
    }

    fn check_interface_pairing(&self, si: usize, k: usize, neighbor: usize) -> Result<()> {
        if neighbor >= self.subdomains.len() || neighbor == si {
            return Err(Error::Geometry(format!(
                "subdomain {si} side {k}: bad interface neighbor {neighbor}"
            )));
        }
        let (a, b) = self.subdomains[si].polygon.side_endpoints(k);
        let other = &self.subdomains[neighbor];
        let tol = 1e-9 * self.subdomains[si].polygon.diameter();
        let paired = (0..other.polygon.len()).any(|j| {
            matches!(other.sides[j].kind, BoundaryKind::Interface { neighbor: nb } if nb == si)
                && {
                    let (c, d) = other.polygon.side_endpoints(j);
                    (c - b).norm() <= tol && (d - a).norm() <= tol
                }
        });
        if paired {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "subdomain {si} side {k}: no reversed interface twin in subdomain {neighbor}"
            )))
        }
    }

    /// Sets the step of every Neumann/interface side in every subdomain.
    pub fn set_step_all(&mut self, step: f64) {
        for sub in &mut self.subdomains {
            for side in &mut sub.sides {
                if side.step.is_some() {
                    side.step = Some(step);
                }
            }
        }
    }

    /// Locates the subdomain containing `z` (boundary points may match the
    /// first adjacent subdomain).
    pub fn locate(&self, z: Complex64) -> Option<usize> {
        let tol = 1e-11 * self.subdomains[0].polygon.diameter().max(1.0);
        for (i, sub) in self.subdomains.iter().enumerate() {
            if sub.polygon.contains(z) || sub.polygon.boundary_hit(z, tol).is_some() {
                return Some(i);
            }
        }
        None
    }
}

/// Builds the shielded-microstrip fixture: a `w` by `h_box` rectangle with a
/// zero-thickness strip at height `strip_y` running from `x = x_end` to the
/// right wall, held at 1 V. Left, top and bottom walls are a 0 V shield; the
/// right wall is a symmetry line with homogeneous Neumann condition. With an
/// `interface`, the domain splits into an upper subdomain (permittivity
/// `eps_a`, contains the strip) and a lower one (`eps_b`) along the diagonal.
///
/// `step` is the initial discretization step applied to every Neumann and
/// interface side; override per side or via [`ProblemSpec::set_step_all`].
pub fn microstrip_fixture(
    w: f64,
    h_box: f64,
    strip_y: f64,
    x_end: f64,
    interface: Option<InterfaceSpec>,
    eps_a: f64,
    eps_b: f64,
    step: f64,
) -> Result<ProblemSpec> {
    if !(x_end > 0.0 && x_end < w) {
        return Err(Error::Geometry(format!(
            "strip start x_end={x_end} must satisfy 0 < x_end < w={w}"
        )));
    }
    if !(strip_y > 0.0 && strip_y < h_box) {
        return Err(Error::Geometry(format!(
            "strip height {strip_y} must lie strictly inside (0, {h_box})"
        )));
    }
    let c = |x: f64, y: f64| Complex64::new(x, y);

    let spec = match interface {
        None => {
            let poly = validate_polygon(&[
                c(0.0, 0.0),
                c(w, 0.0),
                c(w, strip_y),
                c(x_end, strip_y),
                c(w, strip_y),
                c(w, h_box),
                c(0.0, h_box),
            ])?;
            let sides = vec![
                Side::dirichlet(0.0), // bottom shield
                Side::neumann(step),  // symmetry wall below the strip
                Side::dirichlet(1.0), // strip, lower face
                Side::dirichlet(1.0), // strip, upper face
                Side::neumann(step),  // symmetry wall above the strip
                Side::dirichlet(0.0), // top shield
                Side::dirichlet(0.0), // left shield
            ];
            ProblemSpec {
                subdomains: vec![Subdomain {
                    polygon: poly,
                    permittivity: eps_a,
                    sides,
                    anchor: Some(c(0.5 * (x_end + w), 0.5 * strip_y)),
                }],
                tolerances: Tolerances::default(),
            }
        }
        Some(iface) => {
            let (ya, yb) = (iface.y_left, iface.y_right);
            for (name, y) in [("y_left", ya), ("y_right", yb)] {
                if !(y > 0.0 && y < strip_y) {
                    return Err(Error::Geometry(format!(
                        "interface {name}={y} must connect the walls strictly below the strip (0, {strip_y})"
                    )));
                }
            }
            let upper = validate_polygon(&[
                c(0.0, ya),
                c(w, yb),
                c(w, strip_y),
                c(x_end, strip_y),
                c(w, strip_y),
                c(w, h_box),
                c(0.0, h_box),
            ])?;
            let upper_sides = vec![
                Side::interface(1, step), // diagonal interface
                Side::neumann(step),      // wall between interface and strip
                Side::dirichlet(1.0),     // strip, lower face
                Side::dirichlet(1.0),     // strip, upper face
                Side::neumann(step),      // wall above the strip
                Side::dirichlet(0.0),     // top shield
                Side::dirichlet(0.0),     // left shield (upper part)
            ];
            let lower = validate_polygon(&[c(0.0, 0.0), c(w, 0.0), c(w, yb), c(0.0, ya)])?;
            let lower_sides = vec![
                Side::dirichlet(0.0),     // bottom shield
                Side::neumann(step),      // wall below the interface
                Side::interface(0, step), // diagonal interface (reversed)
                Side::dirichlet(0.0),     // left shield (lower part)
            ];
            ProblemSpec {
                subdomains: vec![
                    Subdomain {
                        polygon: upper,
                        permittivity: eps_a,
                        sides: upper_sides,
                        anchor: Some(c(0.5 * w, 0.5 * (strip_y + h_box))),
                    },
                    Subdomain {
                        polygon: lower,
                        permittivity: eps_b,
                        sides: lower_sides,
                        anchor: Some(c(0.5 * w, 0.25 * ya.min(yb))),
                    },
                ],
                tolerances: Tolerances::default(),
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn unit_square_alphas() {
        let p = validate_polygon(&[c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.)]).unwrap();
        assert_eq!(p.alphas, vec![0.5, 0.5, 0.5, 0.5]);
        let sum: f64 = p.alphas.iter().sum();
        assert!((sum - 2.0).abs() < 1e-12);
    }

    #[test]
    fn orientation_normalized() {
        // Clockwise input comes out counterclockwise.
        let p = validate_polygon(&[c(0., 0.), c(0., 1.), c(1., 1.), c(1., 0.)]).unwrap();
        assert!(p.signed_area() > 0.0);
        assert_eq!(p.alphas, vec![0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn slit_polygon_tip_alpha() {
        // Rectangle with a horizontal slit entering from the right wall.
        let p = validate_polygon(&[
            c(0., 0.),
            c(2., 0.),
            c(2., 1.),
            c(1., 1.),
            c(2., 1.),
            c(2., 2.),
            c(0., 2.),
        ])
        .unwrap();
        assert_eq!(p.alphas[3], 2.0); // slit tip
        assert_eq!(p.alphas[2], 0.5);
        assert_eq!(p.alphas[4], 0.5);
        let sum: f64 = p.alphas.iter().sum();
        assert!((sum - 5.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_pass_through_alpha_is_one() {
        let p = validate_polygon(&[c(0., 0.), c(1., 0.), c(2., 0.), c(2., 1.), c(0., 1.)]).unwrap();
        assert!((p.alphas[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_vertex_rejected() {
        let err = validate_polygon(&[c(0., 0.), c(0., 0.), c(1., 1.)]);
        assert!(matches!(err, Err(Error::Geometry(_))));
    }

    #[test]
    fn crossing_rejected() {
        let err = validate_polygon(&[c(0., 0.), c(1., 1.), c(1., 0.), c(0., 1.)]);
        assert!(err.is_err());
    }

    #[test]
    fn contains_handles_slit() {
        let p = validate_polygon(&[
            c(0., 0.),
            c(2., 0.),
            c(2., 1.),
            c(1., 1.),
            c(2., 1.),
            c(2., 2.),
            c(0., 2.),
        ])
        .unwrap();
        assert!(p.contains(c(1.5, 0.5)));
        assert!(p.contains(c(1.5, 1.5)));
        assert!(p.contains(c(0.5, 1.0))); // left of the tip, not on the slit
        assert!(!p.contains(c(2.5, 1.0)));
        assert!(p.boundary_hit(c(1.5, 1.0), 1e-12).is_some()); // on the slit
    }

    #[test]
    fn fixture_unpartitioned() {
        let spec = microstrip_fixture(2.0, 2.0, 1.0, 1.0, None, crate::EPS0, crate::EPS0, 0.05)
            .unwrap();
        assert_eq!(spec.subdomains.len(), 1);
        let sub = &spec.subdomains[0];
        assert_eq!(sub.polygon.alphas[3], 2.0);
        assert_eq!(sub.polygon.vertices[3], c(1.0, 1.0));
        let n_neumann = sub
            .sides
            .iter()
            .filter(|s| matches!(s.kind, BoundaryKind::Neumann { .. }))
            .count();
        assert_eq!(n_neumann, 2);
    }

    #[test]
    fn fixture_partitioned_interface_paired() {
        let spec = microstrip_fixture(
            2.0,
            2.0,
            1.0,
            1.0,
            Some(InterfaceSpec {
                y_left: 0.5,
                y_right: 0.75,
            }),
            crate::EPS0,
            10.0 * crate::EPS0,
            0.02,
        )
        .unwrap();
        assert_eq!(spec.subdomains.len(), 2);
        // Interface appears once per subdomain, endpoints reversed.
        let (a, b) = spec.subdomains[0].polygon.side_endpoints(0);
        let (cc, d) = spec.subdomains[1].polygon.side_endpoints(2);
        assert!((a - d).norm() < 1e-12 && (b - cc).norm() < 1e-12);

        // Split + re-merge reproduces the unpartitioned vertex set up to the
        // inserted interface endpoints.
        let unsplit =
            microstrip_fixture(2.0, 2.0, 1.0, 1.0, None, crate::EPS0, crate::EPS0, 0.02).unwrap();
        let mut merged: Vec<Complex64> = spec
            .subdomains
            .iter()
            .flat_map(|s| s.polygon.vertices.iter().copied())
            .filter(|v| (v - a).norm() > 1e-12 && (v - b).norm() > 1e-12)
            .collect();
        for v in &unsplit.subdomains[0].polygon.vertices {
            let hit = merged.iter().position(|m| (m - v).norm() < 1e-12).unwrap();
            merged.remove(hit);
        }
        assert!(merged.is_empty());
    }

    #[test]
    fn fixture_empty_strip_rejected() {
        assert!(
            microstrip_fixture(2.0, 2.0, 1.0, 2.0, None, crate::EPS0, crate::EPS0, 0.05).is_err()
        );
    }

    #[test]
    fn fixture_bad_interface_rejected() {
        let r = microstrip_fixture(
            2.0,
            2.0,
            1.0,
            1.0,
            Some(InterfaceSpec {
                y_left: 1.5, // above the strip: does not connect wall-to-wall below it
                y_right: 0.5,
            }),
            crate::EPS0,
            crate::EPS0,
            0.05,
        );
        assert!(r.is_err());
    }
}
