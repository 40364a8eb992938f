//! Interpolation of values given at scattered sites (the nodes of one tree
//! level).
//!
//! `DelaunayLinear` evaluates the barycentric-linear interpolant on a Delaunay
//! triangulation of planar sites and falls back to inverse distance weighting
//! over the `d + 1` nearest sites outside the convex hull. `Idw` is Shepard's
//! method restricted to the `k` nearest sites; `Nearest` returns the value of
//! the closest site.

use spade::handles::FixedVertexHandle;
use spade::{DelaunayTriangulation, HasPosition, Point2, PositionInTriangulation, Triangulation};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpMethod {
    /// Planar sites only.
    DelaunayLinear,
    Idw { k: usize, power: f64 },
    Nearest,
}

#[derive(Debug, Clone, Copy)]
struct Site {
    pos: Point2<f64>,
    idx: usize,
}

impl HasPosition for Site {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

pub struct ScatteredInterpolant {
    dim: usize,
    sites: Vec<f64>,
    values: Vec<f64>,
    method: InterpMethod,
    hull: Option<DelaunayTriangulation<Site>>,
}

impl std::fmt::Debug for ScatteredInterpolant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatteredInterpolant")
            .field("dim", &self.dim)
            .field("n_sites", &self.values.len())
            .field("method", &self.method)
            .finish_non_exhaustive()
    }
}

/// Builds an interpolant from row-major `sites` (each of length `dim`).
/// Exact duplicate sites collapse onto their first occurrence.
pub fn build_interpolant(
    dim: usize,
    sites: &[f64],
    values: &[f64],
    method: InterpMethod,
) -> Result<ScatteredInterpolant> {
    if dim == 0 || sites.len() != dim * values.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coordinates do not describe {} sites of dimension {dim}",
            sites.len(),
            values.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidParameter("interpolant needs at least one site".into()));
    }
    match method {
        InterpMethod::Idw { k, power } if k == 0 || !(power > 0.0) => {
            return Err(Error::InvalidParameter(format!("IDW needs k >= 1 and power > 0, got k={k} power={power}")));
        }
        InterpMethod::DelaunayLinear if dim != 2 => {
            return Err(Error::InvalidParameter(format!("Delaunay interpolation needs planar sites, got d={dim}")));
        }
        _ => {}
    }

    let mut seen = rustc_hash::FxHashSet::default();
    let mut kept_sites = Vec::with_capacity(sites.len());
    let mut kept_values = Vec::with_capacity(values.len());
    for (x, &v) in sites.chunks_exact(dim).zip(values) {
        let key: Vec<u64> = x.iter().map(|c| (c + 0.0).to_bits()).collect();
        if seen.insert(key) {
            kept_sites.extend_from_slice(x);
            kept_values.push(v);
        }
    }

    let hull = if method == InterpMethod::DelaunayLinear {
        if kept_values.len() < 3 {
            return Err(Error::DegenerateSites(format!("{} distinct sites", kept_values.len())));
        }
        let verts: Vec<Site> = kept_sites
            .chunks_exact(2)
            .enumerate()
            .map(|(idx, x)| Site { pos: Point2::new(x[0], x[1]), idx })
            .collect();
        let tri = DelaunayTriangulation::<Site>::bulk_load_stable(verts)
            .map_err(|e| Error::DegenerateSites(format!("{e:?}")))?;
        if tri.num_inner_faces() == 0 {
            return Err(Error::DegenerateSites("all sites are collinear".into()));
        }
        Some(tri)
    } else {
        None
    };

    Ok(ScatteredInterpolant { dim, sites: kept_sites, values: kept_values, method, hull })
}

impl ScatteredInterpolant {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.values.len()
    }

    pub fn method(&self) -> InterpMethod {
        self.method
    }

    fn site(&self, i: usize) -> &[f64] {
        &self.sites[i * self.dim..(i + 1) * self.dim]
    }

    /// Value of the interpolant at `x`, which must have the sites' dimension.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "query dimension");
        match self.method {
            InterpMethod::Nearest => self.nearest(x),
            InterpMethod::Idw { k, power } => self.idw(x, k, power),
            InterpMethod::DelaunayLinear => match self.linear(x) {
                Some(v) => v,
                None => self.idw(x, self.dim + 1, 2.0),
            },
        }
    }

    fn dist2(&self, i: usize, x: &[f64]) -> f64 {
        self.site(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn nearest(&self, x: &[f64]) -> f64 {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.n_sites() {
            let d = self.dist2(i, x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        self.values[best]
    }

    fn idw(&self, x: &[f64], k: usize, power: f64) -> f64 {
        let mut d: Vec<(f64, usize)> = (0..self.n_sites()).map(|i| (self.dist2(i, x), i)).collect();
        let k = k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(cmp);
        if d[0].0 == 0.0 {
            return self.values[d[0].1];
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for &(d2, i) in &d {
            let w = d2.sqrt().powf(-power);
            num += w * self.values[i];
            den += w;
        }
        num / den
    }

    fn linear(&self, x: &[f64]) -> Option<f64> {
        let tri = self.hull.as_ref()?;
        let q = Point2::new(x[0], x[1]);
        if !(q.x.is_finite() && q.y.is_finite()) {
            return None;
        }
        let vertex_value = |h: FixedVertexHandle| self.values[tri.vertex(h).data().idx];
        match tri.locate(q) {
            PositionInTriangulation::OnVertex(v) => Some(vertex_value(v)),
            PositionInTriangulation::OnEdge(e) => {
                let e = tri.directed_edge(e);
                let (a, b) = (e.from(), e.to());
                let (pa, pb) = (a.position(), b.position());
                let len2 = (pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2);
                let s = (((q.x - pa.x) * (pb.x - pa.x) + (q.y - pa.y) * (pb.y - pa.y)) / len2).clamp(0.0, 1.0);
                Some((1.0 - s) * vertex_value(a.fix()) + s * vertex_value(b.fix()))
            }
            PositionInTriangulation::OnFace(f) => {
                let [a, b, c] = tri.face(f).vertices();
                let (pa, pb, pc) = (a.position(), b.position(), c.position());
                let det = (pb.y - pc.y) * (pa.x - pc.x) + (pc.x - pb.x) * (pa.y - pc.y);
                let la = ((pb.y - pc.y) * (q.x - pc.x) + (pc.x - pb.x) * (q.y - pc.y)) / det;
                let lb = ((pc.y - pa.y) * (q.x - pc.x) + (pa.x - pc.x) * (q.y - pc.y)) / det;
                let lc = 1.0 - la - lb;
                Some(la * vertex_value(a.fix()) + lb * vertex_value(b.fix()) + lc * vertex_value(c.fix()))
            }
            PositionInTriangulation::OutsideOfConvexHull(_) | PositionInTriangulation::NoTriangulation => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice() -> (Vec<f64>, Vec<f64>) {
        let mut s = Vec::new();
        let mut v = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let (x, y) = (i as f64 * 0.25, j as f64 * 0.25);
                s.extend_from_slice(&[x, y]);
                v.push(2.0 * x - y + 3.0);
            }
        }
        (s, v)
    }

    #[test]
    fn zero_triangle() {
        let f = build_interpolant(2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0], &[0.0; 3], InterpMethod::DelaunayLinear).unwrap();
        for q in [[0.2, 0.2], [0.5, 0.0], [0.0, 0.0]] {
            assert_eq!(f.eval(&q), 0.0);
        }
    }

    #[test]
    fn affine_reproduction() {
        let (s, v) = lattice();
        let f = build_interpolant(2, &s, &v, InterpMethod::DelaunayLinear).unwrap();
        for q in [[0.1, 0.9], [0.33, 0.77], [0.5, 0.5], [1.0, 0.3], [0.125, 0.25]] {
            assert!((f.eval(&q) - (2.0 * q[0] - q[1] + 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_midpoint() {
        let f = build_interpolant(2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0], &[0.0, 1.0, 0.0], InterpMethod::DelaunayLinear).unwrap();
        assert!((f.eval(&[0.5, 0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn idw_hand_example() {
        let f = build_interpolant(1, &[1.0, -2.0], &[0.0, 3.0], InterpMethod::Idw { k: 2, power: 2.0 }).unwrap();
        assert_eq!(f.eval(&[0.0]), 0.6);
        assert_eq!(f.eval(&[-2.0]), 3.0);
    }

    #[test]
    fn nearest_single_site_and_ties() {
        let f = build_interpolant(2, &[0.5, 0.5], &[4.0], InterpMethod::Nearest).unwrap();
        assert_eq!(f.eval(&[-10.0, 3.0]), 4.0);
        let g = build_interpolant(1, &[-1.0, 1.0], &[7.0, 8.0], InterpMethod::Nearest).unwrap();
        assert_eq!(g.eval(&[0.0]), 7.0);
    }

    #[test]
    fn duplicates_keep_first_value() {
        let f = build_interpolant(
            2,
            &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            &[1.0, 2.0, 3.0, 99.0],
            InterpMethod::DelaunayLinear,
        )
        .unwrap();
        assert_eq!(f.n_sites(), 3);
        assert_eq!(f.eval(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn degenerate_sites_rejected() {
        let r = build_interpolant(2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0], &[0.0; 3], InterpMethod::DelaunayLinear);
        match r {
            Err(Error::DegenerateSites(msg)) => assert!(msg.contains("collinear")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(build_interpolant(2, &[0.0, 0.0, 1.0, 1.0], &[0.0; 2], InterpMethod::DelaunayLinear).is_err());
        assert!(build_interpolant(3, &[0.0; 9], &[0.0; 3], InterpMethod::DelaunayLinear).is_err());
        assert!(build_interpolant(2, &[], &[], InterpMethod::Nearest).is_err());
    }

    #[test]
    fn outside_hull_uses_idw() {
        let (s, v) = lattice();
        let f = build_interpolant(2, &s, &v, InterpMethod::DelaunayLinear).unwrap();
        let g = build_interpolant(2, &s, &v, InterpMethod::Idw { k: 3, power: 2.0 }).unwrap();
        assert_eq!(f.eval(&[2.0, -1.0]), g.eval(&[2.0, -1.0]));
    }
}
