//! Polygon shape descriptors for particle contours.

use serde::{Deserialize, Serialize};

use crate::numeric::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors<T> {
    pub area: T,
    pub perimeter: T,
    pub centroid: Point<T>,
    /// sqrt(1 - l2/l1) over the eigenvalues of the second central moments.
    pub eccentricity: T,
    /// Circularity 4 pi A / P^2.
    pub sphericity: T,
    /// Area over convex hull area.
    pub solidity: T,
}

/// Signed shoelace area; positive for counter-clockwise vertex order.
pub fn signed_area<T: Scalar>(pts: &[Point<T>]) -> T {
    let n = pts.len();
    let mut acc = T::zero();
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        acc = acc + (p.x * q.y - q.x * p.y);
    }
    acc / T::lit(2.0)
}

pub fn perimeter<T: Scalar>(pts: &[Point<T>]) -> T {
    let n = pts.len();
    (0..n).fold(T::zero(), |acc, i| {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        acc + ((q.x - p.x).powi(2) + (q.y - p.y).powi(2)).sqrt()
    })
}

/// Andrew's monotone chain; counter-clockwise, no repeated endpoint.
pub fn convex_hull<T: Scalar>(pts: &[Point<T>]) -> Vec<Point<T>> {
    let mut p: Vec<Point<T>> = pts.to_vec();
    p.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
    });
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross = |o: Point<T>, a: Point<T>, b: Point<T>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut hull: Vec<Point<T>> = Vec::with_capacity(2 * p.len());
    for &pt in &p {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= T::zero()
        {
            hull.pop();
        }
        hull.push(pt);
    }
    let lower = hull.len() + 1;
    for &pt in p.iter().rev().skip(1) {
        while hull.len() >= lower
            && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= T::zero()
        {
            hull.pop();
        }
        hull.push(pt);
    }
    hull.pop();
    hull
}

/// Vertices of an ellipse with semi-axes `a`, `b`, rotated by `angle` rad.
pub fn ellipse<T: Scalar>(
    center: Point<T>,
    a: T,
    b: T,
    angle: T,
    vertices: usize,
) -> Vec<Point<T>> {
    let (s, c) = angle.sin_cos();
    (0..vertices)
        .map(|i| {
            let th = T::lit(2.0 * std::f64::consts::PI) * T::from_usize(i).expect("vertex index")
                / T::from_usize(vertices).expect("vertex count");
            let (x, y) = (a * th.cos(), b * th.sin());
            Point {
                x: center.x + x * c - y * s,
                y: center.y + x * s + y * c,
            }
        })
        .collect()
}

/// Descriptors of a simple polygon, or None when it has no area.
pub fn describe<T: Scalar>(pts: &[Point<T>]) -> Option<ShapeDescriptors<T>> {
    if pts.len() < 3 {
        return None;
    }
    let sa = signed_area(pts);
    if sa == T::zero() || !sa.is_finite() {
        return None;
    }
    // Orient counter-clockwise so the moment integrals come out positive.
    let ccw: Vec<Point<T>> = if sa > T::zero() {
        pts.to_vec()
    } else {
        pts.iter().rev().copied().collect()
    };
    let area = sa.abs();
    let n = ccw.len();
    // Moments are taken about the vertex mean to limit cancellation.
    let nt = T::from_usize(n).expect("vertex count");
    let origin = Point {
        x: ccw.iter().fold(T::zero(), |s, p| s + p.x) / nt,
        y: ccw.iter().fold(T::zero(), |s, p| s + p.y) / nt,
    };
    let local: Vec<Point<T>> = ccw
        .iter()
        .map(|p| Point {
            x: p.x - origin.x,
            y: p.y - origin.y,
        })
        .collect();
    let (mut cx, mut cy) = (T::zero(), T::zero());
    let (mut ixx, mut iyy, mut ixy) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        let (p, q) = (local[i], local[(i + 1) % n]);
        let cr = p.x * q.y - q.x * p.y;
        cx = cx + (p.x + q.x) * cr;
        cy = cy + (p.y + q.y) * cr;
        ixx = ixx + (p.x * p.x + p.x * q.x + q.x * q.x) * cr;
        iyy = iyy + (p.y * p.y + p.y * q.y + q.y * q.y) * cr;
        ixy =
            ixy + (p.x * q.y + T::lit(2.0) * p.x * p.y + T::lit(2.0) * q.x * q.y + q.x * p.y) * cr;
    }
    let six_a = T::lit(6.0) * area;
    let c = Point {
        x: cx / six_a,
        y: cy / six_a,
    };
    // second moments about the centroid, normalised by area
    let mxx = ixx / T::lit(12.0) / area - c.x * c.x;
    let myy = iyy / T::lit(12.0) / area - c.y * c.y;
    let mxy = ixy / T::lit(24.0) / area - c.x * c.y;
    let centroid = Point {
        x: c.x + origin.x,
        y: c.y + origin.y,
    };
    let half_tr = (mxx + myy) / T::lit(2.0);
    let disc = (((mxx - myy) / T::lit(2.0)).powi(2) + mxy * mxy).sqrt();
    let (l1, l2) = (half_tr + disc, (half_tr - disc).max(T::zero()));
    let eccentricity = if l1 > T::zero() {
        (T::one() - l2 / l1).max(T::zero()).sqrt()
    } else {
        T::zero()
    };

    let perim = perimeter(&ccw);
    let sphericity = (T::lit(4.0 * std::f64::consts::PI) * area / (perim * perim)).min(T::one());
    let hull_area = signed_area(&convex_hull(&ccw)).abs();
    let solidity = if hull_area > T::zero() {
        (area / hull_area).min(T::one())
    } else {
        T::one()
    };
    Some(ShapeDescriptors {
        area,
        perimeter: perim,
        centroid,
        eccentricity,
        sphericity,
        solidity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> Point<f64> {
        Point { x, y }
    }

    #[test]
    fn unit_square() {
        let sq = [pt(0.0, 0.0), pt(1.0, 0.0), pt(1.0, 1.0), pt(0.0, 1.0)];
        let d = describe(&sq).unwrap();
        assert_eq!(d.area, 1.0);
        assert_eq!(d.centroid, pt(0.5, 0.5));
        assert!(d.eccentricity.abs() < 1e-12);
        assert_eq!(d.solidity, 1.0);
        assert!((d.sphericity - std::f64::consts::PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_same_as_ccw() {
        let sq = [pt(0.0, 0.0), pt(0.0, 2.0), pt(3.0, 2.0), pt(3.0, 0.0)];
        let d = describe(&sq).unwrap();
        assert_eq!(d.area, 6.0);
        assert_eq!(d.centroid, pt(1.5, 1.0));
    }

    #[test]
    fn l_shape_solidity() {
        let l = [
            pt(0.0, 0.0),
            pt(2.0, 0.0),
            pt(2.0, 1.0),
            pt(1.0, 1.0),
            pt(1.0, 2.0),
            pt(0.0, 2.0),
        ];
        let d = describe(&l).unwrap();
        assert_eq!(d.area, 3.0);
        assert!((d.solidity - 3.0 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate() {
        assert!(describe(&[pt(0.0, 0.0), pt(1.0, 1.0), pt(2.0, 2.0)]).is_none());
    }
}
