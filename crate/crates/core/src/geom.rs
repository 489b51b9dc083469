//! Small 2D vector helpers.

pub type Vec2 = [f64; 2];

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Vec2, b: Vec2) -> f64 {
    norm(sub(a, b))
}

/// Twice the signed area of `(a, b, c)`; positive when counter-clockwise.
#[inline]
pub fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(sub(b, a), sub(c, a))
}

#[inline]
pub fn centroid(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// Sign test for `p` in the closed triangle, either orientation.
/// Degenerate triangles contain nothing.
#[inline]
pub fn point_in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    let d0 = orient(a, b, p);
    let d1 = orient(b, c, p);
    let d2 = orient(c, a, p);
    let area = orient(a, b, c);
    if area > 0.0 {
        d0 >= 0.0 && d1 >= 0.0 && d2 >= 0.0
    } else if area < 0.0 {
        d0 <= 0.0 && d1 <= 0.0 && d2 <= 0.0
    } else {
        false
    }
}

/// Smallest interior angle in radians.
pub fn min_angle(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let angle = |p: Vec2, q: Vec2, r: Vec2| {
        let u = sub(q, p);
        let v = sub(r, p);
        cross(u, v).abs().atan2(dot(u, v))
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b))
}
