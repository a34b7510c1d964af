//! Pixel-set rasterization. Pixel `(x, y)` covers `[x, x+1) x [y, y+1)` and is
//! represented by its center `(x + 0.5, y + 0.5)`.

use crate::geometry::Point2D;
use crate::scalar::Real;

pub type PixelCoord = (u32, u32);

/// Twice-area tolerance below which a triangle is considered degenerate.
pub const DEGENERATE_AREA: f64 = 1e-9;

/// Signed edge function: positive when `p` is left of `a -> b` (y down).
pub fn edge_function<T: Real>(a: Point2D<T>, b: Point2D<T>, p: Point2D<T>) -> T {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Inside-or-on test against a non-degenerate triangle of either orientation.
pub fn in_triangle<T: Real>(a: Point2D<T>, b: Point2D<T>, c: Point2D<T>, p: Point2D<T>) -> bool {
    let area = edge_function(a, b, c);
    let (e0, e1, e2) = (edge_function(a, b, p), edge_function(b, c, p), edge_function(c, a, p));
    if area > T::zero() {
        e0 >= T::zero() && e1 >= T::zero() && e2 >= T::zero()
    } else {
        e0 <= T::zero() && e1 <= T::zero() && e2 <= T::zero()
    }
}

pub fn is_degenerate_triangle<T: Real>(a: Point2D<T>, b: Point2D<T>, c: Point2D<T>) -> bool {
    !(edge_function(a, b, c).abs() > T::lit(DEGENERATE_AREA))
}

fn center<T: Real>(x: u32, y: u32) -> Point2D<T> {
    Point2D::new(T::lit(f64::from(x) + 0.5), T::lit(f64::from(y) + 0.5))
}

fn clamp_index<T: Real>(v: T, limit: u32) -> i64 {
    let v = v.to_f64_lossy();
    if v.is_nan() {
        0
    } else {
        (v as i64).clamp(-1, i64::from(limit))
    }
}

/// Pixels whose centers lie inside or on triangle `abc`, clipped to the frame,
/// in row-major order. `None` when the triangle is degenerate.
///
/// Each row's span comes from intersecting the center line with the triangle
/// edges; the span is widened by one pixel and every pixel in it is confirmed
/// with [`in_triangle`].
pub fn triangle<T: Real>(
    a: Point2D<T>,
    b: Point2D<T>,
    c: Point2D<T>,
    width: u32,
    height: u32,
) -> Option<Vec<PixelCoord>> {
    if is_degenerate_triangle(a, b, c) {
        return None;
    }
    let half = T::lit(0.5);
    let min_y = a.y.min(b.y).min(c.y);
    let max_y = a.y.max(b.y).max(c.y);
    let y0 = clamp_index((min_y - half).floor(), height).max(0);
    let y1 = clamp_index((max_y - half).ceil(), height).min(i64::from(height) - 1);
    let edges = [(a, b), (b, c), (c, a)];
    let mut out = Vec::new();
    for y in y0..=y1 {
        let cy = T::lit(y as f64 + 0.5);
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &(p, q) in &edges {
            let (ylo, yhi) = (p.y.min(q.y), p.y.max(q.y));
            if cy < ylo || cy > yhi {
                continue;
            }
            if p.y == q.y {
                lo = lo.min(p.x.min(q.x));
                hi = hi.max(p.x.max(q.x));
            } else {
                let t = (cy - p.y) / (q.y - p.y);
                let x = p.x + t * (q.x - p.x);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            continue;
        }
        let x0 = (clamp_index((lo - half).floor(), width) - 1).max(0);
        let x1 = (clamp_index((hi - half).ceil(), width) + 1).min(i64::from(width) - 1);
        for x in x0..=x1 {
            let (x, y) = (x as u32, y as u32);
            if in_triangle(a, b, c, center(x, y)) {
                out.push((x, y));
            }
        }
    }
    Some(out)
}

/// Pixels whose centers lie in the half-open box `[x0, x0 + side) x [y0, y0 + side)`.
pub fn square<T: Real>(x0: T, y0: T, side: T, width: u32, height: u32) -> Vec<PixelCoord> {
    let half = T::lit(0.5);
    // center x + 0.5 >= x0  <=>  x >= x0 - 0.5
    let first = |lo: T, limit: u32| clamp_index((lo - half).ceil(), limit).max(0);
    let last = |hi: T, limit: u32| {
        // center < hi  <=>  x < hi - 0.5
        let bound = hi - half;
        (clamp_index(bound.ceil(), limit) - 1).min(i64::from(limit) - 1)
    };
    let (xa, xb) = (first(x0, width), last(x0 + side, width));
    let (ya, yb) = (first(y0, height), last(y0 + side, height));
    let mut out = Vec::new();
    for y in ya..=yb {
        for x in xa..=xb {
            out.push((x as u32, y as u32));
        }
    }
    out
}

/// Integer Bresenham line from `(x0, y0)` to `(x1, y1)`, both ends included.
pub fn bresenham(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Bresenham line between the pixels containing `p` and `q`, widened to three
/// pixels by adding both neighbors across the line's major axis, clipped to
/// the frame. Line order, each line pixel preceded by its lower neighbor.
pub fn thick_line<T: Real>(p: Point2D<T>, q: Point2D<T>, width: u32, height: u32) -> Vec<PixelCoord> {
    let px = |v: T| v.floor().to_i64().unwrap_or(i64::MIN / 4);
    let (x0, y0, x1, y1) = (px(p.x), px(p.y), px(q.x), px(q.y));
    let y_major = (y1 - y0).abs() >= (x1 - x0).abs();
    let in_frame = |x: i64, y: i64| x >= 0 && y >= 0 && x < i64::from(width) && y < i64::from(height);
    let mut out = Vec::new();
    for (x, y) in bresenham(x0, y0, x1, y1) {
        let trio = if y_major { [(x - 1, y), (x, y), (x + 1, y)] } else { [(x, y - 1), (x, y), (x, y + 1)] };
        for (tx, ty) in trio {
            if in_frame(tx, ty) {
                out.push((tx as u32, ty as u32));
            }
        }
    }
    out
}
