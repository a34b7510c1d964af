//! Pixel sets by testing every pixel center of the frame.

use std::collections::BTreeSet;

use ivise_core::geometry::Point2D;

pub type Pixels = BTreeSet<(u32, u32)>;

fn cross(o: Point2D<f64>, a: Point2D<f64>, p: Point2D<f64>) -> f64 {
    (a.x - o.x) * (p.y - o.y) - (a.y - o.y) * (p.x - o.x)
}

/// Pixels whose centers satisfy all three half-plane tests of triangle `abc`.
pub fn triangle(a: Point2D<f64>, b: Point2D<f64>, c: Point2D<f64>, width: u32, height: u32) -> Pixels {
    let orient = cross(a, b, c).signum();
    let mut out = BTreeSet::new();
    for y in 0..height {
        for x in 0..width {
            let p = Point2D::new(f64::from(x) + 0.5, f64::from(y) + 0.5);
            let inside = [cross(a, b, p), cross(b, c, p), cross(c, a, p)].iter().all(|&e| e * orient >= 0.0);
            if inside {
                out.insert((x, y));
            }
        }
    }
    out
}

/// Pixels whose centers lie in the half-open square `[x0, x0+side) x [y0, y0+side)`.
pub fn square(x0: f64, y0: f64, side: f64, width: u32, height: u32) -> Pixels {
    let mut out = BTreeSet::new();
    for y in 0..height {
        for x in 0..width {
            let (cx, cy) = (f64::from(x) + 0.5, f64::from(y) + 0.5);
            if cx >= x0 && cx < x0 + side && cy >= y0 && cy < y0 + side {
                out.insert((x, y));
            }
        }
    }
    out
}

/// For a line between integer pixels, lists for each step along the major
/// axis the minor coordinates within half a pixel of the ideal line. Exact
/// midpoints yield two admissible choices.
pub fn line_candidates(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<Vec<(i64, i64)>> {
    let (dx, dy) = (x1 - x0, y1 - y0);
    let y_major = dy.abs() >= dx.abs();
    let steps = dx.abs().max(dy.abs());
    let mut out = Vec::new();
    for s in 0..=steps {
        if steps == 0 {
            out.push(vec![(x0, y0)]);
            break;
        }
        // Work in integers: minor * steps vs exact numerator.
        let (major, num) = if y_major {
            (y0 + s * dy.signum(), x0 * steps + s * dx)
        } else {
            (x0 + s * dx.signum(), y0 * steps + s * dy)
        };
        let mut choices = Vec::new();
        let lo = num.div_euclid(steps) - 1;
        for m in lo..=lo + 3 {
            if (2 * (m * steps - num)).abs() <= steps {
                choices.push(if y_major { (m, major) } else { (major, m) });
            }
        }
        out.push(choices);
    }
    out
}

/// Checks that `line` picks one admissible pixel per step of [`line_candidates`].
pub fn line_is_admissible(line: &[(i64, i64)], x0: i64, y0: i64, x1: i64, y1: i64) -> bool {
    let cands = line_candidates(x0, y0, x1, y1);
    line.len() == cands.len() && line.iter().zip(&cands).all(|(p, c)| c.contains(p))
}

/// A center line widened by one pixel on both sides across the major axis and clipped.
pub fn dilate(line: &[(i64, i64)], y_major: bool, width: u32, height: u32) -> Pixels {
    let mut out = BTreeSet::new();
    for &(x, y) in line {
        for d in -1..=1 {
            let (tx, ty) = if y_major { (x + d, y) } else { (x, y + d) };
            if tx >= 0 && ty >= 0 && tx < i64::from(width) && ty < i64::from(height) {
                out.insert((tx as u32, ty as u32));
            }
        }
    }
    out
}
