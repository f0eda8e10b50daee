//! Reference implementations used as oracles by the integration tests.
#![allow(dead_code)]

use monoslope::Scalar;

/// Least concave majorant vertices by gift wrapping: from the current
/// vertex, jump to the later point of largest chord slope, preferring the
/// farthest on ties. O(m²).
pub fn lcm_jarvis<T: Scalar>(pts: &[(T, T)]) -> Vec<usize> {
    let mut out = vec![0];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut best = i + 1;
        for j in i + 2..pts.len() {
            // slope(i, j) >= slope(i, best), cross-multiplied (dx > 0)
            let lhs = (pts[j].1 - pts[i].1) * (pts[best].0 - pts[i].0);
            let rhs = (pts[best].1 - pts[i].1) * (pts[j].0 - pts[i].0);
            if lhs >= rhs {
                best = j;
            }
        }
        out.push(best);
        i = best;
    }
    out
}

/// Greatest convex minorant vertices via the majorant of the reflection.
pub fn gcm_jarvis<T: Scalar>(pts: &[(T, T)]) -> Vec<usize> {
    let neg: Vec<(T, T)> = pts.iter().map(|&(x, y)| (x, -y)).collect();
    lcm_jarvis(&neg)
}

/// Antitonic weighted least squares fit (pool adjacent violators).
pub fn pava_nonincreasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    // blocks of (weighted sum, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &wt) in y.iter().zip(w) {
        blocks.push((v * wt, wt, 1));
        while blocks.len() > 1 {
            let (s2, w2, c2) = blocks[blocks.len() - 1];
            let (s1, w1, c1) = blocks[blocks.len() - 2];
            if s1 / w1 >= s2 / w2 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, w1 + w2, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, w, c)| std::iter::repeat_n(s / w, c))
        .collect()
}

/// Greatest maximiser of `f(u) - a u` over the candidate points, by brute
/// force over every point.
pub fn argmax_points(pts: &[(f64, f64)], a: f64) -> f64 {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &(u, y) in pts {
        let v = y - a * u;
        if v >= best.0 {
            best = (v, u);
        }
    }
    best.1
}
