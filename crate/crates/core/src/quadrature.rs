//! Fixed quadrature rules on the reference triangle and segment.

/// Degree-4 rule on the reference triangle (6 points). Entries are
/// barycentric coordinates and weights summing to 1.
pub const TRI6: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_965;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223_381_589_678_011;
    const A2: f64 = 0.091_576_213_509_771;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109_951_743_655_322;
    [
        ([A1, A1, B1], W1),
        ([A1, B1, A1], W1),
        ([B1, A1, A1], W1),
        ([A2, A2, B2], W2),
        ([A2, B2, A2], W2),
        ([B2, A2, A2], W2),
    ]
};

/// Three-point Gauss rule on [0, 1] (exact to degree 5). Entries are the
/// position along the segment and the weight; weights sum to 1.
pub const GAUSS3: [(f64, f64); 3] = {
    const R: f64 = 0.387_298_334_620_741_7;
    [(0.5 - R, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + R, 5.0 / 18.0)]
};

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_exact(i: u32, j: u32) -> f64 {
        // integral of x^i y^j over the unit reference triangle of area 1/2
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        f(i) * f(j) / f(i + j + 2)
    }

    #[test]
    fn tri6_exact_to_degree_four() {
        for i in 0..=4 {
            for j in 0..=(4 - i) {
                let q: f64 = TRI6
                    .iter()
                    .map(|(l, w)| 0.5 * w * l[1].powi(i as i32) * l[2].powi(j as i32))
                    .sum();
                assert!((q - monomial_exact(i, j)).abs() < 1e-14, "{i} {j}");
            }
        }
    }

    #[test]
    fn gauss3_exact_to_degree_five() {
        for p in 0..=5 {
            let q: f64 = GAUSS3.iter().map(|(s, w)| w * s.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
