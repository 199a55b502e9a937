//! Finite-difference weights on arbitrary nodes (Fornberg's recursion).

/// Weights for derivatives of order 0..=m at evaluation point `z` given
/// sample locations `x`. Returns `w[k][j]`: the weight of sample j in the
/// order-k derivative. Exact for polynomials of degree < x.len().
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    assert!(n > m, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    // transpose to w[k][j]
    (0..=m)
        .map(|k| (0..n).map(|j| c[j][k]).collect())
        .collect()
}

/// Half-width of the minimal centered stencil for derivative order q.
pub fn central_half_width(q: usize) -> usize {
    q.div_ceil(2)
}

/// Minimal centered second-order stencil weights for order q at unit spacing.
pub fn central_stencil(q: usize) -> Vec<f64> {
    let w = central_half_width(q);
    let nodes: Vec<f64> = (-(w as isize)..=w as isize).map(|i| i as f64).collect();
    fd_weights(0.0, &nodes, q).swap_remove(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_derivative_centered() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 1);
        assert!((w[1][0] + 0.5).abs() < 1e-14);
        assert!(w[1][1].abs() < 1e-14);
        assert!((w[1][2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn second_derivative_centered() {
        let w = central_stencil(2);
        assert!((w[0] - 1.0).abs() < 1e-14);
        assert!((w[1] + 2.0).abs() < 1e-14);
        assert!((w[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_sided_is_exact_on_polynomials() {
        // 5-node one-sided first derivative at the left edge, degree-4 poly
        let nodes: Vec<f64> = (0..5).map(|i| i as f64 * 0.3).collect();
        let w = fd_weights(0.0, &nodes, 1);
        let f = |x: f64| 2.0 - x + 3.0 * x.powi(2) + 0.5 * x.powi(4);
        let df = |x: f64| -1.0 + 6.0 * x + 2.0 * x.powi(3);
        let est: f64 = nodes.iter().zip(&w[1]).map(|(&x, &c)| c * f(x)).sum();
        assert!((est - df(0.0)).abs() < 1e-10);
    }

    #[test]
    fn fifth_derivative_exact_on_t5() {
        let w = central_stencil(5);
        let nodes: Vec<f64> = (-3..=3).map(|i| i as f64).collect();
        let est: f64 = nodes.iter().zip(&w).map(|(&x, &c)| c * x.powi(5)).sum();
        assert!((est - 120.0).abs() < 1e-9);
    }
}
