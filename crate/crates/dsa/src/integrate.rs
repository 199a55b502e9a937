//! Explicit Runge-Kutta helpers shared by the simulator and the oracles.

/// One classical 4-stage Runge-Kutta step of `dx/dt = rhs(x)`.
pub fn rk4_step(rhs: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], dt: f64) -> Vec<f64> {
    let k1 = rhs(x);
    let mid1: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k2 = rhs(&mid1);
    let mid2: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * dt * k).collect();
    let k3 = rhs(&mid2);
    let end: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
    let k4 = rhs(&end);
    x.iter()
        .enumerate()
        .map(|(i, a)| a + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrate and record `n` states at spacing `dt`, starting from `x0`
/// (inclusive). `substeps` internal stages tighten the truncation error.
pub fn integrate_record(
    rhs: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    dt: f64,
    n: usize,
    substeps: usize,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut x = x0.to_vec();
    out.push(x.clone());
    let h = dt / substeps.max(1) as f64;
    for _ in 1..n {
        for _ in 0..substeps.max(1) {
            x = rk4_step(rhs, &x, h);
        }
        out.push(x.clone());
    }
    out
}
