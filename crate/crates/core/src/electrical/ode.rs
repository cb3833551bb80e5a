/// One classical fourth-order Runge-Kutta step of `y' = f(y)`.
///
/// Inputs to `f` are held constant over the step (zero-order hold), which is
/// how the sampled controller drives the plant.
pub fn rk4_step<const N: usize, F>(f: F, y: [f64; N], dt: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let axpy = |a: f64, x: &[f64; N], y: &[f64; N]| -> [f64; N] {
        let mut out = *y;
        for (o, xi) in out.iter_mut().zip(x) {
            *o += a * xi;
        }
        out
    };
    let k1 = f(&y);
    let k2 = f(&axpy(0.5 * dt, &k1, &y));
    let k3 = f(&axpy(0.5 * dt, &k2, &y));
    let k4 = f(&axpy(dt, &k3, &y));
    let mut out = y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}
