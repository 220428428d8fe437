use crate::eos::Eos;

use super::SteadyProfile;

/// Max-norm residuals of the reduced steady continuity and momentum
/// equations, evaluated from the sampled `rho` and `u` alone with centered
/// three-point second-order differences at the interior nodes (exact for
/// quadratics on any grid):
///
/// ```text
/// rho u' + u rho' + alpha rho u / r
/// rho u u' + p(rho)' - nu (u'' + alpha (u'/r - u/r^2))
/// ```
pub fn steady_residual(profile: &SteadyProfile, eos: &Eos) -> (f64, f64) {
    let (c, m) = pointwise_residuals(profile, eos);
    let max = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    (max(&c), max(&m))
}

/// The residuals of [`steady_residual`] node by node (zero at the two end
/// nodes).
pub fn pointwise_residuals(profile: &SteadyProfile, eos: &Eos) -> (Vec<f64>, Vec<f64>) {
    let n = profile.r.len();
    let mut rc = vec![0.0; n];
    let mut rm = vec![0.0; n];
    if n < 3 {
        return (rc, rm);
    }
    let alpha = profile.geometry.alpha() as f64;
    let nu = profile.nu;
    let (r, rho, u) = (&profile.r, &profile.rho, &profile.u);
    for i in 1..n - 1 {
        let hl = r[i] - r[i - 1];
        let hr = r[i + 1] - r[i];
        let h2 = hl + hr;
        let d1 = |f: &dyn Fn(usize) -> f64| {
            let (fm, f0, fp) = (f(i - 1), f(i), f(i + 1));
            (hl * hl * (fp - f0) + hr * hr * (f0 - fm)) / (hl * hr * h2)
        };
        let du = d1(&|j| u[j]);
        let drho = d1(&|j| rho[j]);
        let dp = d1(&|j| eos.p(rho[j]));
        let d2u = 2.0 * ((u[i + 1] - u[i]) / hr - (u[i] - u[i - 1]) / hl) / h2;
        let geo = if alpha == 0.0 { 0.0 } else { alpha * rho[i] * u[i] / r[i] };
        let cont = rho[i] * du + u[i] * drho + geo;
        let visc = d2u + if alpha == 0.0 { 0.0 } else { alpha * (du / r[i] - u[i] / (r[i] * r[i])) };
        let mom = rho[i] * u[i] * du + dp - nu * visc;
        rc[i] = cont;
        rm[i] = mom;
    }
    (rc, rm)
}
