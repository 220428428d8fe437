use barostab_core::steady::{
    exterior_decay_exponents, flat_curved_comparison, integrate_strip_velocity, solve_steady, steady_residual,
    strip_constant_lambda, SolverOptions, SteadyProfile,
};
use barostab_core::{BoundaryData, Eos, EosSpec, Error, Geometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn iso() -> Eos {
    Eos::new(EosSpec::Isentropic { a: 1.0, gamma: 2.0 }).unwrap()
}

fn hs() -> Eos {
    Eos::new(EosSpec::HardSphere { a: 1.0, beta: 3.0, rho_bar: 2.0 }).unwrap()
}

fn strip_data(u_plus: f64) -> BoundaryData {
    BoundaryData { rho_b: 1.0, u_b_minus: 0.1, u_b_plus: u_plus, mu: 5.0, ..Default::default() }
}

fn exterior_data() -> BoundaryData {
    BoundaryData { u_b: 0.01, rho_inf: 1.0, mu: 0.1, ..Default::default() }
}

fn exterior() -> Geometry {
    Geometry::Exterior { r_bar: 1.0, r_trunc: 200.0 }
}

fn opts(n_cells: usize) -> SolverOptions {
    SolverOptions { n_cells, check_truncation: false, ..Default::default() }
}

#[test]
fn comparison_principle_on_random_pairs() {
    let eos = iso();
    let b = strip_data(0.12);
    let base = strip_constant_lambda(&eos, &b);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let l1 = base + rng.gen_range(-0.05..0.2);
        let l2 = base + rng.gen_range(-0.05..0.2);
        if l1 == l2 {
            continue;
        }
        let (hi, lo) = if l1 > l2 { (l1, l2) } else { (l2, l1) };
        let a = integrate_strip_velocity(&eos, &b, hi, 256).unwrap();
        let c = integrate_strip_velocity(&eos, &b, lo, 256).unwrap();
        assert!(a.terminal > c.terminal);
        assert!(a.u.iter().zip(&c.u).skip(1).all(|(x, y)| x > y));
    }
}

#[test]
fn terminal_value_converges_under_refinement() {
    let eos = iso();
    let b = strip_data(0.12);
    let lambda = strip_constant_lambda(&eos, &b) + 0.01;
    let coarse = integrate_strip_velocity(&eos, &b, lambda, 4096).unwrap();
    let fine = integrate_strip_velocity(&eos, &b, lambda, 8192).unwrap();
    assert!((coarse.terminal - fine.terminal).abs() < 1e-9);
}

#[test]
fn equal_speeds_give_constant_profile() {
    let eos = iso();
    let b = strip_data(0.1);
    let p = solve_steady(&eos, &Geometry::Strip, &b, &SolverOptions::default()).unwrap();
    let lambda = -eos.p(1.0) - 1.0 * 0.1 * 0.1;
    assert!((p.parameter - lambda).abs() <= 1e-12);
    assert!(p.u.iter().all(|&u| (u - 0.1).abs() <= 1e-12));
    assert!(p.rho.iter().all(|&r| (r - 1.0).abs() <= 1e-12));
    let (rc, rm) = steady_residual(&p, &eos);
    assert!(rc <= 1e-14 && rm <= 1e-14);
}

#[test]
fn decreasing_speeds_are_rejected() {
    let err = solve_steady(&iso(), &Geometry::Strip, &strip_data(0.08), &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)));
}

#[test]
fn strip_profile_properties() {
    let eos = iso();
    let b = strip_data(0.12);
    let p = solve_steady(&eos, &Geometry::Strip, &b, &SolverOptions::default()).unwrap();
    assert!((p.u[p.u.len() - 1] - 0.12).abs() <= 1e-10 * 0.12);
    assert!(p.du.iter().all(|&d| d > 0.0));
    assert!(p.mass_flux_deviation() <= 1e-10);
    let (_, rm) = steady_residual(&p, &eos);
    assert!(rm <= 1e-6);

    // rho' = -(rho/u) u', with rho' taken from fourth-order differences of
    // the sampled density.
    let h = p.spacing();
    for i in 2..p.r.len() - 2 {
        let drho = (p.rho[i - 2] - 8.0 * p.rho[i - 1] + 8.0 * p.rho[i + 1] - p.rho[i + 2]) / (12.0 * h);
        let expected = -p.rho[i] / p.u[i] * p.du[i];
        assert!((drho - expected).abs() <= 1e-8, "node {i}: {drho} vs {expected}");
    }
}

#[test]
fn annulus_profile_conserves_mass_flux() {
    let eos = iso();
    let g = Geometry::Annulus { r_minus: 16.0, r_plus: 17.0 };
    let p = solve_steady(&eos, &g, &strip_data(0.12), &SolverOptions::default()).unwrap();
    let target = 16.0 * 16.0 * 0.1 * 1.0;
    for i in 0..p.r.len() {
        let flux = p.r[i] * p.r[i] * p.rho[i] * p.u[i];
        assert!((flux - target).abs() <= 1e-10 * target);
    }
    assert!((p.u[p.u.len() - 1] - 0.12).abs() <= 1e-9);
}

#[test]
fn annulus_with_equal_speeds_approaches_constant() {
    let eos = iso();
    let mut prev = f64::INFINITY;
    for r in [4.0, 16.0, 64.0] {
        let g = Geometry::Annulus { r_minus: r, r_plus: r + 1.0 };
        let p = solve_steady(&eos, &g, &strip_data(0.1), &opts(1024)).unwrap();
        let dev = p.u.iter().map(|u| (u - 0.1).abs()).fold(0.0, f64::max);
        assert!(dev < prev);
        prev = dev;
    }
}

#[test]
fn exterior_profile_asymptotics() {
    let eos = hs();
    let p = solve_steady(&eos, &exterior(), &exterior_data(), &SolverOptions::default()).unwrap();
    let e = exterior_decay_exponents(&p).unwrap();
    assert!((e.density_deficit + 4.0).abs() <= 0.2, "{e:?}");
    assert!((e.velocity + 2.0).abs() <= 0.2, "{e:?}");
    assert!((e.velocity_slope + 3.0).abs() <= 0.2, "{e:?}");
    assert!((p.u[0] + 0.01).abs() <= 1e-9);
    assert!(p.u.iter().all(|&u| u < 0.0));
    assert!(p.du.iter().all(|&d| d > 0.0));
    assert!(p.deficit.as_ref().unwrap().iter().all(|&d| d > 0.0));
    assert!(p.drho.iter().all(|&d| d > 0.0));
    assert!((0..p.r.len()).all(|i| p.div_u(i) > 0.0));
    assert!(p.mass_flux_deviation() <= 1e-10);
}

fn residual_orders(eos: &Eos, geometry: &Geometry, b: &BoundaryData) -> (Vec<f64>, Vec<f64>) {
    let res: Vec<f64> = [1024, 2048, 4096]
        .iter()
        .map(|&n| {
            let p = solve_steady(eos, geometry, b, &opts(n)).unwrap();
            let (rc, rm) = steady_residual(&p, eos);
            rc.max(rm)
        })
        .collect();
    let orders = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    (res, orders)
}

#[test]
fn residuals_converge_at_second_order() {
    let cases = [
        (iso(), Geometry::Strip, strip_data(0.12)),
        (iso(), Geometry::Annulus { r_minus: 16.0, r_plus: 17.0 }, strip_data(0.12)),
        (hs(), exterior(), exterior_data()),
    ];
    for (eos, g, b) in cases {
        let (res, orders) = residual_orders(&eos, &g, &b);
        assert!(res[2] <= 1e-6, "{g:?}: {res:?}");
        assert!(orders.iter().all(|&o| o >= 1.8), "{g:?}: {orders:?}");
    }
}

#[test]
fn residual_detects_perturbed_velocity() {
    let eos = iso();
    let p = solve_steady(&eos, &Geometry::Strip, &strip_data(0.12), &SolverOptions::default()).unwrap();
    let (_, base) = steady_residual(&p, &eos);
    let mut bad: SteadyProfile = p.clone();
    let mid = bad.u.len() / 2;
    bad.u[mid] += 1e-3;
    let (_, perturbed) = steady_residual(&bad, &eos);
    assert!(perturbed >= 10.0 * base);
}

#[test]
fn flat_and_curved_profiles_converge() {
    let eos = iso();
    let b = BoundaryData { mu: 1.0, ..strip_data(0.12) };
    let t = flat_curved_comparison(&eos, &b, &[2.0, 4.0, 8.0, 16.0, 32.0], &SolverOptions::default()).unwrap();
    assert!(t.is_strictly_decreasing());
    let d: Vec<f64> = t.rows.iter().map(|r| r.c1_distance()).collect();
    assert!(d[4] <= 0.2 * d[0], "{d:?}");
    assert!(t.decay_order.unwrap() > 0.0);

    // Equal speeds: the flat profile is constant while the curved one is
    // not (the r^2 weight in the mass flux), so the distance only shrinks.
    let same = flat_curved_comparison(&eos, &strip_data(0.1), &[2.0, 4.0, 8.0, 16.0], &opts(512)).unwrap();
    assert!(same.is_strictly_decreasing());
}

#[test]
fn comparison_rejects_small_radii() {
    let r = flat_curved_comparison(&iso(), &strip_data(0.12), &[1.0, 4.0], &SolverOptions::default());
    assert!(matches!(r, Err(Error::InvalidParameter(_))));
}
