use std::f64::consts::{FRAC_PI_2, PI};

use approx::assert_relative_eq;
use proptest::prelude::*;
use thinobs_core::legendre::{cap_bound_constant, equator_signs, solve_p_on, DELTA_CAP};

fn expected(mu: f64) -> (i8, i8) {
    let s = |v: f64| if v > 0.0 { 1 } else { -1 };
    (s((mu * PI / 2.0).cos()), s((mu * PI / 2.0).sin()))
}

#[test]
fn sign_law_on_tenth_grid() {
    for n in [3, 4, 5] {
        for i in 1..200 {
            if i % 10 == 0 {
                continue;
            }
            let mu = i as f64 / 10.0;
            assert_eq!(equator_signs(mu, n).unwrap(), expected(mu), "mu={mu} n={n}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sign_law_random(mu in 0.01f64..19.99, n in 3usize..=5) {
        prop_assume!((mu - mu.round()).abs() > 1e-3);
        prop_assert_eq!(equator_signs(mu, n).unwrap(), expected(mu));
    }

    #[test]
    fn energy_grows_toward_the_pole(mu in 0.5f64..15.0, n in 3usize..=5) {
        let nodes: Vec<f64> = (0..400).map(|i| FRAC_PI_2 * i as f64 / 400.0).collect();
        let e = solve_p_on(mu, n, 1e-10, &nodes).unwrap();
        let en = e.energy();
        let scale = en.iter().cloned().fold(0.0, f64::max);
        for w in en.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-7 * scale);
        }
    }
}

fn sign_changes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    (1..ys.len())
        .filter(|&i| ys[i - 1] * ys[i] < 0.0)
        .map(|i| xs[i - 1] - ys[i - 1] * (xs[i] - xs[i - 1]) / (ys[i] - ys[i - 1]))
        .collect()
}

#[test]
fn zeros_of_p_and_derivative_interlace() {
    let nodes: Vec<f64> = (0..4000).map(|i| FRAC_PI_2 * i as f64 / 4000.0).collect();
    for mu in [4.3, 7.5, 11.9, 16.2] {
        let e = solve_p_on(mu, 3, 1e-10, &nodes).unwrap();
        let zp = sign_changes(&nodes, &e.p_values);
        let zd = sign_changes(&nodes, &e.dp_values);
        assert!(zp.len() >= 2, "mu={mu}");
        for w in zp.windows(2) {
            let between = zd.iter().filter(|&&z| z > w[0] && z < w[1]).count();
            assert_eq!(between, 1, "mu={mu} zeros {:?}", w);
        }
    }
}

#[test]
fn ratio_band_matches_frozen_oracle() {
    let data = include_str!("data/ratio_band.csv");
    for line in data.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let e = solve_p_on(f[1], 3, 1e-10, &[0.0]).unwrap();
        assert_relative_eq!(e.p0, f[2], max_relative = 1e-6);
        assert_relative_eq!(e.dp0, f[3], max_relative = 1e-6);
        let r = e.ratio().unwrap() / (f[0] * (f[0] + 1.0 - f[1]));
        assert_relative_eq!(r, f[4], max_relative = 1e-6);
    }
}

#[test]
fn cap_constant_finite_at_default_delta() {
    for n in [3, 4, 5] {
        let c = cap_bound_constant(n, DELTA_CAP).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }
}
