use thinobs_core::construct::BuildOptions;
use thinobs_core::continuation::{find_roots, scan_c, uniform_sigmas, Evaluator, Resolution};
use thinobs_core::gaps::bundle_pairing;

#[test]
fn roots_are_valid_brackets_at_every_level() {
    let ev = Evaluator::new(BuildOptions::default());
    let (_, roots) = find_roots(&ev, 5, 1, 3, Resolution::square(33)).unwrap();
    assert_eq!(roots.len(), 1);
    let r = &roots[0];
    assert!(r.in_frequency_window());
    assert!(r.nodal_ok);
    for l in &r.mesh_levels {
        assert!(l.c_lo * l.c_hi < 0.0);
        assert!(l.mu_lo <= l.mu_hi);
        assert!(l.sigma_root >= l.sigma_lo && l.sigma_root <= l.sigma_hi);
    }
    assert!(r.observed_order.is_some());
}

#[test]
fn rescans_are_bitwise_identical() {
    let sig = uniform_sigmas(7);
    let a = scan_c(&Evaluator::new(BuildOptions::default()), 3, 1, &sig, Resolution::square(33)).unwrap();
    let b = scan_c(&Evaluator::new(BuildOptions::default()), 3, 1, &sig, Resolution::square(33)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let (x, y) = (x.result.as_ref().unwrap(), y.result.as_ref().unwrap());
        assert_eq!(x.c.to_bits(), y.c.to_bits());
        assert_eq!(x.mu.to_bits(), y.mu.to_bits());
    }
}

#[test]
fn pairing_vanishes_at_the_root() {
    let ev = Evaluator::new(BuildOptions::default());
    let res = Resolution::square(65);
    let (_, roots) = find_roots(&ev, 3, 1, 1, res).unwrap();
    let f = roots[0].finest();
    let lo = bundle_pairing(&ev.bundle(3, 1, f.lo_index, res).unwrap());
    let hi = bundle_pairing(&ev.bundle(3, 1, f.hi_index, res).unwrap());
    // linear interpolation to the root
    let t = (roots[0].finest().sigma_root - f.sigma_lo) / (f.sigma_hi - f.sigma_lo);
    let at_root = lo + t * (hi - lo);
    assert!(lo * hi < 0.0);
    assert!(at_root.abs() < 1e-3 * lo.abs().max(hi.abs()));
}
