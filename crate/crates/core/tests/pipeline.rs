use std::f64::consts::TAU;

use vorlift::approx::{approximate, ApproxOptions};
use vorlift::counterexample::{build_sequence, min_norm_lower_bound};
use vorlift::cover::{classify_balls, default_classify_tol, shifted_cover, BallLabel, CoverOptions};
use vorlift::currents::{boundary, interior_boundary, level_set_current, slice_by_circle, Piece};
use vorlift::fixtures;
use vorlift::flux::circle_flux;
use vorlift::geometry::{Circle, Point};
use vorlift::lifting::{green_field, lift, lift_with_current, roundtrip, unlift, Charge};
use vorlift::{ChargeSet, Domain, Exponent, GridSpec, PolylineCurrent};

#[test]
fn lift_unlift_two_charges() {
    let g = GridSpec::unit_disk(256).unwrap();
    let (v, _, charges) = fixtures::lifted_two_charge(&g);
    // finite-difference cores: see the note on `lift`
    assert!(lift(&v, &charges, None).is_err());
    let report = roundtrip(&v, &charges, Exponent::new(1.5).unwrap(), Some(0.5)).unwrap();
    assert!(report.degrees_exact(), "{:?}", report.fluxes);
    assert_eq!(report.lift.boundary_degree, 0);
    // the vortex cores dominate the L^p error at any resolution
    assert!(report.relative_error < 0.3, "{}", report.relative_error);

    // each level set ends on the two charges with the right signs
    let cur = level_set_current(&report.lift.u, 2.0).unwrap();
    let mut bd = interior_boundary(&cur, &g, 2.0 * g.h);
    bd.sort_by_key(|m| m.multiplicity);
    assert_eq!(bd.len(), 2);
    assert_eq!(bd[0].multiplicity, -1);
    assert!(bd[0].point.dist(Point::new(0.27, -0.22)) <= g.h * 2f64.sqrt());
    assert!(bd[1].point.dist(Point::new(-0.31, 0.17)) <= g.h * 2f64.sqrt());
}

#[test]
fn level_set_slices_match_fluxes() {
    let g = GridSpec::unit_disk(192).unwrap();
    let charges = fixtures::random_charges(&g, 5, 2, 0.15, 77).unwrap();
    let v = fixtures::charges_with_swirl(&g, &charges);
    let u = lift(&v, &charges, None).unwrap().u;
    let cur = level_set_current(&u, 0.4).unwrap();
    for k in 0..12 {
        let c = Circle::new(Point::new(-0.3 + 0.05 * k as f64, 0.1 - 0.03 * k as f64), 0.2 + 0.03 * k as f64);
        if charges.charges.iter().any(|q| (q.location().dist(c.center) - c.radius).abs() < 3.0 * g.h) {
            continue;
        }
        let s = slice_by_circle(&cur, &c, 0.0).unwrap();
        assert_eq!(s.total(), circle_flux(&v, &c, 1e-6).unwrap().quantum, "circle {k}");
    }
}

#[test]
fn lift_with_a_cut_current() {
    // V = Green field of a dipole; the segment between the charges carries the cut
    let g = GridSpec::unit_disk(128).unwrap();
    let (a, b) = (Point::new(-0.3, 0.05), Point::new(0.35, 0.05));
    let dipole = ChargeSet::new(vec![Charge::new(b, 1), Charge::new(a, -1)]).unwrap();
    let v = green_field(&dipole, &g);
    let cut = PolylineCurrent::new(vec![Piece::open(vec![a, b], 1)]).unwrap();
    assert_eq!(boundary(&cut).len(), 2);
    let r = lift_with_current(&v, &ChargeSet::empty(), &cut, None).unwrap();
    assert_eq!(r.boundary_degree, 0);
    assert!(lift(&v, &ChargeSet::empty(), None).is_err());
    let flipped = PolylineCurrent::new(vec![Piece::open(vec![b, a], 1)]).unwrap();
    assert!(lift_with_current(&v, &ChargeSet::empty(), &flipped, None).is_err());
}

#[test]
fn cover_labels_follow_fluxes() {
    let g = GridSpec::unit_disk(256).unwrap();
    let (v, charges) = fixtures::dipole(&g);
    let p = Exponent::new(1.5).unwrap();
    let opts = CoverOptions { nshifts: 8, seed: 3, avoid: charges.charges.iter().map(|c| c.location()).collect() };
    let cover = classify_balls(&v, &shifted_cover(&v, 0.2, p, &opts).unwrap(), default_classify_tol()).unwrap();
    for k in 0..cover.len() {
        let ball = cover.ball(k);
        let enclosed: i64 = charges.charges.iter().filter(|c| ball.contains(c.location())).map(|c| c.n).sum();
        match cover.labels[k] {
            BallLabel::Good => assert_eq!(enclosed, 0),
            BallLabel::Bad => assert_ne!(enclosed, 0),
            BallLabel::Boundary => {}
            BallLabel::Unclassified => panic!("ball {k} left unclassified"),
        }
    }
    for q in [Point::new(0.0, 0.0), Point::new(0.5, -0.5), Point::new(-0.7, 0.1)] {
        assert!(cover.multiplicity_at(q) >= 1);
    }
}

#[test]
fn approximation_of_smooth_field_has_no_charges() {
    let g = GridSpec::unit_disk(256).unwrap();
    let v = fixtures::swirl(&g);
    let opts = ApproxOptions { nshifts: 4, seed: 1, ..Default::default() };
    let a = approximate(&v, Exponent::new(2.0).unwrap(), 0.2, &opts).unwrap();
    assert!(a.charges.is_empty());
    assert!(a.report.total_error <= a.report.error_bound + 1e-12);
    // the approximant still has no flux through interior circles
    let f = circle_flux(&a.field, &Circle::new(Point::new(0.1, 0.0), 0.45), 1e-6).unwrap();
    assert_eq!(f.quantum, 0);
}

#[test]
fn counterexample_sequence_is_disjoint_and_certified() {
    let d = Domain::Disk { center: Point::zero(), radius: 1.0 };
    let seq = build_sequence(1.5, 0.1, 400, &d).unwrap();
    assert!(seq.mass() <= 2.0);
    for i in 0..seq.len() {
        for j in 0..i {
            let gap = seq.centers[i].dist(seq.centers[j]);
            assert!(gap >= (seq.radii[i] + seq.radii[j]) / 2.0, "dipoles {i} and {j} overlap");
        }
    }
    let charges = seq.charges().unwrap();
    assert_eq!(charges.len(), 800);
    assert_eq!(charges.total_degree(), 0);
    assert!(min_norm_lower_bound(&seq).unwrap() > 3.0);
}

#[test]
fn single_precision_pipeline() {
    let g = vorlift::f32::GridSpec::unit_disk(96).unwrap();
    let u = vorlift::f32::CircleField::from_fn(&g, |p| p.angle() + 0.1 * p.x);
    let v: vorlift::f32::VectorField = unlift(&u);
    let f = circle_flux(&v, &Circle::new(Point::new(0.0f32, 0.0), 0.5), 1e-4).unwrap();
    assert_eq!(f.quantum, 1);
    assert!(f.residual < 1e-2 * TAU as f32);
    let charges = vorlift::lifting::ChargeSet::new(vec![Charge::new(Point::new(0.0f32, 0.0), 1)]).unwrap();
    assert_eq!(lift(&v, &charges, None).unwrap().boundary_degree, 1);
}
