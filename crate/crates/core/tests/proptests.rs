use mfem_stab::cli::parse_pairing;
use mfem_stab::diagnostics::oscillation_of;
use mfem_stab::infsup::sign_changes;
use mfem_stab::linalg::{infsup_eigenpairs, solve_dense, solve_sparse, SparseMatrix, TripletBuilder, DEFAULT_ZERO_TOL};
use mfem_stab::materials::PowerLaw;
use mfem_stab::mesh::{build_tape_mesh, refine, GeometryParams};
use mfem_stab::transient::Waveform;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Symmetric quasi-definite `[[A, Bᵀ], [B, −C]]` with banded SPD blocks.
fn quasi_definite(n: usize, m: usize, vals: &[f64]) -> SparseMatrix {
    let mut it = vals.iter().cycle();
    let mut next = || *it.next().unwrap();
    let mut tb = TripletBuilder::new(n + m, n + m);
    for (size, off, sign) in [(n, 0, 1.0), (m, n, -1.0)] {
        for i in 0..size {
            tb.add(off + i, off + i, sign * (4.0 + next().abs()));
            if i + 1 < size {
                tb.add_sym(off + i, off + i + 1, sign * next());
            }
        }
    }
    for i in 0..m {
        for j in [i % n, (3 * i + 1) % n] {
            tb.add_sym(n + i, j, next());
        }
    }
    tb.build().with_symmetric(true)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_law_is_monotone(n in 1.0f64..50.0, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let law = PowerLaw::new(1e-4, 3e8, n).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(law.e(lo * 3e8) <= law.e(hi * 3e8));
        prop_assert!(law.de_dj(hi * 3e8) > 0.0);
        prop_assert!(law.rho(hi * 3e8) <= law.rho_max());
    }

    #[test]
    fn power_law_derivative_matches_differences(n in 1.0f64..50.0, r in 0.05f64..1.1) {
        let law = PowerLaw::new(1e-4, 3e8, n).unwrap();
        let j = r * 3e8;
        let h = 1e-6 * 3e8;
        let fd = (law.e(j + h) - law.e(j - h)) / (2.0 * h);
        prop_assert!((law.de_dj(j) - fd).abs() < 1e-5 * fd);
    }

    #[test]
    fn threshold_field_at_critical_current(n in 1.0f64..60.0, jc in 1e6f64..1e11) {
        let law = PowerLaw::new(1e-4, jc, n).unwrap();
        prop_assert!((law.e(jc) - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn sparse_solve_matches_dense(
        n in 2usize..40,
        m in 1usize..30,
        vals in prop::collection::vec(-1.0f64..1.0, 16..64),
        rhs in prop::collection::vec(-1.0f64..1.0, 70),
    ) {
        let k = quasi_definite(n, m, &vals);
        let s = &rhs[..n + m];
        let x = solve_sparse(&k, s).unwrap();
        let y = solve_dense(&k, s).unwrap();
        let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = x.iter().zip(&y).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        prop_assert!(err <= 1e-10 * scale, "{} vs {}", err, scale);
    }

    #[test]
    fn eigenvalues_scale_with_the_coupling(
        rows in 2usize..8,
        cols in 2usize..10,
        vals in prop::collection::vec(-1.0f64..1.0, 80),
        s in 0.1f64..10.0,
    ) {
        let b = DMatrix::from_fn(rows, cols, |i, j| vals[i * cols + j]);
        let eye = |k| SparseMatrix::identity(k);
        let r1 = infsup_eigenpairs(&SparseMatrix::from_dense(&b), &eye(cols), &eye(rows), DEFAULT_ZERO_TOL).unwrap();
        let r2 = infsup_eigenpairs(&SparseMatrix::from_dense(&(&b * s)), &eye(cols), &eye(rows), DEFAULT_ZERO_TOL).unwrap();
        prop_assert_eq!(r1.len(), r2.len());
        for (a, c) in r1.eigenvalues.iter().zip(&r2.eigenvalues) {
            prop_assert!((c - s * s * a).abs() <= 1e-10 * c.abs().max(1e-300));
        }
        prop_assert!(r1.beta() <= r1.norm_b());
    }

    #[test]
    fn oscillation_metric_bounds(v in prop::collection::vec(-10.0f64..10.0, 3..200), a in 0.1f64..10.0, c in -5.0f64..5.0) {
        let m = oscillation_of(&v).unwrap();
        prop_assert!(m >= 1.0);
        prop_assert!(m <= (v.len() - 1) as f64);
        let moved: Vec<f64> = v.iter().map(|x| a * x + c).collect();
        prop_assert!((oscillation_of(&moved).unwrap() - m).abs() < 1e-9 * m);
        prop_assert!(sign_changes(&v) < v.len());
    }

    #[test]
    fn sorted_profiles_do_not_oscillate(mut v in prop::collection::vec(-10.0f64..10.0, 3..100)) {
        v.sort_by(f64::total_cmp);
        prop_assert_eq!(oscillation_of(&v).unwrap(), 1.0);
    }

    #[test]
    fn waveform_stays_within_its_points(
        vals in prop::collection::vec(-5.0f64..5.0, 1..8),
        t in -1.0f64..10.0,
    ) {
        let w = Waveform { points: vals.iter().enumerate().map(|(k, v)| [k as f64, *v]).collect() };
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let x = w.at(t);
        prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        for (k, v) in vals.iter().enumerate() {
            prop_assert_eq!(w.at(k as f64), *v);
        }
    }

    #[test]
    fn pairing_round_trips(i in 0u8..=255, j in 0u8..=255) {
        prop_assert_eq!(parse_pairing(&format!("{i},{j}")), Ok((i, j)));
        prop_assert_eq!(parse_pairing(&format!(" {i} , {j} ")), Ok((i, j)));
        let single = i.to_string();
        prop_assert!(parse_pairing(&single).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn refinement_conserves_the_tape_mesh(delta in 1.0e-3f64..2.5e-3, grading in 1.0f64..1.5) {
        let params = GeometryParams { grading, ..GeometryParams::single_tape(delta) };
        let coarse = build_tape_mesh(&params).unwrap();
        let fine = refine(&coarse);
        let box_area = (2.0 * params.air_half_size).powi(2);
        prop_assert!((coarse.total_area() - box_area).abs() < 1e-12 * box_area);
        prop_assert!((fine.total_area() - box_area).abs() < 1e-12 * box_area);
        prop_assert_eq!(fine.triangles().len(), 4 * coarse.triangles().len());
        prop_assert!((fine.delta() - coarse.delta() / 2.0).abs() < 1e-15);
        prop_assert!(coarse.tape_uniformity(0) <= 1.01);
        prop_assert!(fine.tape_uniformity(0) <= 1.01);
        prop_assert!((fine.tape_width(0) - params.tape_width).abs() < 1e-12);
        prop_assert_eq!(fine.tape_nodes(0).len(), 2 * coarse.tape_nodes(0).len() - 1);
    }
}
