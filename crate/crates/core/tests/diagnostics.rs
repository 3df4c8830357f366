use mfem_stab::diagnostics::{
    magnetic_moment, oscillation_metric, penetrated_area, profile_current, sample_bn_profile, sample_tape_current,
    uniform_field_patch, Side,
};
use mfem_stab::infsup::Formulation;
use mfem_stab::mesh::{build_stacked_bar_mesh, build_tape_mesh, refine, GeometryParams, InterfaceTag, Mesh2D, Region};
use mfem_stab::spaces::{build_a_space, build_h_space, build_t_space, BoundaryData};

fn bar() -> Mesh2D {
    refine(&build_stacked_bar_mesh(&GeometryParams::stacked_bar(2.5e-3)).unwrap())
}

fn tape() -> Mesh2D {
    build_tape_mesh(&GeometryParams::single_tape(2.5e-3)).unwrap()
}

#[test]
fn zero_solution_gives_zero_profiles() {
    let m = bar();
    let bc = BoundaryData::default();
    let h = build_h_space(&m, 2, &bc).unwrap();
    let a = build_a_space(&m, 1, InterfaceTag::GammaM, &bc).unwrap();
    let (x, y) = (vec![0.0; h.n_dofs()], vec![0.0; a.n_dofs()]);
    for side in [Side::Above, Side::Below] {
        let p = sample_bn_profile(&m, &h, &a, &x, &y, 1e-4, side, 200).unwrap();
        assert_eq!(p.len(), 200);
        assert!(p.values.iter().all(|v| *v == 0.0));
        assert_eq!(oscillation_metric(&p).unwrap(), 1.0);
    }

    let m = tape();
    let t = build_t_space(&m, 1, &bc).unwrap();
    let p = sample_tape_current(&m, &t, &vec![0.0; t.n_dofs()], 0, 2.5e8).unwrap();
    assert!(p.values.iter().all(|v| *v == 0.0));
}

#[test]
fn vertical_field_patch_is_constant_on_both_sides() {
    let m = bar();
    let b0 = 0.25;
    let dir = [0.0, 1.0];
    let bc = BoundaryData { field_dir: dir, ..BoundaryData::default() };
    for pairing in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let r = uniform_field_patch(&m, Formulation::Ha, pairing, dir, b0, 1.6e-8).unwrap();
        assert!(r.relative_error() < 1e-10, "{pairing:?}: {}", r.relative_error());
        let h = build_h_space(&m, pairing.0, &bc).unwrap();
        let a = build_a_space(&m, pairing.1, InterfaceTag::GammaM, &bc).unwrap();
        let x = &r.solution;
        let above = sample_bn_profile(&m, &h, &a, &x.v, &x.q, 1e-6, Side::Above, 100).unwrap();
        let below = sample_bn_profile(&m, &h, &a, &x.v, &x.q, 1e-6, Side::Below, 100).unwrap();
        for (u, l) in above.values.iter().zip(&below.values) {
            assert!((u - b0).abs() < 1e-10 * b0, "{pairing:?}: above {u}");
            assert!((l - b0).abs() < 1e-10 * b0, "{pairing:?}: below {l}");
            assert!((u - l).abs() < 1e-10 * b0);
        }
    }
}

#[test]
fn linear_ramp_gives_a_flat_tape_profile() {
    let m = tape();
    let t = build_t_space(&m, 1, &BoundaryData::default()).unwrap();
    let (w, width, j_c, current) = (t.tape_thickness(0).unwrap(), m.tape_width(0), 2.5e8, 1.5);
    let x0 = m.nodes()[m.tapes()[0].minus];
    let mut x = vec![0.0; t.n_dofs()];
    for (&node, &d) in m.tape_nodes(0).iter().zip(t.tape_node_dofs(0).unwrap()) {
        let p = m.nodes()[node];
        x[d] = current / w * (p[0] - x0[0]).hypot(p[1] - x0[1]) / width;
    }
    let p = sample_tape_current(&m, &t, &x, 0, j_c).unwrap();
    let want = current / (w * width * j_c);
    assert!(p.values.iter().all(|v| (v - want).abs() < 1e-12 * want), "{:?}", p.values);
    assert!((profile_current(&p, w, j_c) - current).abs() < 1e-12 * current);
    assert_eq!(oscillation_metric(&p).unwrap(), 1.0);
    assert_eq!(p.cell_widths.len(), p.len());
}

#[test]
fn too_few_samples_are_rejected() {
    let m = bar();
    let bc = BoundaryData::default();
    let h = build_h_space(&m, 1, &bc).unwrap();
    let a = build_a_space(&m, 1, InterfaceTag::GammaM, &bc).unwrap();
    let err = sample_bn_profile(&m, &h, &a, &vec![0.0; h.n_dofs()], &vec![0.0; a.n_dofs()], 1e-4, Side::Above, 10);
    assert!(err.is_err());
}

#[test]
fn moment_and_penetration_of_uniform_sheets() {
    let m = bar();
    let sc: Vec<usize> = (0..m.triangles().len()).filter(|&t| m.triangles()[t].region == Region::HSc).collect();
    let area: f64 = sc.iter().map(|&t| m.signed_area(t)).sum();
    let p = GeometryParams::stacked_bar(2.5e-3);
    assert!((area - p.bar_width * p.bar_height).abs() < 1e-12 * area);

    // +j on the right half, -j on the left: m = -∫ x j dA = -j H W²/4
    let j = 2e8;
    let currents: Vec<(usize, f64)> =
        sc.iter().map(|&t| (t, if m.centroid(t)[0] > 0.0 { j } else { -j })).collect();
    let want = -j * p.bar_height * p.bar_width * p.bar_width / 4.0;
    assert!((magnetic_moment(&m, &currents) - want).abs() < 1e-9 * want.abs());
    assert!((penetrated_area(&m, &currents, 3e8, 0.5) - area).abs() < 1e-12 * area);
    assert_eq!(penetrated_area(&m, &currents, 3e8, 0.9), 0.0);
}
