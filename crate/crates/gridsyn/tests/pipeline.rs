//! End-to-end decomposition pipeline on the shipped plant: equilibrium →
//! Jacobians → adjacency → vertical split → fast adjacency → communities →
//! subsystem assembly.

use gridsyn::decomp::{
    build_subsystems, detect_communities, fast_adjacency, modularity, time_constants,
    vertical_split, DetectConfig, SharingOverrides, SplitConfig, TimeConstantSource,
};
use gridsyn::netgraph::{adjacency, augment, jacobians, plant_node_labels, DynamicModel, PlantSystem};
use gridsyn::plant::{equilibrium, ContinuousInput, Disturbance, IntegerInput, PlantParams, PlantState};

fn reference_setup() -> (
    PlantParams,
    PlantState,
    ContinuousInput,
    IntegerInput,
    Disturbance,
) {
    let p = PlantParams::default();
    let u = ContinuousInput(p.nominal_u);
    let z = IntegerInput::ALL_ON;
    let w = Disturbance(p.nominal_w);
    let xe = equilibrium(&PlantState(p.nominal_state()), &u, &z, &w, &p, 1e-10).unwrap();
    (p, xe, u, z, w)
}

#[test]
fn vertical_split_matches_reference_decomposition() {
    let (p, xe, u, z, w) = reference_setup();
    let sys = PlantSystem { params: &p, z };
    let (jac, res) = jacobians(&sys, xe.as_slice(), u.as_slice(), &w.0, 1e-6).unwrap();
    assert!(res < 1e-6, "residual {res}");

    let ae = adjacency(&augment(&jac), 1e-8, plant_node_labels());
    // Structural spot checks.
    let idx = |l: &str| ae.index_of_label(l).unwrap();
    assert_eq!(ae.entry(idx("x23"), idx("u3")), 1, "u3 -> x23 missing");
    assert_eq!(ae.entry(idx("x23"), idx("w1")), 1, "w1 -> x23 missing");
    assert_eq!(ae.entry(idx("y1"), idx("w2")), 1, "w2 -> y1 missing");
    assert_eq!(ae.entry(idx("x18"), idx("x17")), 1, "x17 -> x18 missing");
    // Rows of inputs and disturbances are all zero by construction.
    for col in 23..34 {
        assert_eq!(ae.k_in(col), 0, "input/disturbance row {col} not zero");
    }

    let (tau, _) = time_constants(TimeConstantSource::Table(&p.tau_reference), None).unwrap();
    let dims = sys.dims();
    let cfg = SplitConfig { gap_min: 50.0, representatives: Some((4, 22)) };
    let split = vertical_split(&tau, &ae, &dims, &cfg).unwrap();

    assert_eq!(split.slow_states, vec![16, 18, 19, 20, 22]);
    assert_eq!(split.slow_inputs, vec![2, 4, 5], "u_s should be u3, u5, u6");
    assert_eq!(split.fast_inputs, vec![0, 1, 3, 6]);
    assert_eq!(split.slow_outputs, vec![1]);
    assert_eq!(split.fast_outputs, vec![0]);

    // ε to three significant digits.
    let eps3 = (split.epsilon * 1e5).round() / 1e5;
    assert!((eps3 - 0.00206).abs() < 1e-12, "epsilon = {}", split.epsilon);

    // Estimator mode matches the reference table within 20%.
    let (tau_est, warned) =
        time_constants(TimeConstantSource::Estimate(&jac), Some(&p.tau_reference)).unwrap();
    assert!(warned.is_empty());
    for (i, (&est, &refv)) in tau_est.iter().zip(p.tau_reference.iter()).enumerate() {
        assert!(
            (est - refv).abs() / refv < 0.2,
            "x{}: estimated {est}, reference {refv}",
            i + 1
        );
    }
}

#[test]
fn fast_partition_matches_reference_membership() {
    let (p, xe, u, z, w) = reference_setup();
    let sys = PlantSystem { params: &p, z };
    let (jac, _) = jacobians(&sys, xe.as_slice(), u.as_slice(), &w.0, 1e-6).unwrap();
    let ae = adjacency(&augment(&jac), 1e-8, plant_node_labels());
    let dims = sys.dims();
    let (tau, _) = time_constants(TimeConstantSource::Table(&p.tau_reference), None).unwrap();
    let split = vertical_split(
        &tau,
        &ae,
        &dims,
        &SplitConfig { gap_min: 50.0, representatives: Some((4, 22)) },
    )
    .unwrap();
    let af = fast_adjacency(&ae, &split, &dims);

    // Expected fast-state membership (0-based): the generation block, the
    // water-loop block, the chiller-internals block.
    let groups: [&[usize]; 3] = [
        &[0, 1, 2, 3, 4, 15, 17],
        &[5, 6, 7, 8, 14, 21],
        &[9, 10, 11, 12, 13],
    ];

    let mut hits = 0;
    let seeds = 50;
    for seed in 0..seeds {
        let cfg = DetectConfig { n_c_upper: 3, seed, ..DetectConfig::default() };
        let part = detect_communities(&af, &cfg).unwrap();
        let ok = groups.iter().all(|grp| {
            let c0 = part.tags.get(&grp[0]);
            c0.is_some() && grp.iter().all(|s| part.tags.get(s) == c0)
        }) && {
            let c: Vec<_> = groups.iter().map(|g| part.tags[&g[0]]).collect();
            c[0] != c[1] && c[1] != c[2] && c[0] != c[2]
        };
        if ok {
            hits += 1;
        } else if seed < 3 {
            eprintln!("seed {seed}: partition {:?} (M = {})", part.tags, part.modularity);
        }
        // Recomputation invariant on every partition.
        let m = modularity(&af, &part.tags).unwrap();
        assert!((m - part.modularity).abs() < 1e-12);
    }
    assert!(hits >= 45, "membership reproduced on {hits}/{seeds} seeds");

    // Subsystem assembly against the published configuration.
    let cfg = DetectConfig { n_c_upper: 3, seed: 0, ..DetectConfig::default() };
    let part = detect_communities(&af, &cfg).unwrap();
    let spec = build_subsystems(&part, &split, &ae, &dims, &SharingOverrides::shipped()).unwrap();
    assert_eq!(spec.subsystems.len(), 3);
    assert_eq!(spec.subsystems[0].own_states, vec![0, 1, 2, 3, 4, 15, 17]);
    assert_eq!(spec.subsystems[0].own_inputs, vec![0, 6]);
    assert_eq!(spec.subsystems[1].own_states, vec![5, 6, 7, 8, 14, 21]);
    assert_eq!(spec.subsystems[1].own_inputs, vec![1]);
    assert_eq!(spec.subsystems[2].own_states, vec![9, 10, 11, 12, 13]);
    assert_eq!(spec.subsystems[2].own_inputs, vec![3]);
    // Neighbor inputs: slow inputs plus the chiller speed for agents 1 and 2.
    assert_eq!(spec.subsystems[0].neighbor_inputs, vec![2, 4, 5, 3]);
    assert_eq!(spec.subsystems[1].neighbor_inputs, vec![2, 4, 5, 3]);
    assert_eq!(spec.subsystems[2].neighbor_inputs, vec![2, 4, 5]);
    // Shared output: the grid power everywhere.
    for sub in &spec.subsystems {
        assert_eq!(sub.outputs, vec![0]);
    }
}
