use super::*;
use crate::dp::streams;
use proptest::prelude::*;

fn grid2() -> GridSpec {
    GridSpec::new(2, 2, 2, 1).unwrap()
}

fn dom2() -> SpatioTemporalDomain {
    SpatioTemporalDomain::new(0.0, 2.0, 0.0, 2.0, 0.0, 2.0).unwrap()
}

fn traj(g: &GridSpec, ids: &[usize]) -> CubeTrajectory {
    CubeTrajectory {
        cubes: ids.iter().map(|&i| g.cube_at(i)).collect(),
        terminated: true,
    }
}

/// {[st_0 st_1 st_4], [st_0 st_4]} on a 2x2x2 grid.
fn fixture() -> Vec<CubeTrajectory> {
    let g = grid2();
    vec![traj(&g, &[0, 1, 4]), traj(&g, &[0, 4])]
}

const EPS: f64 = 1e-15;

#[test]
fn fixture_cubes_are_neighbor_linked() {
    let g = grid2();
    for tr in fixture() {
        assert!(tr.is_valid(&g));
    }
}

#[test]
fn count_starts_examples() {
    let g = grid2();
    assert_eq!(count_starts(&[], &g), vec![0; 8]);
    let n = count_starts(&fixture(), &g);
    assert_eq!(n[0], 2);
    assert_eq!(n.iter().sum::<u64>(), 2);
}

#[test]
fn start_distribution_noise_off() {
    let mut rng = NoiseSource::new(0, 0);
    let d = noisy_start_distribution(&[2, 0, 0, 0], Noise::Off, &mut rng).unwrap();
    assert_eq!(d.mass, vec![1.0, 0.0, 0.0, 0.0]);
    let d = noisy_start_distribution(&[3, 3, 3, 3], Noise::Off, &mut rng).unwrap();
    assert_eq!(d.mass, vec![0.25; 4]);
    let d = noisy_start_distribution(&[0, 0, 0, 0], Noise::Off, &mut rng).unwrap();
    assert_eq!(d.mass, vec![0.25; 4]);
}

#[test]
fn start_distribution_rejects_bad_epsilon() {
    let mut rng = NoiseSource::new(0, 0);
    assert!(noisy_start_distribution(&[1], Noise::Laplace { epsilon: 0.0 }, &mut rng).is_err());
}

#[test]
fn start_distribution_replay() {
    // Replays the noise mechanism step by step from the same frozen stream.
    let counts = [5u64, 0, 2, 9, 0, 1, 0, 3];
    let eps_s = 0.5;
    let mut stream = NoiseSource::new(7, streams::START_COUNTS);
    let draws: Vec<f64> = (0..counts.len())
        .map(|_| stream.laplace(1.0 / eps_s))
        .collect();
    let noisy: Vec<f64> = counts
        .iter()
        .zip(&draws)
        .map(|(&n, &z)| (n as f64 + z).max(0.0))
        .collect();
    let total: f64 = noisy.iter().sum();
    let expected: Vec<f64> = noisy.iter().map(|v| v / total).collect();

    let mut rng = NoiseSource::new(7, streams::START_COUNTS);
    let got =
        noisy_start_distribution(&counts, Noise::Laplace { epsilon: eps_s }, &mut rng).unwrap();
    for (a, b) in got.mass.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!((got.mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(got.mass.iter().all(|&m| m >= 0.0));
}

#[test]
fn frequency_matrix_single_trajectory() {
    let g = grid2();
    let fm = build_frequency_matrix(&fixture()[..1], &g).unwrap();
    assert!((fm.get(0, Next::Cube(1)) - 1.0 / 3.0).abs() < EPS);
    assert!((fm.get(1, Next::Cube(4)) - 1.0 / 3.0).abs() < EPS);
    assert!((fm.get(4, Next::Stop) - 1.0 / 3.0).abs() < EPS);
    assert!((fm.total() - 1.0).abs() < EPS);
}

#[test]
fn frequency_matrix_two_trajectories() {
    let g = grid2();
    let fm = build_frequency_matrix(&fixture(), &g).unwrap();
    assert!((fm.get(0, Next::Cube(4)) - 0.5).abs() < EPS);
    assert!((fm.get(4, Next::Stop) - 5.0 / 6.0).abs() < EPS);
    assert_eq!(fm.get(0, Next::Stop), 0.0);
    assert!((fm.total() - 2.0).abs() < EPS);
}

#[test]
fn frequency_matrix_single_cube() {
    let g = grid2();
    let fm = build_frequency_matrix(&[traj(&g, &[3])], &g).unwrap();
    assert_eq!(fm.get(3, Next::Stop), 1.0);
}

#[test]
fn frequency_matrix_errors() {
    let g = grid2();
    // (0,0,0) -> (0,0,1) -> (0,0,0) goes back in time
    let bad = traj(&g, &[0, 4, 0]);
    assert_eq!(
        build_frequency_matrix(&[bad], &g),
        Err(ModelError::NonNeighborTransition {
            trajectory: 0,
            position: 2
        })
    );
    let open = CubeTrajectory {
        cubes: vec![Cube::new(0, 0, 0)],
        terminated: false,
    };
    assert_eq!(
        build_frequency_matrix(&[open], &g),
        Err(ModelError::UnterminatedTrajectory { trajectory: 0 })
    );
    let outside = CubeTrajectory {
        cubes: vec![Cube::new(5, 0, 0)],
        terminated: true,
    };
    assert!(matches!(
        build_frequency_matrix(&[outside], &g),
        Err(ModelError::CubeOutOfGrid { .. })
    ));
    let empty = CubeTrajectory {
        cubes: vec![],
        terminated: true,
    };
    assert!(matches!(
        build_frequency_matrix(&[empty], &g),
        Err(ModelError::EmptyTrajectory { .. })
    ));
}

#[test]
fn fm_noise_off_is_identity() {
    let g = grid2();
    let fm = build_frequency_matrix(&fixture(), &g).unwrap();
    let mut rng = NoiseSource::new(1, 2);
    assert_eq!(add_fm_noise(&fm, Noise::Off, &mut rng).unwrap(), fm);
}

#[test]
fn fm_noise_on_trivial_grid_hits_only_stop() {
    let g = GridSpec::new(1, 1, 1, 1).unwrap();
    let fm = FrequencyMatrix::zeros(g);
    assert_eq!(fm.support().num_cells(), 1);
    let mut rng = NoiseSource::new(1, 2);
    let noisy = add_fm_noise(&fm, Noise::Laplace { epsilon: 1.0 }, &mut rng).unwrap();
    assert_ne!(noisy.get(0, Next::Stop), 0.0);
}

#[test]
fn fm_noise_replay() {
    let g = grid2();
    let fm = build_frequency_matrix(&fixture(), &g).unwrap();
    let eps_m = 0.5;
    // Replay: walk rows in id order, each row's neighbors then stop.
    let mut stream = NoiseSource::new(7, streams::FREQUENCY_MATRIX);
    let mut expected = Vec::new();
    for row in 0..g.num_cubes() {
        let mut targets: Vec<Next> = neighbors(g.cube_at(row), &g)
            .into_iter()
            .map(|c| Next::Cube(g.cube_id(c)))
            .collect();
        targets.push(Next::Stop);
        for t in targets {
            expected.push((row, t, fm.get(row, t) + stream.laplace(1.0 / eps_m)));
        }
    }
    let mut rng = NoiseSource::new(7, streams::FREQUENCY_MATRIX);
    let noisy = add_fm_noise(&fm, Noise::Laplace { epsilon: eps_m }, &mut rng).unwrap();
    assert_eq!(noisy.support().num_cells(), expected.len());
    for (row, t, v) in expected {
        assert_eq!(noisy.get(row, t).to_bits(), v.to_bits());
    }
    // outside the support nothing moves
    assert_eq!(noisy.get(4, Next::Cube(0)), 0.0);
    assert_eq!(noisy.get(5, Next::Cube(1)), 0.0);
}

#[test]
fn transition_row_from_fixture() {
    let g = grid2();
    let fm = build_frequency_matrix(&fixture(), &g).unwrap();
    let tm = derive_transition_matrix(&fm);
    assert!((tm.get(0, Next::Cube(1)) - 0.4).abs() < 1e-12);
    assert!((tm.get(0, Next::Cube(4)) - 0.6).abs() < 1e-12);
    assert_eq!(tm.get(0, Next::Stop), 0.0);
    assert!(!tm.is_all_zero(0));
    // rows never visited are all-zero
    assert!(tm.is_all_zero(7));
}

#[test]
fn transition_all_negative_row() {
    let g = grid2();
    let mut fm = FrequencyMatrix::zeros(g);
    let range = fm.support.row_range(2);
    for v in &mut fm.values[range] {
        *v = -0.3;
    }
    let tm = derive_transition_matrix(&fm);
    assert!(tm.is_all_zero(2));
    assert!(tm.row_probs(2).iter().all(|&p| p == 0.0));
}

#[test]
fn transition_clamps_negatives() {
    let g = grid2();
    let mut fm = FrequencyMatrix::zeros(g);
    let cells: Vec<usize> = fm.support.row_range(0).collect();
    fm.values[cells[0]] = 3.0;
    fm.values[cells[1]] = -1.0;
    fm.values[cells[2]] = 1.0;
    let tm = derive_transition_matrix(&fm);
    let probs = tm.row_probs(0);
    assert_eq!(probs[0], 0.75);
    assert_eq!(probs[1], 0.0);
    assert_eq!(probs[2], 0.25);
}

#[test]
fn build_model_noise_off_fixture() {
    let m = build_model(&fixture(), dom2(), grid2(), Privacy::NoiseOff, 3).unwrap();
    assert_eq!(m.start.mass[0], 1.0);
    assert_eq!(m.start.mass.iter().sum::<f64>(), 1.0);
    assert!((m.tm.get(0, Next::Cube(1)) - 0.4).abs() < 1e-12);
    assert!((m.tm.get(0, Next::Cube(4)) - 0.6).abs() < 1e-12);
    assert_eq!(m.budget, None);
    assert_eq!(m.metadata.source_size, 2);
}

#[test]
fn build_model_records_budget() {
    let p = Privacy::Budget {
        epsilon: 1.0,
        delta_split: 0.5,
    };
    let m = build_model(&fixture(), dom2(), grid2(), p, 3).unwrap();
    let b = m.budget.unwrap();
    assert_eq!((b.eps_s, b.eps_m), (0.5, 0.5));
    assert_eq!(m.metadata.seed, 3);
}

#[test]
fn build_model_is_deterministic() {
    let p = Privacy::Budget {
        epsilon: 0.7,
        delta_split: 0.3,
    };
    let a = build_model(&fixture(), dom2(), grid2(), p, 99).unwrap();
    let b = build_model(&fixture(), dom2(), grid2(), p, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json_vec(), b.to_json_vec());
    let c = build_model(&fixture(), dom2(), grid2(), p, 100).unwrap();
    assert_ne!(a, c);
}

#[test]
fn build_model_errors() {
    assert_eq!(
        build_model(&[], dom2(), grid2(), Privacy::NoiseOff, 0),
        Err(ModelError::EmptyDataset)
    );
    let p = Privacy::Budget {
        epsilon: 1.0,
        delta_split: 1.5,
    };
    assert!(matches!(
        build_model(&fixture(), dom2(), grid2(), p, 0),
        Err(ModelError::Dp(_))
    ));
}

#[test]
fn model_file_roundtrip() {
    let p = Privacy::Budget {
        epsilon: 0.5,
        delta_split: 0.5,
    };
    let mut m = build_model(&fixture(), dom2(), grid2(), p, 5).unwrap();
    m.metadata.built_at = Some(1_700_000_000);
    let bytes = m.to_json_vec();
    let back = SynthModel::from_json_slice(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.to_json_vec(), bytes);

    let off = build_model(&fixture(), dom2(), grid2(), Privacy::NoiseOff, 5).unwrap();
    assert_eq!(
        SynthModel::from_json_slice(&off.to_json_vec()).unwrap(),
        off
    );
}

#[test]
fn model_file_truncated() {
    let m = build_model(&fixture(), dom2(), grid2(), Privacy::NoiseOff, 5).unwrap();
    let bytes = m.to_json_vec();
    for cut in [0, 1, bytes.len() / 2, bytes.len() - 3] {
        assert!(matches!(
            SynthModel::from_json_slice(&bytes[..cut]),
            Err(ModelFileError::Corrupt(_))
        ));
    }
}

#[test]
fn model_file_version_bump() {
    let m = build_model(&fixture(), dom2(), grid2(), Privacy::NoiseOff, 5).unwrap();
    let text = String::from_utf8(m.to_json_vec()).unwrap();
    let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
    assert!(matches!(
        SynthModel::from_json_slice(bumped.as_bytes()),
        Err(ModelFileError::VersionMismatch {
            found: 2,
            expected: 1
        })
    ));
}

#[test]
fn model_file_rejects_inconsistent_content() {
    let m = build_model(&fixture(), dom2(), grid2(), Privacy::NoiseOff, 5).unwrap();
    let text = String::from_utf8(m.to_json_vec()).unwrap();
    // a row pointing outside the grid
    let bad_target = text.replacen("\"next\":[[4,", "\"next\":[[9,", 1);
    assert_ne!(bad_target, text);
    assert!(SynthModel::from_json_slice(bad_target.as_bytes()).is_err());
    // a step backwards in time
    let backwards = text.replacen(
        "{\"cube\":4,\"next\":[],\"stop\":1.0}",
        "{\"cube\":4,\"next\":[[0,0.5]],\"stop\":0.5}",
        1,
    );
    assert_ne!(backwards, text);
    assert!(SynthModel::from_json_slice(backwards.as_bytes()).is_err());
    // grid no longer matches the start vector
    let bad_grid = text.replacen("\"g_t\":2", "\"g_t\":3", 1);
    assert!(SynthModel::from_json_slice(bad_grid.as_bytes()).is_err());
    let bad_format = text.replacen(MODEL_FORMAT, "other", 1);
    assert!(matches!(
        SynthModel::from_json_slice(bad_format.as_bytes()),
        Err(ModelFileError::Corrupt(_))
    ));
}

// --- property tests -------------------------------------------------------

fn random_walk(g: GridSpec, seed: u64, max_steps: usize) -> CubeTrajectory {
    let mut rng = NoiseSource::new(seed, 0);
    let start = (rng.uniform() * g.num_cubes() as f64) as usize;
    let mut cubes = vec![g.cube_at(start)];
    let steps = (rng.uniform() * max_steps as f64) as usize;
    for _ in 0..steps {
        let ns = neighbors(*cubes.last().unwrap(), &g);
        if ns.is_empty() {
            break;
        }
        cubes.push(ns[(rng.uniform() * ns.len() as f64) as usize]);
    }
    CubeTrajectory {
        cubes,
        terminated: true,
    }
}

fn dataset(g: GridSpec, seed: u64, n: usize) -> Vec<CubeTrajectory> {
    (0..n)
        .map(|i| random_walk(g, seed * 1000 + i as u64, 12))
        .collect()
}

fn l1_fm(a: &FrequencyMatrix, b: &FrequencyMatrix) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn neighboring_datasets_have_unit_sensitivity(
        seed in 0u64..1_000_000, n in 1usize..25, w in 1u32..5, h in 1u32..5, t in 1u32..5, v in 1u32..3,
    ) {
        let g = GridSpec::new(w, h, t, v).unwrap();
        let full = dataset(g, seed, n);
        let drop = (seed as usize) % n;
        let mut reduced = full.clone();
        reduced.remove(drop);

        let a = count_starts(&full, &g);
        let b = count_starts(&reduced, &g);
        let l1: u64 = a.iter().zip(&b).map(|(x, y)| x.abs_diff(*y)).sum();
        prop_assert_eq!(l1, 1);

        let fa = build_frequency_matrix(&full, &g).unwrap();
        let fb = build_frequency_matrix(&reduced, &g).unwrap();
        prop_assert!((l1_fm(&fa, &fb) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fm_totals_and_row_sums(seed in 0u64..1_000_000, n in 0usize..30) {
        let g = GridSpec::new(4, 3, 4, 2).unwrap();
        let da = dataset(g, seed, n);
        let fm = build_frequency_matrix(&da, &g).unwrap();
        prop_assert!((fm.total() - n as f64).abs() < 1e-9);
        prop_assert!(fm.values().iter().all(|&v| v >= 0.0));
        let mut rng = NoiseSource::new(seed, 2);
        let noisy = add_fm_noise(&fm, Noise::Laplace { epsilon: 0.3 }, &mut rng).unwrap();
        let tm = derive_transition_matrix(&noisy);
        for r in 0..tm.num_rows() {
            let s: f64 = tm.row_probs(r).iter().sum();
            if tm.is_all_zero(r) {
                prop_assert!(tm.row_probs(r).iter().all(|&p| p == 0.0));
            } else {
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
            prop_assert!(tm.row_probs(r).iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn start_sum_equals_dataset_size(seed in 0u64..1_000_000, n in 0usize..40) {
        let g = GridSpec::new(3, 3, 3, 1).unwrap();
        let da = dataset(g, seed, n);
        prop_assert_eq!(count_starts(&da, &g).iter().sum::<u64>(), n as u64);
    }

    #[test]
    fn model_file_roundtrip_is_exact(seed in 0u64..1_000_000, eps in 0.05f64..5.0) {
        let g = GridSpec::new(3, 4, 3, 2).unwrap();
        let dom = SpatioTemporalDomain::new(-1.0, 1.0, 10.0, 11.0, 0.0, 900.0).unwrap();
        let da = dataset(g, seed, 15);
        let m = build_model(&da, dom, g, Privacy::Budget { epsilon: eps, delta_split: 0.5 }, seed).unwrap();
        let back = SynthModel::from_json_slice(&m.to_json_vec()).unwrap();
        prop_assert_eq!(back, m);
    }
}
