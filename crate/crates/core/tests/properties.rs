use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mrc_core::analysis::{estimate_dof_slope, reproduce_table1, stream_sinrs, trial_plan, verify_noiseless};
use mrc_core::bounds::{
    boundary_checks, check_percut_bounds, classify_regime, cutset_dof, private_only_dof, table1_row, total_dof, Dof,
    DofAllocation,
};
use mrc_core::channel::{extend_channels, generate_channels, NetworkConfig};
use mrc_core::linalg::{
    null_space_basis, numeric_rank, pseudo_inverse, random_gaussian_matrix, subspace_distance, CMatrix, DEFAULT_TOL,
};
use mrc_core::ssa_nc::{build_allocation, planned_allocation};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows × cols` matrix of rank at most `rank`.
fn low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> CMatrix {
    let mut r = rng(seed);
    let left = random_gaussian_matrix(rows, rank, &mut r);
    let right = random_gaussian_matrix(rank, cols, &mut r);
    &left * &right
}

fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.max_abs_diff(b) / b.spectral_norm().max(1.0)
}

proptest! {
    #[test]
    fn penrose_identities(rows in 1usize..=32, cols in 1usize..=32, seed: u64) {
        let a = random_gaussian_matrix(rows, cols, &mut rng(seed));
        let p = pseudo_inverse(&a);
        prop_assert_eq!(p.shape(), (cols, rows));
        prop_assert!(rel_diff(&(&(&a * &p) * &a), &a) < 1e-10);
        prop_assert!(rel_diff(&(&(&p * &a) * &p), &p) < 1e-10);
    }

    #[test]
    fn penrose_identities_rank_deficient(rows in 2usize..=16, cols in 2usize..=16, seed: u64) {
        let rank = rows.min(cols) / 2;
        prop_assume!(rank >= 1);
        let a = low_rank(rows, cols, rank, seed);
        let p = pseudo_inverse(&a);
        prop_assert!(rel_diff(&(&(&a * &p) * &a), &a) < 1e-9);
        prop_assert!(rel_diff(&(&(&p * &a) * &p), &p) < 1e-9);
    }

    #[test]
    fn gaussian_draws_reproducible(rows in 1usize..=8, cols in 1usize..=8, seed: u64) {
        let a = random_gaussian_matrix(rows, cols, &mut rng(seed));
        let b = random_gaussian_matrix(rows, cols, &mut rng(seed));
        prop_assert_eq!(a.max_abs_diff(&b), 0.0);
    }

    #[test]
    fn subspace_distance_metric(n in 2usize..=10, d_seed in 0usize..100, seed: u64) {
        let d = 1 + d_seed % (n - 1);
        let mut r = rng(seed);
        let a = random_gaussian_matrix(n, d, &mut r);
        let b = random_gaussian_matrix(n, d, &mut r);
        let c = random_gaussian_matrix(n, d, &mut r);
        let ab = subspace_distance(&a, &b).unwrap();
        let ba = subspace_distance(&b, &a).unwrap();
        let bc = subspace_distance(&b, &c).unwrap();
        let ac = subspace_distance(&a, &c).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(subspace_distance(&a, &a).unwrap() <= 1e-9);
    }

    #[test]
    fn extension_multiplies_rank(k in 2usize..=4, m in 1usize..=3, n in 1usize..=4, l in 1usize..=3, seed: u64) {
        let cfg = NetworkConfig::new(k, m, n).unwrap();
        let ch = generate_channels(&cfg, &mut rng(seed));
        let ext = extend_channels(&ch, l).unwrap();
        for j in 0..k {
            prop_assert_eq!(
                numeric_rank(ext.uplink(j), DEFAULT_TOL),
                l * numeric_rank(ch.uplink(j), DEFAULT_TOL)
            );
        }
    }

    #[test]
    fn reciprocity_shares_uplinks(k in 2usize..=5, m in 1usize..=4, n in 1usize..=4, seed: u64) {
        let cfg = NetworkConfig::new(k, m, n).unwrap();
        let recip = generate_channels(&cfg.clone().with_reciprocal(true), &mut rng(seed));
        let indep = generate_channels(&cfg.with_reciprocal(false), &mut rng(seed));
        for j in 0..k {
            prop_assert_eq!(recip.uplink(j).max_abs_diff(indep.uplink(j)), 0.0);
            prop_assert_eq!(recip.downlink(j).max_abs_diff(&recip.uplink(j).transpose()), 0.0);
        }
    }

    #[test]
    fn regimes_partition_ratios(k in 3usize..=40, m in 1usize..=60, n in 1usize..=60) {
        let label = classify_regime(k, m, n).unwrap();
        let ratio = Dof::new(n as i64, m as i64);
        let bounds = label.thresholds.as_array();
        let c = label.case_index as usize;
        prop_assert!((1..=5).contains(&c));
        if c > 1 {
            prop_assert!(ratio >= bounds[c - 2]);
        }
        if c < 5 {
            prop_assert!(ratio < bounds[c - 1]);
        }
        let private = private_only_dof(k, m, n).unwrap();
        prop_assert!(private <= Dof::from_integer(cutset_dof(k, m, n) as i64));
        prop_assert!(private > Dof::from_integer(0));
    }

    #[test]
    fn percut_check_is_monotone(
        k in 2usize..=5,
        m in 1usize..=4,
        n in 1usize..=4,
        streams in proptest::collection::vec(0u64..3, 30),
        pick in 0usize..30,
    ) {
        let mut private = vec![vec![0; k]; k];
        let mut it = streams.iter().cycle();
        for (from, row) in private.iter_mut().enumerate() {
            for (to, v) in row.iter_mut().enumerate() {
                *v = if from == to { 0 } else { *it.next().unwrap() };
            }
        }
        let common: Vec<u64> = (0..k).map(|_| *it.next().unwrap()).collect();
        let alloc = DofAllocation::new(private.clone(), common.clone(), 1).unwrap();
        let before = check_percut_bounds(&alloc, m, n).passed();

        // Remove one stream from a nonzero entry, if any.
        let mut slots: Vec<(usize, usize)> = Vec::new();
        for (from, row) in private.iter().enumerate() {
            slots.extend(row.iter().enumerate().filter(|&(_, &v)| v > 0).map(|(to, _)| (from, to)));
            if common[from] > 0 {
                slots.push((from, from));
            }
        }
        prop_assume!(!slots.is_empty());
        let (from, to) = slots[pick % slots.len()];
        let mut reduced = alloc.clone();
        if from == to {
            reduced.set_common(from, common[from] - 1);
        } else {
            reduced.set_private(from, to, private[from][to] - 1).unwrap();
        }
        if before {
            prop_assert!(check_percut_bounds(&reduced, m, n).passed());
        }
    }

    #[test]
    fn planned_allocation_meets_cutset(k in 3usize..=12, m in 1usize..=20, n in 1usize..=20) {
        let alloc = planned_allocation(k, m, n);
        prop_assert_eq!(alloc.dof_per_slot(), Dof::from_integer(cutset_dof(k, m, n) as i64));
        prop_assert_eq!(total_dof(&alloc), alloc.slots() * cutset_dof(k, m, n));
        let check = check_percut_bounds(&alloc, m, n);
        prop_assert!(check.passed() && check.saturated());
    }

    #[test]
    fn table_agrees_with_bounds(k in 3usize..=10, m in 1usize..=10, nmax in 1usize..=30) {
        let ns: Vec<usize> = (1..=nmax).collect();
        for row in reproduce_table1(k, m, &ns).unwrap() {
            prop_assert_eq!(&row, &table1_row(k, m, row.n).unwrap());
            prop_assert_eq!(row.private_only, private_only_dof(k, m, row.n).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rank_plus_nullity(rows in 1usize..=12, cols in 1usize..=12, rank_seed in 0usize..100, seed: u64) {
        let rank = rank_seed % (rows.min(cols) + 1);
        let a = if rank == 0 { CMatrix::zeros(rows, cols) } else { low_rank(rows, cols, rank, seed) };
        let kernel = null_space_basis(&a, DEFAULT_TOL);
        prop_assert_eq!(numeric_rank(&a, DEFAULT_TOL) + kernel.cols(), cols);
        prop_assert_eq!(numeric_rank(&a, DEFAULT_TOL), rank);
        if kernel.cols() > 0 {
            prop_assert!((&a * &kernel).spectral_norm() <= 1e-9 * a.spectral_norm().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scheme_streams_and_sinr_ordering(k in 3usize..=5, m in 1usize..=5, n in 1usize..=6, seed: u64) {
        let cfg = NetworkConfig::new(k, m, n).unwrap().with_seed(seed);
        let (_, plan) = trial_plan(&cfg, 0, None).unwrap();
        let alloc = build_allocation(&plan);
        prop_assert_eq!(alloc.dof_per_slot(), Dof::from_integer((k * m.min(n)) as i64));
        let s = stream_sinrs(&plan);
        for (j, streams) in s.end_to_end.iter().enumerate() {
            for (i, &e2e) in streams.iter().enumerate() {
                // User 0's stream rides on every pair; user j's only on pair j − 1.
                for u in (0..k).filter(|&u| u != j) {
                    let pair = if j == 0 { u - 1 } else { j - 1 };
                    prop_assert!(e2e <= s.mac[pair][i]);
                    prop_assert!(e2e <= s.bc[u][pair][i]);
                }
            }
        }
    }

    #[test]
    fn noiseless_error_ignores_power(k in 3usize..=4, m in 2usize..=4, n in 2usize..=4, seed: u64, p_exp in 1i32..=7) {
        let cfg = NetworkConfig::new(k, m, n).unwrap().with_seed(seed);
        let low = verify_noiseless(&cfg.clone().with_power(10f64.powi(p_exp)).unwrap(), 3, None).unwrap();
        let high = verify_noiseless(&cfg, 3, None).unwrap();
        prop_assert!(low.noiseless_max_error <= 1e-8);
        prop_assert!(high.noiseless_max_error <= 1e-8);
        prop_assert_eq!(low.achieved_streams, high.achieved_streams);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn slope_never_exceeds_cutset(k in 3usize..=4, m in 1usize..=4, n in 1usize..=4, seed: u64, half in any::<bool>()) {
        let mut cfg = NetworkConfig::new(k, m, n).unwrap().with_seed(seed);
        if half {
            cfg = cfg.with_half_duplex(true);
        }
        let est = estimate_dof_slope(&cfg, &[1e2, 1e3, 1e4, 1e5, 1e6], 10, None).unwrap();
        prop_assert!(est.slope <= cutset_dof(k, m, n) as f64 * cfg.duplex_factor * 1.05, "{}", est.slope);
    }
}

#[test]
fn boundaries_are_continuous() {
    for k in 3..=30 {
        for check in boundary_checks(k) {
            assert!(check.continuous(), "K={k}: {check:?}");
        }
    }
}
