use grassframe::collapse::{balanced_labels, gnc_report, nc2_self_duality, nc4_agreement};
use grassframe::linalg::{self, permutation_matrix, random_rotation, Matrix};
use grassframe::rng::Gaussian;
use grassframe::RngSeed;
use proptest::prelude::*;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut g = Gaussian::new(RngSeed(seed).stream());
    Matrix::from_fn(rows, cols, |_, _| g.sample())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn report_is_rotation_invariant(d in 2usize..=5, c in 2usize..=6, n in 1usize..=4, seed in any::<u64>()) {
        let m = gaussian(d, c, seed);
        let z = gaussian(d, c * n, seed.wrapping_add(1));
        let labels = balanced_labels(c, n);
        let r = random_rotation(d, RngSeed(seed)).unwrap();
        let a = gnc_report(&m, &z, &labels).unwrap();
        let b = gnc_report(&r.matmul(&m), &r.matmul(&z), &labels).unwrap();
        prop_assert!((a.nc1 - b.nc1).abs() < 1e-10);
        prop_assert!((a.nc2 - b.nc2).abs() < 1e-10);
        prop_assert!((a.nc3_signed - b.nc3_signed).abs() < 1e-10);
        match (a.nc3_welch_gap, b.nc3_welch_gap) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-10),
            (x, y) => prop_assert_eq!(x.is_some(), y.is_some()),
        }
        prop_assert_eq!(a.nc4_agreement, b.nc4_agreement);
        prop_assert!((a.ref_norm - b.ref_norm).abs() < 1e-10);
    }

    #[test]
    fn nc4_survives_relabeling(c in 2usize..=6, n in 1usize..=4, seed in any::<u64>(), shuffle in any::<u64>()) {
        let d = 3;
        let m = gaussian(d, c, seed);
        let z = gaussian(d, c * n, seed.wrapping_add(1));
        let labels = balanced_labels(c, n);
        // Class y becomes class perm[y]; column perm[y] of the new M is old column y.
        let p = linalg::random_permutation(c, RngSeed(shuffle)).unwrap();
        let perm = linalg::permutation_of(&p).unwrap();
        let relabeled: Vec<usize> = labels.iter().map(|&y| perm[y]).collect();
        let m2 = m.matmul(&permutation_matrix(&perm));
        prop_assert_eq!(
            nc4_agreement(&z, &m, &labels).unwrap(),
            nc4_agreement(&z, &m2, &relabeled).unwrap()
        );
    }

    #[test]
    fn nc2_matches_enumeration(d in 1usize..=4, c in 2usize..=5, n in 1usize..=5, seed in any::<u64>()) {
        let m = gaussian(d, c, seed);
        let z = gaussian(d, c * n, seed.wrapping_add(7));
        let labels = balanced_labels(c, n);
        let mut brute: f64 = 0.0;
        for col in 0..z.cols() {
            let y = col % c;
            let gap: f64 = (0..d).map(|i| (z[(i, col)] - m[(i, y)]).powi(2)).sum::<f64>().sqrt();
            brute = brute.max(gap);
        }
        prop_assert!((nc2_self_duality(&z, &m, &labels).unwrap() - brute).abs() < 1e-14);
    }
}
