//! Randomized invariants over the public API: linear algebra identities,
//! deterministic replay, encoding shape guarantees, augmentation arithmetic,
//! split conservation, and the monotonicities the training rules rely on.

use fairgen::bias::accuracy_with_ci;
use fairgen::cgan::{dual_update, gaussian_kernel};
use fairgen::dataset::{
    AugmentationPlan, Cell, ColumnSpec, DatasetTable, GroupPredicate, PlanEntry, Provenance, Row,
    Schema,
};
use fairgen::dataset::Encoder;
use fairgen::nn::bce_loss;
use fairgen::numerics::{Matrix, SeededRng};
use proptest::prelude::*;

fn random_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn toy_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::numeric("age"),
        ColumnSpec::categorical("group", &["a", "b"]).sensitive(),
        ColumnSpec::categorical("outcome", &["no", "yes"]).label(),
    ])
    .unwrap()
}

fn toy_row(rng: &mut SeededRng, group: usize, outcome: usize, provenance: Provenance) -> Row {
    Row {
        cells: vec![
            Cell::numeric(rng.next_f64() * 50.0 + 20.0),
            Cell::categorical(group),
            Cell::categorical(outcome),
        ],
        provenance,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_is_associative(seed in any::<u64>(), a in 1usize..6, b in 1usize..6, c in 1usize..6, d in 1usize..6) {
        let mut rng = SeededRng::new(seed);
        let ma = random_matrix(&mut rng, a, b);
        let mb = random_matrix(&mut rng, b, c);
        let mc = random_matrix(&mut rng, c, d);
        let left = ma.matmul(&mb).unwrap().matmul(&mc).unwrap();
        let right = ma.matmul(&mb.matmul(&mc).unwrap()).unwrap();
        for (l, r) in left.data().iter().zip(right.data()) {
            prop_assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs().max(r.abs())), "{l} vs {r}");
        }
    }

    #[test]
    fn transpose_reverses_products(seed in any::<u64>(), a in 1usize..6, b in 1usize..6, c in 1usize..6) {
        let mut rng = SeededRng::new(seed);
        let ma = random_matrix(&mut rng, a, b);
        let mb = random_matrix(&mut rng, b, c);
        let lhs = ma.matmul(&mb).unwrap().transpose();
        let rhs = mb.transpose().matmul(&ma.transpose()).unwrap();
        prop_assert_eq!(lhs.data(), rhs.data());
    }

    #[test]
    fn rng_replays_bitwise_from_its_seed(seed in any::<u64>(), n in 1usize..200) {
        let mut first = SeededRng::new(seed);
        let mut second = SeededRng::new(seed);
        for _ in 0..n {
            prop_assert_eq!(first.next_u64(), second.next_u64());
            prop_assert!(first.next_f64().to_bits() == second.next_f64().to_bits());
            prop_assert!(first.next_gumbel().to_bits() == second.next_gumbel().to_bits());
        }
        let mut xs: Vec<usize> = (0..n).collect();
        let mut ys: Vec<usize> = (0..n).collect();
        first.shuffle(&mut xs);
        second.shuffle(&mut ys);
        prop_assert_eq!(xs, ys);
    }

    #[test]
    fn encoded_rows_are_one_hot_and_bounded(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = SeededRng::new(seed);
        let schema = toy_schema();
        let mut table = DatasetTable::new(schema.clone());
        for i in 0..n {
            let group = rng.next_below(2);
            let row = toy_row(&mut rng, group, i % 2, Provenance::Original);
            table.push_row(row).unwrap();
        }
        let encoder = Encoder::fit(&table).unwrap();
        let encoded = encoder.encode(&table).unwrap();
        prop_assert_eq!(encoded.rows(), n);

        let (g_lo, g_hi) = encoder.block_range(1);
        let (y_lo, y_hi) = encoder.block_range(2);
        for r in 0..n {
            let age = encoded.get(r, 0);
            prop_assert!((0.0..=1.0).contains(&age), "numeric {age} escaped [0,1]");
            for (lo, hi) in [(g_lo, g_hi), (y_lo, y_hi)] {
                let block: Vec<f64> = (lo..hi).map(|c| encoded.get(r, c)).collect();
                let ones = block.iter().filter(|&&v| v == 1.0).count();
                let zeros = block.iter().filter(|&&v| v == 0.0).count();
                prop_assert!(ones == 1 && ones + zeros == block.len(), "block {block:?} is not one-hot");
            }
        }
    }

    #[test]
    fn augmentation_adds_the_rounded_fraction(
        seed in any::<u64>(),
        n_a in 1usize..30,
        n_b in 1usize..30,
        fraction in 0.0f64..3.0,
    ) {
        let mut rng = SeededRng::new(seed);
        let schema = toy_schema();
        let mut table = DatasetTable::new(schema.clone());
        for i in 0..n_a {
            table.push_row(toy_row(&mut rng, 0, i % 2, Provenance::Original)).unwrap();
        }
        for i in 0..n_b {
            table.push_row(toy_row(&mut rng, 1, i % 2, Provenance::Original)).unwrap();
        }
        let mut pool = DatasetTable::new(schema);
        for i in 0..(3 * n_b + 1) {
            pool.push_row(toy_row(&mut rng, 1, i % 2, Provenance::Synthetic)).unwrap();
        }

        let plan = AugmentationPlan {
            entries: vec![PlanEntry { group: "group=b".parse().unwrap(), fraction }],
        };
        let out = table.augment(&pool, &plan).unwrap();
        let expected = (fraction * n_b as f64).round() as usize;
        prop_assert_eq!(out.n_rows(), n_a + n_b + expected);
        // Originals stay in place, in order, ahead of the appended rows.
        prop_assert_eq!(&out.rows()[..table.n_rows()], table.rows());
        for row in &out.rows()[table.n_rows()..] {
            prop_assert_eq!(row.provenance, Provenance::Synthetic);
        }
    }

    #[test]
    fn split_parts_partition_the_table(
        seed in any::<u64>(),
        n_no in 8usize..40,
        n_yes in 8usize..40,
        w1 in 2u32..6,
        w2 in 2u32..6,
        w3 in 2u32..6,
    ) {
        let mut rng = SeededRng::new(seed);
        let mut table = DatasetTable::new(toy_schema());
        for _ in 0..n_no {
            let group = rng.next_below(2);
            table.push_row(toy_row(&mut rng, group, 0, Provenance::Original)).unwrap();
        }
        for _ in 0..n_yes {
            let group = rng.next_below(2);
            table.push_row(toy_row(&mut rng, group, 1, Provenance::Original)).unwrap();
        }
        let sum = (w1 + w2 + w3) as f64;
        let fractions = (w1 as f64 / sum, w2 as f64 / sum, w3 as f64 / sum);
        let (train, val, test) = table.split(fractions, &mut rng).unwrap();

        prop_assert_eq!(train.n_rows() + val.n_rows() + test.n_rows(), table.n_rows());
        let mut got: Vec<String> = train
            .rows()
            .iter()
            .chain(val.rows())
            .chain(test.rows())
            .map(|r| format!("{r:?}"))
            .collect();
        let mut want: Vec<String> = table.rows().iter().map(|r| format!("{r:?}")).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn dual_update_moves_against_the_discriminator(
        p in prop::collection::vec(-2.0f64..2.0, 1..32),
        shift in prop::collection::vec(0.0f64..0.49, 1..32),
        beta in 0.0f64..2.0,
        above in any::<bool>(),
    ) {
        let n = p.len().min(shift.len());
        let p = &p[..n];
        let dis: Vec<f64> = shift[..n]
            .iter()
            .map(|s| if above { 0.5 + s } else { 0.5 - s })
            .collect();
        let updated = dual_update(p, &dis, beta).unwrap();
        for ((&pi, &di), &ui) in p.iter().zip(&dis).zip(&updated) {
            if di > 0.5 {
                prop_assert!(ui >= pi, "dis {di} should raise the density target: {pi} -> {ui}");
            } else if di < 0.5 {
                prop_assert!(ui <= pi, "dis {di} should lower the density target: {pi} -> {ui}");
            } else {
                prop_assert!(ui == pi);
            }
        }
    }

    #[test]
    fn kernel_is_positive_and_radially_decreasing(
        u in prop::collection::vec(-3.0f64..3.0, 1..16),
        sigma in 0.05f64..2.0,
        stretch in 1.01f64..4.0,
        normalized in any::<bool>(),
    ) {
        let near = gaussian_kernel(&u, sigma, normalized);
        let farther: Vec<f64> = u.iter().map(|v| v * stretch).collect();
        let far = gaussian_kernel(&farther, sigma, normalized);
        // Tiny bandwidths legitimately underflow to 0.0 at large distances,
        // so positivity is only strict while the value is representable.
        prop_assert!(near >= 0.0 && far >= 0.0);
        prop_assert!(far <= near, "kernel should shrink with distance: {near} -> {far}");
        if u.iter().any(|&v| v != 0.0) && far > 0.0 {
            prop_assert!(far < near, "kernel should shrink strictly: {near} -> {far}");
        }
    }

    #[test]
    fn predicate_survives_display_parse_round_trip(
        cols in prop::collection::hash_set("[a-z][a-z0-9_]{0,8}", 1..4),
        values in prop::collection::vec("[A-Za-z0-9<>&?-]{1,10}", 4),
    ) {
        let text = cols
            .iter()
            .zip(&values)
            .map(|(c, v)| format!("{c}={v}"))
            .collect::<Vec<_>>()
            .join(",");
        let parsed: GroupPredicate = text.parse().unwrap();
        let reparsed: GroupPredicate = parsed.to_string().parse().unwrap();
        prop_assert_eq!(&parsed, &reparsed);
    }

    #[test]
    fn bce_loss_is_finite_and_grad_shaped(
        pred in prop::collection::vec(0.001f64..0.999, 1..32),
        labels in prop::collection::vec(any::<bool>(), 1..32),
    ) {
        let n = pred.len().min(labels.len());
        let target: Vec<f64> = labels[..n].iter().map(|&b| f64::from(b)).collect();
        let (loss, grad) = bce_loss(&pred[..n], &target).unwrap();
        prop_assert!(loss.is_finite() && loss >= 0.0);
        prop_assert_eq!(grad.len(), n);
        prop_assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn accuracy_interval_matches_the_binomial_formula(
        scores in prop::collection::vec(0.0f64..1.0, 2..64),
        labels in prop::collection::vec(any::<bool>(), 2..64),
    ) {
        let n = scores.len().min(labels.len());
        let scores = &scores[..n];
        let target: Vec<f64> = labels[..n].iter().map(|&b| f64::from(b)).collect();
        let result = accuracy_with_ci(scores, &target);
        let correct = scores
            .iter()
            .zip(&target)
            .filter(|(&s, &t)| (s > 0.5) == (t == 1.0))
            .count();
        prop_assert_eq!(result.correct, correct);
        prop_assert_eq!(result.total, n);
        let acc = correct as f64 / n as f64;
        prop_assert!((result.accuracy - acc).abs() < 1e-15);
        let half = 1.96 * (acc * (1.0 - acc) / n as f64).sqrt();
        prop_assert!((result.ci_half_width - half).abs() < 1e-15);
    }
}
