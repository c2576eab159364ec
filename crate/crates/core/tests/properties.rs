use avq_core::vecio::{parse_fvecs, parse_ivecs, write_fvecs_to};
use avq_core::*;
use proptest::prelude::*;

/// `(m, k, d, elements)` for a small codebook.
fn codebook_parts() -> impl Strategy<Value = (usize, usize, usize, Vec<f32>)> {
    (1usize..4, 1usize..6, 1usize..6).prop_flat_map(|(m, k, d)| {
        (
            Just(m),
            Just(k),
            Just(d),
            prop::collection::vec(-10.0f32..10.0, m * k * d),
        )
    })
}

fn codebook_with_codes() -> impl Strategy<Value = (Codebook<f32>, Vec<Vec<u32>>, Vec<f32>)> {
    codebook_parts().prop_flat_map(|(m, k, d, e)| {
        let cb = Codebook::new(m, k, d, e).unwrap();
        (
            Just(cb),
            prop::collection::vec(prop::collection::vec(0..k as u32, m), 1..12),
            prop::collection::vec(-10.0f32..10.0, d),
        )
    })
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x as f64 - *y as f64).powi(2))
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fvecs_roundtrip_is_bit_exact(d in 1usize..9, rows in 1usize..20, seed in any::<u64>()) {
        let values: Vec<f32> = (0..d * rows)
            .map(|i| f32::from_bits((seed.wrapping_mul(i as u64 + 1) >> 33) as u32 & 0x7f7f_ffff))
            .collect();
        let ds = VectorDataset::new(d, values.clone()).unwrap();
        let mut bytes = Vec::new();
        write_fvecs_to(&ds, &mut bytes).unwrap();
        prop_assert_eq!(bytes.len(), rows * (4 + 4 * d));
        let back = parse_fvecs::<f32>(&bytes).unwrap();
        prop_assert!(back.as_slice().iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_fvecs_is_rejected(d in 1usize..9, rows in 1usize..5, cut in 1usize..4) {
        let ds = VectorDataset::new(d, vec![1.0f32; d * rows]).unwrap();
        let mut bytes = Vec::new();
        write_fvecs_to(&ds, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - cut);
        prop_assert!(parse_fvecs::<f32>(&bytes).is_err());
    }

    #[test]
    fn ivecs_parse_matches_layout(
        lists in (1usize..10).prop_flat_map(|depth| {
            prop::collection::vec(prop::collection::btree_set(0u32..1000, depth), 1..10)
        })
    ) {
        let mut bytes = Vec::new();
        for l in &lists {
            bytes.extend_from_slice(&(l.len() as i32).to_le_bytes());
            for v in l {
                bytes.extend_from_slice(&(*v as i32).to_le_bytes());
            }
        }
        let gt = parse_ivecs(&bytes).unwrap();
        prop_assert_eq!(gt.num_queries(), lists.len());
        for (q, l) in lists.iter().enumerate() {
            let want: Vec<u32> = l.iter().copied().collect();
            prop_assert_eq!(gt.neighbors(q), want.as_slice());
        }
    }

    #[test]
    fn codebook_roundtrip((m, k, d, e) in codebook_parts()) {
        let cb = Codebook::new(m, k, d, e).unwrap();
        let mut bytes = Vec::new();
        cb.write_to(&mut bytes).unwrap();
        let back = Codebook::<f32>::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &cb);
        prop_assert_eq!(back.fingerprint(), cb.fingerprint());
        bytes.push(0);
        prop_assert!(Codebook::<f32>::from_bytes(&bytes).is_err());
    }

    #[test]
    fn sorting_preserves_reconstruction((cb, rows, _) in codebook_with_codes()) {
        let codes = CodeMatrix::from_rows(cb.num_dictionaries(), cb.dictionary_size(), &rows).unwrap();
        let (sorted, permuted) = sort_by_norm(&cb, &codes).unwrap();
        prop_assert_eq!(sorted.order(), DictionaryOrder::NormDescending);
        let norms = sorted.dictionary_norms();
        prop_assert!(norms.windows(2).all(|w| w[0] >= w[1]));
        for i in 0..codes.len() {
            let a = reconstruct(&cb, codes.row(i)).unwrap();
            let b = reconstruct(&sorted, permuted.row(i)).unwrap();
            prop_assert!(sq_dist(&a, &b) < 1e-8);
        }
    }

    #[test]
    fn adc_matches_exact_distance((cb, rows, q) in codebook_with_codes()) {
        let table = build_cross_terms(&cb);
        let tables = build_adc_tables(&q, &cb).unwrap();
        for row in &rows {
            let exact = sq_dist(&q, &reconstruct(&cb, row).unwrap());
            let approx = adc_score(&tables, row, cross_term_of(row, &table));
            prop_assert!((approx - exact).abs() <= 1e-6 * exact.max(1.0), "{approx} vs {exact}");
        }
    }

    #[test]
    fn encoded_database_roundtrip((cb, rows, _) in codebook_with_codes()) {
        let codes = CodeMatrix::from_rows(cb.num_dictionaries(), cb.dictionary_size(), &rows).unwrap();
        let table = build_cross_terms(&cb);
        let db = EncodedDatabase::new(codes, &table, None).unwrap();
        let mut bytes = Vec::new();
        db.write_to(&mut bytes).unwrap();
        prop_assert_eq!(EncodedDatabase::from_bytes(&bytes).unwrap(), db);
    }

    #[test]
    fn beam_at_full_width_is_exhaustive((cb, _, x) in codebook_with_codes()) {
        let mut cb = cb;
        cb.sort_by_norm();
        let table = build_cross_terms(&cb);
        let full = cb.dictionary_size().pow(cb.num_dictionaries() as u32);
        let beam = beam_encode(&x, &cb, &table, full).unwrap();
        let exact = exhaustive_encode(&x, &cb).unwrap();
        let eb = sq_dist(&x, &reconstruct(&cb, &beam).unwrap());
        let ee = sq_dist(&x, &reconstruct(&cb, &exact).unwrap());
        prop_assert!((eb - ee).abs() <= 1e-6 * ee.max(1.0));
        let greedy = greedy_encode(&x, &cb).unwrap();
        prop_assert!(ee <= sq_dist(&x, &reconstruct(&cb, &greedy).unwrap()) + 1e-6);
    }

    #[test]
    fn entropy_and_mutual_information_bounds(
        k in 1usize..8,
        rows in prop::collection::vec((0u32..8, 0u32..8), 1..60),
    ) {
        let rows: Vec<Vec<u32>> = rows.iter().map(|&(a, b)| vec![a % k as u32, b % k as u32]).collect();
        let codes = CodeMatrix::from_rows(2, k, &rows).unwrap();
        let h0 = entropy(&codes, 0).unwrap();
        let h1 = entropy(&codes, 1).unwrap();
        let max = (k as f64).log2();
        prop_assert!(h0 >= 0.0 && h0 <= max + 1e-9);
        let mi = mutual_information(&codes, 0, 1).unwrap();
        prop_assert!(mi >= 0.0 && mi <= h0.min(h1) + 1e-9);
        prop_assert!((mi - mutual_information(&codes, 1, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn kmeans_trace_never_increases(
        n in 4usize..60,
        k in 1usize..4,
        seed in any::<u64>(),
    ) {
        let data: Vec<f64> = (0..n * 2)
            .map(|i| ((seed ^ (i as u64).wrapping_mul(0x9e37_79b9)) % 1000) as f64 / 100.0)
            .collect();
        let data = VectorDataset::new(2, data).unwrap();
        let fit = kmeans_fit(&data, &KMeansConfig::new(k).with_seed(seed), None).unwrap();
        prop_assert!(fit.sse_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let (assign_again, sse) = assign(&data, &fit.centroids).unwrap();
        prop_assert_eq!(assign_again, fit.assignments);
        prop_assert!((sse - fit.sse).abs() <= 1e-9 * sse.max(1.0));
    }
}
