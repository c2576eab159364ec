use avq_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Beam search written directly from its definition: expand every kept
/// prefix by every element of the next dictionary, score each partial sum by
/// its exact squared distance to `x`, keep the best `width`.
fn naive_beam(x: &[f32], cb: &Codebook<f32>, width: usize) -> Vec<u32> {
    let d = cb.dim();
    let mut beam: Vec<(f64, Vec<u32>, Vec<f64>)> = vec![(0.0, Vec::new(), vec![0.0; d])];
    for m in 0..cb.num_dictionaries() {
        let mut next = Vec::new();
        for (_, prefix, sum) in &beam {
            for j in 0..cb.dictionary_size() {
                let s: Vec<f64> = sum
                    .iter()
                    .zip(cb.element(m, j))
                    .map(|(a, b)| a + *b as f64)
                    .collect();
                let score: f64 = x.iter().zip(&s).map(|(a, b)| (*a as f64 - b).powi(2)).sum();
                let mut p = prefix.clone();
                p.push(j as u32);
                next.push((score, p, s));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        next.truncate(width);
        beam = next;
    }
    beam.swap_remove(0).1
}

fn random_sorted_codebook(m: usize, k: usize, d: usize, rng: &mut ChaCha8Rng) -> Codebook<f32> {
    let elements = (0..m * k * d)
        .map(|i| {
            let z: f64 = StandardNormal.sample(rng);
            (z / (1.0 + (i / (k * d)) as f64)) as f32
        })
        .collect();
    let mut cb = Codebook::new(m, k, d, elements).unwrap();
    cb.sort_by_norm();
    cb
}

fn residual(x: &[f32], cb: &Codebook<f32>, codes: &[u32]) -> f64 {
    let r = reconstruct(cb, codes).unwrap();
    x.iter()
        .zip(&r)
        .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
        .sum()
}

#[test]
fn beam_matches_definition_at_every_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..60 {
        let cb = random_sorted_codebook(3, 4, 8, &mut rng);
        let table = build_cross_terms(&cb);
        for _ in 0..10 {
            let x: Vec<f32> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            for width in [1, 2, 3, 4, 8, 16] {
                let fast = beam_encode(&x, &cb, &table, width).unwrap();
                let slow = naive_beam(&x, &cb, width);
                let (ef, es) = (residual(&x, &cb, &fast), residual(&x, &cb, &slow));
                assert!(
                    (ef - es).abs() <= 1e-6 * es.max(1.0),
                    "width {width}: {ef} vs {es}"
                );
            }
        }
    }
}

/// A wider beam keeps a superset of candidates at the first level only; later
/// levels can evict the prefix that a narrow beam would have completed. This
/// instance shows that such losses are a property of beam search itself.
#[test]
fn wider_beam_can_lose_on_a_single_vector() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut found = false;
    'outer: for _ in 0..200 {
        let cb = random_sorted_codebook(3, 4, 8, &mut rng);
        for _ in 0..10 {
            let x: Vec<f32> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            let e: Vec<f64> = [1, 2, 4, 8]
                .iter()
                .map(|&w| residual(&x, &cb, &naive_beam(&x, &cb, w)))
                .collect();
            if e.windows(2).any(|w| w[1] > w[0] + 1e-9) {
                found = true;
                break 'outer;
            }
        }
    }
    assert!(found);
}
