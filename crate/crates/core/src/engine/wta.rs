use rand::Rng;

/// Picks the single winner of a winner-take-all group: the candidate with
/// the highest membrane potential, ties drawn uniformly with `rng`.
///
/// The rng is consumed only when there is a tie, so runs without ties do not
/// depend on the seed.
///
/// # Panics
///
/// If `candidates` is empty.
pub fn wta_resolve<R: Rng + ?Sized>(candidates: &[u32], potentials: &[f64], rng: &mut R) -> u32 {
    assert!(!candidates.is_empty(), "winner-take-all over an empty candidate set");
    let best = candidates.iter().map(|&c| potentials[c as usize]).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<u32> = candidates.iter().copied().filter(|&c| potentials[c as usize] == best).collect();
    match tied.len() {
        1 => tied[0],
        n => tied[rng.random_range(0..n)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_candidate_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(wta_resolve(&[4], &[0.0, 0.0, 0.0, 0.0, 1.5], &mut rng), 4);
    }

    #[test]
    fn highest_potential_wins() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(wta_resolve(&[0, 1], &[3.0, 2.0], &mut rng), 0);
        assert_eq!(wta_resolve(&[0, 1], &[2.0, 3.0], &mut rng), 1);
    }

    #[test]
    fn ties_are_seeded() {
        let pot = [5.0; 8];
        let cands: Vec<u32> = (0..8).collect();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| wta_resolve(&cands, &pot, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        let winners: std::collections::HashSet<_> = draw(11).into_iter().collect();
        assert!(winners.len() > 1, "ties should not always go to the same neuron");
    }
}
