//! Matching cluster ids to class ids.

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting paths with potentials). Returns `row -> column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    // 1-based arrays, column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

/// Largest possible agreement between `assignments` and `labels` over all
/// one-to-one relabelings of the clusters. Exhaustive up to 8 ids,
/// Hungarian above. Returns `(accuracy, cluster -> class)`.
pub fn matched_accuracy(assignments: &[usize], labels: &[usize]) -> (f64, Vec<usize>) {
    assert_eq!(assignments.len(), labels.len());
    let n = labels.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let m = k.max(c);
    let mut conf = vec![vec![0.0f64; m]; m];
    for (&a, &l) in assignments.iter().zip(labels) {
        conf[a][l] += 1.0;
    }
    let perm = if m <= 8 {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for p in permutations(m) {
            let s: f64 = p.iter().enumerate().map(|(a, &l)| conf[a][l]).sum();
            if s > best.0 {
                best = (s, p);
            }
        }
        best.1
    } else {
        let cost: Vec<Vec<f64>> = conf.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        hungarian(&cost)
    };
    let hits: f64 = perm.iter().enumerate().map(|(a, &l)| conf[a][l]).sum();
    let perm = perm.into_iter().take(k).collect();
    (hits / n as f64, perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_min(cost: &[Vec<f64>]) -> f64 {
        permutations(cost.len())
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = rng_from_seed(3);
        for n in 1..=7 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.random_range(0..20) as f64).collect())
                    .collect();
                let a = hungarian(&cost);
                let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                assert_eq!(got, brute_min(&cost));
                let mut seen = a.clone();
                seen.sort();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn large_k_uses_assignment() {
        // 10 classes, clusters are a cyclic shift of the labels.
        let labels: Vec<usize> = (0..100).map(|i| i % 10).collect();
        let assign: Vec<usize> = labels.iter().map(|l| (l + 3) % 10).collect();
        let (acc, perm) = matched_accuracy(&assign, &labels);
        assert_eq!(acc, 1.0);
        assert_eq!(perm[3], 0);
    }

    proptest! {
        #[test]
        fn invariant_under_relabeling(labels in proptest::collection::vec(0usize..3, 1..40), seed in 0u64..1000) {
            let mut rng = rng_from_seed(seed);
            let assign: Vec<usize> = labels.iter().map(|_| rng.random_range(0..3)).collect();
            let (acc, _) = matched_accuracy(&assign, &labels);
            let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 1) % 3).collect();
            prop_assert_eq!(acc, matched_accuracy(&assign, &relabeled).0);
            let raw = assign.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64;
            prop_assert!(acc >= raw && acc <= 1.0);
        }
    }
}
