//! Agglomerative clustering with average linkage.

use ndarray::ArrayView2;

/// Cluster the items of the symmetric dissimilarity matrix `d` with average
/// linkage and cut the tree into `k` groups. Labels are numbered in order of
/// first appearance. Merges join the closest pair of clusters, the pair
/// with the smallest lower id on ties.
pub fn average_linkage_cut(d: ArrayView2<'_, f64>, k: usize) -> Vec<usize> {
    let n = d.nrows();
    assert!(k >= 1 && k <= n.max(1), "cut size {k} outside 1..={n}");
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d[[i, j]]).collect()).collect();
    let mut size = vec![1usize; n];
    let mut active: Vec<bool> = vec![true; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut clusters = n;

    while clusters > k {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if best.is_none_or(|(_, _, b)| dist[i][j] < b) {
                    best = Some((i, j, dist[i][j]));
                }
            }
        }
        let (a, b, _) = best.expect("at least two clusters");
        // Lance-Williams update for average linkage.
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for m in (0..n).filter(|&m| active[m] && m != a && m != b) {
            let v = (na * dist[a][m] + nb * dist[b][m]) / (na + nb);
            dist[a][m] = v;
            dist[m][a] = v;
        }
        size[a] += size[b];
        active[b] = false;
        for o in owner.iter_mut().filter(|o| **o == b) {
            *o = a;
        }
        clusters -= 1;
    }

    let mut ids: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    owner
        .iter()
        .map(|&o| {
            *ids[o].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cuts_two_obvious_groups() {
        let d = array![
            [0.0, 0.1, 0.9, 0.8],
            [0.1, 0.0, 0.85, 0.9],
            [0.9, 0.85, 0.0, 0.2],
            [0.8, 0.9, 0.2, 0.0]
        ];
        assert_eq!(average_linkage_cut(d.view(), 2), vec![0, 0, 1, 1]);
        assert_eq!(average_linkage_cut(d.view(), 4), vec![0, 1, 2, 3]);
        assert_eq!(average_linkage_cut(d.view(), 1), vec![0, 0, 0, 0]);
    }

    #[test]
    fn average_not_single_linkage() {
        // Single linkage would chain 0-1-2 via the 0.3 steps; average
        // linkage keeps 2 with 3.
        let d = array![
            [0.0, 0.3, 0.7, 1.0],
            [0.3, 0.0, 0.3, 1.0],
            [0.7, 0.3, 0.0, 0.35],
            [1.0, 1.0, 0.35, 0.0]
        ];
        assert_eq!(average_linkage_cut(d.view(), 2), vec![0, 0, 1, 1]);
    }
}
