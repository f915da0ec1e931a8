use num_bigint::BigUint;
use num_traits::Zero;

/// `c[n][k]`: number of `±1` paths of length `2n + k` from 0 whose
/// intermediate positions all lie strictly between `-k` and 0 and which
/// reach `-k` at the last step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCountTable {
    n_max: usize,
    k_max: usize,
    counts: Vec<Vec<BigUint>>,
}

impl PathCountTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `c[n][k]` for `n <= n_max`, `1 <= k <= k_max`.
    pub fn get(&self, n: usize, k: usize) -> &BigUint {
        assert!(k >= 1 && k <= self.k_max && n <= self.n_max, "c[{n}][{k}] is outside the table");
        &self.counts[n][k - 1]
    }

    /// Rows indexed by `n`, columns by `k = 1..=k_max`.
    pub fn rows(&self) -> &[Vec<BigUint>] {
        &self.counts
    }
}

pub fn path_counts(n_max: usize, k_max: usize) -> PathCountTable {
    let mut counts = vec![vec![BigUint::zero(); k_max]; n_max + 1];
    if k_max >= 1 {
        counts[0][0] = BigUint::from(1u8);
    }
    for k in 2..=k_max {
        // ways[d]: paths currently at depth d (position -d), 1 <= d <= k-1.
        let mut ways = vec![BigUint::zero(); k];
        ways[1] = BigUint::from(1u8);
        let mut len = 1;
        for n in 0..=n_max {
            let final_len = 2 * n + k;
            while len < final_len - 1 {
                let mut next = vec![BigUint::zero(); k];
                for d in 1..k {
                    if ways[d].is_zero() {
                        continue;
                    }
                    if d > 1 {
                        next[d - 1] += &ways[d];
                    }
                    if d + 1 < k {
                        next[d + 1] += &ways[d];
                    }
                }
                ways = next;
                len += 1;
            }
            counts[n][k - 1] = ways[k - 1].clone();
        }
    }
    PathCountTable { n_max, k_max, counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_columns() {
        let t = path_counts(8, 5);
        for n in 0..=8 {
            let expect_1 = u8::from(n == 0);
            assert_eq!(*t.get(n, 1), BigUint::from(expect_1));
            assert_eq!(*t.get(n, 2), BigUint::from(expect_1));
            assert_eq!(*t.get(n, 3), BigUint::from(1u8));
        }
        for k in 1..=5 {
            assert_eq!(*t.get(0, k), BigUint::from(1u8));
        }
        // Corridor {-1,-2,-3}: the bounce count doubles every two steps.
        assert_eq!(*t.get(3, 4), BigUint::from(8u8));
    }
}
