//! Reference values used for regression: star-graph gaps, the Knabe
//! tables derived from them, and the size-bound coefficients. All gaps are quoted to
//! four decimals.

/// `(k, q, first n⋆, gaps for n⋆ = first, first + 1, ..)`.
const STAR_GAPS: &[(usize, usize, usize, &[f64])] = &[
    (2, 2, 3, &[
        0.6000, 0.5566, 0.5583, 0.5776, 0.6038, 0.6309, 0.6556, 0.6759, 0.6913, 0.7025,
        0.7105, 0.7161, 0.7203, 0.7233, 0.7257, 0.7277, 0.7293, 0.7306, 0.7318, 0.7328,
    ]),
    (2, 3, 3, &[
        0.7000, 0.7190, 0.7650, 0.8078, 0.8373, 0.8545, 0.8638, 0.8691, 0.8723, 0.8745,
        0.8761, 0.8773, 0.8783, 0.8792, 0.8799, 0.8805, 0.8810, 0.8815, 0.8819, 0.8823,
    ]),
    (2, 4, 3, &[
        0.7647, 0.8134, 0.8668, 0.8997, 0.9153, 0.9222, 0.9256, 0.9276, 0.9290, 0.9300,
        0.9307, 0.9314, 0.9319, 0.9323, 0.9327, 0.9330, 0.9333, 0.9336, 0.9338, 0.9340,
    ]),
    (3, 2, 3, &[0.6000, 0.5566, 0.5583, 0.5776, 0.6038, 0.6309, 0.6556]),
    (3, 3, 3, &[0.7000, 0.7190, 0.7650, 0.8078, 0.8373, 0.8545]),
    (3, 4, 3, &[0.7647, 0.8134, 0.8668, 0.8997, 0.9153, 0.9222]),
    (4, 2, 3, &[0.5000, 0.5566, 0.5583]),
    (4, 3, 3, &[0.7000, 0.7190]),
    (4, 4, 3, &[0.7647, 0.8134]),
    (5, 2, 3, &[0.5000]),
];

/// Reference gap of the `n`-vertex star, if tabulated.
pub fn star_gap(k: usize, q: usize, n: usize) -> Option<f64> {
    STAR_GAPS
        .iter()
        .find(|(kk, qq, _, _)| *kk == k && *qq == q)
        .and_then(|(_, _, first, gaps)| n.checked_sub(*first).and_then(|i| gaps.get(i).copied()))
}

/// All tabulated `(n, gap)` pairs for one `(k, q)`.
pub fn star_gap_series(k: usize, q: usize) -> Vec<(usize, f64)> {
    STAR_GAPS
        .iter()
        .filter(|(kk, qq, _, _)| *kk == k && *qq == q)
        .flat_map(|(_, _, first, gaps)| gaps.iter().enumerate().map(move |(i, &g)| (first + i, g)))
        .collect()
}

/// Largest tabulated star size for `(k, q)`.
pub fn largest_star(k: usize, q: usize) -> Option<usize> {
    star_gap_series(k, q).last().map(|&(n, _)| n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnyGraphRow {
    pub k: usize,
    pub n_star: usize,
    pub star_gap: f64,
    pub lower: f64,
}

/// Knabe bound from the largest computed star, qubits.
pub const ANY_GRAPH: [AnyGraphRow; 3] = [
    AnyGraphRow { k: 2, n_star: 22, star_gap: 0.7328, lower: 0.4656 },
    AnyGraphRow { k: 3, n_star: 9, star_gap: 0.6556, lower: 0.3112 },
    AnyGraphRow { k: 4, n_star: 5, star_gap: 0.5583, lower: 0.1166 },
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoostedRow {
    pub k: usize,
    pub m_star: usize,
    pub star_gap: f64,
    pub n_star: usize,
    pub boosted_gap: f64,
    pub lower: f64,
}

/// Knabe bound after boosting the largest computed star, qubits.
pub const BOOSTED: [BoostedRow; 2] = [
    BoostedRow { k: 2, m_star: 22, star_gap: 0.7328, n_star: 39, boosted_gap: 0.5057, lower: 0.0114 },
    BoostedRow { k: 3, m_star: 9, star_gap: 0.6556, n_star: 12, boosted_gap: 0.5080, lower: 0.0160 },
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizeRow {
    pub k: usize,
    pub kappa: usize,
    /// Quoted prefactor of `|E| (c n + log(1/ε))`.
    pub coefficient: f64,
    /// The `c` multiplying `n`.
    pub n_coefficient: f64,
    /// Gap the prefactor was derived from.
    pub gap: f64,
}

pub const SIZE_TABLE: [SizeRow; 3] = [
    SizeRow { k: 2, kappa: 38, coefficient: 90.0, n_coefficient: 4.0, gap: 0.0114 },
    SizeRow { k: 3, kappa: 12, coefficient: 64.0, n_coefficient: 6.0, gap: 0.0160 },
    SizeRow { k: 4, kappa: 5, coefficient: 9.0, n_coefficient: 8.0, gap: 0.1166 },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        assert_eq!(star_gap(2, 2, 3), Some(0.6));
        assert_eq!(star_gap(2, 2, 22), Some(0.7328));
        assert_eq!(star_gap(2, 2, 23), None);
        assert_eq!(star_gap(3, 2, 9), Some(0.6556));
        assert_eq!(star_gap(2, 2, 2), None);
        assert_eq!(largest_star(4, 2), Some(5));
        assert_eq!(star_gap_series(2, 3).len(), 20);
    }

    #[test]
    fn tables_are_consistent() {
        for row in ANY_GRAPH {
            assert_eq!(star_gap(row.k, 2, row.n_star), Some(row.star_gap));
        }
        for row in BOOSTED {
            assert_eq!(star_gap(row.k, 2, row.m_star), Some(row.star_gap));
        }
    }
}
