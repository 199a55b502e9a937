//! Multi-index polynomial basis over a small state dimension.
//!
//! Used for the local and global regressions that estimate interaction
//! tensors, and for evaluating fitted polynomial dynamics.

use ndarray::Array2;

/// All multi-indices over `dim` variables with total degree <= `max_deg`,
/// ordered by total degree, then lexicographically. Degree 0 (the constant)
/// comes first.
pub fn multi_indices(dim: usize, max_deg: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for deg in 0..=max_deg {
        let mut cur = vec![0u8; dim];
        gen_degree(dim, deg as u8, 0, &mut cur, &mut out);
    }
    out
}

fn gen_degree(dim: usize, remaining: u8, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == dim - 1 {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for d in (0..=remaining).rev() {
        cur[pos] = d;
        gen_degree(dim, remaining - d, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

pub fn total_degree(alpha: &[u8]) -> usize {
    alpha.iter().map(|&a| a as usize).sum()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// alpha! = prod_i alpha_i!
pub fn multi_factorial(alpha: &[u8]) -> f64 {
    alpha.iter().map(|&a| factorial(a as usize)).product()
}

/// Number of distinct index permutations of a degree-k multi-index:
/// k! / alpha!. This is the multiplicity of the multi-index entry inside the
/// full symmetric order-k tensor.
pub fn permutation_multiplicity(alpha: &[u8]) -> f64 {
    factorial(total_degree(alpha)) / multi_factorial(alpha)
}

/// Monomial basis with precomputed derivative bookkeeping.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    pub dim: usize,
    pub max_deg: usize,
    pub indices: Vec<Vec<u8>>,
}

impl PolyBasis {
    pub fn new(dim: usize, max_deg: usize) -> Self {
        PolyBasis {
            dim,
            max_deg,
            indices: multi_indices(dim, max_deg),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.indices.iter().position(|a| a == alpha)
    }

    /// Indices of a given total degree.
    pub fn of_degree(&self, deg: usize) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, a)| total_degree(a) == deg)
            .map(|(i, _)| i)
            .collect()
    }

    /// Evaluate all monomials at `x` into `row`.
    pub fn eval_row(&self, x: &[f64], row: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(row.len(), self.len());
        for (k, alpha) in self.indices.iter().enumerate() {
            let mut v = 1.0;
            for (xi, &a) in x.iter().zip(alpha.iter()) {
                for _ in 0..a {
                    v *= xi;
                }
            }
            row[k] = v;
        }
    }

    /// Design matrix of all monomials over the sample rows of `x` (n x dim).
    pub fn design(&self, x: &Array2<f64>) -> Array2<f64> {
        let n = x.nrows();
        let mut out = Array2::zeros((n, self.len()));
        let mut row = vec![0.0; self.len()];
        for i in 0..n {
            let xi: Vec<f64> = x.row(i).to_vec();
            self.eval_row(&xi, &mut row);
            for (k, &v) in row.iter().enumerate() {
                out[(i, k)] = v;
            }
        }
        out
    }

    /// Terms of the alpha-th partial derivative of the basis polynomial:
    /// for each source monomial gamma >= alpha, the pair
    /// (source position, falling-factorial factor, target position of
    /// gamma - alpha). Evaluating sum c[src] * factor * x^(indices[dst])
    /// gives d^alpha of the fitted polynomial.
    pub fn derivative_terms(&self, alpha: &[u8]) -> Vec<(usize, f64, usize)> {
        let mut out = Vec::new();
        for (src, gamma) in self.indices.iter().enumerate() {
            if gamma.iter().zip(alpha.iter()).all(|(g, a)| g >= a) {
                let mut factor = 1.0;
                let mut rem = vec![0u8; self.dim];
                for i in 0..self.dim {
                    let g = gamma[i] as usize;
                    let a = alpha[i] as usize;
                    for j in 0..a {
                        factor *= (g - j) as f64;
                    }
                    rem[i] = (g - a) as u8;
                }
                if factor != 0.0 {
                    let dst = self
                        .index_of(&rem)
                        .expect("remainder index is inside the basis");
                    out.push((src, factor, dst));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        // C(dim + deg, deg)
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices(3, 2).len(), 10);
        assert_eq!(multi_indices(3, 5).len(), 56);
        assert_eq!(multi_indices(1, 4).len(), 5);
    }

    #[test]
    fn degree_zero_first() {
        let idx = multi_indices(3, 2);
        assert_eq!(idx[0], vec![0, 0, 0]);
    }

    #[test]
    fn multiplicities() {
        assert_eq!(permutation_multiplicity(&[2, 0]), 1.0);
        assert_eq!(permutation_multiplicity(&[1, 1]), 2.0);
        assert_eq!(permutation_multiplicity(&[2, 1]), 3.0);
    }

    #[test]
    fn derivative_terms_of_square() {
        // d^2/dx^2 of c * x^2 = 2c
        let basis = PolyBasis::new(1, 3);
        let x2 = basis.index_of(&[2]).unwrap();
        let terms = basis.derivative_terms(&[2]);
        let t = terms.iter().find(|(src, _, _)| *src == x2).unwrap();
        assert_eq!(t.1, 2.0);
        assert_eq!(basis.indices[t.2], vec![0]);
        // cubic contributes 6x
        let x3 = basis.index_of(&[3]).unwrap();
        let t3 = terms.iter().find(|(src, _, _)| *src == x3).unwrap();
        assert_eq!(t3.1, 6.0);
        assert_eq!(basis.indices[t3.2], vec![1]);
    }

    #[test]
    fn eval_row_matches_hand_values() {
        let basis = PolyBasis::new(2, 2);
        let mut row = vec![0.0; basis.len()];
        basis.eval_row(&[2.0, 3.0], &mut row);
        let get = |alpha: &[u8]| row[basis.index_of(alpha).unwrap()];
        assert_eq!(get(&[0, 0]), 1.0);
        assert_eq!(get(&[1, 0]), 2.0);
        assert_eq!(get(&[0, 1]), 3.0);
        assert_eq!(get(&[1, 1]), 6.0);
        assert_eq!(get(&[2, 0]), 4.0);
        assert_eq!(get(&[0, 2]), 9.0);
    }
}
