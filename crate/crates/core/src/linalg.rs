//! Small dense helpers shared by the spectral path and the oracles.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouvillian::CMatrix;

pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Index sets of the connected components of the sparsity graph of `m`
/// (edge `i-j` whenever `m[i,j]` or `m[j,i]` is nonzero). Each component is
/// an invariant block of a permuted block-diagonal matrix.
pub fn diagonal_blocks(m: &CMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_slot[r]].push(i);
    }
    blocks
}

/// Eigenvalues of a general complex matrix: isolate invariant blocks, then a
/// complex Schur decomposition per block.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    assert!(m.is_square());
    let mut out = Vec::with_capacity(m.nrows());
    for block in diagonal_blocks(m) {
        if block.len() == 1 {
            out.push(m[(block[0], block[0])]);
            continue;
        }
        let sub = CMatrix::from_fn(block.len(), block.len(), |i, j| m[(block[i], block[j])]);
        let schur = Schur::try_new(sub, f64::EPSILON, 100_000).ok_or(Error::NoConvergence)?;
        let (_, t) = schur.unpack();
        out.extend(t.diagonal().iter().copied());
    }
    Ok(out)
}

/// Orthonormal basis for the `count` smallest right singular directions of
/// `m`, provided each singular value is at most `tol`.
pub fn null_space(m: &CMatrix, count: usize, tol: f64) -> Option<Vec<DVector<Complex64>>> {
    let n = m.ncols();
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd.v_t.as_ref()?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut vectors = Vec::with_capacity(count);
    for &k in order.iter().take(count) {
        if svd.singular_values[k] > tol {
            return None;
        }
        vectors.push(DVector::from_fn(n, |i, _| v_t[(k, i)].conj()));
    }
    (vectors.len() == count).then_some(vectors)
}

/// All permutations of `0..n` with their signs.
pub fn signed_permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, f64)>) {
        let n = used.len();
        if prefix.len() == n {
            let mut inversions = 0usize;
            for i in 0..n {
                for j in i + 1..n {
                    if prefix[i] > prefix[j] {
                        inversions += 1;
                    }
                }
            }
            let sign = if inversions.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            out.push((prefix.clone(), sign));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_signs() {
        let perms = signed_permutations(3);
        assert_eq!(perms.len(), 6);
        let total: f64 = perms.iter().map(|(_, s)| s).sum();
        assert_eq!(total, 0.0);
        assert!(perms.contains(&(vec![1, 0, 2], -1.0)));
        assert!(perms.contains(&(vec![1, 2, 0], 1.0)));
    }

    #[test]
    fn blocks_of_permuted_matrix() {
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 2)] = Complex64::new(1.0, 0.0);
        m[(3, 3)] = Complex64::new(2.0, 0.0);
        m[(1, 1)] = Complex64::new(5.0, 0.0);
        assert_eq!(diagonal_blocks(&m), vec![vec![0, 2], vec![1], vec![3]]);
    }

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let m = complexify(&DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn null_space_of_projector() {
        let m = complexify(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let v = null_space(&m, 1, 1e-12).unwrap();
        assert!((v[0][0]).norm() < 1e-14);
        assert!((v[0][1].norm() - 1.0).abs() < 1e-14);
        assert!(null_space(&m, 2, 1e-12).is_none());
    }
}
