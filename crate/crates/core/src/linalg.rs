//! Small dense helpers shared by the mean-field and embedding code.

use nalgebra::{DMatrix, SymmetricEigen};

/// Dense rank-4 tensor over `n` orbitals, row-major in `(p, q, r, s)`.
///
/// Used both for electron-repulsion integrals `(pq|rs)` and for spin-summed
/// two-particle density matrices in the matching index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n * n * n, "tensor length must be n^4");
        Tensor4 { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[self.index(p, q, r, s)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let i = self.index(p, q, r, s);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let i = self.index(p, q, r, s);
        self.data[i] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Transform every index with the columns of `c` (`n_old x n_new`):
    /// `out[a,b,c,d] = Σ c_pa c_qb c_rc c_sd t[p,q,r,s]`.
    pub fn transform(&self, c: &DMatrix<f64>) -> Tensor4 {
        let n = self.n;
        let m = c.ncols();
        assert_eq!(c.nrows(), n);
        // one index at a time, each pass is O(n^4 m)
        let mut cur = self.data.clone();
        let mut dims = [n, n, n, n];
        for axis in 0..4 {
            let mut new_dims = dims;
            new_dims[axis] = m;
            let mut out = vec![0.0; new_dims.iter().product()];
            let strides_old = strides(&dims);
            let strides_new = strides(&new_dims);
            for (idx_new, slot) in out.iter_mut().enumerate() {
                let mut rem = idx_new;
                let mut coords = [0usize; 4];
                for k in 0..4 {
                    coords[k] = rem / strides_new[k];
                    rem %= strides_new[k];
                }
                let a = coords[axis];
                let mut base = 0;
                for k in 0..4 {
                    if k != axis {
                        base += coords[k] * strides_old[k];
                    }
                }
                let mut acc = 0.0;
                for p in 0..dims[axis] {
                    let cp = c[(p, a)];
                    if cp != 0.0 {
                        acc += cp * cur[base + p * strides_old[axis]];
                    }
                }
                *slot = acc;
            }
            cur = out;
            dims = new_dims;
        }
        Tensor4 { n: m, data: cur }
    }

    /// Restrict every index to the given orbital subset (in the given order).
    pub fn restrict(&self, subset: &[usize]) -> Tensor4 {
        let m = subset.len();
        let mut out = Tensor4::zeros(m);
        for (a, &p) in subset.iter().enumerate() {
            for (b, &q) in subset.iter().enumerate() {
                for (c, &r) in subset.iter().enumerate() {
                    for (d, &s) in subset.iter().enumerate() {
                        out.set(a, b, c, d, self.get(p, q, r, s));
                    }
                }
            }
        }
        out
    }
}

fn strides(dims: &[usize; 4]) -> [usize; 4] {
    [dims[1] * dims[2] * dims[3], dims[2] * dims[3], dims[3], 1]
}

/// Eigen-decomposition of a real symmetric matrix with eigenpairs sorted by
/// `(eigenvalue, original index)` and each eigenvector's sign fixed so that its
/// largest-magnitude component (first one on ties) is positive.
pub fn eigh(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let mut pivot = 0;
        for k in 1..n {
            if v[k].abs() > v[pivot].abs() + 1e-12 {
                pivot = k;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, col)] = sign * v[k];
        }
    }
    (values, vectors)
}

/// Sub-matrix picking `rows` x `cols`.
pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}
