//! Matrix blocks between particle-number sectors, dense or compressed-row.

use faer::{c64, Mat};

use crate::linalg::{self, ZERO};

#[derive(Clone, Debug)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    ptr: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<c64>,
}

impl Csr {
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(u32, u32, c64)>) -> Csr {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut ptr = vec![0usize; nrows + 1];
        let mut idx = Vec::with_capacity(t.len());
        let mut val: Vec<c64> = Vec::with_capacity(t.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *val.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            last = Some((r, c));
            idx.push(c);
            val.push(v);
            ptr[r as usize + 1] += 1;
        }
        for r in 0..nrows {
            ptr[r + 1] += ptr[r];
        }
        let mut m = Csr { nrows, ncols, ptr, idx, val };
        m.prune();
        m
    }

    fn prune(&mut self) {
        if self.val.iter().all(|v| *v != ZERO) {
            return;
        }
        let mut t = Vec::with_capacity(self.val.len());
        for (r, c, v) in self.iter() {
            if v != ZERO {
                t.push((r as u32, c as u32, v));
            }
        }
        let mut ptr = vec![0usize; self.nrows + 1];
        for &(r, _, _) in &t {
            ptr[r as usize + 1] += 1;
        }
        for r in 0..self.nrows {
            ptr[r + 1] += ptr[r];
        }
        self.idx = t.iter().map(|x| x.1).collect();
        self.val = t.iter().map(|x| x.2).collect();
        self.ptr = ptr;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.nrows)
            .flat_map(move |r| (self.ptr[r]..self.ptr[r + 1]).map(move |k| (r, self.idx[k] as usize, self.val[k])))
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        let row = &self.idx[self.ptr[r]..self.ptr[r + 1]];
        match row.binary_search(&(c as u32)) {
            Ok(k) => self.val[self.ptr[r] + k],
            Err(_) => ZERO,
        }
    }

    pub fn matvec(&self, x: &[c64], y: &mut [c64]) {
        for r in 0..self.nrows {
            let mut s = ZERO;
            for k in self.ptr[r]..self.ptr[r + 1] {
                s += self.val[k] * x[self.idx[k] as usize];
            }
            y[r] = s;
        }
    }

    pub fn adjoint(&self) -> Csr {
        let t = self.iter().map(|(r, c, v)| (c as u32, r as u32, v.conj())).collect();
        Csr::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn mul(&self, b: &Csr) -> Csr {
        let mut acc = vec![ZERO; b.ncols];
        let mut mark = vec![false; b.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut t = Vec::new();
        for r in 0..self.nrows {
            for k in self.ptr[r]..self.ptr[r + 1] {
                let a = self.val[k];
                let m = self.idx[k] as usize;
                for kk in b.ptr[m]..b.ptr[m + 1] {
                    let c = b.idx[kk] as usize;
                    if !mark[c] {
                        mark[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b.val[kk];
                }
            }
            for &c in &cols {
                t.push((r as u32, c as u32, acc[c]));
                acc[c] = ZERO;
                mark[c] = false;
            }
            cols.clear();
        }
        Csr::from_triplets(self.nrows, b.ncols, t)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn from_dense(m: &Mat<c64>) -> Csr {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != ZERO {
                    t.push((r as u32, c as u32, m[(r, c)]));
                }
            }
        }
        Csr::from_triplets(m.nrows(), m.ncols(), t)
    }
}

#[derive(Clone, Debug)]
pub enum Block {
    Dense(Mat<c64>),
    Sparse(Csr),
}

/// Blocks up to this many entries are stored densely in dense-preferring
/// spaces; larger blocks are dense only when well filled.
pub const SMALL_BLOCK: usize = 128 * 128;

fn prefer_dense(nrows: usize, ncols: usize, dense: bool) -> bool {
    dense && nrows * ncols <= SMALL_BLOCK
}

impl Block {
    pub fn zeros(nrows: usize, ncols: usize, dense: bool) -> Block {
        if prefer_dense(nrows, ncols, dense) {
            Block::Dense(Mat::zeros(nrows, ncols))
        } else {
            Block::Sparse(Csr::from_triplets(nrows, ncols, Vec::new()))
        }
    }

    pub fn identity(n: usize, dense: bool) -> Block {
        if prefer_dense(n, n, dense) {
            Block::Dense(Mat::identity(n, n))
        } else {
            Block::Sparse(Csr::from_triplets(n, n, (0..n as u32).map(|i| (i, i, linalg::ONE)).collect()))
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, t: Vec<(u32, u32, c64)>, dense: bool) -> Block {
        if prefer_dense(nrows, ncols, dense) {
            let mut m = Mat::zeros(nrows, ncols);
            for (r, c, v) in t {
                m[(r as usize, c as usize)] += v;
            }
            Block::Dense(m)
        } else {
            Block::Sparse(Csr::from_triplets(nrows, ncols, t)).into_storage(dense)
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            Block::Dense(m) => m.nrows(),
            Block::Sparse(s) => s.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Block::Dense(m) => m.ncols(),
            Block::Sparse(s) => s.ncols,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Block::Dense(_))
    }

    pub fn to_dense(&self) -> Mat<c64> {
        match self {
            Block::Dense(m) => m.clone(),
            Block::Sparse(s) => s.to_dense(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        match self {
            Block::Dense(m) => m[(r, c)],
            Block::Sparse(s) => s.get(r, c),
        }
    }

    /// Calls `f(row, col, value)` for every stored entry that is nonzero.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, usize, c64)) {
        match self {
            Block::Dense(m) => {
                for c in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        let v = m[(r, c)];
                        if v != ZERO {
                            f(r, c, v);
                        }
                    }
                }
            }
            Block::Sparse(s) => s.iter().for_each(|(r, c, v)| {
                if v != ZERO {
                    f(r, c, v)
                }
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Block::Dense(m) => linalg::max_abs(m.as_ref()),
            Block::Sparse(s) => s.val.iter().fold(0.0f64, |a, v| a.max(v.norm())),
        }
    }

    pub fn frob2(&self) -> f64 {
        match self {
            Block::Dense(m) => {
                let n = m.norm_l2();
                n * n
            }
            Block::Sparse(s) => s.val.iter().map(|v| v.norm_sqr()).sum(),
        }
    }

    pub fn trace(&self) -> c64 {
        let n = self.nrows().min(self.ncols());
        match self {
            Block::Dense(m) => (0..n).fold(ZERO, |s, i| s + m[(i, i)]),
            Block::Sparse(s) => s.iter().filter(|(r, c, _)| r == c).fold(ZERO, |a, (_, _, v)| a + v),
        }
    }

    pub fn scale(&self, a: c64) -> Block {
        match self {
            Block::Dense(m) => Block::Dense(Mat::from_fn(m.nrows(), m.ncols(), |i, j| a * m[(i, j)])),
            Block::Sparse(s) => {
                let mut s = s.clone();
                s.val.iter_mut().for_each(|v| *v *= a);
                s.prune();
                Block::Sparse(s)
            }
        }
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, other: &Block, a: c64) -> Block {
        match (self, other) {
            (Block::Sparse(x), Block::Sparse(y)) => {
                let t = x
                    .iter()
                    .map(|(r, c, v)| (r as u32, c as u32, v))
                    .chain(y.iter().map(|(r, c, v)| (r as u32, c as u32, a * v)))
                    .collect();
                Block::Sparse(Csr::from_triplets(x.nrows, x.ncols, t))
            }
            _ => {
                let mut m = self.to_dense();
                match other {
                    Block::Dense(y) => {
                        for j in 0..m.ncols() {
                            for i in 0..m.nrows() {
                                m[(i, j)] += a * y[(i, j)];
                            }
                        }
                    }
                    Block::Sparse(y) => {
                        for (r, c, v) in y.iter() {
                            m[(r, c)] += a * v;
                        }
                    }
                }
                Block::Dense(m)
            }
        }
    }

    pub fn mul(&self, other: &Block) -> Block {
        match (self, other) {
            (Block::Dense(a), Block::Dense(b)) => Block::Dense(a * b),
            (Block::Sparse(a), Block::Sparse(b)) => Block::Sparse(a.mul(b)),
            (Block::Dense(a), Block::Sparse(b)) => Block::Dense(a * b.to_dense()),
            (Block::Sparse(a), Block::Dense(b)) => Block::Dense(a.to_dense() * b),
        }
    }

    pub fn adjoint(&self) -> Block {
        match self {
            Block::Dense(m) => Block::Dense(m.adjoint().to_owned()),
            Block::Sparse(s) => Block::Sparse(s.adjoint()),
        }
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[c64], y: &mut [c64]) {
        match self {
            Block::Dense(m) => {
                y.iter_mut().for_each(|v| *v = ZERO);
                for c in 0..m.ncols() {
                    let xc = x[c];
                    if xc == ZERO {
                        continue;
                    }
                    let col = m.col(c);
                    for r in 0..m.nrows() {
                        y[r] += col[r] * xc;
                    }
                }
            }
            Block::Sparse(s) => s.matvec(x, y),
        }
    }

    /// Re-stores the block: small blocks follow `dense`, larger ones are
    /// dense when at least a fifth of the entries are nonzero.
    pub fn into_storage(self, dense: bool) -> Block {
        let (r, c) = (self.nrows(), self.ncols());
        let want = prefer_dense(r, c, dense) || 5 * self.nnz() >= r * c;
        match (self, want) {
            (Block::Sparse(s), true) => Block::Dense(s.to_dense()),
            (Block::Dense(m), false) => Block::Sparse(Csr::from_dense(&m)),
            (b, _) => b,
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Block::Dense(m) => {
                let mut n = 0;
                for j in 0..m.ncols() {
                    n += m.col(j).iter().filter(|v| **v != ZERO).count();
                }
                n
            }
            Block::Sparse(s) => s.nnz(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dense: bool) -> Block {
        Block::from_triplets(
            3,
            3,
            vec![
                (0, 1, c64::new(1.0, 2.0)),
                (2, 0, c64::new(-0.5, 0.0)),
                (1, 1, c64::new(0.0, 1.0)),
                (0, 1, c64::new(1.0, 0.0)),
            ],
            dense,
        )
    }

    #[test]
    fn sparse_and_dense_agree() {
        let (d, s) = (sample(true), sample(false));
        let prod_d = d.mul(&d.adjoint()).add_scaled(&d, c64::new(0.0, 2.0));
        let prod_s = s.mul(&s.adjoint()).add_scaled(&s, c64::new(0.0, 2.0));
        let (a, b) = (prod_d.to_dense(), prod_s.to_dense());
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[(i, j)] - b[(i, j)]).norm() < 1e-15);
            }
        }
        assert_eq!(d.get(0, 1), c64::new(2.0, 2.0));
        assert_eq!(s.get(0, 1), c64::new(2.0, 2.0));
        assert!((d.frob2() - s.frob2()).abs() < 1e-14);
        assert_eq!(d.trace(), s.trace());
    }

    #[test]
    fn cancellation_prunes_sparse_entries() {
        let s = sample(false);
        let z = s.add_scaled(&s, c64::new(-1.0, 0.0));
        assert!(z.is_zero());
        if let Block::Sparse(c) = z {
            assert_eq!(c.nnz(), 0);
        }
    }
}
