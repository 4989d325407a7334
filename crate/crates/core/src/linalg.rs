//! Exact vectors, matrices and subspaces over a tower field.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::arith::Q;
use crate::error::{Error, Result};
use crate::tower::{Elem, Tower};

pub type Vector = Vec<Elem>;

/// The smallest tower containing every element, which must all lie in one
/// chain of towers.
pub fn common_tower<'a>(base: &Arc<Tower>, elems: impl IntoIterator<Item = &'a Elem>) -> Arc<Tower> {
    let mut t = base.clone();
    for e in elems {
        if !Arc::ptr_eq(&t, e.tower()) {
            t = Tower::common(&t, e.tower()).expect("elements from incompatible towers");
        }
    }
    t
}

pub fn lift_vec(v: &[Elem], t: &Arc<Tower>) -> Vector {
    v.iter().map(|x| x.lift(t)).collect()
}

pub fn vec_from_q(t: &Arc<Tower>, v: &[Q]) -> Vector {
    v.iter().map(|x| Elem::from_q(t, x)).collect()
}

pub fn vec_from_ints(t: &Arc<Tower>, v: &[i64]) -> Vector {
    v.iter().map(|&x| Elem::from_int(t, x)).collect()
}

pub fn unit(t: &Arc<Tower>, n: usize, i: usize) -> Vector {
    (0..n).map(|j| if i == j { Elem::one(t) } else { Elem::zero(t) }).collect()
}

pub fn zero_vec(t: &Arc<Tower>, n: usize) -> Vector {
    vec![Elem::zero(t); n]
}

pub fn is_zero_vec(v: &[Elem]) -> bool {
    v.iter().all(Elem::is_zero)
}

pub fn vadd(a: &[Elem], b: &[Elem]) -> Vector {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn vsub(a: &[Elem], b: &[Elem]) -> Vector {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn vscale(a: &[Elem], c: &Elem) -> Vector {
    a.iter().map(|x| x * c).collect()
}

pub fn vscale_q(a: &[Elem], c: &Q) -> Vector {
    a.iter().map(|x| x.scale(c)).collect()
}

pub fn vneg(a: &[Elem]) -> Vector {
    a.iter().map(|x| -x).collect()
}

pub fn dot(a: &[Elem], b: &[Elem]) -> Elem {
    assert_eq!(a.len(), b.len());
    let t = common_tower(a[0].tower(), a.iter().chain(b));
    let mut acc = Elem::zero(&t);
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc = &acc + &(x * y);
        }
    }
    acc
}

/// Divides by the first nonzero coordinate.
pub fn normalize_first(v: &[Elem]) -> Result<Vector> {
    let p = v.iter().find(|x| !x.is_zero()).ok_or(Error::ZeroVector)?;
    let inv = p.invert()?;
    Ok(v.iter().map(|x| x * &inv).collect())
}

pub fn vec_to_string(v: &[Elem]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

/// A dense row-major matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = (0..self.rows).map(|i| vec_to_string(&self.row(i))).collect();
        write!(f, "[{}]", rows.join(", "))
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Elem>) -> Matrix {
        assert_eq!(data.len(), rows * cols);
        assert!(!data.is_empty(), "empty matrix");
        let t = common_tower(data[0].tower(), &data);
        let data = data.iter().map(|x| x.lift(&t)).collect();
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vector]) -> Matrix {
        let cols = rows[0].len();
        Matrix::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().cloned()).collect())
    }

    pub fn from_cols(cols: &[Vector]) -> Matrix {
        Matrix::from_rows(cols).transpose()
    }

    pub fn from_q(t: &Arc<Tower>, rows: &[Vec<Q>]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| vec_from_q(t, r)).collect::<Vec<_>>())
    }

    pub fn zeros(t: &Arc<Tower>, rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![Elem::zero(t); rows * cols] }
    }

    pub fn identity(t: &Arc<Tower>, n: usize) -> Matrix {
        let mut m = Matrix::zeros(t, n, n);
        for i in 0..n {
            m.set(i, i, Elem::one(t));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tower(&self) -> &Arc<Tower> {
        self.data[0].tower()
    }

    pub fn get(&self, i: usize, j: usize) -> &Elem {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Elem) {
        let c = Tower::common(self.tower(), v.tower()).expect("entry from an incompatible tower");
        if !Arc::ptr_eq(&c, self.tower()) {
            *self = self.lift(&c);
        }
        self.data[i * self.cols + j] = v.lift(&c);
    }

    pub fn entries(&self) -> &[Elem] {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vector {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row_vectors(&self) -> Vec<Vector> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn col_vectors(&self) -> Vec<Vector> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn lift(&self, t: &Arc<Tower>) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x.lift(t)).collect() }
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data }
    }

    pub fn mul(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.cols, o.rows, "matrix dimension mismatch");
        let t = common_tower(self.tower(), o.data.iter().take(1));
        let mut data = Vec::with_capacity(self.rows * o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut acc = Elem::zero(&t);
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = o.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                data.push(acc);
            }
        }
        Matrix::new(self.rows, o.cols, data)
    }

    pub fn mul_vec(&self, v: &[Elem]) -> Vector {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(&self.row(i), v)).collect()
    }

    pub fn add(&self, o: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix::new(self.rows, self.cols, self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Matrix::new(self.rows, self.cols, self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| -x).collect() }
    }

    pub fn scale(&self, c: &Elem) -> Matrix {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|x| x * c).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Elem::is_zero)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn det(&self) -> Result<Elem> {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut m: Vec<Vector> = self.row_vectors();
        let mut det = Elem::one(self.tower());
        for c in 0..n {
            let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
                return Ok(Elem::zero(self.tower()));
            };
            if p != c {
                m.swap(p, c);
                det = -det;
            }
            let pivot = m[c][c].clone();
            det = &det * &pivot;
            let inv = pivot.invert()?;
            for r in c + 1..n {
                if m[r][c].is_zero() {
                    continue;
                }
                let f = &m[r][c] * &inv;
                for k in c..n {
                    let v = &m[r][k] - &(&f * &m[c][k]);
                    m[r][k] = v;
                }
            }
        }
        Ok(det)
    }

    pub fn rank(&self) -> Result<usize> {
        Ok(rref(self.row_vectors())?.1.len())
    }
}

/// Reduced row echelon form: returns the nonzero rows and their pivot columns.
pub fn rref(mut rows: Vec<Vector>) -> Result<(Vec<Vector>, Vec<usize>)> {
    if rows.is_empty() {
        return Ok((rows, Vec::new()));
    }
    let ncols = rows[0].len();
    let t = common_tower(rows[0][0].tower(), rows.iter().flatten());
    for r in &mut rows {
        for x in r.iter_mut() {
            *x = x.lift(&t);
        }
    }
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(p, r);
        let inv = rows[r][c].invert()?;
        let pr: Vector = rows[r].iter().map(|x| x * &inv).collect();
        rows[r] = pr;
        for i in 0..rows.len() {
            if i == r || rows[i][c].is_zero() {
                continue;
            }
            let f = rows[i][c].clone();
            let new: Vector = rows[i].iter().zip(&rows[r]).map(|(a, b)| a - &(&f * b)).collect();
            rows[i] = new;
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    Ok((rows, pivots))
}

/// A subspace of `K^n` stored by the reduced row echelon form of a basis.
#[derive(Clone)]
pub struct Subspace {
    n: usize,
    tower: Arc<Tower>,
    basis: Vec<Vector>,
    pivots: Vec<usize>,
    grass: Arc<OnceLock<Vector>>,
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b: Vec<String> = self.basis.iter().map(|v| vec_to_string(v)).collect();
        write!(f, "span{{{}}}", b.join(", "))
    }
}

impl PartialEq for Subspace {
    fn eq(&self, o: &Subspace) -> bool {
        self.n == o.n && self.pivots == o.pivots && self.basis == o.basis
    }
}

impl Eq for Subspace {}

impl Subspace {
    pub fn span(tower: &Arc<Tower>, n: usize, vectors: &[Vector]) -> Result<Subspace> {
        for v in vectors {
            if v.len() != n {
                return Err(Error::AmbientMismatch(n, v.len()));
            }
        }
        let t = common_tower(tower, vectors.iter().flatten());
        let (basis, pivots) = rref(vectors.to_vec())?;
        Ok(Subspace { n, tower: t, basis, pivots, grass: Arc::new(OnceLock::new()) })
    }

    pub fn full(tower: &Arc<Tower>, n: usize) -> Subspace {
        let basis = (0..n).map(|i| unit(tower, n, i)).collect();
        Subspace { n, tower: tower.clone(), basis, pivots: (0..n).collect(), grass: Arc::new(OnceLock::new()) }
    }

    pub fn zero(tower: &Arc<Tower>, n: usize) -> Subspace {
        Subspace { n, tower: tower.clone(), basis: Vec::new(), pivots: Vec::new(), grass: Arc::new(OnceLock::new()) }
    }

    pub fn ambient(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn tower(&self) -> &Arc<Tower> {
        &self.tower
    }

    /// Canonical basis: reduced echelon rows with pivot entries 1.
    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Basis vectors as the columns of an `n x dim` matrix.
    pub fn basis_matrix(&self) -> Matrix {
        Matrix::from_cols(&self.basis)
    }

    pub fn lift(&self, t: &Arc<Tower>) -> Subspace {
        Subspace {
            n: self.n,
            tower: t.clone(),
            basis: self.basis.iter().map(|v| lift_vec(v, t)).collect(),
            pivots: self.pivots.clone(),
            grass: Arc::new(OnceLock::new()),
        }
    }

    pub fn contains(&self, x: &[Elem]) -> bool {
        if x.len() != self.n {
            return false;
        }
        let mut r: Vector = x.to_vec();
        for (b, &p) in self.basis.iter().zip(&self.pivots) {
            if r[p].is_zero() {
                continue;
            }
            let c = r[p].clone();
            r = r.iter().zip(b).map(|(a, bb)| a - &(&c * bb)).collect();
        }
        is_zero_vec(&r)
    }

    pub fn contains_subspace(&self, o: &Subspace) -> bool {
        o.basis.iter().all(|v| self.contains(v))
    }

    /// Linear equations cutting out the subspace: a basis of its annihilator.
    pub fn equations(&self) -> Result<Subspace> {
        if self.basis.is_empty() {
            return Ok(Subspace::full(&self.tower, self.n));
        }
        kernel(&Matrix::from_rows(&self.basis))
    }

    /// Cached Grassmann coordinates of the canonical basis.
    pub fn grassmann(&self) -> Result<&Vector> {
        if let Some(g) = self.grass.get() {
            return Ok(g);
        }
        if self.basis.is_empty() {
            return Err(Error::ZeroSubspace);
        }
        let g = grassmann(&self.basis)?;
        Ok(self.grass.get_or_init(|| g))
    }

    pub fn sum(&self, o: &Subspace) -> Result<Subspace> {
        if self.n != o.n {
            return Err(Error::AmbientMismatch(self.n, o.n));
        }
        let mut v = self.basis.clone();
        v.extend(o.basis.iter().cloned());
        let t = common_tower(&self.tower, o.basis.iter().flatten());
        Subspace::span(&t, self.n, &v)
    }
}

/// Right null space of `a`.
pub fn kernel(a: &Matrix) -> Result<Subspace> {
    let n = a.cols();
    let (rows, pivots) = rref(a.row_vectors())?;
    let t = common_tower(a.tower(), rows.iter().flatten());
    let mut basis = Vec::new();
    for f in (0..n).filter(|c| !pivots.contains(c)) {
        let mut v = zero_vec(&t, n);
        v[f] = Elem::one(&t);
        for (row, &p) in rows.iter().zip(&pivots) {
            v[p] = -&row[f];
        }
        basis.push(v);
    }
    Subspace::span(&t, n, &basis)
}

pub fn intersect(u: &Subspace, v: &Subspace) -> Result<Subspace> {
    if u.n != v.n {
        return Err(Error::AmbientMismatch(u.n, v.n));
    }
    if u.is_zero() || v.is_zero() {
        return Ok(Subspace::zero(&common_tower(&u.tower, v.basis.iter().flatten()), u.n));
    }
    let mut eqs = u.equations()?.basis.clone();
    eqs.extend(v.equations()?.basis.iter().cloned());
    if eqs.is_empty() {
        return Ok(Subspace::full(&common_tower(&u.tower, v.basis.iter().flatten()), u.n));
    }
    kernel(&Matrix::from_rows(&eqs))
}

/// `{y in Z : y^t M = 0}`.
pub fn constrained_kernel(z: &Subspace, m: &Matrix) -> Result<Subspace> {
    if m.rows() != z.ambient() {
        return Err(Error::AmbientMismatch(z.ambient(), m.rows()));
    }
    intersect(z, &kernel(&m.transpose())?)
}

/// All maximal minors of the `n x l` matrix whose columns are `cols`, in
/// lexicographic order of row subsets. Minors are built column by column by
/// Laplace expansion along the last column, memoized on row subsets.
pub fn grassmann(cols: &[Vector]) -> Result<Vector> {
    let l = cols.len();
    if l == 0 {
        return Err(Error::ZeroSubspace);
    }
    let n = cols[0].len();
    assert!(n <= 63, "ambient dimension too large for Grassmann coordinates");
    let t = common_tower(cols[0][0].tower(), cols.iter().flatten());
    // level k: minors of the first k columns keyed by row bitmask with k bits
    let mut prev: HashMap<u64, Elem> = HashMap::new();
    prev.insert(0, Elem::one(&t));
    for k in 1..=l {
        let mut cur: HashMap<u64, Elem> = HashMap::new();
        for mask in subsets(n, k) {
            let mut acc = Elem::zero(&t);
            for (pos, i) in bits(mask).enumerate() {
                let x = &cols[k - 1][i];
                if x.is_zero() {
                    continue;
                }
                let Some(sub) = prev.get(&(mask & !(1u64 << i))) else { continue };
                if sub.is_zero() {
                    continue;
                }
                let term = x * sub;
                if (pos + k - 1) % 2 == 0 {
                    acc = &acc + &term;
                } else {
                    acc = &acc - &term;
                }
            }
            cur.insert(mask, acc);
        }
        prev = cur;
    }
    let out: Vector = subsets(n, l).map(|m| prev[&m].clone()).collect();
    if is_zero_vec(&out) {
        return Err(Error::RankDeficient);
    }
    Ok(out)
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

/// `k`-subsets of `0..n` as bitmasks, lexicographic in the sorted element list.
pub fn subsets(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k <= n {
        loop {
            out.push(idx.iter().fold(0u64, |m, &i| m | 1 << i));
            let Some(p) = (0..k).rev().find(|&p| idx[p] < n - k + p) else { break };
            idx[p] += 1;
            for q in p + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out.into_iter()
}

/// Whether two nonzero vectors are proportional.
pub fn projectively_equal(a: &[Elem], b: &[Elem]) -> bool {
    match (normalize_first(a), normalize_first(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{q, qi};
    use crate::tower::adjoin_sqrt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rt() -> Arc<Tower> {
        Tower::rational()
    }

    #[test]
    fn kernel_examples() {
        let t = rt();
        let k = kernel(&Matrix::from_rows(&[vec_from_ints(&t, &[1, 1, 1])])).unwrap();
        assert_eq!(k.dim(), 2);
        assert!(k.contains(&vec_from_ints(&t, &[1, -1, 0])));
        assert!(kernel(&Matrix::identity(&t, 3)).unwrap().is_zero());

        let (t2, g) = adjoin_sqrt(&t, &Elem::from_int(&t, 2)).unwrap();
        let k = kernel(&Matrix::from_rows(&[vec![Elem::one(&t2), g.clone()]])).unwrap();
        assert_eq!(k.dim(), 1);
        assert!(k.contains(&[-&g, Elem::one(&t2)]));
    }

    #[test]
    fn intersect_examples() {
        let t = rt();
        let u = Subspace::span(&t, 3, &[unit(&t, 3, 0), unit(&t, 3, 1)]).unwrap();
        let v = Subspace::span(&t, 3, &[unit(&t, 3, 1), unit(&t, 3, 2)]).unwrap();
        let w = intersect(&u, &v).unwrap();
        assert_eq!(w, Subspace::span(&t, 3, &[unit(&t, 3, 1)]).unwrap());
        assert_eq!(intersect(&u, &u).unwrap(), u);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut r = || vec_from_ints(&t, &(0..4).map(|_| rng.gen_range(-5..=5)).collect::<Vec<_>>());
        let a = Subspace::span(&t, 4, &[r(), r()]).unwrap();
        let b = Subspace::span(&t, 4, &[r(), r()]).unwrap();
        assert!(intersect(&a, &b).unwrap().is_zero());
        assert!(matches!(intersect(&a, &Subspace::full(&t, 3)), Err(Error::AmbientMismatch(4, 3))));
    }

    #[test]
    fn grassmann_examples() {
        let t = rt();
        let x = vec![vec_from_ints(&t, &[1, 0, 1]), vec_from_ints(&t, &[0, 1, 0])];
        assert_eq!(grassmann(&x).unwrap(), vec_from_ints(&t, &[1, 0, -1]));
        let sq = vec![vec_from_ints(&t, &[2, 1]), vec_from_ints(&t, &[1, 3])];
        assert_eq!(grassmann(&sq).unwrap(), vec![Elem::from_int(&t, 5)]);
        let swapped = vec![x[1].clone(), x[0].clone()];
        assert_eq!(grassmann(&swapped).unwrap(), vneg(&grassmann(&x).unwrap()));
        let dep = vec![vec_from_ints(&t, &[1, 2, 3]), vec_from_ints(&t, &[2, 4, 6])];
        assert!(matches!(grassmann(&dep), Err(Error::RankDeficient)));
    }

    #[test]
    fn constrained_kernel_examples() {
        let t = rt();
        let h = Matrix::from_q(
            &t,
            &[
                vec![qi(0), q(1, 2), qi(0), qi(0)],
                vec![q(1, 2), qi(0), qi(0), qi(0)],
                vec![qi(0), qi(0), qi(0), q(1, 2)],
                vec![qi(0), qi(0), q(1, 2), qi(0)],
            ],
        );
        let z = Subspace::full(&t, 4);
        let m = Matrix::from_cols(&[h.mul_vec(&unit(&t, 4, 0))]);
        let w = constrained_kernel(&z, &m).unwrap();
        let want = Subspace::span(&t, 4, &[unit(&t, 4, 0), unit(&t, 4, 2), unit(&t, 4, 3)]).unwrap();
        assert_eq!(w, want);
        assert_eq!(constrained_kernel(&z, &Matrix::zeros(&t, 4, 2)).unwrap(), z);
        assert!(constrained_kernel(&z, &Matrix::identity(&t, 4)).unwrap().is_zero());
    }

    #[test]
    fn contains_examples() {
        let t = rt();
        let u = Subspace::span(&t, 3, &[unit(&t, 3, 0), unit(&t, 3, 1)]).unwrap();
        assert!(u.contains(&unit(&t, 3, 0)));
        assert!(!u.contains(&unit(&t, 3, 2)));
        let l = Subspace::span(&t, 2, &[vec_from_ints(&t, &[2, 2])]).unwrap();
        assert!(l.contains(&vec_from_ints(&t, &[1, 1])));
    }

    #[test]
    fn det_and_rank() {
        let t = rt();
        let m = Matrix::from_rows(&[vec_from_ints(&t, &[0, 2]), vec_from_ints(&t, &[3, 1])]);
        assert_eq!(m.det().unwrap(), Elem::from_int(&t, -6));
        assert_eq!(m.rank().unwrap(), 2);
    }
}
