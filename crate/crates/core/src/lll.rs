//! Exact integral LLL reduction driven by a Gram matrix.
//!
//! Works entirely with integers: the Gram–Schmidt data is kept as the
//! integral quantities `d_i` (leading Gram minors) and `λ_ij = d_j μ_ij`, so
//! no rationals or floating point appear. The reduction condition uses
//! `δ = p/q`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type IntMatrix = Vec<Vec<BigInt>>;

#[derive(Clone, Debug)]
pub struct LllParams {
    pub delta_num: i64,
    pub delta_den: i64,
}

impl Default for LllParams {
    fn default() -> Self {
        LllParams { delta_num: 99, delta_den: 100 }
    }
}

/// Result of a Gram-driven reduction: row `i` of `transform` gives the
/// reduced vector `i` as an integer combination of the input basis.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub transform: IntMatrix,
    pub gram: IntMatrix,
}

fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    // nearest integer to a/b for b > 0, halves rounded up
    (a * BigInt::from(2) + b).div_floor(&(b * BigInt::from(2)))
}

struct State {
    n: usize,
    g: IntMatrix,
    h: IntMatrix,
    // 1-based: d[0] = 1, d[i] for i in 1..=n
    d: Vec<BigInt>,
    // lam[k][j] for j < k, 1-based
    lam: Vec<Vec<BigInt>>,
}

impl State {
    fn gram(&self, i: usize, j: usize) -> &BigInt {
        &self.g[i - 1][j - 1]
    }

    /// `b_k ← b_k − c·b_l`.
    fn sub_row(&mut self, k: usize, l: usize, c: &BigInt) {
        let (k0, l0) = (k - 1, l - 1);
        for col in 0..self.n {
            let t = &self.h[l0][col] * c;
            self.h[k0][col] -= t;
        }
        let gkl = self.g[k0][l0].clone();
        let gll = self.g[l0][l0].clone();
        for j in 0..self.n {
            if j != k0 {
                let t = &self.g[l0][j] * c;
                self.g[k0][j] -= t;
                self.g[j][k0] = self.g[k0][j].clone();
            }
        }
        let gkk = &self.g[k0][k0] - &gkl * c * 2 + &gll * c * c;
        self.g[k0][k0] = gkk;
    }

    fn red(&mut self, k: usize, l: usize) {
        let two_lam = (&self.lam[k][l] * BigInt::from(2)).abs();
        if two_lam <= self.d[l] {
            return;
        }
        let c = round_div(&self.lam[k][l], &self.d[l]);
        self.sub_row(k, l, &c);
        let dl = self.d[l].clone();
        self.lam[k][l] -= &c * &dl;
        for i in 1..l {
            let t = &c * &self.lam[l][i];
            self.lam[k][i] -= t;
        }
    }

    fn swap(&mut self, k: usize, kmax: usize) {
        self.h.swap(k - 1, k - 2);
        self.g.swap(k - 1, k - 2);
        for row in self.g.iter_mut() {
            row.swap(k - 1, k - 2);
        }
        for j in 1..k - 1 {
            let t = self.lam[k][j].clone();
            self.lam[k][j] = self.lam[k - 1][j].clone();
            self.lam[k - 1][j] = t;
        }
        let lam = self.lam[k][k - 1].clone();
        let b = (&self.d[k - 2] * &self.d[k] + &lam * &lam) / &self.d[k - 1];
        for i in k + 1..=kmax {
            let t = self.lam[i][k].clone();
            self.lam[i][k] = (&self.d[k] * &self.lam[i][k - 1] - &lam * &t) / &self.d[k - 1];
            self.lam[i][k - 1] = (&b * &t + &lam * &self.lam[i][k]) / &self.d[k];
        }
        self.d[k - 1] = b;
    }
}

/// LLL-reduces the lattice with positive definite integral Gram matrix `g`.
pub fn lll_gram(g: &IntMatrix, params: &LllParams) -> Result<Reduced> {
    let n = g.len();
    let mut st = State {
        n,
        g: g.clone(),
        h: (0..n)
            .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
            .collect(),
        d: vec![BigInt::zero(); n + 1],
        lam: vec![vec![BigInt::zero(); n + 1]; n + 1],
    };
    st.d[0] = BigInt::one();
    if n == 0 {
        return Ok(Reduced { transform: st.h, gram: st.g });
    }
    st.d[1] = st.gram(1, 1).clone();
    if !st.d[1].is_positive() {
        return Err(Error::RankDeficient);
    }
    let p = BigInt::from(params.delta_num);
    let q = BigInt::from(params.delta_den);
    let mut k = 2;
    let mut kmax = 1;
    while k <= n {
        if k > kmax {
            kmax = k;
            for j in 1..=k {
                let mut u = st.gram(k, j).clone();
                for i in 1..j {
                    u = (&st.d[i] * &u - &st.lam[k][i] * &st.lam[j][i]) / &st.d[i - 1];
                }
                if j < k {
                    st.lam[k][j] = u;
                } else {
                    if !u.is_positive() {
                        return Err(Error::RankDeficient);
                    }
                    st.d[k] = u;
                }
            }
        }
        st.red(k, k - 1);
        let lhs = &q * &st.d[k] * &st.d[k - 2];
        let rhs = &p * &st.d[k - 1] * &st.d[k - 1] - &q * &st.lam[k][k - 1] * &st.lam[k][k - 1];
        if lhs < rhs {
            st.swap(k, kmax);
            k = (k - 1).max(2);
        } else {
            for l in (1..k - 1).rev() {
                st.red(k, l);
            }
            k += 1;
        }
    }
    Ok(Reduced { transform: st.h, gram: st.g })
}

pub fn gram_of(rows: &IntMatrix) -> IntMatrix {
    let n = rows.len();
    let mut g = vec![vec![BigInt::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let s: BigInt = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            g[i][j] = s.clone();
            g[j][i] = s;
        }
    }
    g
}

pub fn apply(transform: &IntMatrix, rows: &IntMatrix) -> IntMatrix {
    transform
        .iter()
        .map(|t| {
            (0..rows[0].len())
                .map(|c| t.iter().zip(rows).map(|(a, r)| a * &r[c]).sum())
                .collect()
        })
        .collect()
}

/// LLL-reduces linearly independent integer row vectors.
pub fn lll_rows(rows: &IntMatrix, params: &LllParams) -> Result<IntMatrix> {
    if rows.is_empty() {
        return Ok(Vec::new());
    }
    let r = lll_gram(&gram_of(rows), params)?;
    Ok(apply(&r.transform, rows))
}

/// A reduced basis of the integer kernel `{x ∈ Z^n : A x = 0}`, found by
/// reducing the lattice of rows `(e_i, C·A e_i)` with a heavy weight `C`:
/// kernel vectors are exactly the ones with vanishing second block.
pub fn integer_kernel(a: &IntMatrix, n: usize, params: &LllParams) -> Result<IntMatrix> {
    let m = a.len();
    if m == 0 {
        let id: IntMatrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
            .collect();
        return Ok(id);
    }
    let rank = int_rank(a, n);
    let want = n - rank;
    if want == 0 {
        return Ok(Vec::new());
    }
    let amax: u64 = a.iter().flatten().map(|x| x.bits()).max().unwrap_or(1);
    let mut shift = (n as u64) * (amax + 2) + 16;
    loop {
        let c = BigInt::one() << shift;
        let c2 = &c * &c;
        // Gram: I + C² AᵀA
        let mut g = vec![vec![BigInt::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let s: BigInt = (0..m).map(|r| &a[r][i] * &a[r][j]).sum();
                let mut v = &s * &c2;
                if i == j {
                    v += 1;
                }
                g[i][j] = v.clone();
                g[j][i] = v;
            }
        }
        let red = lll_gram(&g, params)?;
        let ker: IntMatrix = red
            .transform
            .iter()
            .filter(|h| (0..m).all(|r| a[r].iter().zip(h.iter()).map(|(x, y)| x * y).sum::<BigInt>().is_zero()))
            .cloned()
            .collect();
        if ker.len() == want {
            return lll_rows(&ker, params);
        }
        shift *= 2;
    }
}

/// Rank of an integer matrix by fraction-free elimination.
pub fn int_rank(a: &IntMatrix, n: usize) -> usize {
    let mut m: IntMatrix = a.to_vec();
    let mut rank = 0;
    let mut prev = BigInt::one();
    for col in 0..n {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else { continue };
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            for c in col + 1..n {
                let v = (&m[rank][col] * &m[r][c] - &m[r][col] * &m[rank][c]) / &prev;
                m[r][c] = v;
            }
            m[r][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}
