//! Exact small-matrix linear algebra over big integers and rationals.
//!
//! Everything here operates on dimensions bounded by the number of exchanged
//! intervals (d ≤ 8 in practice), so the implementations favour clarity and
//! exactness over asymptotics: Bareiss fraction-free determinants, echelon
//! forms with explicit pivoting, and Gaussian elimination over
//! `BigRational`. Floating-point enters only at the reporting boundary
//! (operator norms via scaled `f64` SVD).

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, Zero};

/// Dense big-integer matrix, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IMat {
    rows: usize,
    cols: usize,
    a: Vec<BigInt>,
}

impl IMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IMat { rows, cols, a: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        IMat { rows: r, cols: c, a: rows.into_iter().flatten().collect() }
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        IMat::from_rows(
            rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.a[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> IMat {
        let mut t = IMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IMat) -> IMat {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = IMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec_int(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    pub fn mul_vec_rat(&self, v: &[BigRational]) -> Vec<BigRational> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = BigRational::zero();
                for (a, x) in self.row(i).iter().zip(v) {
                    if !a.is_zero() {
                        acc += BigRational::from_integer(a.clone()) * x;
                    }
                }
                acc
            })
            .collect()
    }

    /// All entries strictly positive?
    pub fn is_strictly_positive(&self) -> bool {
        self.a.iter().all(|x| x.is_positive())
    }

    /// All entries non-negative?
    pub fn is_nonnegative(&self) -> bool {
        !self.a.iter().any(|x| x.is_negative())
    }

    /// Determinant by Bareiss fraction-free elimination (exact).
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut m: Vec<Vec<BigInt>> = self.row_vecs();
        let mut sign = 1i32;
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m[k][k].is_zero() {
                match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                    Some(i) => {
                        m.swap(k, i);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[k][k] * &m[i][j] - &m[i][k] * &m[k][j];
                    m[i][j] = num.div_floor(&prev);
                }
                m[i][k] = BigInt::zero();
            }
            prev = m[k][k].clone();
        }
        let d = m[n - 1][n - 1].clone();
        if sign < 0 {
            -d
        } else {
            d
        }
    }

    /// Largest bit length over all entries.
    pub fn max_bits(&self) -> u64 {
        self.a.iter().map(|x| x.bits()).max().unwrap_or(0)
    }

    /// Adjugate (transposed cofactor matrix): `A·adj(A) = det(A)·I`.
    /// Exact; intended for the small matrices of restricted cocycles.
    pub fn adjugate(&self) -> IMat {
        assert_eq!(self.rows, self.cols, "adjugate of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return IMat::zeros(0, 0);
        }
        if n == 1 {
            return IMat::identity(1);
        }
        let mut out = IMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut minor = IMat::zeros(n - 1, n - 1);
                for (mi, si) in (0..n).filter(|&r| r != i).enumerate() {
                    for (mj, sj) in (0..n).filter(|&c| c != j).enumerate() {
                        minor.set(mi, mj, self.get(si, sj).clone());
                    }
                }
                let mut c = minor.det();
                if (i + j) % 2 == 1 {
                    c = -c;
                }
                out.set(j, i, c);
            }
        }
        out
    }

    /// `(M', e)` with `self ≈ M' · 2^e` entrywise, `M'` in comfortable `f64`
    /// range. Used for operator-norm estimates of matrices whose entries can
    /// exceed `f64`.
    pub fn to_f64_scaled(&self) -> (nalgebra::DMatrix<f64>, i64) {
        let bits = self.max_bits();
        let shift: i64 = if bits > 900 { bits as i64 - 900 } else { 0 };
        let m = nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let x = self.get(i, j);
            if shift == 0 {
                bigint_to_f64(x)
            } else {
                bigint_to_f64(&(x >> shift))
            }
        });
        (m, shift)
    }

    /// Natural log of the operator 2-norm (largest singular value).
    pub fn ln_norm2(&self) -> f64 {
        let (m, e) = self.to_f64_scaled();
        let smax = m.svd(false, false).singular_values[0];
        smax.ln() + e as f64 * std::f64::consts::LN_2
    }

    /// Natural log of `max(‖A‖, ‖A⁻¹‖)` (operator 2-norms); the matrix must
    /// be square. `‖A⁻¹‖ = ‖adj A‖ / |det A|` is computed through the exact
    /// adjugate, so the result stays finite however wide the singular-value
    /// range gets (a plain scaled SVD would underflow σ_min). Singular
    /// matrices give `+∞`.
    pub fn ln_norm0(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let det = self.det();
        if det.is_zero() {
            return f64::INFINITY;
        }
        let up = self.ln_norm2();
        let down = self.adjugate().ln_norm2() - crate::scalar::ln_bigint(&det.abs());
        up.max(down)
    }

    /// `max(‖A‖, ‖A⁻¹‖)` as `f64` (may overflow to `+∞` for huge products;
    /// prefer [`IMat::ln_norm0`] in accumulating computations).
    pub fn norm0(&self) -> f64 {
        self.ln_norm0().exp()
    }

    pub fn try_to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.try_into().ok()).collect())
            .collect()
    }

    /// Integer row echelon form with positive pivots (no reduction above the
    /// pivot), zero rows dropped. Deterministic for a given input.
    pub fn echelon_rows(&self) -> Vec<Vec<BigInt>> {
        echelon(self.row_vecs(), false)
    }

    /// Canonical row Hermite normal form: positive pivots, entries above
    /// each pivot reduced into `[0, pivot)`, zero rows dropped. Two row sets
    /// span the same lattice iff their HNFs are identical.
    pub fn hnf_rows(&self) -> Vec<Vec<BigInt>> {
        echelon(self.row_vecs(), true)
    }

    /// Basis of the integer kernel lattice `{x ∈ Z^cols : A·x = 0}`, as the
    /// echelon form of the kernel rows (positive pivots). The kernel of an
    /// integer matrix is automatically saturated, so this basis also spans
    /// the rational kernel.
    pub fn kernel_basis(&self) -> Vec<Vec<BigInt>> {
        let n = self.rows; // constraints
        let m = self.cols; // variables
        // Rows of [Aᵀ | I]: integer combinations are (A·x | x), so rows of
        // the echelon form whose left block vanishes read off kernel vectors.
        let mut aug: Vec<Vec<BigInt>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut row = Vec::with_capacity(n + m);
            for i in 0..n {
                row.push(self.get(i, j).clone());
            }
            for k in 0..m {
                row.push(if k == j { BigInt::one() } else { BigInt::zero() });
            }
            aug.push(row);
        }
        let reduced = echelon(aug, false);
        let mut kernel: Vec<Vec<BigInt>> = reduced
            .into_iter()
            .filter(|row| row[..n].iter().all(|x| x.is_zero()))
            .map(|row| row[n..].to_vec())
            .collect();
        kernel = echelon(kernel, false);
        kernel
    }
}

/// Convert a big integer to `f64`; values beyond `f64` range saturate to
/// ±∞, so callers needing huge entries must pre-scale (see
/// [`IMat::to_f64_scaled`]).
pub fn bigint_to_f64(x: &BigInt) -> f64 {
    num::ToPrimitive::to_f64(x).unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Natural log of the Euclidean norm of an integer vector, overflow-safe.
pub fn ln_norm_int(v: &[BigInt]) -> f64 {
    let bits = v.iter().map(|x| x.bits()).max().unwrap_or(0);
    let shift: i64 = if bits > 500 { bits as i64 - 500 } else { 0 };
    let mut acc = 0f64;
    for x in v {
        let y = bigint_to_f64(&(x >> shift));
        acc += y * y;
    }
    0.5 * acc.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Integer row echelon form; `reduce_above` additionally produces the
/// canonical HNF. Zero rows are dropped.
fn echelon(mut rows: Vec<Vec<BigInt>>, reduce_above: bool) -> Vec<Vec<BigInt>> {
    if rows.is_empty() {
        return rows;
    }
    let cols = rows[0].len();
    let mut pivot_row = 0usize;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    for col in 0..cols {
        if pivot_row == rows.len() {
            break;
        }
        // Repeatedly reduce entries in this column below `pivot_row` by the
        // row with the smallest nonzero magnitude (a gcd cascade).
        loop {
            let mut best: Option<usize> = None;
            for (i, row) in rows.iter().enumerate().skip(pivot_row) {
                if !row[col].is_zero()
                    && best.is_none_or(|b| row[col].magnitude() < rows[b][col].magnitude())
                {
                    best = Some(i);
                }
            }
            let Some(b) = best else { break };
            rows.swap(pivot_row, b);
            if rows[pivot_row][col].is_negative() {
                for x in rows[pivot_row].iter_mut() {
                    *x = -std::mem::take(x);
                }
            }
            let mut all_zero_below = true;
            let pivot = rows[pivot_row][col].clone();
            for i in pivot_row + 1..rows.len() {
                if rows[i][col].is_zero() {
                    continue;
                }
                let q = rows[i][col].div_floor(&pivot);
                if !q.is_zero() {
                    for j in 0..cols {
                        let sub = &q * &rows[pivot_row][j];
                        rows[i][j] -= sub;
                    }
                }
                if !rows[i][col].is_zero() {
                    all_zero_below = false;
                }
            }
            if all_zero_below {
                pivots.push((pivot_row, col));
                pivot_row += 1;
                break;
            }
        }
    }
    if reduce_above {
        for &(pr, pc) in pivots.iter() {
            let pivot = rows[pr][pc].clone();
            for i in 0..pr {
                let q = rows[i][pc].div_floor(&pivot);
                if !q.is_zero() {
                    for j in 0..cols {
                        let sub = &q * &rows[pr][j];
                        rows[i][j] -= sub;
                    }
                }
            }
        }
    }
    rows.truncate(pivot_row);
    rows
}

/// Rank of a rational matrix (rows given as vectors).
pub fn rat_rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    if m.is_empty() {
        return 0;
    }
    let cols = m[0].len();
    let mut rank = 0usize;
    for col in 0..cols {
        if rank == m.len() {
            break;
        }
        let Some(p) = (rank..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].recip();
        for j in col..cols {
            let v = &m[rank][j] * &inv;
            m[rank][j] = v;
        }
        for i in 0..m.len() {
            if i != rank && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in col..cols {
                    let sub = &f * &m[rank][j];
                    m[i][j] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Solve `A·X = B` exactly where `A` (n×k, given by columns) has full column
/// rank and `B` is n×r (given by columns). Returns the k×r solution columns,
/// or `None` if the system is inconsistent or rank-deficient.
pub fn solve_exact(
    a_cols: &[Vec<BigRational>],
    b_cols: &[Vec<BigRational>],
) -> Option<Vec<Vec<BigRational>>> {
    let k = a_cols.len();
    let n = if k > 0 { a_cols[0].len() } else { b_cols.first().map_or(0, |c| c.len()) };
    let r = b_cols.len();
    // Augmented rows: [A | B].
    let mut m: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = Vec::with_capacity(k + r);
            for col in a_cols {
                row.push(col[i].clone());
            }
            for col in b_cols {
                row.push(col[i].clone());
            }
            row
        })
        .collect();
    let mut pivot_of_col: Vec<usize> = Vec::with_capacity(k);
    let mut rank = 0usize;
    for col in 0..k {
        let Some(p) = (rank..n).find(|&i| !m[i][col].is_zero()) else {
            return None; // rank-deficient
        };
        m.swap(rank, p);
        let inv = m[rank][col].recip();
        for j in col..k + r {
            let v = &m[rank][j] * &inv;
            m[rank][j] = v;
        }
        for i in 0..n {
            if i != rank && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in col..k + r {
                    let sub = &f * &m[rank][j];
                    m[i][j] -= sub;
                }
            }
        }
        pivot_of_col.push(rank);
        rank += 1;
    }
    // Consistency: rows beyond the rank must have vanished entirely.
    for row in m.iter().skip(rank) {
        if row[k..].iter().any(|x| !x.is_zero()) {
            return None;
        }
    }
    let mut x_cols = vec![vec![BigRational::zero(); k]; r];
    for (col, &prow) in pivot_of_col.iter().enumerate() {
        for (rc, x_col) in x_cols.iter_mut().enumerate() {
            x_col[col] = m[prow][k + rc].clone();
        }
    }
    Some(x_cols)
}

/// Orthogonal projection (standard inner product) of `v` onto the span of
/// `rows`, computed exactly. The rows need not be independent.
pub fn project_onto_span(rows: &[Vec<BigRational>], v: &[BigRational]) -> Vec<BigRational> {
    // Extract an independent subset first so the Gram matrix is invertible.
    let mut basis: Vec<Vec<BigRational>> = Vec::new();
    for row in rows {
        let mut candidate = basis.clone();
        candidate.push(row.clone());
        if rat_rank(&candidate) > basis.len() {
            basis.push(row.clone());
        }
    }
    if basis.is_empty() {
        return vec![BigRational::zero(); v.len()];
    }
    let k = basis.len();
    let gram_cols: Vec<Vec<BigRational>> = (0..k)
        .map(|j| (0..k).map(|i| dot_rat(&basis[i], &basis[j])).collect())
        .collect();
    let rhs: Vec<BigRational> = basis.iter().map(|b| dot_rat(b, v)).collect();
    let c = solve_exact(&gram_cols, &[rhs]).expect("Gram matrix of independent rows is invertible");
    let mut out = vec![BigRational::zero(); v.len()];
    for (ci, b) in c[0].iter().zip(&basis) {
        for (o, bj) in out.iter_mut().zip(b) {
            *o += ci * bj;
        }
    }
    out
}

pub fn dot_rat(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_int(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let m = IMat::from_i64_rows(&[vec![2, 3, 1], vec![4, 1, -3], vec![-2, 2, 5]]);
        // 2(5+6) - 3(20-6) + 1(8+2) = 22 - 42 + 10
        assert_eq!(m.det(), BigInt::from(-10));
        assert_eq!(IMat::identity(5).det(), BigInt::one());
    }

    #[test]
    fn kernel_of_annihilator_row() {
        let m = IMat::from_i64_rows(&[vec![1, -1, 1]]);
        let k = m.kernel_basis();
        assert_eq!(
            k,
            vec![
                vec![BigInt::from(1), BigInt::from(1), BigInt::from(0)],
                vec![BigInt::from(0), BigInt::from(1), BigInt::from(1)],
            ]
        );
        for v in &k {
            assert!(m.mul_vec_int(v).iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn kernel_is_saturated() {
        // Kernel of [2 4] over Z is generated by (2, -1), not (4, -2).
        let m = IMat::from_i64_rows(&[vec![2, 4]]);
        let k = m.kernel_basis();
        assert_eq!(k, vec![vec![BigInt::from(2), BigInt::from(-1)]]);
    }

    #[test]
    fn hnf_identifies_equal_lattices() {
        let a = IMat::from_i64_rows(&[vec![1, 1, 0], vec![0, 1, 1]]);
        let b = IMat::from_i64_rows(&[vec![1, 0, -1], vec![0, 1, 1]]);
        assert_eq!(a.hnf_rows(), b.hnf_rows());
        let c = IMat::from_i64_rows(&[vec![1, 0, 0], vec![0, 1, 1]]);
        assert_ne!(a.hnf_rows(), c.hnf_rows());
    }

    #[test]
    fn solve_exact_recovers_solution() {
        // A = [[1,2],[3,4],[5,6]] (full column rank), X = [[1/2],[1/3]].
        let a_cols = vec![vec![q(1, 1), q(3, 1), q(5, 1)], vec![q(2, 1), q(4, 1), q(6, 1)]];
        let x = vec![q(1, 2), q(1, 3)];
        let b: Vec<BigRational> = (0..3)
            .map(|i| &a_cols[0][i] * &x[0] + &a_cols[1][i] * &x[1])
            .collect();
        let sol = solve_exact(&a_cols, &[b]).unwrap();
        assert_eq!(sol[0], x);
        // Inconsistent RHS is rejected.
        let bad = vec![q(1, 1), q(0, 1), q(0, 1)];
        assert!(solve_exact(&a_cols, &[bad]).is_none());
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        let rows = vec![vec![q(1, 1), q(-1, 1), q(1, 1)]];
        let h = vec![q(1, 1), q(1, 1), q(1, 1)];
        let p = project_onto_span(&rows, &h);
        assert_eq!(p, vec![q(1, 3), q(-1, 3), q(1, 3)]);
        let residual: Vec<BigRational> = h.iter().zip(&p).map(|(a, b)| a - b).collect();
        assert!(dot_rat(&residual, &rows[0]).is_zero());
        let pp = project_onto_span(&rows, &p);
        assert_eq!(pp, p);
    }

    #[test]
    fn scaled_norms_track_huge_entries() {
        let huge = BigInt::from(3u32).pow(2000);
        let m = IMat::from_rows(vec![
            vec![huge.clone(), BigInt::zero()],
            vec![BigInt::zero(), BigInt::one()],
        ]);
        let expected = 2000.0 * 3f64.ln();
        assert!((m.ln_norm2() - expected).abs() < 1e-6 * expected);
        assert!((m.ln_norm0() - expected).abs() < 1e-6 * expected);
    }
}
