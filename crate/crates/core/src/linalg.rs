//! Dense complex matrices and the matrix-exponential machinery built on them.
//!
//! Everything downstream (Liouvillians, propagators, gradients) is expressed
//! with [`ComplexMatrix`]. Matrices are small (at most a few hundred rows), so
//! storage is always dense.
//!
//! The exponential uses scaling and squaring with diagonal Padé approximants
//! of degree 3, 5, 7, 9 or 13 (Higham 2005). Before that, the matrix is split
//! into the connected components of its sparsity graph: a matrix that is
//! block diagonal up to a permutation is exponentiated block by block. This is
//! exact and turns the Liouvillians of purely dissipative generators (one
//! population block plus decoupled coherences) into a handful of tiny problems.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use ndarray::{s, Array2};
use num_complex::Complex64;

use crate::error::{QsnnError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense complex matrix with finite entries and non-zero dimensions.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(Array2<C64>);

impl ComplexMatrix {
    /// Wraps an array after checking dimensions and finiteness.
    pub fn from_array(a: Array2<C64>) -> Result<Self> {
        let (rows, cols) = a.dim();
        if rows == 0 || cols == 0 {
            return Err(QsnnError::EmptyMatrix { rows, cols });
        }
        if let Some(((row, col), _)) = a
            .indexed_iter()
            .find(|(_, z)| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(QsnnError::NonFinite { row, col });
        }
        Ok(ComplexMatrix(a))
    }

    /// Row-major construction, mostly for tests and literals.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(QsnnError::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        let a = Array2::from_shape_vec((r, c), flat)
            .map_err(|e| QsnnError::DimensionMismatch(e.to_string()))?;
        Self::from_array(a)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut((usize, usize)) -> C64) -> Result<Self> {
        Self::from_array(Array2::from_shape_fn((rows, cols), f))
    }

    #[cfg(test)]
    pub(crate) fn from_raw(a: Array2<C64>) -> Self {
        debug_assert!(a.nrows() > 0 && a.ncols() > 0);
        ComplexMatrix(a)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ComplexMatrix(Array2::zeros((rows, cols)))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix dimensions must be positive");
        ComplexMatrix(Array2::eye(n))
    }

    /// `|i⟩⟨j|` in dimension `n`.
    pub fn outer_basis(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(n, n);
        m.0[[i, j]] = ONE;
        m
    }

    /// Column vector from its entries.
    pub fn column(entries: Vec<C64>) -> Result<Self> {
        let n = entries.len();
        let a = Array2::from_shape_vec((n, 1), entries)
            .map_err(|e| QsnnError::DimensionMismatch(e.to_string()))?;
        Self::from_array(a)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows())
        } else {
            Err(QsnnError::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[[row, col]]
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<C64> {
        self.0
    }

    pub fn scale(&self, c: C64) -> Self {
        ComplexMatrix(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix(self.0.mapv(|z| z.conj()))
    }

    pub fn transpose(&self) -> Self {
        ComplexMatrix(self.0.t().to_owned())
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.t().mapv(|z| z.conj()))
    }

    pub fn trace(&self) -> C64 {
        self.0.diag().sum()
    }

    /// Matrix product with a dimension check.
    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols() != other.rows() {
            return Err(QsnnError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(ComplexMatrix(self.0.dot(&other.0)))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        self.0
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        if self.0.dim() != other.0.dim() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[[i, j]] - self.0[[j, i]].conj()).norm());
            }
        }
        worst
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|z| *z == ZERO)
    }

    /// Eigenvalues of the Hermitian part `(A + A†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.ensure_square()?;
        let m = DMatrix::from_fn(n, n, |i, j| (self.0[[i, j]] + self.0[[j, i]].conj()) * 0.5);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    /// Eigenvalues `λ` and unitary `V` with `self = V diag(λ) V†`, for the
    /// Hermitian part of `self`.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        let n = self.ensure_square()?;
        let m = DMatrix::from_fn(n, n, |i, j| (self.0[[i, j]] + self.0[[j, i]].conj()) * 0.5);
        let eig = m.symmetric_eigen();
        let v = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, j)]);
        Ok((eig.eigenvalues.iter().copied().collect(), ComplexMatrix(v)))
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix{:?}", self.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Panics on incompatible shapes, like `ndarray::dot`.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(self.0.dot(&rhs.0))
    }
}

/// Kronecker product: entry `(i*b.rows + k, j*b.cols + l)` is `a[i,j] * b[k,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.0.dim();
    let (br, bc) = b.0.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &aij) in a.0.indexed_iter() {
        if aij == ZERO {
            continue;
        }
        out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .assign(&(&b.0 * aij));
    }
    ComplexMatrix(out)
}

/// Column-stacking vectorization: `vec(ρ)[j*d + i] = ρ[i, j]`.
///
/// Under this convention `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
pub fn vec(rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = rho.ensure_square()?;
    let data: Vec<C64> = rho.0.t().iter().copied().collect();
    Ok(ComplexMatrix(
        Array2::from_shape_vec((d * d, 1), data).expect("d*d entries"),
    ))
}

/// Inverse of [`vec`] for a `d²×1` column.
pub fn unvec(v: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    if v.cols() != 1 {
        return Err(QsnnError::DimensionMismatch(format!(
            "unvec expects a column vector, got {}x{}",
            v.rows(),
            v.cols()
        )));
    }
    let len = v.rows();
    let root = (len as f64).sqrt().round() as usize;
    if root * root != len {
        return Err(QsnnError::NotPerfectSquare(len));
    }
    if root != d {
        return Err(QsnnError::DimensionMismatch(format!(
            "vector of length {len} does not unvec to {d}x{d}"
        )));
    }
    Ok(ComplexMatrix(Array2::from_shape_fn((d, d), |(i, j)| {
        v.0[[j * d + i, 0]]
    })))
}

/// Matrix exponential `exp(a)`.
pub fn matexp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.ensure_square()?;
    let out = expm_blocks(&a.0);
    ComplexMatrix::from_array(out)
}

/// Returns `(exp(a), D)` where `D` is the directional derivative of the
/// exponential at `a` along `e`.
///
/// Uses `exp([[a, e], [0, a]]) = [[exp(a), D], [0, exp(a)]]`. The direction is
/// rescaled to the size of `a` first so the block exponential does not pay
/// for a large `e` with extra squarings; `D` is linear in `e`.
pub fn frechet_exp(a: &ComplexMatrix, e: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = a.ensure_square()?;
    if e.0.dim() != (n, n) {
        return Err(QsnnError::DimensionMismatch(format!(
            "direction is {}x{}, expected {n}x{n}",
            e.rows(),
            e.cols()
        )));
    }
    let e_norm = e.norm_one();
    if e_norm == 0.0 {
        return Ok((matexp(a)?, ComplexMatrix::zeros(n, n)));
    }
    let c = a.norm_one().max(1.0) / e_norm;
    let mut block = Array2::zeros((2 * n, 2 * n));
    block.slice_mut(s![..n, ..n]).assign(&a.0);
    block.slice_mut(s![n.., n..]).assign(&a.0);
    block
        .slice_mut(s![..n, n..])
        .assign(&(&e.0 * C64::new(c, 0.0)));
    let big = expm_blocks(&block);
    let exp_a = big.slice(s![..n, ..n]).to_owned();
    let deriv = big.slice(s![..n, n..]).mapv(|z| z / c);
    Ok((ComplexMatrix::from_array(exp_a)?, ComplexMatrix::from_array(deriv)?))
}

/// Connected components of the undirected graph with an edge `i-j` whenever
/// `a[i,j]` or `a[j,i]` is non-zero. Indices within each component ascend.
fn sparsity_components(a: &Array2<C64>) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for ((i, j), z) in a.indexed_iter() {
        if i != j && *z != ZERO {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot[r]].push(i);
    }
    comps
}

fn expm_blocks(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let comps = sparsity_components(a);
    if comps.len() == 1 {
        return expm_pade(a);
    }
    let mut out = Array2::zeros((n, n));
    for comp in comps {
        if let [k] = comp[..] {
            out[[k, k]] = a[[k, k]].exp();
            continue;
        }
        let m = comp.len();
        let sub = Array2::from_shape_fn((m, m), |(i, j)| a[[comp[i], comp[j]]]);
        let e = expm_pade(&sub);
        for (i, &ci) in comp.iter().enumerate() {
            for (j, &cj) in comp.iter().enumerate() {
                out[[ci, cj]] = e[[i, j]];
            }
        }
    }
    out
}

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &Array2<C64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Scaling and squaring with a diagonal Padé approximant.
fn expm_pade(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    if n == 1 {
        return Array2::from_elem((1, 1), a[[0, 0]].exp());
    }
    let norm = one_norm(a);
    let ident: Array2<C64> = Array2::eye(n);
    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            let (u, v) = pade_low(a, coeffs, &ident);
            return solve_pade(&u, &v);
        }
    }
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));
    let (u, v) = pade_13(&scaled, &ident);
    let mut r = solve_pade(&u, &v);
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    r
}

fn pade_low(a: &Array2<C64>, b: &[f64], ident: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let a2 = a.dot(a);
    let mut odd = ident * C64::new(b[1], 0.0);
    let mut even = ident * C64::new(b[0], 0.0);
    let mut power = ident.clone();
    for k in 1..b.len() / 2 {
        power = power.dot(&a2);
        odd = odd + &power * C64::new(b[2 * k + 1], 0.0);
        even = even + &power * C64::new(b[2 * k], 0.0);
    }
    (a.dot(&odd), even)
}

fn pade_13(a: &Array2<C64>, ident: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let b = |k: usize| C64::new(PADE_13[k], 0.0);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = a.dot(&(a6.dot(&inner_u) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + ident * b(1)));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = a6.dot(&inner_v) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + ident * b(0);
    (u, v)
}

/// Solves `(V - U) X = V + U`.
fn solve_pade(u: &Array2<C64>, v: &Array2<C64>) -> Array2<C64> {
    lu_solve(v - u, v + u)
}

/// Gaussian elimination with partial pivoting, overwriting its arguments.
fn lu_solve(mut lhs: Array2<C64>, mut rhs: Array2<C64>) -> Array2<C64> {
    let n = lhs.nrows();
    let m = rhs.ncols();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| lhs[[x, col]].norm().total_cmp(&lhs[[y, col]].norm()))
            .expect("non-empty range");
        if pivot != col {
            for k in 0..n {
                lhs.swap([col, k], [pivot, k]);
            }
            for k in 0..m {
                rhs.swap([col, k], [pivot, k]);
            }
        }
        let diag = lhs[[col, col]];
        for row in col + 1..n {
            let f = lhs[[row, col]] / diag;
            if f == ZERO {
                continue;
            }
            for k in col..n {
                let t = lhs[[col, k]];
                lhs[[row, k]] -= f * t;
            }
            for k in 0..m {
                let t = rhs[[col, k]];
                rhs[[row, k]] -= f * t;
            }
        }
    }
    for col in (0..n).rev() {
        let diag = lhs[[col, col]];
        for k in 0..m {
            let mut acc = rhs[[col, k]];
            for j in col + 1..n {
                acc -= lhs[[col, j]] * rhs[[j, k]];
            }
            rhs[[col, k]] = acc / diag;
        }
    }
    rhs
}
