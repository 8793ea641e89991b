//! Dense complex-matrix kernel.
//!
//! Every operator in the crate (representations, symmetries, witnesses, the
//! glued Gram forms) is a dense `CMatrix<T>`. Functional calculus is routed
//! through a single Hermitian eigendecomposition backend.

use nalgebra::{Complex, ComplexField, DMatrix, SymmetricEigen};
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Real scalar type the kernel is generic over (`f32` or `f64`).
pub trait Real: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {
    /// Machine epsilon of the scalar type.
    const EPSILON: f64;

    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// A tolerance, floored at `100 ε` so that `f64` defaults stay usable in
    /// single precision.
    fn tol(x: f64) -> Self {
        Self::lit(x.max(100.0 * Self::EPSILON))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const EPSILON: f64 = f32::EPSILON as f64;
}
impl Real for f64 {
    const EPSILON: f64 = f64::EPSILON;
}

pub type CMatrix<T> = DMatrix<Complex<T>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("NonHermitianInput: max |M - M*| entry is {defect:e}")]
    NonHermitianInput { defect: f64 },
    #[error("SingularForInvSqrt: eigenvalue {eigenvalue:e} below floor {floor:e}")]
    SingularForInvSqrt { eigenvalue: f64, floor: f64 },
    #[error("NotPSD: eigenvalue {eigenvalue:e} below -{tol:e}")]
    NotPsd { eigenvalue: f64, tol: f64 },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Default tolerances. All of them can be overridden per call or per scenario.
pub mod tol {
    /// Identity checks (unitarity, homomorphism laws).
    pub const IDENTITY: f64 = 1e-12;
    /// Defect thresholds ("vanishes" in exact scenarios).
    pub const DEFECT: f64 = 1e-10;
    /// Relative singular-value cutoff for numerical rank.
    pub const RANK: f64 = 1e-8;
    /// Entrywise Hermitian-ness of inputs to functional calculus.
    pub const HERMITIAN: f64 = 1e-13;
    /// Smallest eigenvalue accepted by `inv_sqrt`.
    pub const INV_SQRT_FLOOR: f64 = 1e-10;
    /// Eigenvalue cutoff separating a Gram kernel from its complement.
    pub const GRAM_KERNEL: f64 = 1e-9;
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn zeros<T: Real>(rows: usize, cols: usize) -> CMatrix<T> {
    CMatrix::zeros(rows, cols)
}

pub fn max_abs_entry<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()))
}

/// Largest entry of `|M - M*|`.
pub fn hermitian_defect<T: Real>(m: &CMatrix<T>) -> T {
    if !m.is_square() {
        return T::max_value().unwrap_or_else(T::one);
    }
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).modulus();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let half = creal(T::lit(0.5));
    (m + m.adjoint()) * half
}

pub fn commutator<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a * b - b * a
}

/// Returns `c` when `m` is exactly `c * I` with real `c`.
pub fn scalar_value<T: Real>(m: &CMatrix<T>) -> Option<T> {
    if !m.is_square() || m.nrows() == 0 {
        return None;
    }
    let c = m[(0, 0)];
    if c.im != T::zero() {
        return None;
    }
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            let z = m[(i, j)];
            if i == j {
                if z != c {
                    return None;
                }
            } else if z.re != T::zero() || z.im != T::zero() {
                return None;
            }
        }
    }
    Some(c.re)
}

fn ensure_square<T: Real>(m: &CMatrix<T>) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(NumericsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

fn ensure_hermitian<T: Real>(m: &CMatrix<T>, tol: T) -> Result<()> {
    ensure_square(m)?;
    let defect = hermitian_defect(m);
    let scale = T::one().max(max_abs_entry(m));
    if defect > tol * scale {
        return Err(NumericsError::NonHermitianInput {
            defect: defect.as_f64(),
        });
    }
    Ok(())
}

/// Eigendecomposition `M = V diag(values) V*` with eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// Rebuilds `V diag(f(values)) V*`.
    pub fn recompose(&self, mut f: impl FnMut(T) -> T) -> CMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lambda));
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }
}

pub fn hermitian_eigen<T: Real>(m: &CMatrix<T>) -> Result<HermitianEigen<T>> {
    ensure_hermitian(m, T::tol(tol::HERMITIAN))?;
    Ok(eigen_unchecked(hermitian_part(m)))
}

fn eigen_unchecked<T: Real>(h: CMatrix<T>) -> HermitianEigen<T> {
    let n = h.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: h,
        };
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// Scalar function applied through the spectral theorem.
#[derive(Clone, Copy)]
pub enum SpectralFn<'a, T> {
    Abs,
    Sqrt,
    InvSqrt,
    PosSpectralProj,
    Custom(&'a dyn Fn(T) -> T),
}

impl<T> std::fmt::Debug for SpectralFn<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SpectralFn::Abs => "abs",
            SpectralFn::Sqrt => "sqrt",
            SpectralFn::InvSqrt => "inv_sqrt",
            SpectralFn::PosSpectralProj => "pos_spectral_proj",
            SpectralFn::Custom(_) => "custom",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FuncCalcOptions<T> {
    pub hermitian_tol: T,
    pub inv_sqrt_floor: T,
}

impl<T: Real> Default for FuncCalcOptions<T> {
    fn default() -> Self {
        Self {
            hermitian_tol: T::tol(tol::HERMITIAN),
            inv_sqrt_floor: T::tol(tol::INV_SQRT_FLOOR),
        }
    }
}

impl<T: Real> SpectralFn<'_, T> {
    fn eval(&self, lambda: T, opts: &FuncCalcOptions<T>) -> Result<T> {
        Ok(match self {
            SpectralFn::Abs => lambda.abs(),
            SpectralFn::Sqrt => lambda.max(T::zero()).sqrt(),
            SpectralFn::InvSqrt => {
                if lambda < opts.inv_sqrt_floor {
                    return Err(NumericsError::SingularForInvSqrt {
                        eigenvalue: lambda.as_f64(),
                        floor: opts.inv_sqrt_floor.as_f64(),
                    });
                }
                T::one() / lambda.sqrt()
            }
            SpectralFn::PosSpectralProj => {
                if lambda > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            SpectralFn::Custom(g) => g(lambda),
        })
    }
}

/// `f(M)` for Hermitian `M`, with default tolerances.
pub fn herm_func_calc<T: Real>(m: &CMatrix<T>, f: SpectralFn<'_, T>) -> Result<CMatrix<T>> {
    herm_func_calc_with(m, f, &FuncCalcOptions::default())
}

pub fn herm_func_calc_with<T: Real>(
    m: &CMatrix<T>,
    f: SpectralFn<'_, T>,
    opts: &FuncCalcOptions<T>,
) -> Result<CMatrix<T>> {
    ensure_hermitian(m, opts.hermitian_tol)?;
    // Exact scalar blocks stay exact; the site-algebra identities rely on it.
    if let Some(c) = scalar_value(m) {
        let v = f.eval(c, opts)?;
        return Ok(CMatrix::from_diagonal_element(
            m.nrows(),
            m.nrows(),
            creal(v),
        ));
    }
    let eig = eigen_unchecked(hermitian_part(m));
    let mut mapped = Vec::with_capacity(eig.values.len());
    for &lambda in &eig.values {
        mapped.push(f.eval(lambda, opts)?);
    }
    let mut it = mapped.into_iter();
    Ok(eig.recompose(|_| it.next().expect("one value per eigenvalue")))
}

/// Orthonormal basis of the complement of the kernel of a PSD form.
#[derive(Clone, Debug)]
pub struct PsdQuotient<T: Real> {
    /// `n x rank` isometry spanning the complement of the kernel.
    pub basis: CMatrix<T>,
    /// `n x (n - rank)` isometry spanning the numerical kernel.
    pub kernel: CMatrix<T>,
    /// Eigenvalues of the form on `basis`, ascending.
    pub values: Vec<T>,
}

impl<T: Real> PsdQuotient<T> {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

pub fn psd_quotient_basis<T: Real>(g: &CMatrix<T>, tol: T) -> Result<PsdQuotient<T>> {
    let eig = hermitian_eigen(g)?;
    if let Some(&lowest) = eig.values.first() {
        if lowest < -tol {
            return Err(NumericsError::NotPsd {
                eigenvalue: lowest.as_f64(),
                tol: tol.as_f64(),
            });
        }
    }
    let n = g.nrows();
    let split = eig.values.iter().position(|&v| v > tol).unwrap_or(n);
    Ok(PsdQuotient {
        basis: eig.vectors.columns(split, n - split).into_owned(),
        kernel: eig.vectors.columns(0, split).into_owned(),
        values: eig.values[split..].to_vec(),
    })
}

pub fn singular_values<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<T> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Number of singular values above `tol * sigma_max`; `rank(0) = 0`.
pub fn numerical_rank<T: Real>(m: &CMatrix<T>, tol: T) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > T::zero() => sv.iter().filter(|&&s| s > tol * top).count(),
        _ => 0,
    }
}

/// Rank counting singular values above `max(rel * sigma_max, floor)`.
///
/// Defect reports use this so that rounding noise in an exactly vanishing
/// defect does not register as full rank.
pub fn defect_rank<T: Real>(m: &CMatrix<T>, rel: T, floor: T) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) => {
            let cut = (rel * top).max(floor);
            sv.iter().filter(|&&s| s > cut).count()
        }
        None => 0,
    }
}

/// Operator (spectral) norm.
pub fn op_norm<T: Real>(m: &CMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    let scale = max_abs_entry(m);
    if scale == T::zero() {
        return T::zero();
    }
    if m.is_square() {
        let tight = T::lit(1e-14) * scale;
        if hermitian_defect(m) <= tight {
            return spectral_radius_hermitian(&hermitian_part(m));
        }
        let im = creal::<T>(T::zero()) + Complex::new(T::zero(), T::one());
        let rotated = m * im;
        if hermitian_defect(&rotated) <= tight {
            return spectral_radius_hermitian(&hermitian_part(&rotated));
        }
    }
    singular_values(m).first().copied().unwrap_or_else(T::zero)
}

fn spectral_radius_hermitian<T: Real>(h: &CMatrix<T>) -> T {
    h.symmetric_eigenvalues()
        .iter()
        .fold(T::zero(), |acc, v| acc.max(v.abs()))
}

/// Operator norm, replaced by the Frobenius norm (an upper bound) when that
/// is already at most `cutoff`.
pub fn op_norm_bound<T: Real>(m: &CMatrix<T>, cutoff: T) -> T {
    let fro = frobenius_norm(m);
    if fro <= cutoff {
        fro
    } else {
        op_norm(m)
    }
}

pub fn frobenius_norm<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .fold(T::zero(), |acc, z| acc + z.modulus_squared())
        .sqrt()
}

/// Block-diagonal matrix with the given (possibly rectangular) blocks.
pub fn block_diag<T: Real>(blocks: &[&CMatrix<T>]) -> CMatrix<T> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// `[[a, b], [c, d]]` as one matrix.
pub fn block2<T: Real>(
    a: &CMatrix<T>,
    b: &CMatrix<T>,
    c: &CMatrix<T>,
    d: &CMatrix<T>,
) -> CMatrix<T> {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(c.nrows(), d.nrows());
    assert_eq!(a.ncols(), c.ncols());
    assert_eq!(b.ncols(), d.ncols());
    let (r0, c0) = a.shape();
    let mut out = zeros(r0 + c.nrows(), c0 + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, c0), b.shape()).copy_from(b);
    out.view_mut((r0, 0), c.shape()).copy_from(c);
    out.view_mut((r0, c0), d.shape()).copy_from(d);
    out
}

/// Horizontal concatenation; all parts must share a row count.
pub fn hconcat<T: Real>(parts: &[&CMatrix<T>]) -> CMatrix<T> {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows, "row mismatch in hconcat");
        out.view_mut((0, c), p.shape()).copy_from(*p);
        c += p.ncols();
    }
    out
}

/// Vertical concatenation; all parts must share a column count.
pub fn vconcat<T: Real>(parts: &[&CMatrix<T>]) -> CMatrix<T> {
    let cols = parts.first().map_or(0, |p| p.ncols());
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "column mismatch in vconcat");
        out.view_mut((r, 0), p.shape()).copy_from(*p);
        r += p.nrows();
    }
    out
}

/// `a ⊗ I_m` with index convention `(i, k) -> i * m + k`.
pub fn kron_identity<T: Real>(a: &CMatrix<T>, m: usize) -> CMatrix<T> {
    let (r, c) = a.shape();
    let mut out = zeros(r * m, c * m);
    for j in 0..c {
        for i in 0..r {
            let z = a[(i, j)];
            if z.re == T::zero() && z.im == T::zero() {
                continue;
            }
            for k in 0..m {
                out[(i * m + k, j * m + k)] = z;
            }
        }
    }
    out
}

/// `max(‖A*A - I‖, ‖AA* - I‖)` for a square matrix; rectangular input fails.
pub fn unitarity_defect<T: Real>(a: &CMatrix<T>) -> T {
    if !a.is_square() {
        return T::max_value().unwrap_or_else(T::one);
    }
    let n = a.nrows();
    let id = identity::<T>(n);
    let left = a.adjoint() * a - &id;
    let right = a * a.adjoint() - &id;
    op_norm(&left).max(op_norm(&right))
}

/// `‖A*A - I‖` for a (possibly tall) matrix.
pub fn isometry_defect<T: Real>(a: &CMatrix<T>) -> T {
    op_norm(&(a.adjoint() * a - identity::<T>(a.ncols())))
}

pub fn gaussian_matrix<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> CMatrix<T> {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        cplx(T::lit(re), T::lit(im))
    })
}

pub fn random_hermitian<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    hermitian_part(&gaussian_matrix(n, n, rng))
}

/// Haar-distributed unitary (QR of a complex Ginibre matrix with phase fix).
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix<T> {
    if n == 0 {
        return zeros(0, 0);
    }
    let qr = gaussian_matrix::<T, R>(n, n, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let modulus = d.modulus();
        if modulus > T::zero() {
            let phase = d / creal(modulus);
            for z in q.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
    }
    q
}
