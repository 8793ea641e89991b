//! Finite-dimensional C*-algebras `A = ⊕_x M_{n_x}`, site-supported ideals and
//! the partition of unity subordinate to a pair of ideals.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    self, creal, herm_func_calc, hermitian_defect, identity, op_norm, scalar_value, zeros, CMatrix,
    NumericsError, Real, SpectralFn,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("MismatchedAlgebras: operands live in different algebras")]
    MismatchedAlgebras,
    #[error("ChiNotSelfAdjoint: |chi - chi*| = {defect:e}")]
    ChiNotSelfAdjoint { defect: f64 },
    #[error("ChiNotInIdeal: {which} has distance {distance:e} from its ideal")]
    ChiNotInIdeal { which: &'static str, distance: f64 },
    #[error("SumNotWholeAlgebra: sites {missing:?} lie in neither ideal")]
    SumNotWholeAlgebra { missing: Vec<usize> },
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("block {site} has shape {got:?}, expected {expected}x{expected}")]
    ShapeMismatch {
        site: usize,
        expected: usize,
        got: (usize, usize),
    },
    #[error("site {site} out of range for {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

/// `⊕_x M_{n_x}` over an ordered list of sites `0..block_dims.len()`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteAlgebra {
    block_dims: Vec<usize>,
}

impl SiteAlgebra {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(AlgebraError::InvalidAlgebra("no sites".into()));
        }
        if let Some(site) = block_dims.iter().position(|&n| n == 0) {
            return Err(AlgebraError::InvalidAlgebra(format!(
                "site {site} has block size 0"
            )));
        }
        Ok(Self { block_dims })
    }

    /// `C^sites`: every block is 1x1.
    pub fn commutative(sites: usize) -> Result<Self> {
        Self::new(vec![1; sites])
    }

    pub fn num_sites(&self) -> usize {
        self.block_dims.len()
    }

    pub fn block_dim(&self, site: usize) -> usize {
        self.block_dims[site]
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// Vector-space dimension `Σ n_x²`.
    pub fn dimension(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    pub fn sites(&self) -> std::ops::Range<usize> {
        0..self.num_sites()
    }
}

/// Element of a [`SiteAlgebra`], stored as one square block per site.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgElement<T: Real> {
    algebra: SiteAlgebra,
    blocks: Vec<CMatrix<T>>,
}

impl<T: Real> AlgElement<T> {
    pub fn from_blocks(algebra: &SiteAlgebra, blocks: Vec<CMatrix<T>>) -> Result<Self> {
        if blocks.len() != algebra.num_sites() {
            return Err(AlgebraError::InvalidAlgebra(format!(
                "{} blocks for {} sites",
                blocks.len(),
                algebra.num_sites()
            )));
        }
        for (site, b) in blocks.iter().enumerate() {
            let n = algebra.block_dim(site);
            if b.shape() != (n, n) {
                return Err(AlgebraError::ShapeMismatch {
                    site,
                    expected: n,
                    got: b.shape(),
                });
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    pub fn from_fn(algebra: &SiteAlgebra, mut f: impl FnMut(usize, usize) -> CMatrix<T>) -> Self {
        let blocks = algebra
            .sites()
            .map(|x| f(x, algebra.block_dim(x)))
            .collect();
        Self {
            algebra: algebra.clone(),
            blocks,
        }
    }

    pub fn zero(algebra: &SiteAlgebra) -> Self {
        Self::from_fn(algebra, |_, n| zeros(n, n))
    }

    pub fn one(algebra: &SiteAlgebra) -> Self {
        Self::from_fn(algebra, |_, n| identity(n))
    }

    /// Blockwise scalar element `Σ_x c_x · 1_x`.
    pub fn scalars(algebra: &SiteAlgebra, values: &[Complex<T>]) -> Self {
        assert_eq!(values.len(), algebra.num_sites());
        Self::from_fn(algebra, |x, n| {
            CMatrix::from_diagonal_element(n, n, values[x])
        })
    }

    pub fn real_scalars(algebra: &SiteAlgebra, values: &[T]) -> Self {
        let values: Vec<_> = values.iter().map(|&v| creal(v)).collect();
        Self::scalars(algebra, &values)
    }

    pub fn algebra(&self) -> &SiteAlgebra {
        &self.algebra
    }

    pub fn block(&self, site: usize) -> &CMatrix<T> {
        &self.blocks[site]
    }

    pub fn blocks(&self) -> &[CMatrix<T>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<CMatrix<T>> {
        self.blocks
    }

    pub fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.algebra == other.algebra {
            Ok(())
        } else {
            Err(AlgebraError::MismatchedAlgebras)
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map(|_, b| b.adjoint())
    }

    /// `(a + a*) / 2`.
    pub fn real_part(&self) -> Self {
        self.map(|_, b| numerics::hermitian_part(b))
    }

    pub fn map(&self, mut f: impl FnMut(usize, &CMatrix<T>) -> CMatrix<T>) -> Self {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(x, b)| f(x, b))
            .collect();
        Self {
            algebra: self.algebra.clone(),
            blocks,
        }
    }

    pub fn zip(
        &self,
        other: &Self,
        mut f: impl FnMut(&CMatrix<T>, &CMatrix<T>) -> CMatrix<T>,
    ) -> Self {
        assert!(
            self.algebra == other.algebra,
            "elements of different algebras"
        );
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| f(a, b))
            .collect();
        Self {
            algebra: self.algebra.clone(),
            blocks,
        }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|_, b| b * c)
    }

    /// C*-norm: max over sites of the block operator norm.
    pub fn norm(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(op_norm(b)))
    }

    pub fn self_adjoint_defect(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(hermitian_defect(b)))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `l a r`, computed as `(l_x r_x) a_x` on sites where `l` and `r` are
    /// both scalar so that identities like `s a t - t a s = 0` hold exactly.
    pub fn sandwich(l: &Self, a: &Self, r: &Self) -> Self {
        assert!(
            l.algebra == a.algebra && a.algebra == r.algebra,
            "elements of different algebras"
        );
        let blocks = (0..a.blocks.len())
            .map(
                |x| match (scalar_value(&l.blocks[x]), scalar_value(&r.blocks[x])) {
                    (Some(lc), Some(rc)) => &a.blocks[x] * creal(lc * rc),
                    _ => mul_block(&mul_block(&l.blocks[x], &a.blocks[x]), &r.blocks[x]),
                },
            )
            .collect();
        Self {
            algebra: a.algebra.clone(),
            blocks,
        }
    }

    /// Applies a scalar function to a self-adjoint element blockwise.
    pub fn func_calc(&self, f: SpectralFn<'_, T>) -> Result<Self> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            blocks.push(herm_func_calc(b, f)?);
        }
        Ok(Self {
            algebra: self.algebra.clone(),
            blocks,
        })
    }

    /// Smallest eigenvalue over all blocks of a self-adjoint element.
    pub fn min_eigenvalue(&self) -> Result<T> {
        let mut lo = T::max_value().unwrap_or_else(T::one);
        for b in &self.blocks {
            let eig = numerics::hermitian_eigen(b)?;
            if let Some(&v) = eig.values.first() {
                lo = lo.min(v);
            }
        }
        Ok(lo)
    }

    pub fn is_blockwise_scalar(&self) -> bool {
        self.blocks.iter().all(|b| scalar_value(b).is_some())
    }

    pub fn random<R: Rng + ?Sized>(algebra: &SiteAlgebra, rng: &mut R) -> Self {
        Self::from_fn(algebra, |_, n| numerics::gaussian_matrix(n, n, rng))
    }

    pub fn random_hermitian<R: Rng + ?Sized>(algebra: &SiteAlgebra, rng: &mut R) -> Self {
        Self::from_fn(algebra, |_, n| numerics::random_hermitian(n, rng))
    }

    /// Zeroes every block off the support of `ideal`.
    pub fn restrict(&self, ideal: &Ideal) -> Self {
        assert!(
            self.algebra == ideal.algebra,
            "elements of different algebras"
        );
        self.map(|x, b| {
            if ideal.contains(x) {
                b.clone()
            } else {
                zeros(b.nrows(), b.ncols())
            }
        })
    }
}

/// Block product that stays exact when either side is a scalar block.
fn mul_block<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    if let Some(c) = scalar_value(a) {
        return b * creal(c);
    }
    if let Some(c) = scalar_value(b) {
        return a * creal(c);
    }
    a * b
}

impl<T: Real> Add for &AlgElement<T> {
    type Output = AlgElement<T>;
    fn add(self, rhs: Self) -> AlgElement<T> {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &AlgElement<T> {
    type Output = AlgElement<T>;
    fn sub(self, rhs: Self) -> AlgElement<T> {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for &AlgElement<T> {
    type Output = AlgElement<T>;
    fn mul(self, rhs: Self) -> AlgElement<T> {
        self.zip(rhs, mul_block)
    }
}

impl<T: Real> Neg for &AlgElement<T> {
    type Output = AlgElement<T>;
    fn neg(self) -> AlgElement<T> {
        self.map(|_, b| -b)
    }
}

/// Closed two-sided ideal of a site algebra: the elements supported on a
/// subset of sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ideal {
    algebra: SiteAlgebra,
    mask: Vec<bool>,
}

impl Ideal {
    pub fn new(algebra: &SiteAlgebra, sites: &[usize]) -> Result<Self> {
        let mut mask = vec![false; algebra.num_sites()];
        for &site in sites {
            if site >= mask.len() {
                return Err(AlgebraError::SiteOutOfRange {
                    site,
                    sites: mask.len(),
                });
            }
            mask[site] = true;
        }
        Ok(Self {
            algebra: algebra.clone(),
            mask,
        })
    }

    pub fn from_mask(algebra: &SiteAlgebra, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != algebra.num_sites() {
            return Err(AlgebraError::InvalidAlgebra(format!(
                "mask of length {} for {} sites",
                mask.len(),
                algebra.num_sites()
            )));
        }
        Ok(Self {
            algebra: algebra.clone(),
            mask,
        })
    }

    pub fn whole(algebra: &SiteAlgebra) -> Self {
        Self {
            algebra: algebra.clone(),
            mask: vec![true; algebra.num_sites()],
        }
    }

    pub fn zero(algebra: &SiteAlgebra) -> Self {
        Self {
            algebra: algebra.clone(),
            mask: vec![false; algebra.num_sites()],
        }
    }

    pub fn algebra(&self) -> &SiteAlgebra {
        &self.algebra
    }

    pub fn contains(&self, site: usize) -> bool {
        self.mask[site]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn sites(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(x, _)| x)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn is_whole(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    fn combine(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        if self.algebra != other.algebra {
            return Err(AlgebraError::MismatchedAlgebras);
        }
        let mask = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            algebra: self.algebra.clone(),
            mask,
        })
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a && b)
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a || b)
    }

    /// Sites in `self` but not in `other`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a && !b)
    }
}

/// `true` iff `J1 + J2 = A`.
pub fn check_ideal_sum(j1: &Ideal, j2: &Ideal) -> Result<bool> {
    Ok(j1.sum(j2)?.is_whole())
}

/// Max block norm of `a` off the support of `ideal`; zero iff `a ∈ J`.
pub fn ideal_distance<T: Real>(a: &AlgElement<T>, ideal: &Ideal) -> Result<T> {
    if a.algebra != ideal.algebra {
        return Err(AlgebraError::MismatchedAlgebras);
    }
    Ok(a.blocks
        .iter()
        .enumerate()
        .filter(|(x, _)| !ideal.contains(*x))
        .fold(T::zero(), |acc, (_, b)| acc.max(op_norm(b))))
}

/// The unit `e_S` of the ideal.
pub fn central_projection<T: Real>(ideal: &Ideal) -> AlgElement<T> {
    AlgElement::from_fn(&ideal.algebra, |x, n| {
        if ideal.contains(x) {
            identity(n)
        } else {
            zeros(n, n)
        }
    })
}

/// Self-adjoint positive `ψ1 ∈ J1`, `ψ2 ∈ J2` with `ψ1² + ψ2² = 1` and
/// `[ψ1, ψ2] = 0`, obtained by functional calculus from the seed `χ`.
#[derive(Clone, Debug)]
pub struct PartitionOfUnity<T: Real> {
    pub psi1: AlgElement<T>,
    pub psi2: AlgElement<T>,
    pub chi: AlgElement<T>,
    pub j1: Ideal,
    pub j2: Ideal,
}

/// Numerical health of a partition of unity.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionReport {
    pub sum_of_squares: f64,
    pub commutator: f64,
    pub psi1_off_ideal: f64,
    pub psi2_off_ideal: f64,
    pub min_eigenvalue: f64,
    pub self_adjoint: f64,
}

impl<T: Real> PartitionOfUnity<T> {
    /// Wraps the given elements without any checks.
    pub fn from_raw(
        psi1: AlgElement<T>,
        psi2: AlgElement<T>,
        chi: AlgElement<T>,
        j1: Ideal,
        j2: Ideal,
    ) -> Self {
        Self {
            psi1,
            psi2,
            chi,
            j1,
            j2,
        }
    }

    pub fn algebra(&self) -> &SiteAlgebra {
        self.psi1.algebra()
    }

    /// `J = J1 ∩ J2`.
    pub fn overlap(&self) -> Ideal {
        self.j1
            .intersection(&self.j2)
            .expect("partition ideals share an algebra")
    }

    /// Partition for the mirrored pair `(J2, J1)` with seed `1 - χ`.
    pub fn swapped(&self) -> Self {
        let one = AlgElement::one(self.chi.algebra());
        Self {
            psi1: self.psi2.clone(),
            psi2: self.psi1.clone(),
            chi: &one - &self.chi,
            j1: self.j2.clone(),
            j2: self.j1.clone(),
        }
    }

    /// `(ψ1t, ψ2t) = (tψ1, (1 - t²ψ1²)^{1/2})`; the endpoints return
    /// `(0, 1)` and `(ψ1, ψ2)` verbatim.
    pub fn deformed(&self, t: T) -> Result<(AlgElement<T>, AlgElement<T>)> {
        let algebra = self.algebra();
        if t == T::zero() {
            return Ok((AlgElement::zero(algebra), AlgElement::one(algebra)));
        }
        if t == T::one() {
            return Ok((self.psi1.clone(), self.psi2.clone()));
        }
        let psi1t = self.psi1.scale(creal(t));
        let g = |l: T| (T::one() - t * t * l * l).max(T::zero()).sqrt();
        let psi2t = self.psi1.func_calc(SpectralFn::Custom(&g))?;
        Ok((psi1t, psi2t))
    }

    /// `ψ2t` evaluated through functional calculus even at `t = 1`.
    pub fn deformed_psi2_unspecialized(&self, t: T) -> Result<AlgElement<T>> {
        let g = |l: T| (T::one() - t * t * l * l).max(T::zero()).sqrt();
        self.psi1.func_calc(SpectralFn::Custom(&g))
    }

    pub fn report(&self) -> Result<PartitionReport> {
        let one = AlgElement::one(self.algebra());
        let sum = &(&(&self.psi1 * &self.psi1) + &(&self.psi2 * &self.psi2)) - &one;
        let min1 = self.psi1.real_part().min_eigenvalue()?;
        let min2 = self.psi2.real_part().min_eigenvalue()?;
        Ok(PartitionReport {
            sum_of_squares: sum.norm().as_f64(),
            commutator: self.psi1.commutator(&self.psi2).norm().as_f64(),
            psi1_off_ideal: ideal_distance(&self.psi1, &self.j1)?.as_f64(),
            psi2_off_ideal: ideal_distance(&self.psi2, &self.j2)?.as_f64(),
            min_eigenvalue: min1.min(min2).as_f64(),
            self_adjoint: self
                .psi1
                .self_adjoint_defect()
                .max(self.psi2.self_adjoint_defect())
                .as_f64(),
        })
    }
}

/// Default seed: 1 on `S1 \ S2`, 0 on `S2 \ S1`, 1/2 on the overlap.
pub fn default_chi<T: Real>(j1: &Ideal, j2: &Ideal) -> AlgElement<T> {
    let values: Vec<T> = j1
        .algebra
        .sites()
        .map(|x| match (j1.contains(x), j2.contains(x)) {
            (true, true) => T::lit(0.5),
            (true, false) => T::one(),
            _ => T::zero(),
        })
        .collect();
    AlgElement::real_scalars(&j1.algebra, &values)
}

/// Builds `ψ1 = |χ|(χ² + (1-χ)²)^{-1/2}` and `ψ2 = |1-χ|(χ² + (1-χ)²)^{-1/2}`.
///
/// `chi` must be self-adjoint with `χ ∈ J1` and `1 - χ ∈ J2`; use
/// [`AlgElement::real_part`] first for a non-self-adjoint seed.
pub fn partition_of_unity<T: Real>(
    algebra: &SiteAlgebra,
    j1: &Ideal,
    j2: &Ideal,
    chi: Option<&AlgElement<T>>,
) -> Result<PartitionOfUnity<T>> {
    if &j1.algebra != algebra || &j2.algebra != algebra {
        return Err(AlgebraError::MismatchedAlgebras);
    }
    if !check_ideal_sum(j1, j2)? {
        let union = j1.sum(j2)?;
        let missing = algebra.sites().filter(|&x| !union.contains(x)).collect();
        return Err(AlgebraError::SumNotWholeAlgebra { missing });
    }
    let chi = match chi {
        Some(c) => {
            if c.algebra() != algebra {
                return Err(AlgebraError::MismatchedAlgebras);
            }
            c.clone()
        }
        None => default_chi(j1, j2),
    };
    let sa = chi.self_adjoint_defect();
    if sa > T::tol(numerics::tol::HERMITIAN) * T::one().max(chi.norm()) {
        return Err(AlgebraError::ChiNotSelfAdjoint {
            defect: sa.as_f64(),
        });
    }
    let off1 = ideal_distance(&chi, j1)?;
    if off1 > T::zero() {
        return Err(AlgebraError::ChiNotInIdeal {
            which: "chi",
            distance: off1.as_f64(),
        });
    }
    let one = AlgElement::one(algebra);
    let off2 = ideal_distance(&(&one - &chi), j2)?;
    if off2 > T::zero() {
        return Err(AlgebraError::ChiNotInIdeal {
            which: "1 - chi",
            distance: off2.as_f64(),
        });
    }

    let chi = chi.real_part();
    let abs_chi = chi.func_calc(SpectralFn::Abs)?;
    let abs_rest = (&one - &chi).func_calc(SpectralFn::Abs)?;
    let denom = (&(&chi * &chi) + &(&(&one - &chi) * &(&one - &chi))).real_part();
    let inv = denom.func_calc(SpectralFn::InvSqrt)?;
    let psi1 = (&abs_chi * &inv).real_part();
    let psi2 = (&abs_rest * &inv).real_part();
    Ok(PartitionOfUnity {
        psi1,
        psi2,
        chi,
        j1: j1.clone(),
        j2: j2.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_partition(c: f64) -> PartitionOfUnity<f64> {
        let alg = SiteAlgebra::commutative(1).unwrap();
        let j = Ideal::whole(&alg);
        let chi = AlgElement::real_scalars(&alg, &[c]);
        partition_of_unity(&alg, &j, &j, Some(&chi)).unwrap()
    }

    fn value(a: &AlgElement<f64>) -> f64 {
        a.block(0)[(0, 0)].re
    }

    #[test]
    fn ideal_sum_examples() {
        let a = SiteAlgebra::commutative(3).unwrap();
        let s1 = Ideal::new(&a, &[0, 1]).unwrap();
        let s2 = Ideal::new(&a, &[1, 2]).unwrap();
        assert!(check_ideal_sum(&s1, &s2).unwrap());
        let b = SiteAlgebra::commutative(2).unwrap();
        let t = Ideal::new(&b, &[0]).unwrap();
        assert!(!check_ideal_sum(&t, &t).unwrap());
        assert_eq!(
            check_ideal_sum(&s1, &t),
            Err(AlgebraError::MismatchedAlgebras)
        );
    }

    #[test]
    fn scalar_partitions() {
        let p = scalar_partition(1.0);
        assert_eq!((value(&p.psi1), value(&p.psi2)), (1.0, 0.0));

        let p = scalar_partition(0.5);
        assert!((value(&p.psi1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((value(&p.psi2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        // Oracle: direct scalar evaluation of the closed form.
        let c: f64 = 0.3;
        let d = (c * c + (1.0 - c) * (1.0 - c)).sqrt();
        let p = scalar_partition(c);
        assert!((value(&p.psi1) - c / d).abs() < 1e-15);
        assert!((value(&p.psi2) - (1.0 - c) / d).abs() < 1e-15);
        assert!((value(&p.psi1) - 0.393919).abs() < 1e-6);
        assert!((value(&p.psi2) - 0.919145).abs() < 1e-6);
        assert!((value(&p.psi1).powi(2) + value(&p.psi2).powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_distance_examples() {
        let a = SiteAlgebra::new(vec![1, 2, 2]).unwrap();
        let s = Ideal::new(&a, &[0, 1]).unwrap();
        assert_eq!(
            ideal_distance(&AlgElement::<f64>::zero(&a), &s).unwrap(),
            0.0
        );
        assert_eq!(
            ideal_distance(&AlgElement::<f64>::one(&a), &s).unwrap(),
            1.0
        );
        let s2 = Ideal::new(&a, &[1, 2]).unwrap();
        let p = partition_of_unity::<f64>(&a, &s, &s2, None).unwrap();
        assert_eq!(ideal_distance(&p.psi1, &s).unwrap(), 0.0);
        assert_eq!(ideal_distance(&p.psi2, &s2).unwrap(), 0.0);
    }

    #[test]
    fn central_projection_examples() {
        let a = SiteAlgebra::new(vec![2, 1, 3]).unwrap();
        assert_eq!(
            central_projection::<f64>(&Ideal::whole(&a)),
            AlgElement::one(&a)
        );
        assert_eq!(
            central_projection::<f64>(&Ideal::zero(&a)),
            AlgElement::zero(&a)
        );
    }

    #[test]
    fn partition_rejects_bad_input() {
        let a = SiteAlgebra::commutative(3).unwrap();
        let s1 = Ideal::new(&a, &[0, 1]).unwrap();
        let s2 = Ideal::new(&a, &[1, 2]).unwrap();
        let narrow = Ideal::new(&a, &[1]).unwrap();
        assert!(matches!(
            partition_of_unity::<f64>(&a, &s1, &narrow, None),
            Err(AlgebraError::SumNotWholeAlgebra { .. })
        ));
        let bad = AlgElement::real_scalars(&a, &[1.0, 0.5, 0.2]);
        assert!(matches!(
            partition_of_unity(&a, &s1, &s2, Some(&bad)),
            Err(AlgebraError::ChiNotInIdeal { .. })
        ));
        let b = SiteAlgebra::new(vec![2]).unwrap();
        let w = Ideal::whole(&b);
        let mut m = identity::<f64>(2);
        m[(0, 1)] = creal(0.3);
        let skew = AlgElement::from_blocks(&b, vec![m]).unwrap();
        assert!(matches!(
            partition_of_unity(&b, &w, &w, Some(&skew)),
            Err(AlgebraError::ChiNotSelfAdjoint { .. })
        ));
        assert!(partition_of_unity(&b, &w, &w, Some(&skew.real_part())).is_ok());
    }

    #[test]
    fn deformation_endpoints_and_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (alg, j1, j2, chi) = random_setup(&mut rng);
        let p = partition_of_unity(&alg, &j1, &j2, Some(&chi)).unwrap();
        let one = AlgElement::one(&alg);
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let (a, b) = p.deformed(t).unwrap();
            let sum = &(&(&a * &a) + &(&b * &b)) - &one;
            assert!(sum.norm() <= 1e-12, "t={t}");
            assert!(a.commutator(&b).norm() <= 1e-12);
        }
        let (a, b) = p.deformed(1.0).unwrap();
        assert_eq!((a, b), (p.psi1.clone(), p.psi2.clone()));
        let direct = p.deformed_psi2_unspecialized(1.0).unwrap();
        assert!((&direct - &p.psi2).norm() <= 1e-12);
    }

    #[test]
    fn swap_mirrors_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (alg, j1, j2, chi) = random_setup(&mut rng);
        let p = partition_of_unity(&alg, &j1, &j2, Some(&chi)).unwrap();
        let one = AlgElement::one(&alg);
        let q = partition_of_unity(&alg, &j2, &j1, Some(&(&one - &chi))).unwrap();
        let s = p.swapped();
        assert!((&s.psi1 - &q.psi1).norm() <= 1e-13);
        assert!((&s.psi2 - &q.psi2).norm() <= 1e-13);
        assert_eq!(s.j1, q.j1);
    }

    #[test]
    fn single_precision_partition() {
        let alg = SiteAlgebra::new(vec![2, 2]).unwrap();
        let j1 = Ideal::new(&alg, &[0, 1]).unwrap();
        let j2 = Ideal::new(&alg, &[1]).unwrap();
        let p = partition_of_unity::<f32>(&alg, &j1, &j2, None).unwrap();
        assert!(p.report().unwrap().sum_of_squares < 1e-6);
    }

    /// Random algebra, covering ideals and a seed in the admissible set.
    pub(crate) fn random_setup<R: Rng>(
        rng: &mut R,
    ) -> (SiteAlgebra, Ideal, Ideal, AlgElement<f64>) {
        let sites = rng.random_range(1..6);
        let dims = (0..sites).map(|_| rng.random_range(1..4)).collect();
        let alg = SiteAlgebra::new(dims).unwrap();
        // 0: only S1, 1: only S2, 2: both.
        let tags: Vec<u8> = (0..sites).map(|_| rng.random_range(0..3)).collect();
        let m1: Vec<bool> = tags.iter().map(|&t| t != 1).collect();
        let m2: Vec<bool> = tags.iter().map(|&t| t != 0).collect();
        let j1 = Ideal::from_mask(&alg, m1).unwrap();
        let j2 = Ideal::from_mask(&alg, m2).unwrap();
        let chi = AlgElement::from_fn(&alg, |x, n| match tags[x] {
            0 => identity(n),
            1 => zeros(n, n),
            _ => {
                let h = numerics::random_hermitian::<f64, _>(n, rng);
                let shift = rng.random_range(-1.5..1.5);
                h * creal(0.5) + identity::<f64>(n) * creal(shift)
            }
        });
        (alg, j1, j2, chi)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn partition_invariants(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (alg, j1, j2, chi) = random_setup(&mut rng);
            let p = partition_of_unity(&alg, &j1, &j2, Some(&chi)).unwrap();
            let r = p.report().unwrap();
            prop_assert!(r.sum_of_squares <= 1e-12);
            prop_assert!(r.commutator <= 1e-12);
            prop_assert_eq!(r.psi1_off_ideal, 0.0);
            prop_assert_eq!(r.psi2_off_ideal, 0.0);
            prop_assert!(r.min_eigenvalue >= -1e-12);
            let one = AlgElement::one(&alg);
            let rest = &one - &p.chi;
            for c in [&p.chi, &rest] {
                prop_assert!(c.commutator(&p.psi1).norm() <= 1e-11);
                prop_assert!(c.commutator(&p.psi2).norm() <= 1e-11);
            }
        }

        #[test]
        fn central_projection_product_law(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, j1, j2, _) = random_setup(&mut rng);
            let e1 = central_projection::<f64>(&j1);
            let e2 = central_projection::<f64>(&j2);
            let e12 = central_projection::<f64>(&j1.intersection(&j2).unwrap());
            prop_assert_eq!(&(&e1 * &e2), &e12);
            prop_assert_eq!(&(&e1 * &e1), &e1);
            prop_assert_eq!(e1.adjoint(), e1.clone());
            prop_assert!(check_ideal_sum(&j1, &j2).unwrap());
        }
    }
}
