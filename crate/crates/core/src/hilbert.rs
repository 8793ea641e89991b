//! Hilbert modules over a finite-dimensional coefficient algebra `B`,
//! adjointable operators and unital representations in normal form.
//!
//! A module is `⊕_y M_{d_y × k_y}` over the sites `y` of `B`. Adjointable
//! operators act by left multiplication, so every operator is a list of
//! `d'_y × d_y` matrices and all analysis happens on the column spaces `C^{d_y}`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Complex;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{
    central_projection, AlgElement, AlgebraError, Ideal, PartitionOfUnity, SiteAlgebra,
};
use crate::numerics::{
    self, block_diag, creal, hconcat, identity, kron_identity, op_norm, tol, unitarity_defect,
    vconcat, zeros, CMatrix, Real,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("MismatchedAlgebras: element and representation use different algebras")]
    MismatchedAlgebras,
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error("change of basis at B-site {site} is not unitary (defect {defect:e})")]
    BasisNotUnitary { site: usize, defect: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

pub type Result<T> = std::result::Result<T, HilbertError>;

/// Shape of `⊕_y M_{d_y × k_y}`: the coefficient algebra plus `d_y` per site.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HilbertModule {
    coeff: SiteAlgebra,
    frame_dims: Vec<usize>,
}

impl HilbertModule {
    pub fn new(coeff: &SiteAlgebra, frame_dims: Vec<usize>) -> Result<Self> {
        if frame_dims.len() != coeff.num_sites() {
            return Err(HilbertError::DimensionMismatch(format!(
                "{} frame dims for {} B-sites",
                frame_dims.len(),
                coeff.num_sites()
            )));
        }
        Ok(Self {
            coeff: coeff.clone(),
            frame_dims,
        })
    }

    pub fn coeff(&self) -> &SiteAlgebra {
        &self.coeff
    }

    pub fn frame_dims(&self) -> &[usize] {
        &self.frame_dims
    }

    pub fn frame_dim(&self, y: usize) -> usize {
        self.frame_dims[y]
    }

    /// Total column dimension `Σ_y d_y`.
    pub fn total_dim(&self) -> usize {
        self.frame_dims.iter().sum()
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.coeff != other.coeff {
            return Err(HilbertError::MismatchedAlgebras);
        }
        let dims = self
            .frame_dims
            .iter()
            .zip(&other.frame_dims)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(&self.coeff, dims)
    }

    pub fn random_vector<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ModuleVector<T> {
        let blocks = self
            .frame_dims
            .iter()
            .enumerate()
            .map(|(y, &d)| numerics::gaussian_matrix(d, self.coeff.block_dim(y), rng))
            .collect();
        ModuleVector { blocks }
    }
}

/// Element of `⊕_y M_{d_y × k_y}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModuleVector<T: Real> {
    pub blocks: Vec<CMatrix<T>>,
}

impl<T: Real> ModuleVector<T> {
    /// B-valued inner product `⟨ξ, η⟩ = ξ* η` blockwise.
    pub fn inner(&self, other: &Self, coeff: &SiteAlgebra) -> AlgElement<T> {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.adjoint() * b)
            .collect();
        AlgElement::from_blocks(coeff, blocks).expect("vector shapes match the coefficient algebra")
    }

    /// Right action of `b ∈ B`.
    pub fn act(&self, b: &AlgElement<T>) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .zip(b.blocks())
                .map(|(v, b)| v * b)
                .collect(),
        }
    }

    pub fn norm(&self, coeff: &SiteAlgebra) -> T {
        self.inner(self, coeff).norm().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

/// Module map acting by left multiplication per B-site; blocks may be
/// rectangular when source and target modules differ.
#[derive(Clone, Debug, PartialEq)]
pub struct Adjointable<T: Real> {
    pub blocks: Vec<CMatrix<T>>,
}

impl<T: Real> Adjointable<T> {
    pub fn new(blocks: Vec<CMatrix<T>>) -> Self {
        Self { blocks }
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self {
            blocks: dims.iter().map(|&d| identity(d)).collect(),
        }
    }

    pub fn zero(rows: &[usize], cols: &[usize]) -> Self {
        Self {
            blocks: rows.iter().zip(cols).map(|(&r, &c)| zeros(r, c)).collect(),
        }
    }

    pub fn num_sites(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, y: usize) -> &CMatrix<T> {
        &self.blocks[y]
    }

    pub fn row_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.nrows()).collect()
    }

    pub fn col_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.ncols()).collect()
    }

    pub fn adjoint(&self) -> Self {
        self.map(|_, b| b.adjoint())
    }

    pub fn map(&self, mut f: impl FnMut(usize, &CMatrix<T>) -> CMatrix<T>) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .enumerate()
                .map(|(y, b)| f(y, b))
                .collect(),
        }
    }

    pub fn zip(
        &self,
        other: &Self,
        mut f: impl FnMut(&CMatrix<T>, &CMatrix<T>) -> CMatrix<T>,
    ) -> Self {
        assert_eq!(
            self.blocks.len(),
            other.blocks.len(),
            "operators over different coefficient algebras"
        );
        Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        self.map(|_, b| b * c)
    }

    /// Operator norm: max over B-sites.
    pub fn norm(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(op_norm(b)))
    }

    /// [`Self::norm`] with the Frobenius shortcut of [`numerics::op_norm_bound`].
    pub fn norm_bound(&self, cutoff: T) -> T {
        self.blocks.iter().fold(T::zero(), |acc, b| {
            acc.max(numerics::op_norm_bound(b, cutoff))
        })
    }

    /// Summed numerical rank over B-sites.
    pub fn rank(&self, rel: T, floor: T) -> usize {
        self.blocks
            .iter()
            .map(|b| numerics::defect_rank(b, rel, floor))
            .sum()
    }

    pub fn apply(&self, v: &ModuleVector<T>) -> ModuleVector<T> {
        ModuleVector {
            blocks: self
                .blocks
                .iter()
                .zip(&v.blocks)
                .map(|(a, x)| a * x)
                .collect(),
        }
    }

    pub fn direct_sum(&self, other: &Self) -> Self {
        self.zip(other, |a, b| block_diag(&[a, b]))
    }

    pub fn unitarity_defect(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(unitarity_defect(b)))
    }

    pub fn isometry_defect(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(numerics::isometry_defect(b)))
    }

    pub fn self_adjoint_defect(&self) -> T {
        (self - &self.adjoint()).norm()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }
}

impl<T: Real> Add for &Adjointable<T> {
    type Output = Adjointable<T>;
    fn add(self, rhs: Self) -> Adjointable<T> {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &Adjointable<T> {
    type Output = Adjointable<T>;
    fn sub(self, rhs: Self) -> Adjointable<T> {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul for &Adjointable<T> {
    type Output = Adjointable<T>;
    fn mul(self, rhs: Self) -> Adjointable<T> {
        self.zip(rhs, |a, b| a * b)
    }
}

impl<T: Real> Neg for &Adjointable<T> {
    type Output = Adjointable<T>;
    fn neg(self) -> Adjointable<T> {
        self.map(|_, b| -b)
    }
}

/// Unital representation `ρ(a)_y = W_y* (⊕_x a(x) ⊗ I_{m_{x,y}}) W_y`.
///
/// The columns of `W_y*` are an orthonormal basis adapted to the isotypic
/// decomposition, ordered by site `x` and then by the Kronecker index
/// `i * m_{x,y} + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation<T: Real> {
    source: SiteAlgebra,
    module: HilbertModule,
    multiplicities: Vec<Vec<usize>>,
    bases: Vec<CMatrix<T>>,
    trivial_basis: Vec<bool>,
}

impl<T: Real> Representation<T> {
    /// `multiplicities[x][y]` copies of the block `M_{n_x}` at B-site `y`.
    pub fn new(
        source: &SiteAlgebra,
        coeff: &SiteAlgebra,
        multiplicities: Vec<Vec<usize>>,
        bases: Vec<CMatrix<T>>,
    ) -> Result<Self> {
        let dims = check_multiplicities(source, coeff, &multiplicities)?;
        if bases.len() != coeff.num_sites() {
            return Err(HilbertError::InvalidRepresentation(format!(
                "{} bases for {} B-sites",
                bases.len(),
                coeff.num_sites()
            )));
        }
        for (y, w) in bases.iter().enumerate() {
            if w.shape() != (dims[y], dims[y]) {
                return Err(HilbertError::InvalidRepresentation(format!(
                    "basis at B-site {y} has shape {:?}, expected {}x{}",
                    w.shape(),
                    dims[y],
                    dims[y]
                )));
            }
            let defect = unitarity_defect(w);
            if defect > T::tol(tol::IDENTITY) {
                return Err(HilbertError::BasisNotUnitary {
                    site: y,
                    defect: defect.as_f64(),
                });
            }
        }
        let trivial_basis = bases.iter().map(|w| *w == identity(w.nrows())).collect();
        Ok(Self {
            source: source.clone(),
            module: HilbertModule::new(coeff, dims)?,
            multiplicities,
            bases,
            trivial_basis,
        })
    }

    /// Normal form with `W_y = I`.
    pub fn diagonal(
        source: &SiteAlgebra,
        coeff: &SiteAlgebra,
        multiplicities: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let dims = check_multiplicities(source, coeff, &multiplicities)?;
        let bases = dims.iter().map(|&d| identity(d)).collect();
        Self::new(source, coeff, multiplicities, bases)
    }

    /// Builds the representation whose isotypic frames are given:
    /// `frames[y][x]` is a `d_y × n_x m_{x,y}` isometry in Kronecker order.
    pub fn from_isotypic_frames(
        source: &SiteAlgebra,
        coeff: &SiteAlgebra,
        multiplicities: Vec<Vec<usize>>,
        frames: &[Vec<CMatrix<T>>],
    ) -> Result<Self> {
        let bases = frames
            .iter()
            .map(|per_x| {
                let refs: Vec<&CMatrix<T>> = per_x.iter().collect();
                hconcat(&refs).adjoint()
            })
            .collect();
        Self::new(source, coeff, multiplicities, bases)
    }

    pub fn source(&self) -> &SiteAlgebra {
        &self.source
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn coeff(&self) -> &SiteAlgebra {
        self.module.coeff()
    }

    pub fn multiplicities(&self) -> &[Vec<usize>] {
        &self.multiplicities
    }

    pub fn multiplicity(&self, x: usize, y: usize) -> usize {
        self.multiplicities[x][y]
    }

    pub fn basis(&self, y: usize) -> &CMatrix<T> {
        &self.bases[y]
    }

    pub fn frame_dims(&self) -> &[usize] {
        self.module.frame_dims()
    }

    /// `ρ(a)` as an adjointable operator.
    pub fn apply(&self, a: &AlgElement<T>) -> Result<Adjointable<T>> {
        if a.algebra() != &self.source {
            return Err(HilbertError::MismatchedAlgebras);
        }
        let blocks = (0..self.module.coeff().num_sites())
            .map(|y| {
                let parts: Vec<CMatrix<T>> = self
                    .source
                    .sites()
                    .filter(|&x| self.multiplicities[x][y] > 0)
                    .map(|x| kron_identity(a.block(x), self.multiplicities[x][y]))
                    .collect();
                let refs: Vec<&CMatrix<T>> = parts.iter().collect();
                let d = block_diag(&refs);
                if self.trivial_basis[y] {
                    d
                } else {
                    self.bases[y].adjoint() * d * &self.bases[y]
                }
            })
            .collect();
        Ok(Adjointable { blocks })
    }

    /// Columns of `W_y*` belonging to site `x`.
    pub fn isotypic_frame(&self, x: usize, y: usize) -> CMatrix<T> {
        let offset: usize = (0..x)
            .map(|s| self.source.block_dim(s) * self.multiplicities[s][y])
            .sum();
        let width = self.source.block_dim(x) * self.multiplicities[x][y];
        self.bases[y].adjoint().columns(offset, width).into_owned()
    }

    /// Isometric frame of `ρ(e_S)H` at B-site `y`: isotypic columns for `x ∈ S`.
    pub fn support_frame(&self, ideal: &Ideal, y: usize) -> CMatrix<T> {
        let parts: Vec<CMatrix<T>> = self
            .source
            .sites()
            .filter(|&x| ideal.contains(x))
            .map(|x| self.isotypic_frame(x, y))
            .collect();
        let refs: Vec<&CMatrix<T>> = parts.iter().collect();
        let mut out = hconcat(&refs);
        if out.nrows() == 0 {
            out = zeros(self.module.frame_dim(y), 0);
        }
        out
    }

    /// `V ρ V*` for per-site unitaries `V_y`.
    pub fn conjugate(&self, v: &Adjointable<T>) -> Result<Self> {
        let bases = self
            .bases
            .iter()
            .zip(&v.blocks)
            .map(|(w, v)| w * v.adjoint())
            .collect();
        Self::new(
            &self.source,
            self.module.coeff(),
            self.multiplicities.clone(),
            bases,
        )
    }

    /// `ρ ⊕ ρ'` on `H ⊕ H'`.
    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if self.source != other.source || self.coeff() != other.coeff() {
            return Err(HilbertError::MismatchedAlgebras);
        }
        let coeff = self.coeff().clone();
        let multiplicities = self
            .multiplicities
            .iter()
            .zip(&other.multiplicities)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect())
            .collect();
        let frames: Vec<Vec<CMatrix<T>>> = coeff
            .sites()
            .map(|y| {
                let (d1, d2) = (self.module.frame_dim(y), other.module.frame_dim(y));
                self.source
                    .sites()
                    .map(|x| {
                        let n = self.source.block_dim(x);
                        let (m1, m2) = (self.multiplicities[x][y], other.multiplicities[x][y]);
                        let f1 = self.isotypic_frame(x, y);
                        let f2 = other.isotypic_frame(x, y);
                        // Interleave so that column i*(m1+m2)+k is copy k of basis vector i.
                        let mut out = zeros(d1 + d2, n * (m1 + m2));
                        for i in 0..n {
                            for k in 0..m1 {
                                out.view_mut((0, i * (m1 + m2) + k), (d1, 1))
                                    .copy_from(&f1.column(i * m1 + k));
                            }
                            for k in 0..m2 {
                                out.view_mut((d1, i * (m1 + m2) + m1 + k), (d2, 1))
                                    .copy_from(&f2.column(i * m2 + k));
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Self::from_isotypic_frames(&self.source, &coeff, multiplicities, &frames)
    }

    /// Largest homomorphism, adjoint and unitality defect over the given elements.
    pub fn homomorphism_defect(&self, elements: &[AlgElement<T>]) -> Result<T> {
        let one = self.apply(&AlgElement::one(&self.source))?;
        let mut worst = (&one - &Adjointable::identity(self.frame_dims())).norm();
        let images: Vec<_> = elements
            .iter()
            .map(|a| self.apply(a))
            .collect::<Result<_>>()?;
        for (a, ra) in elements.iter().zip(&images) {
            worst = worst.max((&self.apply(&a.adjoint())? - &ra.adjoint()).norm());
            for (b, rb) in elements.iter().zip(&images) {
                let rab = self.apply(&(a * b))?;
                worst = worst.max((&rab - &(ra * rb)).norm());
            }
        }
        Ok(worst)
    }
}

fn check_multiplicities(
    source: &SiteAlgebra,
    coeff: &SiteAlgebra,
    m: &[Vec<usize>],
) -> Result<Vec<usize>> {
    if m.len() != source.num_sites() || m.iter().any(|row| row.len() != coeff.num_sites()) {
        return Err(HilbertError::InvalidRepresentation(format!(
            "multiplicity table must be {}x{}",
            source.num_sites(),
            coeff.num_sites()
        )));
    }
    Ok(coeff
        .sites()
        .map(|y| source.sites().map(|x| source.block_dim(x) * m[x][y]).sum())
        .collect())
}

/// `ρ[J]H` as a projection plus isometric frame per B-site.
#[derive(Clone, Debug)]
pub struct Submodule<T: Real> {
    pub projection: Adjointable<T>,
    pub frame: Adjointable<T>,
}

impl<T: Real> Submodule<T> {
    pub fn dims(&self) -> Vec<usize> {
        self.frame.col_dims()
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().sum()
    }
}

pub fn ideal_submodule<T: Real>(rep: &Representation<T>, ideal: &Ideal) -> Result<Submodule<T>> {
    if ideal.algebra() != rep.source() {
        return Err(HilbertError::MismatchedAlgebras);
    }
    let projection = rep.apply(&central_projection(ideal))?;
    let frame = Adjointable::new(
        rep.coeff()
            .sites()
            .map(|y| rep.support_frame(ideal, y))
            .collect(),
    );
    Ok(Submodule { projection, frame })
}

/// Checks of the isomorphism `(H1 ⊕ H2)/Δ ≅ H` induced by `α` and `β`.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaBetaReport {
    /// `‖α∘β - id_H‖`.
    pub alpha_beta: f64,
    /// Component of `β∘α - id` orthogonal to `Δ = {(ξ, -ξ) : ξ ∈ H0}`.
    pub beta_alpha_off_delta: f64,
    pub kernel_dim_alpha: usize,
    pub dim_h0: usize,
}

pub fn alpha_beta_check<T: Real>(
    rep: &Representation<T>,
    pu: &PartitionOfUnity<T>,
) -> Result<AlphaBetaReport> {
    let h1 = ideal_submodule(rep, &pu.j1)?;
    let h2 = ideal_submodule(rep, &pu.j2)?;
    let h0 = ideal_submodule(rep, &pu.overlap())?;
    let p1 = rep.apply(&(&pu.psi1 * &pu.psi1))?;
    let p2 = rep.apply(&(&pu.psi2 * &pu.psi2))?;
    let alpha_beta = (&(&p1 + &p2) - &Adjointable::identity(rep.frame_dims())).norm();

    let mut off = T::zero();
    let mut kernel = 0;
    let inv_sqrt2 = creal(T::lit(std::f64::consts::FRAC_1_SQRT_2));
    for y in 0..rep.coeff().num_sites() {
        let (v1, v2, v0) = (h1.frame.block(y), h2.frame.block(y), h0.frame.block(y));
        let alpha = hconcat(&[v1, v2]);
        let beta = vconcat(&[&(v1.adjoint() * p1.block(y)), &(v2.adjoint() * p2.block(y))]);
        let dev = &beta * &alpha - identity::<T>(alpha.ncols());
        let delta = vconcat(&[
            &(v1.adjoint() * v0 * inv_sqrt2),
            &(-(v2.adjoint() * v0) * inv_sqrt2),
        ]);
        let proj = identity::<T>(alpha.ncols()) - &delta * delta.adjoint();
        off = off.max(op_norm(&(proj * dev)));
        kernel += alpha.ncols() - numerics::numerical_rank(&alpha, T::tol(tol::RANK));
    }
    Ok(AlphaBetaReport {
        alpha_beta: alpha_beta.as_f64(),
        beta_alpha_off_delta: off.as_f64(),
        kernel_dim_alpha: kernel,
        dim_h0: h0.total_dim(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::algebra::partition_of_unity;
    use crate::numerics::haar_unitary;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random algebra, coefficient algebra and representation with random bases.
    pub(crate) fn random_rep<R: Rng>(rng: &mut R) -> Representation<f64> {
        let sites = rng.random_range(1..5);
        let source =
            SiteAlgebra::new((0..sites).map(|_| rng.random_range(1..4)).collect()).unwrap();
        let coeff = SiteAlgebra::new(
            (0..rng.random_range(1..3))
                .map(|_| rng.random_range(1..3))
                .collect(),
        )
        .unwrap();
        let mult: Vec<Vec<usize>> = (0..sites)
            .map(|_| coeff.sites().map(|_| rng.random_range(1..3)).collect())
            .collect();
        let dims = check_multiplicities(&source, &coeff, &mult).unwrap();
        let bases = dims.iter().map(|&d| haar_unitary(d, rng)).collect();
        Representation::new(&source, &coeff, mult, bases).unwrap()
    }

    fn random_ideals<R: Rng>(alg: &SiteAlgebra, rng: &mut R) -> (Ideal, Ideal) {
        let tags: Vec<u8> = alg.sites().map(|_| rng.random_range(0..3)).collect();
        let j1 = Ideal::from_mask(alg, tags.iter().map(|&t| t != 1).collect()).unwrap();
        let j2 = Ideal::from_mask(alg, tags.iter().map(|&t| t != 0).collect()).unwrap();
        (j1, j2)
    }

    #[test]
    fn unit_maps_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rep = random_rep(&mut rng);
        let one = rep.apply(&AlgElement::one(rep.source())).unwrap();
        assert!((&one - &Adjointable::identity(rep.frame_dims())).norm() <= 1e-12);
    }

    #[test]
    fn central_projection_rank_matches_multiplicities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rep = random_rep(&mut rng);
        let s = Ideal::new(rep.source(), &[0]).unwrap();
        let p = rep.apply(&central_projection(&s)).unwrap();
        for y in 0..rep.coeff().num_sites() {
            let oracle = rep.source().block_dim(0) * rep.multiplicity(0, y);
            assert_eq!(numerics::numerical_rank(p.block(y), 1e-8), oracle);
        }
    }

    #[test]
    fn whole_and_zero_submodules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = random_rep(&mut rng);
        let all = ideal_submodule(&rep, &Ideal::whole(rep.source())).unwrap();
        assert_eq!(all.total_dim(), rep.module().total_dim());
        let none = ideal_submodule(&rep, &Ideal::zero(rep.source())).unwrap();
        assert_eq!(none.total_dim(), 0);
        assert_eq!(none.projection.norm(), 0.0);
    }

    #[test]
    fn beta_splits_supported_vectors() {
        let alg = SiteAlgebra::commutative(3).unwrap();
        let coeff = SiteAlgebra::commutative(1).unwrap();
        let rep =
            Representation::<f64>::diagonal(&alg, &coeff, vec![vec![1], vec![1], vec![1]]).unwrap();
        let j1 = Ideal::new(&alg, &[0, 1]).unwrap();
        let j2 = Ideal::new(&alg, &[1, 2]).unwrap();
        let pu = partition_of_unity(&alg, &j1, &j2, None).unwrap();
        // ξ = e_0 lives where ψ2 = 0, so β(ξ) = (ξ, 0).
        let xi = CMatrix::from_fn(3, 1, |i, _| creal(if i == 0 { 1.0 } else { 0.0 }));
        let p1 = rep.apply(&(&pu.psi1 * &pu.psi1)).unwrap();
        let p2 = rep.apply(&(&pu.psi2 * &pu.psi2)).unwrap();
        assert_eq!(p1.block(0) * &xi, xi);
        assert_eq!(op_norm(&(p2.block(0) * &xi)), 0.0);
    }

    #[test]
    fn direct_sum_restricts_to_summands() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_rep(&mut rng);
        let v = Adjointable::new(
            a.frame_dims()
                .iter()
                .map(|&d| haar_unitary(d, &mut rng))
                .collect(),
        );
        let b = a.conjugate(&v).unwrap();
        let sum = a.direct_sum(&b).unwrap();
        let el = AlgElement::random(a.source(), &mut rng);
        let lhs = sum.apply(&el).unwrap();
        let rhs = a.apply(&el).unwrap().direct_sum(&b.apply(&el).unwrap());
        assert!((&lhs - &rhs).norm() <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn representation_is_star_homomorphism(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = random_rep(&mut rng);
            let els: Vec<_> = (0..3).map(|_| AlgElement::random(rep.source(), &mut rng)).collect();
            prop_assert!(rep.homomorphism_defect(&els).unwrap() <= 1e-12 * 16.0);
        }

        #[test]
        fn inner_product_identities(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = random_rep(&mut rng);
            let module = rep.module();
            let xi = module.random_vector::<f64, _>(&mut rng);
            let eta = module.random_vector::<f64, _>(&mut rng);
            let b = AlgElement::random(module.coeff(), &mut rng);
            let left = xi.inner(&eta.act(&b), module.coeff());
            let right = &xi.inner(&eta, module.coeff()) * &b;
            prop_assert!((&left - &right).norm() <= 1e-12 * (1.0 + left.norm()));
            prop_assert_eq!(xi.inner(&eta, module.coeff()).adjoint(), eta.inner(&xi, module.coeff()));
            prop_assert!(xi.inner(&xi, module.coeff()).min_eigenvalue().unwrap() >= -1e-12);
        }

        #[test]
        fn submodules_and_inclusion_exclusion(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = random_rep(&mut rng);
            let (j1, j2) = random_ideals(rep.source(), &mut rng);
            let h1 = ideal_submodule(&rep, &j1).unwrap();
            let h2 = ideal_submodule(&rep, &j2).unwrap();
            let h0 = ideal_submodule(&rep, &j1.intersection(&j2).unwrap()).unwrap();
            let union = ideal_submodule(&rep, &j1.sum(&j2).unwrap()).unwrap();
            let incl = &(&h1.projection + &h2.projection) - &(&h1.projection * &h2.projection);
            prop_assert!((&incl - &union.projection).norm() <= 1e-12);
            let prod = &h1.projection * &h2.projection;
            prop_assert_eq!(prod.rank(1e-8, 1e-10), h0.total_dim());
            prop_assert!(h1.frame.isometry_defect() <= 1e-12);
            let a = rep.apply(&AlgElement::random(rep.source(), &mut rng)).unwrap();
            prop_assert!(h1.projection.commutator(&a).norm() <= 1e-12 * (1.0 + a.norm()));
        }

        #[test]
        fn alpha_beta_inverse(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = random_rep(&mut rng);
            let (j1, j2) = random_ideals(rep.source(), &mut rng);
            let pu = partition_of_unity::<f64>(rep.source(), &j1, &j2, None).unwrap();
            let r = alpha_beta_check(&rep, &pu).unwrap();
            prop_assert!(r.alpha_beta <= 1e-12);
            prop_assert!(r.beta_alpha_off_delta <= 1e-10);
            prop_assert_eq!(r.kernel_dim_alpha, r.dim_h0);
        }
    }
}
