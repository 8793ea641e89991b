//! Kasparov modules `(H, ρ, F)`, their defect reports and the agreement
//! relation on an ideal.
//!
//! In finite dimensions every operator is compact, so "`C ∼ D`" is measured by
//! the norm and numerical rank of `C - D`; verdicts compare against budgets.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{central_projection, ideal_distance, AlgElement, Ideal, SiteAlgebra};
use crate::hilbert::{Adjointable, HilbertError, Representation};
use crate::numerics::{creal, identity, tol, unitarity_defect, zeros, CMatrix, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KasparovError {
    #[error("TNotUnitary: witness unitarity defect {defect:e}")]
    TNotUnitary { defect: f64 },
    #[error("TNotBimodule: witness fails to intertwine the A-actions (defect {defect:e})")]
    TNotBimodule { defect: f64 },
    #[error("GeneratorNotInJ: generator {index} has distance {distance:e} from J")]
    GeneratorNotInJ { index: usize, distance: f64 },
    #[error("module mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

pub type Result<T> = std::result::Result<T, KasparovError>;

/// `(H, ρ, F)` together with the generator list used to measure defects.
#[derive(Clone, Debug)]
pub struct KasparovModule<T: Real> {
    pub rep: Representation<T>,
    pub f: Adjointable<T>,
    pub generators: Vec<AlgElement<T>>,
}

impl<T: Real> KasparovModule<T> {
    pub fn new(
        rep: Representation<T>,
        f: Adjointable<T>,
        generators: Vec<AlgElement<T>>,
    ) -> Result<Self> {
        if f.row_dims() != rep.frame_dims() || f.col_dims() != rep.frame_dims() {
            return Err(KasparovError::Mismatch(format!(
                "F has shape {:?}x{:?}, module has frame dims {:?}",
                f.row_dims(),
                f.col_dims(),
                rep.frame_dims()
            )));
        }
        for g in &generators {
            if g.algebra() != rep.source() {
                return Err(HilbertError::MismatchedAlgebras.into());
            }
        }
        Ok(Self { rep, f, generators })
    }

    pub fn source(&self) -> &SiteAlgebra {
        self.rep.source()
    }

    pub fn frame_dims(&self) -> &[usize] {
        self.rep.frame_dims()
    }

    /// `(VρV*, VFV*)` for per-site unitaries `V`.
    pub fn conjugate(&self, v: &Adjointable<T>) -> Result<Self> {
        let f = &(v * &self.f) * &v.adjoint();
        Self::new(self.rep.conjugate(v)?, f, self.generators.clone())
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.rep.direct_sum(&other.rep)?,
            self.f.direct_sum(&other.f),
            self.generators.clone(),
        )
    }

    pub fn report(&self) -> Result<DefectReport> {
        defect_report(&self.rep, &self.f, &self.generators)
    }
}

/// Rank counts that accompany each defect norm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectRanks {
    pub comm: usize,
    pub sq: usize,
    pub sa: usize,
}

/// Measured Kasparov-condition defects.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// `max_a ‖[F, ρ(a)]‖` over the generator list.
    pub comm: f64,
    /// `‖F² - 1‖`.
    pub sq: f64,
    /// `‖F - F*‖`.
    pub sa: f64,
    /// `‖[F, ρ(a)]‖` per generator.
    pub per_generator: Vec<f64>,
    pub ranks: DefectRanks,
}

/// Relative and absolute cutoffs used for defect ranks.
pub fn rank_cutoffs<T: Real>() -> (T, T) {
    (T::tol(tol::RANK), T::tol(tol::DEFECT))
}

pub fn defect_report<T: Real>(
    rep: &Representation<T>,
    f: &Adjointable<T>,
    generators: &[AlgElement<T>],
) -> Result<DefectReport> {
    let (rel, floor) = rank_cutoffs::<T>();
    let mut per_generator = Vec::with_capacity(generators.len());
    let mut comm_rank = 0;
    for g in generators {
        let c = f.commutator(&rep.apply(g)?);
        per_generator.push(c.norm().as_f64());
        comm_rank = comm_rank.max(c.rank(rel, floor));
    }
    let sq_op = &(f * f) - &Adjointable::identity(rep.frame_dims());
    let sa_op = f - &f.adjoint();
    Ok(DefectReport {
        comm: per_generator.iter().copied().fold(0.0, f64::max),
        sq: sq_op.norm().as_f64(),
        sa: sa_op.norm().as_f64(),
        per_generator,
        ranks: DefectRanks {
            comm: comm_rank,
            sq: sq_op.rank(rel, floor),
            sa: sa_op.rank(rel, floor),
        },
    })
}

/// Separate budgets for the three Kasparov conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq2Budget {
    pub comm: f64,
    pub sq: f64,
    pub sa: f64,
}

impl Eq2Budget {
    pub fn uniform(eps: f64) -> Self {
        Self {
            comm: eps,
            sq: eps,
            sa: eps,
        }
    }

    pub fn admits(&self, r: &DefectReport) -> bool {
        r.comm <= self.comm && r.sq <= self.sq && r.sa <= self.sa
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModuleVerdict {
    pub report: DefectReport,
    pub pass: bool,
}

pub fn verify_module<T: Real>(x: &KasparovModule<T>, eps: f64) -> Result<ModuleVerdict> {
    verify_module_with(x, &Eq2Budget::uniform(eps))
}

pub fn verify_module_with<T: Real>(
    x: &KasparovModule<T>,
    budget: &Eq2Budget,
) -> Result<ModuleVerdict> {
    let report = x.report()?;
    let pass = budget.admits(&report);
    Ok(ModuleVerdict { report, pass })
}

/// Unitary `T: H0 → H̃0` written in the frame coordinates of the two
/// `J`-submodules: block `y` is `r̃0_y × r0_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgreementWitness<T: Real> {
    pub t: Adjointable<T>,
}

impl<T: Real> AgreementWitness<T> {
    pub fn new(t: Adjointable<T>) -> Self {
        Self { t }
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self {
            t: Adjointable::identity(dims),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            t: self.t.adjoint(),
        }
    }

    pub fn unitarity_defect(&self) -> T {
        self.t
            .blocks
            .iter()
            .fold(T::zero(), |acc, b| acc.max(unitarity_defect(b)))
    }

    /// `Ṽ0 T V0*` as an operator `H → H̃`.
    pub fn full(&self, frame: &Adjointable<T>, frame_tilde: &Adjointable<T>) -> Adjointable<T> {
        &(frame_tilde * &self.t) * &frame.adjoint()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AgreementReport {
    /// `δ_cd` indexed by `[c][d]`.
    pub table: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<usize>>,
    pub max: f64,
    /// Largest `‖T ρ(a) - ρ̃(a) T‖` over the A-generators checked.
    pub bimodule_defect: f64,
    pub unitary_defect: f64,
    pub pass: bool,
}

/// Frames of `ρ(e_J)H` and `ρ̃(e_J)H̃`.
pub fn overlap_frames<T: Real>(
    x: &KasparovModule<T>,
    x_tilde: &KasparovModule<T>,
    ideal: &Ideal,
) -> (Adjointable<T>, Adjointable<T>) {
    let sites = 0..x.rep.coeff().num_sites();
    let v0 = Adjointable::new(
        sites
            .clone()
            .map(|y| x.rep.support_frame(ideal, y))
            .collect(),
    );
    let vt0 = Adjointable::new(sites.map(|y| x_tilde.rep.support_frame(ideal, y)).collect());
    (v0, vt0)
}

/// Validates the witness: unitary between the overlap submodules and an
/// A-bimodule map for every generator of `A` known to either module.
pub fn validate_witness<T: Real>(
    x: &KasparovModule<T>,
    x_tilde: &KasparovModule<T>,
    witness: &AgreementWitness<T>,
    ideal: &Ideal,
) -> Result<(f64, f64)> {
    if x.source() != x_tilde.source() || x.rep.coeff() != x_tilde.rep.coeff() {
        return Err(KasparovError::Mismatch(
            "modules over different algebras".into(),
        ));
    }
    let (v0, vt0) = overlap_frames(x, x_tilde, ideal);
    let t = &witness.t;
    if t.num_sites() != v0.num_sites() {
        return Err(KasparovError::TNotUnitary {
            defect: f64::INFINITY,
        });
    }
    for y in 0..t.num_sites() {
        if t.block(y).shape() != (vt0.block(y).ncols(), v0.block(y).ncols()) {
            return Err(KasparovError::TNotUnitary {
                defect: f64::INFINITY,
            });
        }
    }
    let unitary = witness.unitarity_defect();
    if unitary > T::tol(tol::IDENTITY) {
        return Err(KasparovError::TNotUnitary {
            defect: unitary.as_f64(),
        });
    }
    let mut bimodule = T::zero();
    for a in x.generators.iter().chain(&x_tilde.generators) {
        let ra = &(&v0.adjoint() * &x.rep.apply(a)?) * &v0;
        let rta = &(&vt0.adjoint() * &x_tilde.rep.apply(a)?) * &vt0;
        let d = (&(t * &ra) - &(&rta * t)).norm() / T::one().max(a.norm());
        bimodule = bimodule.max(d);
    }
    if bimodule > T::tol(tol::IDENTITY) {
        return Err(KasparovError::TNotBimodule {
            defect: bimodule.as_f64(),
        });
    }
    Ok((unitary.as_f64(), bimodule.as_f64()))
}

/// Measures `δ_cd = ‖T ρ(c) F ρ(d) - ρ̃(c) F̃ ρ̃(d) T‖` on `H0 → H̃0` for all
/// pairs of `J`-generators.
pub fn check_agreement<T: Real>(
    x: &KasparovModule<T>,
    x_tilde: &KasparovModule<T>,
    witness: &AgreementWitness<T>,
    ideal: &Ideal,
    j_gens: &[AlgElement<T>],
    eps: f64,
) -> Result<AgreementReport> {
    for (index, c) in j_gens.iter().enumerate() {
        let distance = ideal_distance(c, ideal).map_err(HilbertError::from)?;
        if distance > T::zero() {
            return Err(KasparovError::GeneratorNotInJ {
                index,
                distance: distance.as_f64(),
            });
        }
    }
    let (unitary_defect, bimodule_defect) = validate_witness(x, x_tilde, witness, ideal)?;
    let (v0, vt0) = overlap_frames(x, x_tilde, ideal);
    let t = &witness.t;
    let (rel, floor) = rank_cutoffs::<T>();

    let images: Vec<_> = j_gens
        .iter()
        .map(|c| x.rep.apply(c))
        .collect::<std::result::Result<_, _>>()?;
    let images_t: Vec<_> = j_gens
        .iter()
        .map(|c| x_tilde.rep.apply(c))
        .collect::<std::result::Result<_, _>>()?;
    let mut table = Vec::with_capacity(j_gens.len());
    let mut ranks = Vec::with_capacity(j_gens.len());
    let mut max = 0.0f64;
    for (rc, rtc) in images.iter().zip(&images_t) {
        let left_c = &(&v0.adjoint() * rc) * &x.f;
        let left_tc = &(&vt0.adjoint() * rtc) * &x_tilde.f;
        let mut row = Vec::with_capacity(j_gens.len());
        let mut rank_row = Vec::with_capacity(j_gens.len());
        for (rd, rtd) in images.iter().zip(&images_t) {
            let lhs = &(t * &(&left_c * rd)) * &v0;
            let rhs = &(&(&left_tc * rtd) * &vt0) * t;
            let diff = &lhs - &rhs;
            let d = diff.norm().as_f64();
            max = max.max(d);
            row.push(d);
            rank_row.push(diff.rank(rel, floor));
        }
        table.push(row);
        ranks.push(rank_row);
    }
    Ok(AgreementReport {
        table,
        ranks,
        max,
        bimodule_defect,
        unitary_defect,
        pass: max <= eps,
    })
}

/// Matrix units `E_ij` at every site; they span `A`.
pub fn matrix_unit_generators<T: Real>(algebra: &SiteAlgebra) -> Vec<AlgElement<T>> {
    let mut out = Vec::new();
    for x in algebra.sites() {
        let n = algebra.block_dim(x);
        for i in 0..n {
            for j in 0..n {
                out.push(AlgElement::from_fn(algebra, |s, m| {
                    let mut b = zeros(m, m);
                    if s == x {
                        b[(i, j)] = creal(T::one());
                    }
                    b
                }));
            }
        }
    }
    out
}

/// `e_J` followed by `extra` random self-adjoint elements supported in `J`.
pub fn default_j_generators<T: Real, R: Rng + ?Sized>(
    ideal: &Ideal,
    extra: usize,
    rng: &mut R,
) -> Vec<AlgElement<T>> {
    let mut out = vec![central_projection(ideal)];
    for _ in 0..extra {
        out.push(AlgElement::random_hermitian(ideal.algebra(), rng).restrict(ideal));
    }
    out
}

/// Symmetry `2P - 1` for a projection `P`.
pub fn symmetry_from_projection<T: Real>(p: &CMatrix<T>) -> CMatrix<T> {
    p * creal(T::lit(2.0)) - identity(p.nrows())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::tests::random_rep;
    use crate::numerics::{self, haar_unitary};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `F = 2P - 1` with `P` built from the isotypic frames, so `[F, ρ(a)] = 0`.
    fn commuting_module<R: Rng>(rng: &mut R) -> KasparovModule<f64> {
        let rep = random_rep(rng);
        let blocks = rep
            .coeff()
            .sites()
            .map(|y| {
                let mut f = zeros::<f64>(rep.frame_dims()[y], rep.frame_dims()[y]);
                for x in rep.source().sites() {
                    let m = rep.multiplicity(x, y);
                    let n = rep.source().block_dim(x);
                    let q = haar_unitary::<f64, _>(m, rng);
                    let signs = CMatrix::from_fn(m, m, |i, j| {
                        if i == j {
                            creal(if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                        } else {
                            creal(0.0)
                        }
                    });
                    let s = &q * signs * q.adjoint();
                    let frame = rep.isotypic_frame(x, y);
                    // I_n ⊗ S in Kronecker order.
                    let mut ks = zeros::<f64>(n * m, n * m);
                    for i in 0..n {
                        ks.view_mut((i * m, i * m), (m, m)).copy_from(&s);
                    }
                    f += &frame * ks * frame.adjoint();
                }
                f
            })
            .collect();
        let gens = matrix_unit_generators(rep.source());
        KasparovModule::new(rep, Adjointable::new(blocks), gens).unwrap()
    }

    #[test]
    fn commuting_symmetry_has_zero_defects() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = commuting_module(&mut rng);
        let v = verify_module(&x, 1e-10).unwrap();
        assert!(v.pass);
        assert!(v.report.comm <= 1e-12 && v.report.sq <= 1e-12 && v.report.sa <= 1e-12);
    }

    #[test]
    fn zero_operator_fails_square_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = commuting_module(&mut rng);
        let zero = Adjointable::zero(x.frame_dims(), x.frame_dims());
        let y = KasparovModule::new(x.rep.clone(), zero, x.generators.clone()).unwrap();
        let v = verify_module(&y, 0.99).unwrap();
        assert_eq!(v.report.sq, 1.0);
        assert!(!v.pass);
    }

    #[test]
    fn self_agreement_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = commuting_module(&mut rng);
        let j = Ideal::new(x.source(), &[0]).unwrap();
        let gens = default_j_generators(&j, 2, &mut rng);
        let dims: Vec<usize> = overlap_frames(&x, &x, &j).0.col_dims();
        let r =
            check_agreement(&x, &x, &AgreementWitness::identity(&dims), &j, &gens, 1e-10).unwrap();
        assert!(r.pass);
        assert!(r.max <= 1e-13);
    }

    #[test]
    fn witness_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = commuting_module(&mut rng);
        let j = Ideal::new(x.source(), &[0]).unwrap();
        let dims: Vec<usize> = overlap_frames(&x, &x, &j).0.col_dims();
        let gens = default_j_generators(&j, 0, &mut rng);
        let scaled = Adjointable::<f64>::identity(&dims).scale(creal(1.1));
        assert!(matches!(
            check_agreement(&x, &x, &AgreementWitness::new(scaled), &j, &gens, 1.0),
            Err(KasparovError::TNotUnitary { .. })
        ));
        let bad_gen = vec![AlgElement::one(x.source())];
        if !j.is_whole() {
            assert!(matches!(
                check_agreement(
                    &x,
                    &x,
                    &AgreementWitness::identity(&dims),
                    &j,
                    &bad_gen,
                    1.0
                ),
                Err(KasparovError::GeneratorNotInJ { .. })
            ));
        }
    }

    #[test]
    fn non_intertwining_witness_is_rejected() {
        // Two copies of M_2 at one B-site: a unitary mixing the matrix index breaks the bimodule law.
        let alg = SiteAlgebra::new(vec![2]).unwrap();
        let coeff = SiteAlgebra::commutative(1).unwrap();
        let rep = Representation::<f64>::diagonal(&alg, &coeff, vec![vec![1]]).unwrap();
        let f = Adjointable::identity(rep.frame_dims());
        let x = KasparovModule::new(rep, f, matrix_unit_generators(&alg)).unwrap();
        let j = Ideal::whole(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary::<f64, _>(2, &mut rng);
        let gens = default_j_generators(&j, 0, &mut rng);
        assert!(matches!(
            check_agreement(
                &x,
                &x,
                &AgreementWitness::new(Adjointable::new(vec![u])),
                &j,
                &gens,
                1.0
            ),
            Err(KasparovError::TNotBimodule { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn report_invariant_under_conjugation(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base = commuting_module(&mut rng);
            // Perturb F so the defects are nonzero.
            let noise = Adjointable::new(base.frame_dims().iter()
                .map(|&d| numerics::gaussian_matrix::<f64, _>(d, d, &mut rng) * creal(0.1)).collect());
            let x = KasparovModule::new(base.rep.clone(), &base.f + &noise, base.generators.clone()).unwrap();
            let v = Adjointable::new(x.frame_dims().iter().map(|&d| haar_unitary(d, &mut rng)).collect());
            let a = x.report().unwrap();
            let b = x.conjugate(&v).unwrap().report().unwrap();
            prop_assert!((a.comm - b.comm).abs() <= 1e-10);
            prop_assert!((a.sq - b.sq).abs() <= 1e-10);
            prop_assert!((a.sa - b.sa).abs() <= 1e-10);
        }

        #[test]
        fn agreement_is_symmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = commuting_module(&mut rng);
            let noise = Adjointable::new(x.frame_dims().iter()
                .map(|&d| numerics::gaussian_matrix::<f64, _>(d, d, &mut rng)).collect());
            let y = KasparovModule::new(x.rep.clone(), &x.f + &noise, x.generators.clone()).unwrap();
            let j = Ideal::new(x.source(), &[0]).unwrap();
            let gens = default_j_generators(&j, 2, &mut rng);
            let dims: Vec<usize> = overlap_frames(&x, &y, &j).0.col_dims();
            let w = AgreementWitness::identity(&dims);
            let ab = check_agreement(&x, &y, &w, &j, &gens, 1.0).unwrap();
            let ba = check_agreement(&y, &x, &w.adjoint(), &j, &gens, 1.0).unwrap();
            for (r1, r2) in ab.table.iter().zip(&ba.table) {
                for (p, q) in r1.iter().zip(r2) {
                    prop_assert!((p - q).abs() <= 1e-12 * (1.0 + p));
                }
            }
        }
    }
}
