//! Cutting and pasting: the glued module `H⋄H̃ = (H1 ⊕ H̃2)/Δ_T`, its
//! induced action, the glued operator `ψ1Fψ1 + ψ2F̃ψ2` and the checks that the
//! result is a Kasparov module agreeing with `x` on `J1` and with `x̃` on `J2`.
//!
//! Representatives are written in frame coordinates: `ξ1 = V1 a`, `ξ2 = Ṽ2 b`
//! with `V1`, `Ṽ2` the isotypic frames of `ρ(e_{J1})H` and `ρ̃(e_{J2})H̃`. The
//! quotient is realized on the complement of the Gram kernel with
//! coordinates `C = Λ^{1/2} Q*` and lift `E = Q Λ^{-1/2}`, so an operator `L`
//! on representatives that preserves `Δ_T` descends to `C L E`.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{AlgElement, Ideal, PartitionOfUnity};
use crate::hilbert::{Adjointable, HilbertError, Representation};
use crate::kasparov::{
    check_agreement, rank_cutoffs, AgreementReport, AgreementWitness, KasparovError, KasparovModule,
};
use crate::numerics::{
    self, block2, block_diag, creal, hconcat, herm_func_calc, identity, isometry_defect, op_norm,
    tol, vconcat, zeros, CMatrix, NumericsError, Real, SpectralFn,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurgeryError {
    #[error("AgreementMissing: agreement defect {max:e} exceeds budget {eps:e}")]
    AgreementMissing { max: f64, eps: f64 },
    #[error("GramNotPSD: Gram form has eigenvalue {eigenvalue:e}")]
    GramNotPsd { eigenvalue: f64 },
    #[error("PartitionsFromDifferentIdeals: partitions must share (J1, J2)")]
    PartitionsFromDifferentIdeals,
    #[error("glued normal form inconsistent: {0}")]
    NormalForm(String),
    #[error(transparent)]
    Kasparov(#[from] KasparovError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl From<HilbertError> for SurgeryError {
    fn from(e: HilbertError) -> Self {
        SurgeryError::Kasparov(e.into())
    }
}

pub type Result<T> = std::result::Result<T, SurgeryError>;

/// `J`-generators and budget used to certify agreement before gluing.
#[derive(Clone, Debug)]
pub struct AgreementSpec<T: Real> {
    pub generators: Vec<AlgElement<T>>,
    pub eps: f64,
}

/// Per B-site data of the glued module.
#[derive(Clone, Debug)]
pub struct GluedSite<T: Real> {
    pub v1: CMatrix<T>,
    pub vt2: CMatrix<T>,
    pub v0: CMatrix<T>,
    pub vt0: CMatrix<T>,
    /// `Ṽ0 T V0*: H → H̃`.
    pub t_full: CMatrix<T>,
    pub rho_psi1: CMatrix<T>,
    pub rho_psi2: CMatrix<T>,
    pub rhot_psi1: CMatrix<T>,
    pub rhot_psi2: CMatrix<T>,
    /// Gram matrix of the B-valued form on representatives.
    pub gram: CMatrix<T>,
    /// `E = Q Λ^{-1/2}`: quotient coordinates to representatives.
    pub lift: CMatrix<T>,
    /// `C = Λ^{1/2} Q*`: representatives to quotient coordinates.
    pub coords: CMatrix<T>,
    pub kernel_dim: usize,
    pub min_eigenvalue: T,
}

impl<T: Real> GluedSite<T> {
    pub fn r1(&self) -> usize {
        self.v1.ncols()
    }

    pub fn rt2(&self) -> usize {
        self.vt2.ncols()
    }

    pub fn dim(&self) -> usize {
        self.coords.nrows()
    }

    /// `ι1: H1 → H⋄H̃` in frame coordinates.
    pub fn iota1(&self) -> CMatrix<T> {
        self.coords.columns(0, self.r1()).into_owned()
    }

    /// `ι2: H̃2 → H⋄H̃` in frame coordinates.
    pub fn iota2(&self) -> CMatrix<T> {
        self.coords.columns(self.r1(), self.rt2()).into_owned()
    }

    /// `C L E`.
    pub fn descend(&self, l: &CMatrix<T>) -> CMatrix<T> {
        &self.coords * l * &self.lift
    }

    /// Basis of `Δ_T = {(ξ, -Tξ) : ξ ∈ H0}` in representative coordinates.
    pub fn delta_basis(&self, t: &CMatrix<T>) -> CMatrix<T> {
        vconcat(&[
            &(self.v1.adjoint() * &self.v0),
            &(-(self.vt2.adjoint() * &self.vt0 * t)),
        ])
    }
}

/// `H⋄H̃` with its induced action.
#[derive(Clone, Debug)]
pub struct GluedModule<T: Real> {
    pub x: KasparovModule<T>,
    pub x_tilde: KasparovModule<T>,
    pub witness: AgreementWitness<T>,
    pub pu: PartitionOfUnity<T>,
    pub agreement: AgreementReport,
    pub sites: Vec<GluedSite<T>>,
    /// `ρ⋄ρ̃` in normal form on the quotient coordinates.
    pub rep: Representation<T>,
    /// Orthonormality defect of the glued isotypic frames before polar cleanup.
    pub normal_form_defect: f64,
}

/// Builds `H⋄H̃` after certifying agreement of `x` and `x̃` on `J = J1 ∩ J2`.
pub fn build_glued_module<T: Real>(
    x: &KasparovModule<T>,
    x_tilde: &KasparovModule<T>,
    witness: &AgreementWitness<T>,
    pu: &PartitionOfUnity<T>,
    spec: &AgreementSpec<T>,
) -> Result<GluedModule<T>> {
    let overlap = pu.overlap();
    let agreement = check_agreement(x, x_tilde, witness, &overlap, &spec.generators, spec.eps)?;
    if !agreement.pass {
        return Err(SurgeryError::AgreementMissing {
            max: agreement.max,
            eps: spec.eps,
        });
    }

    let sq = |a: &AlgElement<T>| a * a;
    let psi12 = &pu.psi1 * &pu.psi2;
    let rho = |a: &AlgElement<T>| x.rep.apply(a);
    let rhot = |a: &AlgElement<T>| x_tilde.rep.apply(a);
    let (rp1, rp2, rp11, rp22, rp12) = (
        rho(&pu.psi1)?,
        rho(&pu.psi2)?,
        rho(&sq(&pu.psi1))?,
        rho(&sq(&pu.psi2))?,
        rho(&psi12)?,
    );
    let (tp1, tp2, tp11, tp22, tp12) = (
        rhot(&pu.psi1)?,
        rhot(&pu.psi2)?,
        rhot(&sq(&pu.psi1))?,
        rhot(&sq(&pu.psi2))?,
        rhot(&psi12)?,
    );

    let two = creal(T::lit(2.0));
    let mut sites = Vec::with_capacity(x.rep.coeff().num_sites());
    for y in 0..x.rep.coeff().num_sites() {
        let v1 = x.rep.support_frame(&pu.j1, y);
        let vt2 = x_tilde.rep.support_frame(&pu.j2, y);
        let v0 = x.rep.support_frame(&overlap, y);
        let vt0 = x_tilde.rep.support_frame(&overlap, y);
        let t_full = &vt0 * witness.t.block(y) * v0.adjoint();
        let t_adj = t_full.adjoint();

        let m1 = hconcat(&[&(rp11.block(y) * &v1), &(&t_adj * tp11.block(y) * &vt2)]);
        let m2 = hconcat(&[&(&t_full * rp22.block(y) * &v1), &(tp22.block(y) * &vt2)]);
        let m12 = hconcat(&[&(rp12.block(y) * &v1), &(&t_adj * tp12.block(y) * &vt2)]);
        let gram = numerics::hermitian_part(
            &(m1.adjoint() * &m1 + m2.adjoint() * &m2 + m12.adjoint() * &m12 * two),
        );
        let quotient =
            numerics::psd_quotient_basis(&gram, T::tol(tol::GRAM_KERNEL)).map_err(|e| match e {
                NumericsError::NotPsd { eigenvalue, .. } => SurgeryError::GramNotPsd { eigenvalue },
                other => other.into(),
            })?;
        let min_eigenvalue = numerics::hermitian_eigen(&gram)?
            .values
            .first()
            .copied()
            .unwrap_or_else(T::zero);
        let mut lift = quotient.basis.clone();
        let mut coords = quotient.basis.adjoint();
        for (j, &lambda) in quotient.values.iter().enumerate() {
            let s = lambda.sqrt();
            lift.column_mut(j).scale_mut(T::one() / s);
            coords.row_mut(j).scale_mut(s);
        }
        sites.push(GluedSite {
            v1,
            vt2,
            v0,
            vt0,
            t_full,
            rho_psi1: rp1.block(y).clone(),
            rho_psi2: rp2.block(y).clone(),
            rhot_psi1: tp1.block(y).clone(),
            rhot_psi2: tp2.block(y).clone(),
            gram,
            lift,
            coords,
            kernel_dim: quotient.kernel.ncols(),
            min_eigenvalue,
        });
    }

    let (rep, normal_form_defect) = glued_normal_form(x, x_tilde, pu, &sites)?;
    Ok(GluedModule {
        x: x.clone(),
        x_tilde: x_tilde.clone(),
        witness: witness.clone(),
        pu: pu.clone(),
        agreement,
        sites,
        rep,
        normal_form_defect,
    })
}

/// Isotypic frames of `ρ⋄ρ̃`: `ι1` of the `H1` frames for `x ∈ S1`, `ι2` of the
/// `H̃2` frames for `x ∈ S2 \ S1`.
fn glued_normal_form<T: Real>(
    x: &KasparovModule<T>,
    x_tilde: &KasparovModule<T>,
    pu: &PartitionOfUnity<T>,
    sites: &[GluedSite<T>],
) -> Result<(Representation<T>, f64)> {
    let source = x.source();
    let coeff = x.rep.coeff();
    let mut multiplicities = vec![vec![0; coeff.num_sites()]; source.num_sites()];
    let mut frames = Vec::with_capacity(sites.len());
    let mut defect = T::zero();
    for (y, site) in sites.iter().enumerate() {
        let (mut off1, mut off2) = (0, 0);
        let mut per_x = Vec::with_capacity(source.num_sites());
        for s in source.sites() {
            let n = source.block_dim(s);
            let frame = if pu.j1.contains(s) {
                let m = x.rep.multiplicity(s, y);
                multiplicities[s][y] = m;
                let f = site.coords.columns(off1, n * m).into_owned();
                off1 += n * m;
                if pu.j2.contains(s) {
                    off2 += n * x_tilde.rep.multiplicity(s, y);
                }
                f
            } else if pu.j2.contains(s) {
                let m = x_tilde.rep.multiplicity(s, y);
                multiplicities[s][y] = m;
                let f = site.coords.columns(site.r1() + off2, n * m).into_owned();
                off2 += n * m;
                f
            } else {
                zeros(site.dim(), 0)
            };
            per_x.push(frame);
        }
        let refs: Vec<&CMatrix<T>> = per_x.iter().collect();
        let raw = hconcat(&refs);
        if raw.ncols() != site.dim() {
            return Err(SurgeryError::NormalForm(format!(
                "B-site {y}: {} isotypic columns for a {}-dimensional quotient",
                raw.ncols(),
                site.dim()
            )));
        }
        defect = defect.max(isometry_defect(&raw));
        // Polar cleanup: nearest unitary to the raw frame matrix.
        let fix = herm_func_calc(
            &numerics::hermitian_part(&(raw.adjoint() * &raw)),
            SpectralFn::InvSqrt,
        )?;
        let clean = &raw * fix;
        let mut col = 0;
        let mut cleaned = Vec::with_capacity(per_x.len());
        for f in &per_x {
            cleaned.push(clean.columns(col, f.ncols()).into_owned());
            col += f.ncols();
        }
        frames.push(cleaned);
    }
    let rep = Representation::from_isotypic_frames(source, coeff, multiplicities, &frames)?;
    Ok((rep, defect.as_f64()))
}

impl<T: Real> GluedModule<T> {
    pub fn frame_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.dim()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.sites.iter().map(|s| s.dim()).sum()
    }

    /// Applies `C L_y E` per B-site.
    pub fn descend(&self, l: &[CMatrix<T>]) -> Adjointable<T> {
        Adjointable::new(
            self.sites
                .iter()
                .zip(l)
                .map(|(s, l)| s.descend(l))
                .collect(),
        )
    }

    /// `diag(V1* ρ(φ) V1, Ṽ2* ρ̃(φ) Ṽ2)` on representatives.
    pub fn action_on_representatives(&self, phi: &AlgElement<T>) -> Result<Vec<CMatrix<T>>> {
        let r = self.x.rep.apply(phi)?;
        let rt = self.x_tilde.rep.apply(phi)?;
        Ok(self
            .sites
            .iter()
            .enumerate()
            .map(|(y, s)| {
                block_diag(&[
                    &(s.v1.adjoint() * r.block(y) * &s.v1),
                    &(s.vt2.adjoint() * rt.block(y) * &s.vt2),
                ])
            })
            .collect())
    }

    /// Representative-level glued operator for the symmetries `f`, `f_tilde`.
    pub fn operator_on_representatives(
        &self,
        f: &Adjointable<T>,
        f_tilde: &Adjointable<T>,
    ) -> Vec<CMatrix<T>> {
        self.sites
            .iter()
            .enumerate()
            .map(|(y, s)| {
                let (f, ft) = (f.block(y), f_tilde.block(y));
                let left = s.v1.adjoint() * &s.rho_psi1 * f;
                let right = s.vt2.adjoint() * &s.rhot_psi2 * ft;
                block2(
                    &(&left * &s.rho_psi1 * &s.v1),
                    &(&left * s.t_full.adjoint() * &s.rhot_psi1 * &s.vt2),
                    &(&right * &s.t_full * &s.rho_psi2 * &s.v1),
                    &(&right * &s.rhot_psi2 * &s.vt2),
                )
            })
            .collect()
    }

    /// `ι1` per B-site.
    pub fn iota1(&self) -> Adjointable<T> {
        Adjointable::new(self.sites.iter().map(|s| s.iota1()).collect())
    }

    pub fn iota2(&self) -> Adjointable<T> {
        Adjointable::new(self.sites.iter().map(|s| s.iota2()).collect())
    }

    /// Quotient dimension predicted by inclusion-exclusion: `dim H1 + dim H̃2 - dim H0`.
    pub fn expected_dim(&self) -> usize {
        self.sites
            .iter()
            .map(|s| s.r1() + s.rt2() - s.v0.ncols())
            .sum()
    }

    pub fn quotient_report(&self) -> QuotientReport {
        let mut r = QuotientReport {
            gram_min_eigenvalue: f64::INFINITY,
            kernel_dim: 0,
            dim_h0: 0,
            quotient_dim: self.total_dim(),
            expected_dim: self.expected_dim(),
            iota1_isometry: 0.0,
            iota2_isometry: 0.0,
            delta_gram_norm: 0.0,
            overlap_consistency: 0.0,
            span_rank: 0,
            normal_form_defect: self.normal_form_defect,
        };
        for (y, s) in self.sites.iter().enumerate() {
            let t = self.witness.t.block(y);
            r.gram_min_eigenvalue = r.gram_min_eigenvalue.min(s.min_eigenvalue.as_f64());
            r.kernel_dim += s.kernel_dim;
            r.dim_h0 += s.v0.ncols();
            r.iota1_isometry = r.iota1_isometry.max(isometry_defect(&s.iota1()).as_f64());
            r.iota2_isometry = r.iota2_isometry.max(isometry_defect(&s.iota2()).as_f64());
            let d = s.delta_basis(t);
            r.delta_gram_norm = r
                .delta_gram_norm
                .max(op_norm(&(d.adjoint() * &s.gram * &d)).as_f64());
            // ι1(ξ) = ι2(Tξ) for ξ ∈ H0.
            let lhs = s.iota1() * s.v1.adjoint() * &s.v0;
            let rhs = s.iota2() * s.vt2.adjoint() * &s.vt0 * t;
            r.overlap_consistency = r.overlap_consistency.max(op_norm(&(lhs - rhs)).as_f64());
            r.span_rank += numerics::numerical_rank(&s.coords, T::tol(tol::RANK));
        }
        if self.sites.is_empty() {
            r.gram_min_eigenvalue = 0.0;
        }
        r
    }
}

/// Gram-form, kernel and embedding checks of the glued module.
#[derive(Clone, Debug, Serialize)]
pub struct QuotientReport {
    pub gram_min_eigenvalue: f64,
    pub kernel_dim: usize,
    pub dim_h0: usize,
    pub quotient_dim: usize,
    pub expected_dim: usize,
    pub iota1_isometry: f64,
    pub iota2_isometry: f64,
    /// `‖D* G D‖` for an orthonormal basis `D` of `Δ_T`.
    pub delta_gram_norm: f64,
    /// `‖ι1|H0 - ι2 T|H0‖`.
    pub overlap_consistency: f64,
    /// Rank of `[ι1, ι2]`; equals the quotient dimension when they span.
    pub span_rank: usize,
    pub normal_form_defect: f64,
}

/// `(ρ⋄ρ̃)(φ)` computed on representatives and pushed to the quotient.
pub fn glued_action<T: Real>(gm: &GluedModule<T>, phi: &AlgElement<T>) -> Result<Adjointable<T>> {
    Ok(gm.descend(&gm.action_on_representatives(phi)?))
}

/// `F⋄F̃ = ψ1Fψ1 + ψ2F̃ψ2` on the quotient.
pub fn glued_operator<T: Real>(
    gm: &GluedModule<T>,
    f: &Adjointable<T>,
    f_tilde: &Adjointable<T>,
) -> Adjointable<T> {
    gm.descend(&gm.operator_on_representatives(f, f_tilde))
}

/// `x⋄x̃` as a Kasparov module, using the generator list of `x`.
pub fn build_diamond<T: Real>(
    x: &KasparovModule<T>,
    x_tilde: &KasparovModule<T>,
    witness: &AgreementWitness<T>,
    pu: &PartitionOfUnity<T>,
    spec: &AgreementSpec<T>,
) -> Result<(GluedModule<T>, KasparovModule<T>)> {
    let gm = build_glued_module(x, x_tilde, witness, pu, spec)?;
    let f = glued_operator(&gm, &x.f, &x_tilde.f);
    let diamond = KasparovModule::new(gm.rep.clone(), f, x.generators.clone())?;
    Ok((gm, diamond))
}

/// Norm and rank of `F⋄F̃(pu) - F⋄F̃(pu')` on the common quotient `R/Δ_T`.
#[derive(Clone, Debug, Serialize)]
pub struct IndependenceReport {
    pub norm: f64,
    pub rank: usize,
    /// The same difference measured in the coordinates of `pu'`.
    pub norm_prime: f64,
    pub rank_prime: usize,
}

impl IndependenceReport {
    pub fn max_norm(&self) -> f64 {
        self.norm.max(self.norm_prime)
    }
}

pub fn partition_independence<T: Real>(
    x: &KasparovModule<T>,
    x_tilde: &KasparovModule<T>,
    witness: &AgreementWitness<T>,
    pu: &PartitionOfUnity<T>,
    pu_prime: &PartitionOfUnity<T>,
    spec: &AgreementSpec<T>,
) -> Result<IndependenceReport> {
    if pu.j1 != pu_prime.j1 || pu.j2 != pu_prime.j2 {
        return Err(SurgeryError::PartitionsFromDifferentIdeals);
    }
    let a = build_glued_module(x, x_tilde, witness, pu, spec)?;
    let b = build_glued_module(x, x_tilde, witness, pu_prime, spec)?;
    let la = a.operator_on_representatives(&x.f, &x_tilde.f);
    let lb = b.operator_on_representatives(&x.f, &x_tilde.f);
    let diff: Vec<CMatrix<T>> = la.iter().zip(&lb).map(|(p, q)| p - q).collect();
    let in_a = a.descend(&diff);
    let in_b = b.descend(&diff);
    let (rel, floor) = rank_cutoffs::<T>();
    Ok(IndependenceReport {
        norm: in_a.norm().as_f64(),
        rank: in_a.rank(rel, floor),
        norm_prime: in_b.norm().as_f64(),
        rank_prime: in_b.rank(rel, floor),
    })
}

/// Witness identifying `(H⋄H̃)_{J1}` with `H1` through `ι1`.
pub fn witness_via_iota1<T: Real>(gm: &GluedModule<T>) -> AgreementWitness<T> {
    let t = (0..gm.sites.len())
        .map(|y| gm.rep.support_frame(&gm.pu.j1, y).adjoint() * gm.sites[y].iota1());
    AgreementWitness::new(Adjointable::new(t.collect()))
}

/// Witness identifying `(H⋄H̃)_{J2}` with `H̃2` through `ι2`.
pub fn witness_via_iota2<T: Real>(gm: &GluedModule<T>) -> AgreementWitness<T> {
    let t = (0..gm.sites.len())
        .map(|y| gm.rep.support_frame(&gm.pu.j2, y).adjoint() * gm.sites[y].iota2());
    AgreementWitness::new(Adjointable::new(t.collect()))
}

/// Agreement of `x⋄x̃` with `x` on `J1` and with `x̃` on `J2`.
pub fn diamond_agreement<T: Real>(
    gm: &GluedModule<T>,
    diamond: &KasparovModule<T>,
    j1_gens: &[AlgElement<T>],
    j2_gens: &[AlgElement<T>],
    eps: f64,
) -> Result<(AgreementReport, AgreementReport)> {
    let first = check_agreement(
        &gm.x,
        diamond,
        &witness_via_iota1(gm),
        &gm.pu.j1,
        j1_gens,
        eps,
    )?;
    let second = check_agreement(
        &gm.x_tilde,
        diamond,
        &witness_via_iota2(gm),
        &gm.pu.j2,
        j2_gens,
        eps,
    )?;
    Ok((first, second))
}

/// Dimensions and defects of a glued module, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct GluedSummary {
    pub dim_h1: usize,
    pub dim_h2_tilde: usize,
    pub dim_h0: usize,
    pub quotient_dim: usize,
    pub agreement_max: f64,
    pub quotient: QuotientReport,
}

impl<T: Real> GluedModule<T> {
    pub fn summary(&self) -> GluedSummary {
        GluedSummary {
            dim_h1: self.sites.iter().map(|s| s.r1()).sum(),
            dim_h2_tilde: self.sites.iter().map(|s| s.rt2()).sum(),
            dim_h0: self.sites.iter().map(|s| s.v0.ncols()).sum(),
            quotient_dim: self.total_dim(),
            agreement_max: self.agreement.max,
            quotient: self.quotient_report(),
        }
    }
}

/// Identity on `dims` as an agreement witness over `ideal` for `x` with itself.
pub fn self_witness<T: Real>(x: &KasparovModule<T>, ideal: &Ideal) -> AgreementWitness<T> {
    let dims: Vec<usize> = (0..x.rep.coeff().num_sites())
        .map(|y| x.rep.support_frame(ideal, y).ncols())
        .collect();
    AgreementWitness::new(Adjointable::new(
        dims.iter().map(|&d| identity(d)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kasparov::verify_module;
    use crate::models::{
        circle_toeplitz, random_exact_scenario, CircleOptions, ExactParams, Scenario,
    };

    fn spec(s: &Scenario<f64>) -> AgreementSpec<f64> {
        AgreementSpec {
            generators: s.j_gens.clone(),
            eps: s.budgets.eq4,
        }
    }

    fn glue(s: &Scenario<f64>) -> GluedModule<f64> {
        build_glued_module(&s.x, &s.x_tilde, &s.witness, &s.pu, &spec(s)).unwrap()
    }

    fn assert_quotient(r: &QuotientReport, tol: f64) {
        assert!(r.gram_min_eigenvalue >= -tol, "{r:?}");
        assert_eq!(r.kernel_dim, r.dim_h0, "{r:?}");
        assert_eq!(r.quotient_dim, r.expected_dim, "{r:?}");
        assert_eq!(r.span_rank, r.quotient_dim, "{r:?}");
        assert!(r.iota1_isometry <= tol && r.iota2_isometry <= tol, "{r:?}");
        assert!(
            r.delta_gram_norm <= tol && r.overlap_consistency <= tol,
            "{r:?}"
        );
    }

    #[test]
    fn self_gluing_reproduces_the_module() {
        let s = random_exact_scenario::<f64>(4, &ExactParams::default()).unwrap();
        let witness = self_witness(&s.x, &s.overlap());
        let (gm, d) = build_diamond(&s.x, &s.x, &witness, &s.pu, &spec(&s)).unwrap();
        assert_eq!(gm.total_dim(), s.x.frame_dims().iter().sum::<usize>());
        assert_quotient(&gm.quotient_report(), 1e-10);
        let r = d.report().unwrap();
        assert!(r.comm <= 1e-10 && r.sq <= 1e-10 && r.sa <= 1e-10, "{r:?}");
    }

    #[test]
    fn exact_scenarios_satisfy_quotient_identities() {
        for seed in 0..10 {
            let s = random_exact_scenario::<f64>(seed, &ExactParams::default()).unwrap();
            let gm = glue(&s);
            assert_quotient(&gm.quotient_report(), 1e-10);
            assert!(
                gm.normal_form_defect <= 1e-10,
                "seed {seed}: {}",
                gm.normal_form_defect
            );
        }
    }

    #[test]
    fn glued_action_is_a_representation() {
        let s = random_exact_scenario::<f64>(11, &ExactParams::default()).unwrap();
        let gm = glue(&s);
        let one = glued_action(&gm, &AlgElement::one(&s.algebra)).unwrap();
        assert!((&one - &Adjointable::identity(&gm.frame_dims())).norm() <= 1e-12);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        let a = AlgElement::random(&s.algebra, &mut rng);
        let b = AlgElement::random(&s.algebra, &mut rng);
        let ga = glued_action(&gm, &a).unwrap();
        let gb = glued_action(&gm, &b).unwrap();
        let gab = glued_action(&gm, &(&a * &b)).unwrap();
        assert!((&gab - &(&ga * &gb)).norm() <= 1e-10);
        assert!((&glued_action(&gm, &a.adjoint()).unwrap() - &ga.adjoint()).norm() <= 1e-10);
        // The normal form reproduces the generic quotient action.
        assert!((&gm.rep.apply(&a).unwrap() - &ga).norm() <= 1e-10);
    }

    #[test]
    fn j1_elements_act_inside_iota1() {
        let s = random_exact_scenario::<f64>(12, &ExactParams::default()).unwrap();
        let gm = glue(&s);
        let e1 = crate::algebra::central_projection(&s.pu.j1);
        let ge = glued_action(&gm, &e1).unwrap();
        for (y, site) in gm.sites.iter().enumerate() {
            let i1 = site.iota1();
            // ρ⋄(e_{J1}) is the projection onto ran ι1.
            let proj = &i1 * i1.adjoint();
            assert!(op_norm(&(ge.block(y) - proj)) <= 1e-10);
        }
    }

    #[test]
    fn unit_symmetries_glue_to_unit() {
        let s = random_exact_scenario::<f64>(13, &ExactParams::default()).unwrap();
        let gm = glue(&s);
        let one = Adjointable::identity(s.x.frame_dims());
        let one_t = Adjointable::identity(s.x_tilde.frame_dims());
        let f = glued_operator(&gm, &one, &one_t);
        assert!((&f - &Adjointable::identity(&gm.frame_dims())).norm() <= 1e-10);
    }

    #[test]
    fn exact_diamond_is_a_module_agreeing_with_both_inputs() {
        for seed in 20..26 {
            let s = random_exact_scenario::<f64>(seed, &ExactParams::default()).unwrap();
            let (gm, d) = build_diamond(&s.x, &s.x_tilde, &s.witness, &s.pu, &spec(&s)).unwrap();
            assert!(verify_module(&d, 1e-10).unwrap().pass, "seed {seed}");
            let (a1, a2) = diamond_agreement(&gm, &d, &s.j1_gens, &s.j2_gens, 1e-10).unwrap();
            assert!(a1.pass && a2.pass, "seed {seed}: {} {}", a1.max, a2.max);
        }
    }

    #[test]
    fn exact_partition_independence() {
        let s = random_exact_scenario::<f64>(30, &ExactParams::default()).unwrap();
        let alt = s.alt_pu.as_ref().unwrap();
        let same =
            partition_independence(&s.x, &s.x_tilde, &s.witness, &s.pu, &s.pu, &spec(&s)).unwrap();
        assert_eq!(same.max_norm(), 0.0);
        let r =
            partition_independence(&s.x, &s.x_tilde, &s.witness, &s.pu, alt, &spec(&s)).unwrap();
        assert!(r.max_norm() <= 1e-10, "{r:?}");
    }

    #[test]
    fn partitions_must_share_ideals() {
        let s = random_exact_scenario::<f64>(31, &ExactParams::default()).unwrap();
        let whole = Ideal::whole(&s.algebra);
        let other = crate::algebra::partition_of_unity(&s.algebra, &whole, &s.pu.j2, None).unwrap();
        let e = partition_independence(&s.x, &s.x_tilde, &s.witness, &s.pu, &other, &spec(&s))
            .unwrap_err();
        assert_eq!(e, SurgeryError::PartitionsFromDifferentIdeals);
    }

    #[test]
    fn disagreeing_modules_are_not_glued() {
        let s = random_exact_scenario::<f64>(32, &ExactParams::default()).unwrap();
        let flipped = KasparovModule::new(
            s.x_tilde.rep.clone(),
            -&s.x_tilde.f,
            s.x_tilde.generators.clone(),
        )
        .unwrap();
        let e = build_glued_module(&s.x, &flipped, &s.witness, &s.pu, &spec(&s)).unwrap_err();
        assert!(matches!(e, SurgeryError::AgreementMissing { .. }), "{e:?}");
    }

    fn sorted_spectrum(m: &CMatrix<f64>) -> Vec<f64> {
        numerics::hermitian_eigen(&numerics::hermitian_part(m))
            .unwrap()
            .values
            .to_vec()
    }

    #[test]
    fn gluing_is_symmetric_under_swapped_partition() {
        let s = random_exact_scenario::<f64>(33, &ExactParams::default()).unwrap();
        let (gm, d) = build_diamond(&s.x, &s.x_tilde, &s.witness, &s.pu, &spec(&s)).unwrap();
        let swapped = s.pu.swapped();
        let (gm_t, d_t) =
            build_diamond(&s.x_tilde, &s.x, &s.witness.adjoint(), &swapped, &spec(&s)).unwrap();
        assert_eq!(gm.frame_dims(), gm_t.frame_dims());
        for y in 0..gm.sites.len() {
            let (a, b) = (
                sorted_spectrum(d.f.block(y)),
                sorted_spectrum(d_t.f.block(y)),
            );
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() <= 1e-10));
        }
        let (r, rt) = (d.report().unwrap(), d_t.report().unwrap());
        assert!((r.comm - rt.comm).abs() <= 1e-10 && (r.sq - rt.sq).abs() <= 1e-10);
    }

    #[test]
    fn toeplitz_gluing_within_budget() {
        let s = circle_toeplitz::<f64>(32, 1, -1, &CircleOptions::default()).unwrap();
        let (gm, d) = build_diamond(&s.x, &s.x_tilde, &s.witness, &s.pu, &spec(&s)).unwrap();
        assert_quotient(&gm.quotient_report(), 1e-10);
        assert_eq!(gm.total_dim(), 32);
        assert!(verify_module_with_budget(&d, &s));
        let (a1, a2) = diamond_agreement(&gm, &d, &s.j1_gens, &s.j2_gens, s.budgets.eq4).unwrap();
        assert!(a1.pass && a2.pass, "{} {}", a1.max, a2.max);
    }

    fn verify_module_with_budget(d: &KasparovModule<f64>, s: &Scenario<f64>) -> bool {
        crate::kasparov::verify_module_with(d, &s.budgets.eq2)
            .unwrap()
            .pass
    }
}
