//! The unitary `U: H ⊕ H̃ → (H⋄H̃) ⊕ (H̃⋄H)`, the matrix action `ρ̂`, the
//! path `ρ̂_t` joining `ρ ⊕ ρ̃` to `ρ̂`, and the aggregated verdict that
//! `[x] + [x̃] = [x⋄x̃] + [x̃⋄x]` holds at the level a finite model supports.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{ideal_distance, AlgElement, AlgebraError, Ideal, PartitionOfUnity};
use crate::hilbert::{Adjointable, HilbertError};
use crate::kasparov::{rank_cutoffs, AgreementWitness, KasparovError, KasparovModule};
use crate::models::{local_index_pairings, ModelError, Scenario, Window};
use crate::numerics::{self, block2, creal, hconcat, vconcat, CMatrix, Real};
use crate::surgery::{build_diamond, AgreementSpec, GluedModule, SurgeryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomotopyError {
    #[error("GluedModulesInconsistent: {0}")]
    GluedModulesInconsistent(String),
    #[error("OffDiagonalNotInJ: ψ2aψ1 - ψ1aψ2 is {distance:e} away from J")]
    OffDiagonalNotInJ { distance: f64 },
    #[error("TOutOfRange: t = {t} is not in [0, 1]")]
    TOutOfRange { t: f64 },
    #[error("invalid sample grid: {0}")]
    InvalidSamples(String),
    #[error(transparent)]
    Surgery(#[from] SurgeryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kasparov(#[from] KasparovError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

impl From<HilbertError> for HomotopyError {
    fn from(e: HilbertError) -> Self {
        HomotopyError::Kasparov(e.into())
    }
}

pub type Result<T> = std::result::Result<T, HomotopyError>;

/// `H ⊕ H̃` with the operators of `x` and `x̃` and the overlap identification
/// `Ṽ0 T V0*` needed by the off-diagonal entries of `ρ̂`.
#[derive(Clone, Debug)]
pub struct SumModule<T: Real> {
    pub x: KasparovModule<T>,
    pub x_tilde: KasparovModule<T>,
    pub witness: AgreementWitness<T>,
    pub pu: PartitionOfUnity<T>,
    overlap: Ideal,
    t_full: Vec<CMatrix<T>>,
}

impl<T: Real> SumModule<T> {
    pub fn new(
        x: &KasparovModule<T>,
        x_tilde: &KasparovModule<T>,
        witness: &AgreementWitness<T>,
        pu: &PartitionOfUnity<T>,
    ) -> Self {
        let overlap = pu.overlap();
        let t_full = (0..x.rep.coeff().num_sites())
            .map(|y| {
                x_tilde.rep.support_frame(&overlap, y)
                    * witness.t.block(y)
                    * x.rep.support_frame(&overlap, y).adjoint()
            })
            .collect();
        Self {
            x: x.clone(),
            x_tilde: x_tilde.clone(),
            witness: witness.clone(),
            pu: pu.clone(),
            overlap,
            t_full,
        }
    }

    pub fn frame_dims(&self) -> Vec<usize> {
        self.x
            .frame_dims()
            .iter()
            .zip(self.x_tilde.frame_dims())
            .map(|(a, b)| a + b)
            .collect()
    }

    /// `F ⊕ F̃`.
    pub fn f(&self) -> Adjointable<T> {
        self.x.f.direct_sum(&self.x_tilde.f)
    }

    /// `(ρ ⊕ ρ̃)(a)`.
    pub fn direct_action(&self, a: &AlgElement<T>) -> Result<Adjointable<T>> {
        Ok(self.x.rep.apply(a)?.direct_sum(&self.x_tilde.rep.apply(a)?))
    }

    /// `ρ̂(a)`.
    pub fn rho_hat(&self, a: &AlgElement<T>) -> Result<Adjointable<T>> {
        self.matrix_action(a, &self.pu.psi1, &self.pu.psi2)
    }

    /// `ρ̂_t(a)` with `ψ1t = tψ1`, `ψ2t = (1 - t²ψ1²)^{1/2}`.
    pub fn rho_hat_t(&self, a: &AlgElement<T>, t: T) -> Result<Adjointable<T>> {
        let (p1, p2) = deformed(&self.pu, t)?;
        self.matrix_action(a, &p1, &p2)
    }

    /// `[[p, c], [-c, p]]` with `p = ψ1aψ1 + ψ2aψ2`, `c = ψ2aψ1 - ψ1aψ2`; the
    /// off-diagonal entries pass through `H0` via `T`.
    fn matrix_action(
        &self,
        a: &AlgElement<T>,
        p1: &AlgElement<T>,
        p2: &AlgElement<T>,
    ) -> Result<Adjointable<T>> {
        let p = &AlgElement::sandwich(p1, a, p1) + &AlgElement::sandwich(p2, a, p2);
        let c = &AlgElement::sandwich(p2, a, p1) - &AlgElement::sandwich(p1, a, p2);
        let distance = ideal_distance(&c, &self.overlap)?.as_f64();
        if distance > 0.0 {
            return Err(HomotopyError::OffDiagonalNotInJ { distance });
        }
        let (rp, rtp) = (self.x.rep.apply(&p)?, self.x_tilde.rep.apply(&p)?);
        let (rc, rtc) = (self.x.rep.apply(&c)?, self.x_tilde.rep.apply(&c)?);
        Ok(Adjointable::new(
            self.t_full
                .iter()
                .enumerate()
                .map(|(y, t)| {
                    block2(
                        rp.block(y),
                        &(t.adjoint() * rtc.block(y)),
                        &(-(t * rc.block(y))),
                        rtp.block(y),
                    )
                })
                .collect(),
        ))
    }
}

fn deformed<T: Real>(pu: &PartitionOfUnity<T>, t: T) -> Result<(AlgElement<T>, AlgElement<T>)> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(HomotopyError::TOutOfRange { t: t.as_f64() });
    }
    Ok(pu.deformed(t)?)
}

/// Residuals of `ψ2t a ψ1t - ψ1t a ψ2t ≡ t√(1-t²)[a, ψ1] mod J`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ModJResidual {
    /// Distance of the difference of both sides from `J`.
    pub residual: f64,
    /// Distance of `[a, ψ1]` from `J`.
    pub commutator_distance: f64,
}

pub fn modj_identity_check<T: Real>(
    a: &AlgElement<T>,
    t: T,
    pu: &PartitionOfUnity<T>,
) -> Result<ModJResidual> {
    let (p1, p2) = deformed(pu, t)?;
    let lhs = &AlgElement::sandwich(&p2, a, &p1) - &AlgElement::sandwich(&p1, a, &p2);
    let comm = a.commutator(&pu.psi1);
    let coef = t * (T::one() - t * t).max(T::zero()).sqrt();
    let rhs = comm.scale(creal(coef));
    let overlap = pu.overlap();
    Ok(ModJResidual {
        residual: ideal_distance(&(&lhs - &rhs), &overlap)?.as_f64(),
        commutator_distance: ideal_distance(&comm, &overlap)?.as_f64(),
    })
}

/// `U(ξ, η) = ([ψ1ξ, ψ2η], [ψ1η, -ψ2ξ])` in the quotient coordinates of
/// `gm_xy = H⋄H̃` and `gm_yx = H̃⋄H`.
pub fn build_u<T: Real>(
    sum: &SumModule<T>,
    gm_xy: &GluedModule<T>,
    gm_yx: &GluedModule<T>,
) -> Result<Adjointable<T>> {
    let same = |a: &KasparovModule<T>, b: &KasparovModule<T>| a.rep == b.rep && a.f == b.f;
    let same_pu = |p: &PartitionOfUnity<T>| {
        p.psi1 == sum.pu.psi1 && p.psi2 == sum.pu.psi2 && p.j1 == sum.pu.j1
    };
    if !(same(&gm_xy.x, &sum.x) && same(&gm_xy.x_tilde, &sum.x_tilde)) {
        return Err(HomotopyError::GluedModulesInconsistent(
            "H⋄H̃ was built from other modules".into(),
        ));
    }
    if !(same(&gm_yx.x, &sum.x_tilde) && same(&gm_yx.x_tilde, &sum.x)) {
        return Err(HomotopyError::GluedModulesInconsistent(
            "H̃⋄H is not the mirror of H⋄H̃".into(),
        ));
    }
    if !(same_pu(&gm_xy.pu) && same_pu(&gm_yx.pu)) {
        return Err(HomotopyError::GluedModulesInconsistent(
            "partitions of unity differ".into(),
        ));
    }
    if gm_xy.witness != sum.witness || gm_yx.witness != sum.witness.adjoint() {
        return Err(HomotopyError::GluedModulesInconsistent(
            "witnesses are not T and T*".into(),
        ));
    }
    let blocks = gm_xy
        .sites
        .iter()
        .zip(&gm_yx.sites)
        .map(|(a, b)| {
            let top = hconcat(&[
                &(a.iota1() * a.v1.adjoint() * &a.rho_psi1),
                &(a.iota2() * a.vt2.adjoint() * &a.rhot_psi2),
            ]);
            let bottom = hconcat(&[
                &(-(b.iota2() * b.vt2.adjoint() * &b.rhot_psi2)),
                &(b.iota1() * b.v1.adjoint() * &b.rho_psi1),
            ]);
            vconcat(&[&top, &bottom])
        })
        .collect();
    Ok(Adjointable::new(blocks))
}

/// `max(‖U*U - I‖, ‖UU* - I‖)`, infinite when `U` is not square.
pub fn unitary_defect<T: Real>(u: &Adjointable<T>) -> f64 {
    u.blocks.iter().fold(0.0, |acc, b| {
        acc.max(numerics::unitarity_defect(b).as_f64())
    })
}

/// `‖U(F⊕F̃)U* - (F⋄F̃)⊕(F̃⋄F)‖` and its numerical rank.
pub fn conjugation_defect<T: Real>(
    u: &Adjointable<T>,
    sum: &SumModule<T>,
    diamond_xy: &KasparovModule<T>,
    diamond_yx: &KasparovModule<T>,
) -> (f64, usize) {
    let lhs = &(u * &sum.f()) * &u.adjoint();
    let d = &lhs - &diamond_xy.f.direct_sum(&diamond_yx.f);
    let (rel, floor) = rank_cutoffs::<T>();
    (d.norm().as_f64(), d.rank(rel, floor))
}

/// `max_a ‖U ρ̂(a) - ((ρ⋄ρ̃) ⊕ (ρ̃⋄ρ))(a) U‖` over the given elements.
pub fn intertwining_defect<T: Real>(
    u: &Adjointable<T>,
    sum: &SumModule<T>,
    gm_xy: &GluedModule<T>,
    gm_yx: &GluedModule<T>,
    elements: &[AlgElement<T>],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for a in elements {
        let glued = gm_xy.rep.apply(a)?.direct_sum(&gm_yx.rep.apply(a)?);
        let d = &(u * &sum.rho_hat(a)?) - &(&glued * u);
        worst = worst.max(d.norm().as_f64());
    }
    Ok(worst)
}

/// Uniform grid of `n ≥ 2` points on `[0, 1]` with exact endpoints.
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(HomotopyError::InvalidSamples(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    Ok((0..n)
        .map(|k| {
            if k + 1 == n {
                1.0
            } else {
                k as f64 / (n - 1) as f64
            }
        })
        .collect())
}

pub const DEFAULT_SAMPLES: usize = 41;

/// Defects of `ρ̂_t` at one sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PathSample {
    pub t: f64,
    /// `‖ψ1t² + ψ2t² - 1‖`.
    pub partition_sum: f64,
    /// `‖[ψ1t, ψ2t]‖`.
    pub partition_commutator: f64,
    /// `max ‖ρ̂_t(ab) - ρ̂_t(a)ρ̂_t(b)‖` over generator pairs.
    pub homomorphism: f64,
    /// `max ‖ρ̂_t(a)* - ρ̂_t(a*)‖`.
    pub adjoint: f64,
    /// `‖ρ̂_t(1) - 1‖`.
    pub unital: f64,
    /// `max ‖[ρ̂_t(a), F⊕F̃]‖`.
    pub commutator: f64,
    pub modj: ModJResidual,
}

/// Sampled homotopy `t ↦ ρ̂_t` over a generator list.
#[derive(Clone, Debug, Serialize)]
pub struct HomotopyPath {
    pub samples: Vec<PathSample>,
    /// `ρ̂_0 = ρ ⊕ ρ̃` and `ρ̂_1 = ρ̂` bitwise on every generator.
    pub endpoint_exact: bool,
    /// `max ‖ρ̂_{t_{k+1}}(a) - ρ̂_{t_k}(a)‖ / (Δt ‖a‖)`.
    pub lipschitz_ratio: f64,
}

impl HomotopyPath {
    /// Largest algebraic defect (homomorphism, adjoint, unit, partition).
    pub fn max_defect(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, s| {
            acc.max(s.homomorphism)
                .max(s.adjoint)
                .max(s.unital)
                .max(s.partition_sum)
                .max(s.partition_commutator)
        })
    }

    pub fn max_commutator(&self) -> f64 {
        self.samples
            .iter()
            .fold(0.0, |acc, s| acc.max(s.commutator))
    }

    pub fn max_modj(&self) -> ModJResidual {
        self.samples
            .iter()
            .fold(ModJResidual::default(), |acc, s| ModJResidual {
                residual: acc.residual.max(s.modj.residual),
                commutator_distance: acc.commutator_distance.max(s.modj.commutator_distance),
            })
    }
}

/// Generator pairs `(i, j)` used for the homomorphism defect: all pairs for
/// short lists, otherwise each generator with itself and its successor.
fn generator_pairs(n: usize) -> Vec<(usize, usize)> {
    if n <= 6 {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
    } else {
        (0..n).flat_map(|i| [(i, i), (i, (i + 1) % n)]).collect()
    }
}

pub fn homotopy_path<T: Real>(
    sum: &SumModule<T>,
    generators: &[AlgElement<T>],
    grid: &[f64],
) -> Result<HomotopyPath> {
    let algebra = sum.pu.algebra();
    let one = AlgElement::one(algebra);
    let f = sum.f();
    let id = Adjointable::identity(&sum.frame_dims());
    let pairs = generator_pairs(generators.len());
    let products: Vec<AlgElement<T>> = pairs
        .iter()
        .map(|&(i, j)| &generators[i] * &generators[j])
        .collect();
    let norms: Vec<f64> = generators.iter().map(|g| g.norm().as_f64()).collect();
    // Defects this small are reported through their Frobenius bound.
    let cut = T::lit(1e-12);

    let mut samples = Vec::with_capacity(grid.len());
    let mut previous: Option<(f64, Vec<Adjointable<T>>)> = None;
    let mut lipschitz = 0.0f64;
    let mut endpoint_exact = true;
    for &t_f in grid {
        let t = T::lit(t_f);
        let (p1, p2) = deformed(&sum.pu, t)?;
        let sum_sq = &(&(&p1 * &p1) + &(&p2 * &p2)) - &one;
        let mut s = PathSample {
            t: t_f,
            partition_sum: sum_sq.norm().as_f64(),
            partition_commutator: p1.commutator(&p2).norm().as_f64(),
            ..PathSample::default()
        };
        let images: Vec<Adjointable<T>> = generators
            .iter()
            .map(|g| sum.matrix_action(g, &p1, &p2))
            .collect::<Result<_>>()?;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let lhs = sum.matrix_action(&products[k], &p1, &p2)?;
            s.homomorphism = s
                .homomorphism
                .max((&lhs - &(&images[i] * &images[j])).norm_bound(cut).as_f64());
        }
        for (g, img) in generators.iter().zip(&images) {
            let star = sum.matrix_action(&g.adjoint(), &p1, &p2)?;
            s.adjoint = s
                .adjoint
                .max((&img.adjoint() - &star).norm_bound(cut).as_f64());
            s.commutator = s.commutator.max(img.commutator(&f).norm().as_f64());
            let r = modj_identity_check(g, t, &sum.pu)?;
            s.modj.residual = s.modj.residual.max(r.residual);
            s.modj.commutator_distance = s.modj.commutator_distance.max(r.commutator_distance);
        }
        s.unital = (&sum.matrix_action(&one, &p1, &p2)? - &id)
            .norm_bound(cut)
            .as_f64();

        if t_f == 0.0 || t_f == 1.0 {
            for (g, img) in generators.iter().zip(&images) {
                let reference = if t_f == 0.0 {
                    sum.direct_action(g)?
                } else {
                    sum.rho_hat(g)?
                };
                endpoint_exact &= *img == reference;
            }
        }
        if let Some((t_prev, prev)) = &previous {
            let dt = t_f - t_prev;
            for ((img, old), &n) in images.iter().zip(prev).zip(&norms) {
                if dt > 0.0 && n > 0.0 {
                    lipschitz = lipschitz.max((img - old).norm_bound(cut).as_f64() / (dt * n));
                }
            }
        }
        previous = Some((t_f, images));
        samples.push(s);
    }
    Ok(HomotopyPath {
        samples,
        endpoint_exact,
        lipschitz_ratio: lipschitz,
    })
}

/// Lipschitz constant `C/‖a‖` allowed for `t ↦ ρ̂_t(a)`.
pub const LIPSCHITZ_LIMIT: f64 = 4.0;

/// Distance to the nearest integer accepted for a windowed pairing.
pub const PAIRING_TOLERANCE: f64 = 0.05;

/// Pairings of one probe with the four modules of the identity.
#[derive(Clone, Debug, Serialize)]
pub struct PairingRow {
    pub winding: Option<i32>,
    pub x: f64,
    pub x_tilde: f64,
    pub xy: f64,
    pub yx: f64,
    /// `pair(x) + pair(x̃)`.
    pub lhs: f64,
    /// `pair(x⋄x̃) + pair(x̃⋄x)`.
    pub rhs: f64,
    /// Largest distance of the four values from an integer.
    pub residual: f64,
    pub lhs_rounded: i64,
    pub rhs_rounded: i64,
    /// `-winding`, the Toeplitz index of the probe.
    pub oracle: Option<i64>,
    pub pass: bool,
}

impl PairingRow {
    fn new(winding: Option<i32>, values: [f64; 4]) -> Self {
        let [x, x_tilde, xy, yx] = values;
        let residual = values
            .iter()
            .fold(0.0f64, |acc, v| acc.max((v - v.round()).abs()));
        let lhs_rounded = (x.round() + x_tilde.round()) as i64;
        let rhs_rounded = (xy.round() + yx.round()) as i64;
        let oracle = winding.map(|k| -(k as i64));
        let matches_oracle = oracle.is_none_or(|o| values.iter().all(|v| v.round() as i64 == o));
        let pass = residual <= PAIRING_TOLERANCE && lhs_rounded == rhs_rounded && matches_oracle;
        Self {
            winding,
            x,
            x_tilde,
            xy,
            yx,
            lhs: x + x_tilde,
            rhs: xy + yx,
            residual,
            lhs_rounded,
            rhs_rounded,
            oracle,
            pass,
        }
    }
}

/// Everything built once per scenario for the unitary, conjugation and pairing checks.
pub struct Eq9Setup<T: Real> {
    pub sum: SumModule<T>,
    pub gm_xy: GluedModule<T>,
    pub gm_yx: GluedModule<T>,
    pub diamond_xy: KasparovModule<T>,
    pub diamond_yx: KasparovModule<T>,
    pub u: Adjointable<T>,
}

impl<T: Real> Eq9Setup<T> {
    pub fn new(s: &Scenario<T>) -> Result<Self> {
        let spec = AgreementSpec {
            generators: s.j_gens.clone(),
            eps: s.budgets.eq4,
        };
        let (gm_xy, diamond_xy) = build_diamond(&s.x, &s.x_tilde, &s.witness, &s.pu, &spec)?;
        let (gm_yx, diamond_yx) =
            build_diamond(&s.x_tilde, &s.x, &s.witness.adjoint(), &s.pu, &spec)?;
        let sum = SumModule::new(&s.x, &s.x_tilde, &s.witness, &s.pu);
        let u = build_u(&sum, &gm_xy, &gm_yx)?;
        Ok(Self {
            sum,
            gm_xy,
            gm_yx,
            diamond_xy,
            diamond_yx,
            u,
        })
    }

    /// Windows of the glued modules: diagonal blocks of `U(Λ ⊕ Λ̃)U*`.
    pub fn transported_windows(
        &self,
        w: &Window<T>,
        w_tilde: &Window<T>,
    ) -> (Window<T>, Window<T>) {
        let moved = &(&self.u * &w.op.direct_sum(&w_tilde.op)) * &self.u.adjoint();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (y, m) in moved.blocks.iter().enumerate() {
            let g = self.gm_xy.sites[y].dim();
            let rest = m.nrows() - g;
            a.push(m.view((0, 0), (g, g)).into_owned());
            b.push(m.view((g, g), (rest, rest)).into_owned());
        }
        (
            Window::from_operator(Adjointable::new(a)),
            Window::from_operator(Adjointable::new(b)),
        )
    }

    pub fn pairings(&self, s: &Scenario<T>) -> Result<Vec<PairingRow>> {
        let Some((w, wt)) = &s.window else {
            return Ok(Vec::new());
        };
        if s.probes.is_empty() {
            return Ok(Vec::new());
        }
        let (w_xy, w_yx) = self.transported_windows(w, wt);
        let us: Vec<&AlgElement<T>> = s.probes.iter().map(|p| &p.u).collect();
        let px = local_index_pairings(&s.x, &us, w)?;
        let pxt = local_index_pairings(&s.x_tilde, &us, wt)?;
        let pxy = local_index_pairings(&self.diamond_xy, &us, &w_xy)?;
        let pyx = local_index_pairings(&self.diamond_yx, &us, &w_yx)?;
        Ok(s.probes
            .iter()
            .enumerate()
            .map(|(i, p)| PairingRow::new(p.winding, [px[i], pxt[i], pxy[i], pyx[i]]))
            .collect())
    }
}

/// Pairing table alone, skipping the homotopy checks.
pub fn pairing_additivity<T: Real>(s: &Scenario<T>) -> Result<Vec<PairingRow>> {
    Eq9Setup::new(s)?.pairings(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// Unitarity tolerance for `U`.
pub const UNITARY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Eq9Verdict {
    pub unitary_defect: f64,
    /// `dim(H ⊕ H̃) = dim(H⋄H̃) + dim(H̃⋄H)`.
    pub dim_additivity: bool,
    pub eq10_norm: f64,
    pub eq10_rank: usize,
    pub path_max_defect: f64,
    pub path_max_commutator: f64,
    pub lipschitz_ratio: f64,
    pub endpoint_exact: bool,
    pub modj_residual: f64,
    pub modj_commutator_distance: f64,
    /// Reported only: `max ‖U ρ̂(a) - ((ρ⋄ρ̃)⊕(ρ̃⋄ρ))(a) U‖` over generators.
    pub intertwining_defect: f64,
    pub pairings: Vec<PairingRow>,
    pub failures: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct Eq9Options {
    pub samples: usize,
}

impl Default for Eq9Options {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
        }
    }
}

pub fn verify_eq9<T: Real>(s: &Scenario<T>, opts: &Eq9Options) -> Result<Eq9Verdict> {
    let setup = Eq9Setup::new(s)?;
    let b = &s.budgets;
    let unitary_defect = unitary_defect(&setup.u);
    let dims_sum: usize = setup.sum.frame_dims().iter().sum();
    let dim_additivity = setup.gm_xy.total_dim() + setup.gm_yx.total_dim() == dims_sum;
    let (eq10_norm, eq10_rank) =
        conjugation_defect(&setup.u, &setup.sum, &setup.diamond_xy, &setup.diamond_yx);
    let path = homotopy_path(&setup.sum, &s.x.generators, &uniform_grid(opts.samples)?)?;
    let modj = path.max_modj();
    let intertwining_defect = intertwining_defect(
        &setup.u,
        &setup.sum,
        &setup.gm_xy,
        &setup.gm_yx,
        &s.x.generators,
    )?;
    let pairings = setup.pairings(s)?;

    let mut failures = Vec::new();
    let mut require = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    require(
        unitary_defect <= UNITARY_TOLERANCE,
        format!("U unitary: defect {unitary_defect:e}"),
    );
    require(dim_additivity, "dimension additivity under U".into());
    require(
        eq10_norm <= b.eq10,
        format!("eq10: {eq10_norm:e} > {:e}", b.eq10),
    );
    require(
        path.max_defect() <= b.path,
        format!("path defect {:e} > {:e}", path.max_defect(), b.path),
    );
    require(
        path.max_commutator() <= b.eq2.comm,
        format!(
            "path commutator {:e} > {:e}",
            path.max_commutator(),
            b.eq2.comm
        ),
    );
    require(path.endpoint_exact, "eqB endpoints not exact".into());
    require(
        modj.residual == 0.0 && modj.commutator_distance == 0.0,
        format!("mod-J residual {modj:?}"),
    );
    require(
        path.lipschitz_ratio <= LIPSCHITZ_LIMIT,
        format!(
            "Lipschitz ratio {} > {LIPSCHITZ_LIMIT}",
            path.lipschitz_ratio
        ),
    );
    for row in &pairings {
        require(
            row.pass,
            format!("pairing additivity for winding {:?}: {row:?}", row.winding),
        );
    }
    let verdict = Verdict::from_bool(failures.is_empty());
    Ok(Eq9Verdict {
        unitary_defect,
        dim_additivity,
        eq10_norm,
        eq10_rank,
        path_max_defect: path.max_defect(),
        path_max_commutator: path.max_commutator(),
        lipschitz_ratio: path.lipschitz_ratio,
        endpoint_exact: path.endpoint_exact,
        modj_residual: modj.residual,
        modj_commutator_distance: modj.commutator_distance,
        intertwining_defect,
        pairings,
        failures,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{partition_of_unity, Ideal};
    use crate::models::{circle_toeplitz, random_exact_scenario, CircleOptions, ExactParams};
    use crate::numerics::identity;
    use crate::surgery::self_witness;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exact(seed: u64) -> Scenario<f64> {
        random_exact_scenario(seed, &ExactParams::default()).unwrap()
    }

    #[test]
    fn u_is_unitary_on_exact_scenarios() {
        for seed in 0..6 {
            let s = exact(seed);
            let setup = Eq9Setup::new(&s).unwrap();
            assert!(unitary_defect(&setup.u) <= 1e-10, "seed {seed}");
            let d: usize = setup.sum.frame_dims().iter().sum();
            assert_eq!(setup.gm_xy.total_dim() + setup.gm_yx.total_dim(), d);
            let (n, rank) =
                conjugation_defect(&setup.u, &setup.sum, &setup.diamond_xy, &setup.diamond_yx);
            assert!(n <= 1e-10, "seed {seed}: {n}");
            assert_eq!(rank, 0);
        }
    }

    #[test]
    fn u_needs_mirrored_modules() {
        let s = exact(1);
        let setup = Eq9Setup::new(&s).unwrap();
        let e = build_u(&setup.sum, &setup.gm_xy, &setup.gm_xy).unwrap_err();
        assert!(matches!(e, HomotopyError::GluedModulesInconsistent(_)));
    }

    #[test]
    fn rho_hat_of_unit_and_psi1() {
        let s = exact(2);
        let sum = SumModule::new(&s.x, &s.x_tilde, &s.witness, &s.pu);
        let one = sum.rho_hat(&AlgElement::one(&s.algebra)).unwrap();
        assert!((&one - &Adjointable::identity(&sum.frame_dims())).norm() <= 1e-12);
        let r = sum.rho_hat(&s.pu.psi1).unwrap();
        assert!((&r - &sum.direct_action(&s.pu.psi1).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn rho_hat_t_endpoints_are_bitwise() {
        let s = exact(3);
        let sum = SumModule::new(&s.x, &s.x_tilde, &s.witness, &s.pu);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = AlgElement::random(&s.algebra, &mut rng);
        assert_eq!(
            sum.rho_hat_t(&a, 0.0).unwrap(),
            sum.direct_action(&a).unwrap()
        );
        assert_eq!(sum.rho_hat_t(&a, 1.0).unwrap(), sum.rho_hat(&a).unwrap());
        assert!(matches!(
            sum.rho_hat_t(&a, 1.5),
            Err(HomotopyError::TOutOfRange { .. })
        ));
        assert!(matches!(
            sum.rho_hat_t(&a, -0.1),
            Err(HomotopyError::TOutOfRange { .. })
        ));
    }

    #[test]
    fn modj_identity_is_exact() {
        let s = exact(4);
        let alt = s.alt_pu.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..5 {
            let a = AlgElement::random(&s.algebra, &mut rng);
            for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
                for pu in [&s.pu, alt] {
                    let r = modj_identity_check(&a, t, pu).unwrap();
                    assert_eq!(r, ModJResidual::default(), "t={t}");
                }
            }
        }
        assert!(matches!(
            modj_identity_check(&AlgElement::one(&s.algebra), 2.0, &s.pu),
            Err(HomotopyError::TOutOfRange { .. })
        ));
    }

    #[test]
    fn homotopy_is_a_path_of_homomorphisms() {
        let s = exact(5);
        let alt = s.alt_pu.clone().unwrap();
        let sum = SumModule::new(&s.x, &s.x_tilde, &s.witness, &alt);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gens: Vec<_> = (0..3)
            .map(|_| AlgElement::random(&s.algebra, &mut rng))
            .collect();
        let path = homotopy_path(&sum, &gens, &uniform_grid(DEFAULT_SAMPLES).unwrap()).unwrap();
        assert_eq!(path.samples.len(), 41);
        assert!(path.endpoint_exact);
        assert!(path.max_defect() <= 1e-10, "{}", path.max_defect());
        assert!(path
            .samples
            .iter()
            .all(|p| p.partition_sum <= 1e-12 && p.partition_commutator <= 1e-12));
        assert!(
            path.lipschitz_ratio <= LIPSCHITZ_LIMIT,
            "{}",
            path.lipschitz_ratio
        );
    }

    #[test]
    fn self_gluing_passes_eq9() {
        let mut s = exact(6);
        s.x_tilde = s.x.clone();
        s.witness = self_witness(&s.x, &s.overlap());
        let v = verify_eq9(&s, &Eq9Options::default()).unwrap();
        assert!(v.verdict.is_pass(), "{:?}", v.failures);
        assert!(v.unitary_defect <= 1e-10 && v.eq10_norm <= 1e-10 && v.path_max_defect <= 1e-10);
    }

    #[test]
    fn exact_scenario_passes_eq9() {
        let v = verify_eq9(&exact(7), &Eq9Options::default()).unwrap();
        assert!(v.verdict.is_pass(), "{:?}", v.failures);
        assert!(v.intertwining_defect <= 1e-10, "{}", v.intertwining_defect);
    }

    #[test]
    fn partition_outside_the_ideals_is_rejected() {
        // Needs a block of size ≥ 2 off the overlap for c to be nonzero there.
        let s = (0..)
            .map(exact)
            .find(|s| {
                s.algebra
                    .sites()
                    .any(|x| !s.overlap().contains(x) && s.algebra.block_dim(x) > 1)
            })
            .unwrap();
        // ψ1, ψ2 both nonzero on every site while the ideals stay (S1, S2).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let whole = Ideal::whole(&s.algebra);
        let chi = AlgElement::from_fn(&s.algebra, |_, n| {
            numerics::random_hermitian::<f64, _>(n, &mut rng) * creal(0.2)
                + identity::<f64>(n) * creal(0.5)
        });
        let wide = partition_of_unity(&s.algebra, &whole, &whole, Some(&chi)).unwrap();
        let bad = PartitionOfUnity::from_raw(
            wide.psi1,
            wide.psi2,
            wide.chi,
            s.pu.j1.clone(),
            s.pu.j2.clone(),
        );
        let sum = SumModule::new(&s.x, &s.x_tilde, &s.witness, &bad);
        let a = AlgElement::random(&s.algebra, &mut rng);
        assert!(matches!(
            sum.rho_hat(&a),
            Err(HomotopyError::OffDiagonalNotInJ { .. })
        ));
    }

    #[test]
    fn toeplitz_eq9_small() {
        let s = circle_toeplitz::<f64>(32, 1, -1, &CircleOptions::default()).unwrap();
        let v = verify_eq9(&s, &Eq9Options { samples: 11 }).unwrap();
        assert!(v.unitary_defect <= 1e-10, "{}", v.unitary_defect);
        assert!(v.dim_additivity && v.endpoint_exact);
        assert_eq!(v.modj_residual, 0.0);
        assert!(v.eq10_norm <= s.budgets.eq10);
    }
}
