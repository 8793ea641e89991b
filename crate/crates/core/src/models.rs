//! Scenario generators with known ground truth and the windowed index
//! pairing used as a finite-size K-theory probe.
//!
//! * [`circle_toeplitz`]: `A = C(Z_N)`, `H = l²(Z_N)`, `F` a conjugate of the
//!   symmetry of the truncated Hardy projection.
//! * [`random_exact_scenario`]: matrix-block algebras where `F` commutes with
//!   `ρ(A)` exactly, so every gluing identity holds to rounding error.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    central_projection, partition_of_unity, AlgElement, AlgebraError, Ideal, PartitionOfUnity,
    SiteAlgebra,
};
use crate::hilbert::{Adjointable, HilbertError, Representation};
use crate::kasparov::{
    matrix_unit_generators, AgreementWitness, Eq2Budget, KasparovError, KasparovModule,
};
use crate::numerics::{
    self, block_diag, cplx, creal, haar_unitary, herm_func_calc, identity, zeros, CMatrix,
    NumericsError, Real, SpectralFn,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("ArcsDoNotCover: arcs leave {uncovered} of {n} sites uncovered")]
    ArcsDoNotCover { uncovered: usize, n: usize },
    #[error("WindowTooClose: half-width {halfwidth} leaves less than N/8 to the truncation edge at N={n}")]
    WindowTooClose { halfwidth: usize, n: usize },
    #[error("FNotNearSymmetry: ‖Λ(F² - 1)Λ‖ = {defect:e} exceeds {limit}")]
    FNotNearSymmetry { defect: f64, limit: f64 },
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Kasparov(#[from] KasparovError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Acceptance budgets of a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub eq2: Eq2Budget,
    /// Agreement defect, both for the inputs and for the glued module.
    pub eq4: f64,
    /// `‖U(F⊕F̃)U* - (F⋄F̃)⊕(F̃⋄F)‖`.
    pub eq10: f64,
    /// Homotopy path defects.
    pub path: f64,
    /// Partition-independence threshold; `None` reports without asserting.
    pub independence: Option<f64>,
}

impl Budgets {
    pub fn exact() -> Self {
        Self {
            eq2: Eq2Budget::uniform(1e-10),
            eq4: 1e-10,
            eq10: 1e-10,
            path: 1e-10,
            independence: Some(1e-10),
        }
    }

    /// Sets one budget by dotted key (`eq2`, `eq2.comm`, `eq2.sq`, `eq2.sa`,
    /// `eq4`, `eq10`, `path`, `independence`).
    pub fn set(&mut self, key: &str, value: f64) -> std::result::Result<(), String> {
        if value.is_nan() || value < 0.0 {
            return Err(format!(
                "budget {key} must be a nonnegative number, got {value}"
            ));
        }
        match key {
            "eq2" => self.eq2 = Eq2Budget::uniform(value),
            "eq2.comm" => self.eq2.comm = value,
            "eq2.sq" => self.eq2.sq = value,
            "eq2.sa" => self.eq2.sa = value,
            "eq4" => self.eq4 = value,
            "eq10" => self.eq10 = value,
            "path" => self.path = value,
            "independence" => self.independence = Some(value),
            _ => return Err(format!("unknown budget key `{key}`")),
        }
        Ok(())
    }

    pub fn toeplitz() -> Self {
        Self {
            eq2: Eq2Budget {
                comm: 0.5,
                sq: 0.75,
                sa: 1e-10,
            },
            eq4: 0.1,
            eq10: 1.0,
            path: 1e-10,
            independence: None,
        }
    }
}

/// A unitary `u ∈ A` paired against each module; `winding` is its known
/// winding number when the model provides one.
#[derive(Clone, Debug)]
pub struct Probe<T: Real> {
    pub winding: Option<i32>,
    pub u: AlgElement<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Exact,
    CircleToeplitz { n: usize, m: i32, m_tilde: i32 },
    Custom,
}

/// Fully resolved problem instance.
#[derive(Clone, Debug)]
pub struct Scenario<T: Real> {
    pub name: String,
    pub kind: ScenarioKind,
    pub algebra: SiteAlgebra,
    pub coeff: SiteAlgebra,
    pub pu: PartitionOfUnity<T>,
    /// Second partition from the same ideals, for independence checks.
    pub alt_pu: Option<PartitionOfUnity<T>>,
    pub x: KasparovModule<T>,
    pub x_tilde: KasparovModule<T>,
    pub witness: AgreementWitness<T>,
    pub j_gens: Vec<AlgElement<T>>,
    pub j1_gens: Vec<AlgElement<T>>,
    pub j2_gens: Vec<AlgElement<T>>,
    pub probes: Vec<Probe<T>>,
    /// Pairing window on `H` and on `H̃`.
    pub window: Option<(Window<T>, Window<T>)>,
    pub budgets: Budgets,
    pub n: Option<usize>,
    pub seed: u64,
}

impl<T: Real> Scenario<T> {
    pub fn j1(&self) -> &Ideal {
        &self.pu.j1
    }

    pub fn j2(&self) -> &Ideal {
        &self.pu.j2
    }

    pub fn overlap(&self) -> Ideal {
        self.pu.overlap()
    }
}

/// Ramp shape used across the overlaps of the circle model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `(1 - cos(πs))/2`.
    #[default]
    RaisedCosine,
    /// `6s⁵ - 15s⁴ + 10s³`.
    Quintic,
}

impl Profile {
    pub fn eval(self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Profile::RaisedCosine => 0.5 - 0.5 * (PI * s).cos(),
            Profile::Quintic => s * s * s * (s * (6.0 * s - 15.0) + 10.0),
        }
    }
}

/// Half-open index interval `[start, start + len)` on `Z_N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub start: usize,
    pub len: usize,
}

impl Arc {
    fn contains(&self, j: usize, n: usize) -> bool {
        (j + n - self.start % n) % n < self.len
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleOptions {
    /// Defaults to `S1 = [-w, 5w)`, `S2 = [3w, N + w)` with `w = N/8`.
    pub arcs: Option<(Arc, Arc)>,
    pub profile: Profile,
    pub alt_profile: Profile,
    /// Conjugate `x̃` by a smooth zero-winding phase and use it as the witness.
    pub twist: bool,
}

impl Default for CircleOptions {
    fn default() -> Self {
        Self {
            arcs: None,
            profile: Profile::RaisedCosine,
            alt_profile: Profile::Quintic,
            twist: false,
        }
    }
}

pub fn default_arcs(n: usize) -> (Arc, Arc) {
    let w = n / 8;
    (
        Arc {
            start: n - w,
            len: 6 * w,
        },
        Arc {
            start: 3 * w,
            len: n - 2 * w,
        },
    )
}

/// Maximal runs of consecutive sites satisfying `pred`, as (start, len) on `Z_N`.
fn circular_runs(n: usize, pred: impl Fn(usize) -> bool) -> Vec<(usize, usize)> {
    if (0..n).all(&pred) {
        return vec![(0, n)];
    }
    let begin = (0..n).find(|&j| !pred(j)).unwrap_or(0);
    let mut runs = Vec::new();
    let mut k = 0;
    while k < n {
        let j = (begin + k) % n;
        if pred(j) {
            let start = j;
            let mut len = 0;
            while k < n && pred((begin + k) % n) {
                len += 1;
                k += 1;
            }
            runs.push((start, len));
        } else {
            k += 1;
        }
    }
    runs
}

/// Seed `χ` for two arcs: 1 on `S1 \ S2`, 0 on `S2 \ S1`, a ramp across each
/// overlap run from the value on its left neighbour to the one on its right.
fn circle_chi(n: usize, s1: &Arc, s2: &Arc, profile: Profile) -> Vec<f64> {
    let only1 = |j: usize| s1.contains(j, n) && !s2.contains(j, n);
    let mut chi: Vec<f64> = (0..n).map(|j| if only1(j) { 1.0 } else { 0.0 }).collect();
    let both = |j: usize| s1.contains(j, n) && s2.contains(j, n);
    for (start, len) in circular_runs(n, both) {
        let left = (start + n - 1) % n;
        let right = (start + len) % n;
        let a = if only1(left) {
            1.0
        } else if both(left) {
            0.5
        } else {
            0.0
        };
        let b = if only1(right) {
            1.0
        } else if both(right) {
            0.5
        } else {
            0.0
        };
        for p in 0..len {
            let s = (p as f64 + 0.5) / len as f64;
            chi[(start + p) % n] = a + (b - a) * profile.eval(s);
        }
    }
    chi
}

/// Unimodular multiplier winding `m` times inside the given run and equal
/// to exactly 1 elsewhere.
fn winding_phase(n: usize, run: (usize, usize), m: i32) -> Vec<(f64, f64)> {
    let mut out = vec![(1.0, 0.0); n];
    if m == 0 || run.1 == 0 {
        return out;
    }
    let (start, len) = run;
    for p in 0..len {
        let s = (p as f64 + 0.5) / len as f64;
        let phase = 2.0 * PI * m as f64 * Profile::RaisedCosine.eval(s);
        out[(start + p) % n] = (phase.cos(), phase.sin());
    }
    out
}

/// Circulant projection onto Fourier modes `0..=N/2`, with
/// `f_n(j) = e^{-2πinj/N}/√N`.
pub fn hardy_projection<T: Real>(n: usize) -> CMatrix<T> {
    fourier_projection(n, |k| k <= n / 2)
}

/// Projection onto the Fourier modes `k ∈ 0..N` selected by `keep`.
pub fn fourier_projection<T: Real>(n: usize, keep: impl Fn(usize) -> bool) -> CMatrix<T> {
    let modes: Vec<usize> = (0..n).filter(|&k| keep(k)).collect();
    let c: Vec<(f64, f64)> = (0..n)
        .map(|d| {
            let (mut re, mut im) = (0.0, 0.0);
            for &k in &modes {
                let angle = -2.0 * PI * (k * d % n) as f64 / n as f64;
                re += angle.cos();
                im += angle.sin();
            }
            (re / n as f64, im / n as f64)
        })
        .collect();
    let p = CMatrix::from_fn(n, n, |j, k| {
        let (re, im) = c[(j + n - k) % n];
        cplx(T::lit(re), T::lit(im))
    });
    numerics::hermitian_part(&p)
}

fn diag_phase<T: Real>(phase: &[(f64, f64)]) -> CMatrix<T> {
    let n = phase.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            cplx(T::lit(phase[i].0), T::lit(phase[i].1))
        } else {
            cplx(T::zero(), T::zero())
        }
    })
}

/// `σ F σ*` for a diagonal unitary `σ`, computed entrywise.
fn conjugate_by_phase<T: Real>(f: &CMatrix<T>, phase: &[(f64, f64)]) -> CMatrix<T> {
    let s = diag_phase::<T>(phase);
    numerics::hermitian_part(&(&s * f * s.adjoint()))
}

/// Circle scalars `Σ_j v(θ_j) e_j` with `θ_j = 2πj/N`.
pub fn circle_function<T: Real>(
    algebra: &SiteAlgebra,
    f: impl Fn(f64) -> (f64, f64),
) -> AlgElement<T> {
    let n = algebra.num_sites();
    let values: Vec<_> = (0..n)
        .map(|j| {
            let (re, im) = f(2.0 * PI * j as f64 / n as f64);
            cplx(T::lit(re), T::lit(im))
        })
        .collect();
    AlgElement::scalars(algebra, &values)
}

/// `u_k = e^{ikθ}` on `Z_N`.
pub fn winding_probe<T: Real>(algebra: &SiteAlgebra, k: i32) -> AlgElement<T> {
    circle_function(algebra, |t| ((k as f64 * t).cos(), (k as f64 * t).sin()))
}

/// Discrete winding number of a blockwise-scalar unitary on `Z_N`
/// (sum of phase increments between neighbours over `2π`).
pub fn discrete_winding<T: Real>(u: &AlgElement<T>) -> f64 {
    let vals: Vec<(f64, f64)> = u
        .blocks()
        .iter()
        .map(|b| (b[(0, 0)].re.as_f64(), b[(0, 0)].im.as_f64()))
        .collect();
    let n = vals.len();
    let mut total = 0.0;
    for j in 0..n {
        let (a, b) = (vals[j], vals[(j + 1) % n]);
        // arg(b / a)
        let re = b.0 * a.0 + b.1 * a.1;
        let im = b.1 * a.0 - b.0 * a.1;
        total += im.atan2(re);
    }
    total / (2.0 * PI)
}

/// Truncated Toeplitz model on `Z_N` with windings `m` (for `x`) and `m̃`
/// (for `x̃`) placed in the regions covered by only one arc.
pub fn circle_toeplitz<T: Real>(
    n: usize,
    m: i32,
    m_tilde: i32,
    opts: &CircleOptions,
) -> Result<Scenario<T>> {
    if n < 16 {
        return Err(ModelError::InvalidParameters(format!("N = {n} < 16")));
    }
    let (a1, a2) = opts.arcs.unwrap_or_else(|| default_arcs(n));
    let uncovered = (0..n)
        .filter(|&j| !a1.contains(j, n) && !a2.contains(j, n))
        .count();
    if uncovered > 0 {
        return Err(ModelError::ArcsDoNotCover { uncovered, n });
    }
    let algebra = SiteAlgebra::commutative(n)?;
    let coeff = SiteAlgebra::commutative(1)?;
    let sites1: Vec<usize> = (0..n).filter(|&j| a1.contains(j, n)).collect();
    let sites2: Vec<usize> = (0..n).filter(|&j| a2.contains(j, n)).collect();
    let j1 = Ideal::new(&algebra, &sites1)?;
    let j2 = Ideal::new(&algebra, &sites2)?;

    let make_pu = |profile: Profile| -> Result<PartitionOfUnity<T>> {
        let chi = circle_chi(n, &a1, &a2, profile);
        let chi: Vec<T> = chi.into_iter().map(T::lit).collect();
        let chi = AlgElement::real_scalars(&algebra, &chi);
        Ok(partition_of_unity(&algebra, &j1, &j2, Some(&chi))?)
    };
    let pu = make_pu(opts.profile)?;
    let alt_pu = make_pu(opts.alt_profile)?;

    let only1 = circular_runs(n, |j| a1.contains(j, n) && !a2.contains(j, n));
    let only2 = circular_runs(n, |j| a2.contains(j, n) && !a1.contains(j, n));
    let longest =
        |runs: &[(usize, usize)]| runs.iter().copied().max_by_key(|r| r.1).unwrap_or((0, 0));
    let sigma = winding_phase(n, longest(&only1), m);
    let sigma_tilde = winding_phase(n, longest(&only2), m_tilde);
    if (m != 0 && only1.is_empty()) || (m_tilde != 0 && only2.is_empty()) {
        return Err(ModelError::InvalidParameters(
            "winding requested on an empty region".into(),
        ));
    }

    let f0 = kasparov_symmetry::<T>(n);
    let f = conjugate_by_phase(&f0, &sigma);
    let mut f_tilde = conjugate_by_phase(&f0, &sigma_tilde);

    let rep = Representation::diagonal(&algebra, &coeff, vec![vec![1]; n])?;
    let generators = vec![
        circle_function(&algebra, |t| ((2.0 + t.cos()) / 3.0, 0.0)),
        circle_function(&algebra, |t| ((2.0 + t.sin()) / 3.0, 0.0)),
    ];
    let overlap = j1.intersection(&j2)?;
    let overlap_sites = overlap.sites();
    let witness_block = if opts.twist {
        // Zero-winding phase τ = exp(i sin θ); T = τ restricted to the overlap.
        let tau: Vec<(f64, f64)> = (0..n)
            .map(|j| {
                let a = (2.0 * PI * j as f64 / n as f64).sin();
                (a.cos(), a.sin())
            })
            .collect();
        f_tilde = conjugate_by_phase(&f_tilde, &tau);
        let t: Vec<(f64, f64)> = overlap_sites.iter().map(|&j| tau[j]).collect();
        diag_phase::<T>(&t)
    } else {
        identity(overlap_sites.len())
    };

    let x = KasparovModule::new(rep.clone(), Adjointable::new(vec![f]), generators.clone())?;
    let x_tilde = KasparovModule::new(rep, Adjointable::new(vec![f_tilde]), generators)?;
    let j_gens = vec![central_projection(&overlap), &pu.psi1 * &pu.psi2];
    let j1_gens = vec![&pu.psi1 * &pu.psi1];
    let j2_gens = vec![&pu.psi2 * &pu.psi2];
    let probes = (-2..=2)
        .map(|k| Probe {
            winding: Some(k),
            u: winding_probe(&algebra, k),
        })
        .collect();
    let window = Window::fourier(n, n / 4)?;
    Ok(Scenario {
        name: format!("circle_toeplitz(N={n}, m={m}, m~={m_tilde})"),
        kind: ScenarioKind::CircleToeplitz { n, m, m_tilde },
        algebra,
        coeff,
        pu,
        alt_pu: Some(alt_pu),
        x,
        x_tilde,
        witness: AgreementWitness::new(Adjointable::new(vec![witness_block])),
        j_gens,
        j1_gens,
        j2_gens,
        probes,
        window: Some((window.clone(), window)),
        budgets: Budgets::toeplitz(),
        n: Some(n),
        seed: 0,
    })
}

/// `2P - 1` for the truncated Hardy projection.
pub fn kasparov_symmetry<T: Real>(n: usize) -> CMatrix<T> {
    hardy_projection::<T>(n) * creal(T::lit(2.0)) - identity::<T>(n)
}

/// Size parameters of [`random_exact_scenario`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactParams {
    pub max_sites: usize,
    pub max_block: usize,
    pub max_coeff_sites: usize,
    pub max_multiplicity: usize,
}

impl Default for ExactParams {
    fn default() -> Self {
        Self {
            max_sites: 5,
            max_block: 3,
            max_coeff_sites: 2,
            max_multiplicity: 2,
        }
    }
}

/// Random symmetry `Q diag(±1) Q*` of size `m`.
fn random_symmetry<T: Real, R: Rng>(m: usize, rng: &mut R) -> CMatrix<T> {
    let q = haar_unitary::<T, R>(m, rng);
    let signs = CMatrix::from_fn(m, m, |i, j| {
        if i != j {
            creal(T::zero())
        } else if rng.random_bool(0.5) {
            creal(T::one())
        } else {
            creal(-T::one())
        }
    });
    numerics::hermitian_part(&(&q * signs * q.adjoint()))
}

/// `I_n ⊗ S` in Kronecker order `i * m + k`.
fn identity_kron<T: Real>(n: usize, s: &CMatrix<T>) -> CMatrix<T> {
    let blocks: Vec<&CMatrix<T>> = (0..n).map(|_| s).collect();
    block_diag(&blocks)
}

/// Exact-commuting scenario: `F = ⊕_x I_{n_x} ⊗ S_{x,y}` in normal-form
/// coordinates, and `x̃` a unitarily moved copy whose symmetry is redrawn
/// off the overlap and whose multiplicity frames are rotated on it.
pub fn random_exact_scenario<T: Real>(seed: u64, params: &ExactParams) -> Result<Scenario<T>> {
    if params.max_sites < 3
        || params.max_block == 0
        || params.max_coeff_sites == 0
        || params.max_multiplicity == 0
    {
        return Err(ModelError::InvalidParameters(
            "need at least 3 sites and nonzero sizes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = rng.random_range(3..=params.max_sites);
    let algebra = SiteAlgebra::new(
        (0..sites)
            .map(|_| rng.random_range(1..=params.max_block))
            .collect(),
    )?;
    let coeff = SiteAlgebra::new(
        (0..rng.random_range(1..=params.max_coeff_sites))
            .map(|_| rng.random_range(1..=2))
            .collect(),
    )?;
    // Site roles: 0 only S1, 1 only S2, 2 overlap; the first three cover every role.
    let mut tags: Vec<u8> = (0..sites).map(|_| rng.random_range(0..3)).collect();
    tags[0] = 0;
    tags[1] = 1;
    tags[2] = 2;
    let j1 = Ideal::from_mask(&algebra, tags.iter().map(|&t| t != 1).collect())?;
    let j2 = Ideal::from_mask(&algebra, tags.iter().map(|&t| t != 0).collect())?;
    let overlap = j1.intersection(&j2)?;

    let mult: Vec<Vec<usize>> = (0..sites)
        .map(|_| {
            coeff
                .sites()
                .map(|_| rng.random_range(1..=params.max_multiplicity))
                .collect()
        })
        .collect();
    let dims: Vec<usize> = coeff
        .sites()
        .map(|y| {
            algebra
                .sites()
                .map(|x| algebra.block_dim(x) * mult[x][y])
                .sum()
        })
        .collect();
    let bases: Vec<CMatrix<T>> = dims.iter().map(|&d| haar_unitary(d, &mut rng)).collect();
    let rep = Representation::new(&algebra, &coeff, mult.clone(), bases)?;

    // Symmetries per (x, y); x̃ keeps them on the overlap only.
    let sym: Vec<Vec<CMatrix<T>>> = coeff
        .sites()
        .map(|y| {
            algebra
                .sites()
                .map(|x| random_symmetry(mult[x][y], &mut rng))
                .collect()
        })
        .collect();
    let sym_tilde: Vec<Vec<CMatrix<T>>> = coeff
        .sites()
        .map(|y| {
            algebra
                .sites()
                .map(|x| {
                    if overlap.contains(x) {
                        sym[y][x].clone()
                    } else {
                        random_symmetry(mult[x][y], &mut rng)
                    }
                })
                .collect()
        })
        .collect();
    let assemble = |s: &[Vec<CMatrix<T>>]| -> Adjointable<T> {
        Adjointable::new(
            coeff
                .sites()
                .map(|y| {
                    let parts: Vec<CMatrix<T>> = algebra
                        .sites()
                        .map(|x| identity_kron(algebra.block_dim(x), &s[y][x]))
                        .collect();
                    let refs: Vec<&CMatrix<T>> = parts.iter().collect();
                    let w = rep.basis(y);
                    numerics::hermitian_part(&(w.adjoint() * block_diag(&refs) * w))
                })
                .collect(),
        )
    };
    let f = assemble(&sym);
    let f_prime = assemble(&sym_tilde);

    // x̃ lives on V·H with its multiplicity frames rotated by R_{x,y}.
    let v: Vec<CMatrix<T>> = dims.iter().map(|&d| haar_unitary(d, &mut rng)).collect();
    let rot: Vec<Vec<CMatrix<T>>> = coeff
        .sites()
        .map(|y| {
            algebra
                .sites()
                .map(|x| haar_unitary(mult[x][y], &mut rng))
                .collect()
        })
        .collect();
    let frames_tilde: Vec<Vec<CMatrix<T>>> = coeff
        .sites()
        .map(|y| {
            algebra
                .sites()
                .map(|x| {
                    &v[y]
                        * rep.isotypic_frame(x, y)
                        * identity_kron(algebra.block_dim(x), &rot[y][x])
                })
                .collect()
        })
        .collect();
    let rep_tilde =
        Representation::from_isotypic_frames(&algebra, &coeff, mult.clone(), &frames_tilde)?;
    let v_op = Adjointable::new(v.clone());
    let f_tilde = (&(&v_op * &f_prime) * &v_op.adjoint()).map(|_, b| numerics::hermitian_part(b));

    // T = Ṽ0* V V0 = ⊕_{x ∈ S∩} (I ⊗ R_{x,y})*.
    let witness = Adjointable::new(
        coeff
            .sites()
            .map(|y| {
                let parts: Vec<CMatrix<T>> = overlap
                    .sites()
                    .iter()
                    .map(|&x| identity_kron(algebra.block_dim(x), &rot[y][x]).adjoint())
                    .collect();
                let refs: Vec<&CMatrix<T>> = parts.iter().collect();
                block_diag(&refs)
            })
            .collect(),
    );

    let generators = matrix_unit_generators(&algebra);
    let x = KasparovModule::new(rep, f, generators.clone())?;
    let x_tilde = KasparovModule::new(rep_tilde, f_tilde, generators)?;

    let pu = partition_of_unity(&algebra, &j1, &j2, None)?;
    let alt_chi = AlgElement::from_fn(&algebra, |s, nx| match tags[s] {
        0 => identity(nx),
        1 => zeros(nx, nx),
        _ => {
            numerics::random_hermitian::<T, _>(nx, &mut rng) * creal(T::lit(0.3))
                + identity::<T>(nx) * creal(T::lit(0.5))
        }
    });
    let alt_pu = partition_of_unity(&algebra, &j1, &j2, Some(&alt_chi))?;

    let random_in = |ideal: &Ideal, rng: &mut ChaCha8Rng, count: usize| -> Vec<AlgElement<T>> {
        let mut out = vec![central_projection(ideal)];
        for _ in 0..count {
            out.push(AlgElement::random_hermitian(&algebra, rng).restrict(ideal));
        }
        out
    };
    let j_gens = random_in(&overlap, &mut rng, 2);
    let j1_gens = random_in(&j1, &mut rng, 1);
    let j2_gens = random_in(&j2, &mut rng, 1);

    Ok(Scenario {
        name: format!("random_exact(seed={seed})"),
        kind: ScenarioKind::Exact,
        algebra: algebra.clone(),
        coeff,
        pu,
        alt_pu: Some(alt_pu),
        x,
        x_tilde,
        witness: AgreementWitness::new(witness),
        j_gens,
        j1_gens,
        j2_gens,
        probes: Vec::new(),
        window: None,
        budgets: Budgets::exact(),
        n: None,
        seed,
    })
}

/// Trace-class cutoff `Λ` per B-site used by the local index pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct Window<T: Real> {
    pub op: Adjointable<T>,
    /// Set for Fourier windows, which the scenario schema can name.
    pub halfwidth: Option<usize>,
}

impl<T: Real> Window<T> {
    /// Fourier projection onto modes `|k| ≤ halfwidth` on `Z_N`.
    pub fn fourier(n: usize, halfwidth: usize) -> Result<Self> {
        if 8 * halfwidth > 3 * n {
            return Err(ModelError::WindowTooClose { halfwidth, n });
        }
        let p = fourier_projection::<T>(n, |k| k <= halfwidth || n - k <= halfwidth);
        Ok(Self {
            op: Adjointable::new(vec![p]),
            halfwidth: Some(halfwidth),
        })
    }

    pub fn from_operator(op: Adjointable<T>) -> Self {
        Self {
            op,
            halfwidth: None,
        }
    }
}

/// Largest `‖Λ(F² - 1)Λ‖` accepted before the pairing is refused; it keeps
/// the spectrum of `F` on the window at distance at least 1/2 from 0.
pub const SYMMETRY_LIMIT: f64 = 0.75;

/// `Re Tr(Λ ρ(u)* [P, ρ(u)])` with `P` the positive spectral projection of `F`.
pub fn local_index_pairing<T: Real>(
    x: &KasparovModule<T>,
    u: &AlgElement<T>,
    window: &Window<T>,
) -> Result<f64> {
    Ok(local_index_pairings(x, &[u], window)?[0])
}

/// [`local_index_pairing`] for several probes, sharing one spectral projection.
pub fn local_index_pairings<T: Real>(
    x: &KasparovModule<T>,
    probes: &[&AlgElement<T>],
    window: &Window<T>,
) -> Result<Vec<f64>> {
    let f = &x.f;
    let sq = &(f * f) - &Adjointable::identity(x.frame_dims());
    let lam = &window.op;
    let defect = (&(lam * &sq) * lam).norm().as_f64();
    if defect > SYMMETRY_LIMIT {
        return Err(ModelError::FNotNearSymmetry {
            defect,
            limit: SYMMETRY_LIMIT,
        });
    }
    let mut projections = Vec::with_capacity(f.num_sites());
    for y in 0..f.num_sites() {
        projections.push(herm_func_calc(
            &numerics::hermitian_part(f.block(y)),
            SpectralFn::PosSpectralProj,
        )?);
    }
    let mut out = Vec::with_capacity(probes.len());
    for u in probes {
        let ru = x.rep.apply(u)?;
        let mut total = 0.0;
        for (y, p) in projections.iter().enumerate() {
            let uy = ru.block(y);
            let comm = p * uy - uy * p;
            total += (lam.block(y) * uy.adjoint() * comm).trace().re.as_f64();
        }
        out.push(total);
    }
    Ok(out)
}
