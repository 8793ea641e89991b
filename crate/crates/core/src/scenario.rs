//! JSON scenario files.
//!
//! A file either names a generator (`"model"`) or spells out every datum.
//! Matrices are lists of rows of `[re, im]` pairs; elements of `A` are lists
//! of per-site matrices; operators on modules are lists of per-B-site matrices.
//!
//! ```json
//! {"model": {"kind": "circle_toeplitz", "m": 2, "m_tilde": 1}, "N": 128}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{
    central_projection, partition_of_unity, AlgElement, AlgebraError, Ideal, SiteAlgebra,
};
use crate::hilbert::{Adjointable, HilbertError, Representation};
use crate::kasparov::{
    matrix_unit_generators, AgreementWitness, Eq2Budget, KasparovError, KasparovModule,
};
use crate::models::{
    circle_function, circle_toeplitz, random_exact_scenario, winding_probe, Arc, Budgets,
    CircleOptions, ExactParams, ModelError, Probe, Profile, Scenario, ScenarioKind, Window,
};
use crate::numerics::{cplx, identity, CMatrix, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Kasparov(#[from] KasparovError),
}

impl ScenarioError {
    /// Malformed or inconsistent input, as opposed to well-formed data that
    /// violates a mathematical precondition.
    pub fn is_schema(&self) -> bool {
        match self {
            ScenarioError::Schema(_) => true,
            ScenarioError::Algebra(e) => matches!(
                e,
                AlgebraError::InvalidAlgebra(_)
                    | AlgebraError::ShapeMismatch { .. }
                    | AlgebraError::SiteOutOfRange { .. }
            ),
            ScenarioError::Hilbert(e) => {
                matches!(
                    e,
                    HilbertError::InvalidRepresentation(_) | HilbertError::DimensionMismatch(_)
                )
            }
            ScenarioError::Kasparov(KasparovError::Mismatch(_)) => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, ScenarioError>;

fn schema(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Schema(msg.into())
}

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json<T: Real>(m: &CMatrix<T>) -> MatrixJson {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re.as_f64(), m[(i, j)].im.as_f64()])
                .collect()
        })
        .collect()
}

/// Parses a matrix; `cols` fixes the width of empty-row matrices.
pub fn matrix_from_json<T: Real>(m: &MatrixJson, cols: usize) -> Result<CMatrix<T>> {
    let ncols = m.first().map_or(cols, |r| r.len());
    if m.iter().any(|r| r.len() != ncols) {
        return Err(schema("ragged matrix rows"));
    }
    Ok(CMatrix::from_fn(m.len(), ncols, |i, j| {
        cplx(T::lit(m[i][j][0]), T::lit(m[i][j][1]))
    }))
}

fn matrix_shaped<T: Real>(
    m: &MatrixJson,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<CMatrix<T>> {
    let out = matrix_from_json(m, cols)?;
    if out.shape() != (rows, cols) {
        return Err(schema(format!(
            "{what}: expected {rows}x{cols}, got {}x{}",
            out.nrows(),
            out.ncols()
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub sites: usize,
    /// Defaults to all ones (a commutative algebra).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_dims: Option<Vec<usize>>,
}

impl AlgebraSpec {
    pub fn build(&self) -> Result<SiteAlgebra> {
        let dims = self
            .block_dims
            .clone()
            .unwrap_or_else(|| vec![1; self.sites]);
        if dims.len() != self.sites {
            return Err(schema(format!(
                "{} block dims for {} sites",
                dims.len(),
                self.sites
            )));
        }
        Ok(SiteAlgebra::new(dims)?)
    }

    pub fn of(a: &SiteAlgebra) -> Self {
        let dims = a.block_dims().to_vec();
        let commutative = dims.iter().all(|&d| d == 1);
        Self {
            sites: dims.len(),
            block_dims: if commutative { None } else { Some(dims) },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealsSpec {
    #[serde(rename = "S1")]
    pub s1: Vec<usize>,
    #[serde(rename = "S2")]
    pub s2: Vec<usize>,
}

/// `"default"`, `"identity"`, `"matrix_units"`, ... or explicit data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Named<D> {
    Name(String),
    Data(D),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepSpec {
    /// `multiplicities[x][y]`.
    pub multiplicities: Vec<Vec<usize>>,
    /// `"identity"` or one unitary per B-site.
    pub bases: Named<Vec<MatrixJson>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSpec {
    pub rep: RepSpec,
    #[serde(rename = "F")]
    pub f: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub winding: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub fourier_halfwidth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eq2Spec {
    Uniform(f64),
    Full(Eq2Budget),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq2: Option<Eq2Spec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq4: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq10: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independence: Option<f64>,
}

impl BudgetSpec {
    pub fn apply(&self, base: &mut Budgets) -> Result<()> {
        let mut set =
            |k: &str, v: Option<f64>| v.map_or(Ok(()), |v| base.set(k, v).map_err(schema));
        match self.eq2 {
            Some(Eq2Spec::Uniform(v)) => set("eq2", Some(v))?,
            Some(Eq2Spec::Full(b)) => {
                set("eq2.comm", Some(b.comm))?;
                set("eq2.sq", Some(b.sq))?;
                set("eq2.sa", Some(b.sa))?;
            }
            None => {}
        }
        set("eq4", self.eq4)?;
        set("eq10", self.eq10)?;
        set("path", self.path)?;
        set("independence", self.independence)
    }

    pub fn of(b: &Budgets) -> Self {
        Self {
            eq2: Some(Eq2Spec::Full(b.eq2)),
            eq4: Some(b.eq4),
            eq10: Some(b.eq10),
            path: Some(b.path),
            independence: b.independence,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    CircleToeplitz {
        m: i32,
        m_tilde: i32,
        #[serde(default)]
        twist: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arcs: Option<[Arc; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        profile: Option<Profile>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alt_profile: Option<Profile>,
    },
    RandomExact {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<ExactParams>,
    },
}

/// On-disk scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<AlgebraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideals: Option<IdealsSpec>,
    /// `"default"` or one matrix per site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<Named<Vec<MatrixJson>>>,
    /// Second seed for partition-independence checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_alt: Option<Named<Vec<MatrixJson>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_x: Option<ModuleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module_x_tilde: Option<ModuleSpec>,
    /// `"identity"` or one matrix per B-site.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Named<Vec<MatrixJson>>>,
    /// `"matrix_units"` (default), `"circle"`, or explicit elements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Named<Vec<Vec<MatrixJson>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_generators: Option<Vec<Vec<MatrixJson>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j1_generators: Option<Vec<Vec<MatrixJson>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j2_generators: Option<Vec<Vec<MatrixJson>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<ProbeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<BudgetSpec>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files serialize")
    }

    /// Resolves the file. Explicit files start from exact budgets with the
    /// partition-independence threshold unset.
    pub fn build<T: Real>(&self) -> Result<Scenario<T>> {
        let mut s = match &self.model {
            Some(model) => self.build_model(model)?,
            None => self.build_explicit()?,
        };
        if let Some(b) = &self.budgets {
            b.apply(&mut s.budgets)?;
        }
        if let Some(name) = &self.name {
            s.name = name.clone();
        }
        Ok(s)
    }

    fn build_model<T: Real>(&self, model: &ModelSpec) -> Result<Scenario<T>> {
        let explicit = [
            ("algebra", self.algebra.is_some()),
            ("coeff", self.coeff.is_some()),
            ("ideals", self.ideals.is_some()),
            ("chi", self.chi.is_some()),
            ("chi_alt", self.chi_alt.is_some()),
            ("module_x", self.module_x.is_some()),
            ("module_x_tilde", self.module_x_tilde.is_some()),
            ("T", self.t.is_some()),
            ("generators", self.generators.is_some()),
            ("j_generators", self.j_generators.is_some()),
            ("j1_generators", self.j1_generators.is_some()),
            ("j2_generators", self.j2_generators.is_some()),
            ("probes", self.probes.is_some()),
            ("window", self.window.is_some()),
        ];
        if let Some((key, _)) = explicit.iter().find(|(_, present)| *present) {
            return Err(schema(format!(
                "`{key}` is not allowed together with `model`"
            )));
        }
        match model {
            ModelSpec::CircleToeplitz {
                m,
                m_tilde,
                twist,
                arcs,
                profile,
                alt_profile,
            } => {
                let n = self.n.ok_or_else(|| schema("circle_toeplitz needs `N`"))?;
                let defaults = CircleOptions::default();
                let opts = CircleOptions {
                    arcs: arcs.map(|[a, b]| (a, b)),
                    profile: profile.unwrap_or(defaults.profile),
                    alt_profile: alt_profile.unwrap_or(defaults.alt_profile),
                    twist: *twist,
                };
                let mut s = circle_toeplitz(n, *m, *m_tilde, &opts)?;
                s.seed = self.seed.unwrap_or(0);
                Ok(s)
            }
            ModelSpec::RandomExact { params } => {
                if self.n.is_some() {
                    return Err(schema("random_exact takes no `N`"));
                }
                Ok(random_exact_scenario(
                    self.seed.unwrap_or(0),
                    &params.unwrap_or_default(),
                )?)
            }
        }
    }

    fn build_explicit<T: Real>(&self) -> Result<Scenario<T>> {
        let need = |present: bool, key: &str| {
            if present {
                Ok(())
            } else {
                Err(schema(format!("missing `{key}`")))
            }
        };
        need(self.algebra.is_some(), "algebra")?;
        need(self.coeff.is_some(), "coeff")?;
        need(self.ideals.is_some(), "ideals")?;
        need(self.module_x.is_some(), "module_x")?;
        need(self.module_x_tilde.is_some(), "module_x_tilde")?;
        let algebra = self.algebra.as_ref().unwrap().build()?;
        let coeff = self.coeff.as_ref().unwrap().build()?;
        let ideals = self.ideals.as_ref().unwrap();
        let j1 = Ideal::new(&algebra, &ideals.s1)?;
        let j2 = Ideal::new(&algebra, &ideals.s2)?;

        let chi = |spec: &Option<Named<Vec<MatrixJson>>>| -> Result<Option<AlgElement<T>>> {
            match spec {
                None => Ok(None),
                Some(Named::Name(n)) if n == "default" => Ok(None),
                Some(Named::Name(n)) => Err(schema(format!("unknown chi `{n}`"))),
                Some(Named::Data(blocks)) => Ok(Some(element(&algebra, blocks, "chi")?)),
            }
        };
        let pu = partition_of_unity(&algebra, &j1, &j2, chi(&self.chi)?.as_ref())?;
        let alt_pu = match &self.chi_alt {
            None => None,
            alt => Some(partition_of_unity(&algebra, &j1, &j2, chi(alt)?.as_ref())?),
        };

        let generators = match &self.generators {
            None => matrix_unit_generators(&algebra),
            Some(Named::Name(n)) if n == "matrix_units" => matrix_unit_generators(&algebra),
            Some(Named::Name(n)) if n == "circle" => vec![
                circle_function(&algebra, |t| ((2.0 + t.cos()) / 3.0, 0.0)),
                circle_function(&algebra, |t| ((2.0 + t.sin()) / 3.0, 0.0)),
            ],
            Some(Named::Name(n)) => return Err(schema(format!("unknown generator list `{n}`"))),
            Some(Named::Data(list)) => elements(&algebra, list, "generators")?,
        };
        let x = module(
            &algebra,
            &coeff,
            self.module_x.as_ref().unwrap(),
            &generators,
            "module_x",
        )?;
        let x_tilde = module(
            &algebra,
            &coeff,
            self.module_x_tilde.as_ref().unwrap(),
            &generators,
            "module_x_tilde",
        )?;

        let overlap = pu.overlap();
        let dims0: Vec<usize> = coeff
            .sites()
            .map(|y| x.rep.support_frame(&overlap, y).ncols())
            .collect();
        let dims0t: Vec<usize> = coeff
            .sites()
            .map(|y| x_tilde.rep.support_frame(&overlap, y).ncols())
            .collect();
        let witness = match &self.t {
            None => identity_witness(&dims0, &dims0t)?,
            Some(Named::Name(n)) if n == "identity" => identity_witness(&dims0, &dims0t)?,
            Some(Named::Name(n)) => return Err(schema(format!("unknown T `{n}`"))),
            Some(Named::Data(blocks)) => {
                if blocks.len() != coeff.num_sites() {
                    return Err(schema(format!(
                        "T has {} blocks for {} B-sites",
                        blocks.len(),
                        coeff.num_sites()
                    )));
                }
                let t = blocks
                    .iter()
                    .enumerate()
                    .map(|(y, b)| matrix_shaped(b, dims0t[y], dims0[y], &format!("T[{y}]")))
                    .collect::<Result<Vec<_>>>()?;
                AgreementWitness::new(Adjointable::new(t))
            }
        };

        let listed = |spec: &Option<Vec<Vec<MatrixJson>>>,
                      what: &str,
                      default: Vec<AlgElement<T>>| match spec {
            Some(list) => elements(&algebra, list, what),
            None => Ok(default),
        };
        let j_gens = listed(
            &self.j_generators,
            "j_generators",
            vec![central_projection(&overlap), &pu.psi1 * &pu.psi2],
        )?;
        let j1_gens = listed(
            &self.j1_generators,
            "j1_generators",
            vec![&pu.psi1 * &pu.psi1],
        )?;
        let j2_gens = listed(
            &self.j2_generators,
            "j2_generators",
            vec![&pu.psi2 * &pu.psi2],
        )?;

        let probes = self
            .probes
            .iter()
            .flatten()
            .map(|p| Probe {
                winding: Some(p.winding),
                u: winding_probe(&algebra, p.winding),
            })
            .collect();
        let window = match &self.window {
            None => None,
            Some(w) => {
                let n = algebra.num_sites();
                let fits = |m: &KasparovModule<T>| m.frame_dims() == [n];
                if !(fits(&x) && fits(&x_tilde)) {
                    return Err(schema(
                        "a Fourier window needs one B-site and modules of dimension N = #sites",
                    ));
                }
                let win = Window::fourier(n, w.fourier_halfwidth)?;
                Some((win.clone(), win))
            }
        };

        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| "custom".into()),
            kind: ScenarioKind::Custom,
            algebra,
            coeff,
            pu,
            alt_pu,
            x,
            x_tilde,
            witness,
            j_gens,
            j1_gens,
            j2_gens,
            probes,
            window,
            budgets: Budgets {
                independence: None,
                ..Budgets::exact()
            },
            n: self.n,
            seed: self.seed.unwrap_or(0),
        })
    }

    /// Explicit form of a resolved scenario; probes without a known winding
    /// and non-Fourier windows are dropped.
    pub fn from_scenario<T: Real>(s: &Scenario<T>) -> Self {
        let el = |a: &AlgElement<T>| a.blocks().iter().map(matrix_to_json).collect::<Vec<_>>();
        let els = |v: &[AlgElement<T>]| v.iter().map(el).collect::<Vec<_>>();
        let ops = |a: &Adjointable<T>| a.blocks.iter().map(matrix_to_json).collect::<Vec<_>>();
        let module = |m: &KasparovModule<T>| {
            let bases: Vec<CMatrix<T>> = (0..m.rep.coeff().num_sites())
                .map(|y| m.rep.basis(y).clone())
                .collect();
            let trivial = bases.iter().all(|b| *b == identity(b.nrows()));
            ModuleSpec {
                rep: RepSpec {
                    multiplicities: m.rep.multiplicities().to_vec(),
                    bases: if trivial {
                        Named::Name("identity".into())
                    } else {
                        Named::Data(bases.iter().map(matrix_to_json).collect())
                    },
                },
                f: ops(&m.f),
            }
        };
        Self {
            name: Some(s.name.clone()),
            model: None,
            algebra: Some(AlgebraSpec::of(&s.algebra)),
            coeff: Some(AlgebraSpec::of(&s.coeff)),
            ideals: Some(IdealsSpec {
                s1: s.pu.j1.sites(),
                s2: s.pu.j2.sites(),
            }),
            chi: Some(Named::Data(el(&s.pu.chi))),
            chi_alt: s.alt_pu.as_ref().map(|p| Named::Data(el(&p.chi))),
            module_x: Some(module(&s.x)),
            module_x_tilde: Some(module(&s.x_tilde)),
            t: Some(Named::Data(ops(&s.witness.t))),
            generators: Some(Named::Data(els(&s.x.generators))),
            j_generators: Some(els(&s.j_gens)),
            j1_generators: Some(els(&s.j1_gens)),
            j2_generators: Some(els(&s.j2_gens)),
            probes: Some(
                s.probes
                    .iter()
                    .filter_map(|p| p.winding.map(|winding| ProbeSpec { winding }))
                    .collect(),
            ),
            window: s
                .window
                .as_ref()
                .and_then(|(w, _)| w.halfwidth)
                .map(|fourier_halfwidth| WindowSpec { fourier_halfwidth }),
            budgets: Some(BudgetSpec::of(&s.budgets)),
            n: s.n,
            seed: Some(s.seed),
        }
    }
}

fn element<T: Real>(
    algebra: &SiteAlgebra,
    blocks: &[MatrixJson],
    what: &str,
) -> Result<AlgElement<T>> {
    if blocks.len() != algebra.num_sites() {
        return Err(schema(format!(
            "{what}: {} blocks for {} sites",
            blocks.len(),
            algebra.num_sites()
        )));
    }
    let parsed = blocks
        .iter()
        .enumerate()
        .map(|(x, b)| {
            let n = algebra.block_dim(x);
            matrix_shaped(b, n, n, &format!("{what}[{x}]"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AlgElement::from_blocks(algebra, parsed)?)
}

fn elements<T: Real>(
    algebra: &SiteAlgebra,
    list: &[Vec<MatrixJson>],
    what: &str,
) -> Result<Vec<AlgElement<T>>> {
    list.iter()
        .enumerate()
        .map(|(i, b)| element(algebra, b, &format!("{what}[{i}]")))
        .collect()
}

fn module<T: Real>(
    algebra: &SiteAlgebra,
    coeff: &SiteAlgebra,
    spec: &ModuleSpec,
    generators: &[AlgElement<T>],
    what: &str,
) -> Result<KasparovModule<T>> {
    let mult = &spec.rep.multiplicities;
    if mult.len() != algebra.num_sites() || mult.iter().any(|row| row.len() != coeff.num_sites()) {
        return Err(schema(format!(
            "{what}: multiplicities must be {}x{}",
            algebra.num_sites(),
            coeff.num_sites()
        )));
    }
    let dims: Vec<usize> = coeff
        .sites()
        .map(|y| {
            algebra
                .sites()
                .map(|x| algebra.block_dim(x) * mult[x][y])
                .sum()
        })
        .collect();
    let rep = match &spec.rep.bases {
        Named::Name(n) if n == "identity" => {
            Representation::diagonal(algebra, coeff, mult.clone())?
        }
        Named::Name(n) => return Err(schema(format!("{what}: unknown bases `{n}`"))),
        Named::Data(bases) => {
            if bases.len() != coeff.num_sites() {
                return Err(schema(format!(
                    "{what}: {} bases for {} B-sites",
                    bases.len(),
                    coeff.num_sites()
                )));
            }
            let w = bases
                .iter()
                .enumerate()
                .map(|(y, b)| matrix_shaped(b, dims[y], dims[y], &format!("{what}.rep.bases[{y}]")))
                .collect::<Result<Vec<_>>>()?;
            Representation::new(algebra, coeff, mult.clone(), w)?
        }
    };
    if spec.f.len() != coeff.num_sites() {
        return Err(schema(format!(
            "{what}: F has {} blocks for {} B-sites",
            spec.f.len(),
            coeff.num_sites()
        )));
    }
    let f = spec
        .f
        .iter()
        .enumerate()
        .map(|(y, b)| matrix_shaped(b, dims[y], dims[y], &format!("{what}.F[{y}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(KasparovModule::new(
        rep,
        Adjointable::new(f),
        generators.to_vec(),
    )?)
}

fn identity_witness<T: Real>(dims0: &[usize], dims0t: &[usize]) -> Result<AgreementWitness<T>> {
    if dims0 != dims0t {
        return Err(schema(format!(
            "T = identity needs equal overlap dimensions, got {dims0:?} and {dims0t:?}"
        )));
    }
    Ok(AgreementWitness::identity(dims0))
}

/// Parses and builds a scenario from JSON text.
pub fn load<T: Real>(text: &str) -> Result<Scenario<T>> {
    ScenarioFile::from_json(text)?.build()
}
