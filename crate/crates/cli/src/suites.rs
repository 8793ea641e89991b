//! One verification suite per subcommand.

use kkglue::algebra::PartitionOfUnity;
use kkglue::hilbert::{alpha_beta_check, ideal_submodule};
use kkglue::homotopy::{
    conjugation_defect, homotopy_path, uniform_grid, verify_eq9, Eq9Options, Eq9Setup, PairingRow,
    LIPSCHITZ_LIMIT, PAIRING_TOLERANCE, UNITARY_TOLERANCE,
};
use kkglue::kasparov::{check_agreement, verify_module_with, AgreementWitness, KasparovModule};
use kkglue::numerics::{op_norm, tol};
use kkglue::scenario::{ModelSpec, ScenarioError, ScenarioFile};
use kkglue::surgery::{build_diamond, diamond_agreement, partition_independence, AgreementSpec};
use kkglue::Scenario;

use crate::report::{to_rounded_value, Row, ScenarioReport, Status, SweepRow};

/// Tolerance for the partition-of-unity and submodule identities.
pub const IDENTITY_TOL: f64 = 1e-12;
pub const GRAM_PSD_TOL: f64 = 1e-9;
pub const QUOTIENT_TOL: f64 = 1e-10;
/// Grid sizes visited by `sweep`.
pub const SWEEP_NS: [usize; 3] = [32, 64, 128];
/// Smallest `N` at which `sweep` judges pairings; below it they are reported only.
pub const SWEEP_PAIRING_MIN_N: usize = 128;
/// Slack for "non-increasing in N".
pub const TREND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SuiteError {
    Schema(String),
    Domain(String),
}

impl From<ScenarioError> for SuiteError {
    fn from(e: ScenarioError) -> Self {
        if e.is_schema() {
            SuiteError::Schema(e.to_string())
        } else {
            SuiteError::Domain(e.to_string())
        }
    }
}

fn domain<E: std::fmt::Display>(e: E) -> SuiteError {
    SuiteError::Domain(e.to_string())
}

pub type Result<T> = std::result::Result<T, SuiteError>;

/// Per-run settings shared by all scenarios.
#[derive(Clone, Debug)]
pub struct Context {
    pub samples: usize,
    pub seed: Option<u64>,
    pub overrides: Vec<(String, f64)>,
}

impl Context {
    pub fn build(&self, file: &ScenarioFile) -> Result<Scenario> {
        let mut file = file.clone();
        if let Some(seed) = self.seed {
            file.seed = Some(seed);
        }
        let mut s = file.build::<f64>()?;
        for (k, v) in &self.overrides {
            s.budgets.set(k, *v).map_err(SuiteError::Schema)?;
        }
        Ok(s)
    }
}

fn spec(s: &Scenario) -> AgreementSpec<f64> {
    AgreementSpec {
        generators: s.j_gens.clone(),
        eps: s.budgets.eq4,
    }
}

fn partitions(s: &Scenario) -> Vec<(&'static str, &PartitionOfUnity<f64>)> {
    let mut out = vec![("pu", &s.pu)];
    if let Some(alt) = &s.alt_pu {
        out.push(("pu_alt", alt));
    }
    out
}

fn modules(s: &Scenario) -> [(&'static str, &KasparovModule<f64>); 2] {
    [("x", &s.x), ("x_tilde", &s.x_tilde)]
}

pub fn lemma1(s: &Scenario, out: &mut ScenarioReport) -> Result<()> {
    for (label, pu) in partitions(s) {
        let r = pu.report().map_err(domain)?;
        out.extend([
            Row::le(
                "lemma1",
                format!("{label}.sum_of_squares"),
                r.sum_of_squares,
                IDENTITY_TOL,
            ),
            Row::le(
                "lemma1",
                format!("{label}.commutator"),
                r.commutator,
                IDENTITY_TOL,
            ),
            Row::eq(
                "lemma1",
                format!("{label}.psi1_off_ideal"),
                r.psi1_off_ideal,
                0.0,
            ),
            Row::eq(
                "lemma1",
                format!("{label}.psi2_off_ideal"),
                r.psi2_off_ideal,
                0.0,
            ),
            Row::ge(
                "lemma1",
                format!("{label}.min_eigenvalue"),
                r.min_eigenvalue,
                -IDENTITY_TOL,
            ),
            Row::le(
                "lemma1",
                format!("{label}.self_adjoint"),
                r.self_adjoint,
                IDENTITY_TOL,
            ),
        ]);
    }
    for (label, x) in modules(s) {
        let rep = &x.rep;
        let h1 = ideal_submodule(rep, s.j1()).map_err(domain)?;
        let h2 = ideal_submodule(rep, s.j2()).map_err(domain)?;
        let h0 = ideal_submodule(rep, &s.overlap()).map_err(domain)?;
        let mut product = 0.0f64;
        let mut dim_gap = 0.0f64;
        for y in 0..rep.coeff().num_sites() {
            let p = h1.projection.block(y) * h2.projection.block(y);
            product = product.max(op_norm(&(p - h0.projection.block(y))));
            let (r1, r2, r0) = (
                h1.frame.block(y).ncols(),
                h2.frame.block(y).ncols(),
                h0.frame.block(y).ncols(),
            );
            dim_gap += (r1 + r2) as f64 - (rep.frame_dims()[y] + r0) as f64;
        }
        let mut comm = 0.0f64;
        for a in &x.generators {
            let ra = rep.apply(a).map_err(domain)?;
            for sub in [&h0, &h1, &h2] {
                comm = comm.max(sub.projection.commutator(&ra).norm());
            }
        }
        let ab = alpha_beta_check(rep, &s.pu).map_err(domain)?;
        out.extend([
            Row::le(
                "submodule",
                format!("{label}.P1P2_minus_P0"),
                product,
                IDENTITY_TOL,
            ),
            Row::eq(
                "submodule",
                format!("{label}.dim_H1_plus_H2_minus_H_minus_H0"),
                dim_gap,
                0.0,
            ),
            Row::le(
                "submodule",
                format!("{label}.projection_commutator"),
                comm,
                IDENTITY_TOL,
            ),
            Row::le(
                "alpha-beta",
                format!("{label}.alpha_beta"),
                ab.alpha_beta,
                IDENTITY_TOL,
            ),
            Row::eq(
                "alpha-beta",
                format!("{label}.kernel_dim_minus_dim_H0"),
                ab.kernel_dim_alpha as f64 - ab.dim_h0 as f64,
                0.0,
            ),
        ]);
    }
    Ok(())
}

fn module_rows(
    anchor: &str,
    label: &str,
    x: &KasparovModule<f64>,
    s: &Scenario,
) -> Result<Vec<Row>> {
    let v = verify_module_with(x, &s.budgets.eq2).map_err(domain)?;
    let b = &s.budgets.eq2;
    Ok(vec![
        Row::le(anchor, format!("{label}.comm"), v.report.comm, b.comm),
        Row::le(anchor, format!("{label}.sq"), v.report.sq, b.sq),
        Row::le(anchor, format!("{label}.sa"), v.report.sa, b.sa),
    ])
}

pub fn agree(s: &Scenario, out: &mut ScenarioReport) -> Result<()> {
    for (label, x) in modules(s) {
        out.extend(module_rows("eq2", label, x, s)?);
    }
    let r = check_agreement(
        &s.x,
        &s.x_tilde,
        &s.witness,
        &s.overlap(),
        &s.j_gens,
        s.budgets.eq4,
    )
    .map_err(domain)?;
    out.extend([
        Row::le("eq4", "delta_max", r.max, s.budgets.eq4),
        Row::le(
            "eq4",
            "witness.unitary_defect",
            r.unitary_defect,
            tol::IDENTITY,
        ),
        Row::le(
            "eq4",
            "witness.bimodule_defect",
            r.bimodule_defect,
            tol::IDENTITY,
        ),
    ]);
    out.detail = Some(to_rounded_value(&r));
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// `x ⋄ x̃`
    Xy,
    /// `x̃ ⋄ x`
    Yx,
}

impl Order {
    fn label(self) -> &'static str {
        match self {
            Order::Xy => "xy",
            Order::Yx => "yx",
        }
    }
}

fn glue_order(s: &Scenario, order: Order, out: &mut ScenarioReport) -> Result<serde_json::Value> {
    let (x, xt, w): (_, _, AgreementWitness<f64>) = match order {
        Order::Xy => (&s.x, &s.x_tilde, s.witness.clone()),
        Order::Yx => (&s.x_tilde, &s.x, s.witness.adjoint()),
    };
    let o = order.label();
    let (gm, d) = build_diamond(x, xt, &w, &s.pu, &spec(s)).map_err(domain)?;
    let r = gm.quotient_report();
    out.extend([
        Row::ge(
            "lemma4",
            format!("{o}.gram_min_eigenvalue"),
            r.gram_min_eigenvalue,
            -GRAM_PSD_TOL,
        ),
        Row::eq(
            "lemma4",
            format!("{o}.kernel_dim_minus_dim_H0"),
            r.kernel_dim as f64 - r.dim_h0 as f64,
            0.0,
        ),
        Row::eq(
            "lemma4",
            format!("{o}.quotient_dim_minus_expected"),
            r.quotient_dim as f64 - r.expected_dim as f64,
            0.0,
        ),
        Row::le(
            "lemma4",
            format!("{o}.iota1_isometry"),
            r.iota1_isometry,
            QUOTIENT_TOL,
        ),
        Row::le(
            "lemma4",
            format!("{o}.iota2_isometry"),
            r.iota2_isometry,
            QUOTIENT_TOL,
        ),
        Row::le(
            "lemma4",
            format!("{o}.delta_gram_norm"),
            r.delta_gram_norm,
            QUOTIENT_TOL,
        ),
    ]);
    out.extend(module_rows("thm1", o, &d, s)?);
    let (a1, a2) =
        diamond_agreement(&gm, &d, &s.j1_gens, &s.j2_gens, s.budgets.eq4).map_err(domain)?;
    out.extend([
        Row::le(
            "thm1-agreement",
            format!("{o}.on_J1"),
            a1.max,
            s.budgets.eq4,
        ),
        Row::le(
            "thm1-agreement",
            format!("{o}.on_J2"),
            a2.max,
            s.budgets.eq4,
        ),
    ]);
    if let Some(alt) = &s.alt_pu {
        let ind = partition_independence(x, xt, &w, &s.pu, alt, &spec(s)).map_err(domain)?;
        out.push(Row::le_opt(
            "thm1-independence",
            format!("{o}.norm"),
            ind.max_norm(),
            s.budgets.independence,
        ));
    }
    Ok(to_rounded_value(&gm.summary()))
}

/// Quotient and glued-module checks for `x ⋄ x̃`.
pub fn glue(s: &Scenario, out: &mut ScenarioReport) -> Result<()> {
    let summary = glue_order(s, Order::Xy, out)?;
    out.detail = Some(serde_json::json!({ "xy": summary }));
    Ok(())
}

/// `glue` for both `x ⋄ x̃` and `x̃ ⋄ x`, plus the agreement of the inputs.
pub fn theorem1(s: &Scenario, out: &mut ScenarioReport) -> Result<()> {
    let r = check_agreement(
        &s.x,
        &s.x_tilde,
        &s.witness,
        &s.overlap(),
        &s.j_gens,
        s.budgets.eq4,
    )
    .map_err(domain)?;
    out.push(Row::le("eq4", "delta_max", r.max, s.budgets.eq4));
    let xy = glue_order(s, Order::Xy, out)?;
    let yx = glue_order(s, Order::Yx, out)?;
    out.detail = Some(serde_json::json!({ "xy": xy, "yx": yx }));
    Ok(())
}

fn pairing_rows(rows: &[PairingRow]) -> Vec<Row> {
    let mut out = Vec::new();
    for r in rows {
        let k = r
            .winding
            .map_or_else(|| "custom".to_string(), |k| format!("k={k}"));
        out.push(Row::le(
            "eq9",
            format!("{k}.residual"),
            r.residual,
            PAIRING_TOLERANCE,
        ));
        out.push(Row::eq(
            "eq9",
            format!("{k}.rounded_lhs_minus_rhs"),
            (r.lhs_rounded - r.rhs_rounded) as f64,
            0.0,
        ));
        if let Some(o) = r.oracle {
            let hits = [r.x, r.x_tilde, r.xy, r.yx]
                .iter()
                .all(|v| v.round() as i64 == o);
            out.push(Row::holds("eq9", format!("{k}.matches_index_oracle"), hits));
        }
    }
    out
}

pub fn eq9(s: &Scenario, samples: usize, out: &mut ScenarioReport) -> Result<()> {
    let v = verify_eq9(s, &Eq9Options { samples }).map_err(domain)?;
    let b = &s.budgets;
    out.extend([
        Row::le(
            "eq9-unitary",
            "U_defect",
            v.unitary_defect,
            UNITARY_TOLERANCE,
        ),
        Row::holds("eq9-dim", "dim_additivity", v.dim_additivity),
        Row::le("eq10", "norm", v.eq10_norm, b.eq10),
        Row::info("eq10", "rank", v.eq10_rank as f64),
        Row::holds("eqB-endpoint", "endpoints_exact", v.endpoint_exact),
        Row::le("eqB-path", "max_defect", v.path_max_defect, b.path),
        Row::le(
            "eqB-path",
            "max_commutator",
            v.path_max_commutator,
            b.eq2.comm,
        ),
        Row::le(
            "eqB-path",
            "lipschitz_ratio",
            v.lipschitz_ratio,
            LIPSCHITZ_LIMIT,
        ),
        Row::eq("modJ", "residual", v.modj_residual, 0.0),
        Row::eq(
            "modJ",
            "commutator_distance",
            v.modj_commutator_distance,
            0.0,
        ),
        Row::info("eqA-intertwining", "max_defect", v.intertwining_defect),
    ]);
    out.extend(pairing_rows(&v.pairings));
    out.detail = Some(to_rounded_value(&v));
    Ok(())
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + TREND_SLACK)
}

/// Runs the Toeplitz pipeline at every `N` in [`SWEEP_NS`].
pub fn sweep(file: &ScenarioFile, ctx: &Context, out: &mut ScenarioReport) -> Result<()> {
    if !matches!(file.model, Some(ModelSpec::CircleToeplitz { .. })) {
        return Err(SuiteError::Schema(
            "sweep needs a circle_toeplitz model".into(),
        ));
    }
    let grid = uniform_grid(ctx.samples).map_err(domain)?;
    let mut eq10_trend = Vec::new();
    let mut independence_trend = Vec::new();
    for n in SWEEP_NS {
        log::info!("sweep {}: N = {n}", out.name);
        let mut f = file.clone();
        f.n = Some(n);
        let s = ctx.build(&f)?;
        let b = &s.budgets;
        let setup = Eq9Setup::new(&s).map_err(domain)?;
        let first = out.rows.len();

        let mut eq2_comm = 0.0f64;
        let mut eq4_max = 0.0f64;
        for (o, gm, d) in [
            ("xy", &setup.gm_xy, &setup.diamond_xy),
            ("yx", &setup.gm_yx, &setup.diamond_yx),
        ] {
            let rows = module_rows("thm1", &format!("N={n}.{o}"), d, &s)?;
            eq2_comm = eq2_comm.max(rows[0].value);
            out.extend(rows);
            let (a1, a2) =
                diamond_agreement(gm, d, &s.j1_gens, &s.j2_gens, b.eq4).map_err(domain)?;
            eq4_max = eq4_max.max(a1.max).max(a2.max);
        }
        out.push(Row::le(
            "thm1-agreement",
            format!("N={n}.max"),
            eq4_max,
            b.eq4,
        ));

        let (eq10, eq10_rank) =
            conjugation_defect(&setup.u, &setup.sum, &setup.diamond_xy, &setup.diamond_yx);
        eq10_trend.push(eq10);
        out.push(Row::le("eq10", format!("N={n}.norm"), eq10, b.eq10));
        out.push(Row::info("eq10", format!("N={n}.rank"), eq10_rank as f64));

        let path = homotopy_path(&setup.sum, &s.x.generators, &grid).map_err(domain)?;
        let modj = path.max_modj();
        out.extend([
            Row::holds(
                "eqB-endpoint",
                format!("N={n}.endpoints_exact"),
                path.endpoint_exact,
            ),
            Row::le(
                "eqB-path",
                format!("N={n}.max_defect"),
                path.max_defect(),
                b.path,
            ),
            Row::le(
                "eqB-path",
                format!("N={n}.max_commutator"),
                path.max_commutator(),
                b.eq2.comm,
            ),
            Row::eq("modJ", format!("N={n}.residual"), modj.residual, 0.0),
        ]);

        if let Some(alt) = &s.alt_pu {
            let ind = partition_independence(&s.x, &s.x_tilde, &s.witness, &s.pu, alt, &spec(&s))
                .map_err(domain)?;
            independence_trend.push(ind.max_norm());
            out.push(Row::le_opt(
                "thm1-independence",
                format!("N={n}.norm"),
                ind.max_norm(),
                b.independence,
            ));
        }

        let pairings = setup.pairings(&s).map_err(domain)?;
        let judged = n >= SWEEP_PAIRING_MIN_N;
        out.extend(pairing_rows(&pairings).into_iter().map(|r| {
            let r = Row {
                check: format!("N={n}.{}", r.check),
                ..r
            };
            if judged {
                r
            } else {
                r.unjudged()
            }
        }));

        let verdict = Status::from_bool(out.rows[first..].iter().all(|r| r.status != Status::Fail));
        let base = SweepRow {
            n,
            eq2_comm,
            eq4_max,
            eq10_norm: eq10,
            eq10_rank,
            path_max: path.max_defect(),
            pairing_lhs: f64::NAN,
            pairing_rhs: f64::NAN,
            verdict,
            winding: None,
        };
        if pairings.is_empty() {
            out.sweep.push(base.clone());
        }
        for p in &pairings {
            out.sweep.push(SweepRow {
                pairing_lhs: p.lhs,
                pairing_rhs: p.rhs,
                winding: p.winding,
                ..base.clone()
            });
        }
    }
    out.push(Row::holds(
        "eq10-trend",
        "non_increasing_in_N",
        non_increasing(&eq10_trend),
    ));
    if !independence_trend.is_empty() {
        out.push(Row::holds(
            "thm1-independence-trend",
            "non_increasing_in_N",
            non_increasing(&independence_trend),
        ));
    }
    Ok(())
}
