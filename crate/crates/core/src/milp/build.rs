//! Encode a scenario as the allocation ILP.
//!
//! Each SINR row is cleared of its denominator and divided by the link's own
//! signal-to-noise ratio, so the link column has coefficient 1, an interferer
//! has `-Ψ_r·ξ/S` and the right-hand side is `Ψ_r·P_o/S`. Raw powers span ten
//! orders of magnitude; the scaled rows keep every coefficient near 1.
//!
//! Beyond that the model is presolved by hand, without changing its 0-1
//! solutions: a link that misses `Ψ_r` even without interference is fixed
//! off, an interferer weight larger than the link's whole margin is clipped
//! to just above that margin, and a SINR row that all interferers together
//! cannot violate is left out. The history and readiness rows are multiplied
//! through by `D` and `|R|` respectively, which keeps them integral. Other
//! rows that no 0-1 assignment can violate are left out too, and columns that
//! can only be 0 are fixed by their bounds.

use thiserror::Error;

use super::model::{MilpModel, RowSense, VarKey};
use crate::scenario::{DerivedTables, Scenario};

/// A conventional big-M constant, in units of the noise power.
pub const DEFAULT_BIG_M: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BigM {
    /// Per row, twice the least value that deactivates it.
    #[default]
    Tight,
    /// This constant, in units of the noise power, in every SINR row;
    /// building fails if some row needs more.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BuildOptions {
    pub big_m: BigM,
}

#[derive(Debug, Error, PartialEq)]
pub enum BuildError {
    #[error(
        "big-M {mu:e} is too small for {row}: deactivating it needs at least {required:e} \
         (Ψ·(1 + Σξ/P_o) after clipping); raise μ or use the tight big-M"
    )]
    BigMTooSmall { row: String, mu: f64, required: f64 },
    #[error("tables cover {tables} slots but the scenario has {scenario}")]
    ShapeMismatch { tables: usize, scenario: usize },
}

/// Index of each column, by key, for the current build.
struct Columns {
    nb: usize,
    ni: usize,
    nr: usize,
    o: Vec<Vec<usize>>,
    xb: Vec<Vec<Vec<usize>>>,
    xi: Vec<Vec<Vec<usize>>>,
    zb: Vec<Vec<Vec<Option<usize>>>>,
    zi: Vec<Vec<Vec<Option<usize>>>>,
    w: Vec<Vec<Vec<usize>>>,
    y: Vec<Vec<Vec<usize>>>,
    c: Vec<Vec<usize>>,
}

pub fn build_model(tables: &DerivedTables, scenario: &Scenario) -> Result<MilpModel, BuildError> {
    build_model_with(tables, scenario, &BuildOptions::default())
}

pub fn build_model_with(
    tables: &DerivedTables,
    scenario: &Scenario,
    options: &BuildOptions,
) -> Result<MilpModel, BuildError> {
    let ns = scenario.num_slots();
    if tables.num_slots() != ns {
        return Err(BuildError::ShapeMismatch { tables: tables.num_slots(), scenario: ns });
    }
    let nb = scenario.base_stations.len();
    let ni = scenario.ris.len();
    let nr = scenario.robots.len();
    let cov = &tables.coverage;
    let delay = scenario.config.qos.reconfig_delay.max(1) as usize;
    let cap = tables.max_concurrent as usize;
    let pw = &tables.powers;
    let po = tables.noise_power_w;
    // Usable: covered, and above the threshold with no interference at all.
    let bs_ok = |b: usize, r: usize, n: usize| {
        cov.bs_covers(b, r, n) && pw.p_direct[n][b][r] * pw.gain_product / po >= scenario.robots[r].sinr_threshold
    };
    let ris_ok = |i: usize, r: usize, n: usize| {
        cov.ris_link_available(i, r, n) && pw.p_ris[n][i][r] * pw.gain_product / po >= scenario.robots[r].sinr_threshold
    };

    let mut model = MilpModel::new(format!("risnet_r{nr}_n{ns}_b{nb}_i{ni}"));
    let mut cols = Columns {
        nb,
        ni,
        nr,
        o: vec![vec![0; nr]; ns],
        xb: vec![vec![vec![0; nr]; nb]; ns],
        xi: vec![vec![vec![0; nr]; ni]; ns],
        zb: vec![vec![vec![None; nr]; nb]; ns],
        zi: vec![vec![vec![None; nr]; ni]; ns],
        w: vec![vec![vec![0; nr]; ni]; ns],
        y: vec![vec![vec![0; nr]; ni]; ns],
        c: vec![vec![0; ni]; ns],
    };

    // Columns, slot-major so that a depth-first search meets them in time order.
    for n in 0..ns {
        let window = (n + 1).saturating_sub(delay)..=n;
        for r in 0..nr {
            cols.o[n][r] = model.add_binary(VarKey::O { r, n }, 1.0, false);
            for b in 0..nb {
                cols.xb[n][b][r] = model.add_binary(VarKey::Xb { b, r, n }, 0.0, !bs_ok(b, r, n));
            }
            for i in 0..ni {
                cols.xi[n][i][r] = model.add_binary(VarKey::Xi { i, r, n }, 0.0, !ris_ok(i, r, n));
            }
            for b in 0..nb {
                if bs_ok(b, r, n) {
                    cols.zb[n][b][r] = Some(model.add_binary(VarKey::Zb { b, r, n }, 0.0, false));
                }
            }
            for i in 0..ni {
                if ris_ok(i, r, n) {
                    cols.zi[n][i][r] = Some(model.add_binary(VarKey::Zi { i, r, n }, 0.0, false));
                }
            }
            for i in 0..ni {
                cols.w[n][i][r] = model.add_binary(VarKey::W { i, r, n }, 0.0, !ris_ok(i, r, n));
            }
        }
        for i in 0..ni {
            let mut live = 0;
            for r in 0..nr {
                let used = window.clone().any(|m| ris_ok(i, r, m));
                live += used as usize;
                cols.y[n][i][r] = model.add_binary(VarKey::Y { i, r, n }, 0.0, !used);
            }
            cols.c[n][i] = model.add_binary(VarKey::C { i, n }, 0.0, live <= cap);
        }
    }

    let live = |model: &MilpModel, j: usize| model.variables[j].upper > 0.0;

    for n in 0..ns {
        // One link per robot.
        for r in 0..nr {
            let terms: Vec<_> = (0..nb)
                .map(|b| cols.xb[n][b][r])
                .chain((0..ni).map(|i| cols.xi[n][i][r]))
                .filter(|&j| live(&model, j))
                .map(|j| (j, 1.0))
                .collect();
            if terms.len() > 1 {
                model.add_row(format!("single_r{r}_n{n}"), terms, RowSense::Le, 1.0);
            }
        }

        for i in 0..ni {
            // Conflicting arrival angles.
            for &(r, s) in tables.conflicts.at(i, n) {
                let (a, b) = (cols.xi[n][i][r], cols.xi[n][i][s]);
                if live(&model, a) && live(&model, b) {
                    model.add_row(format!("conflict_i{i}_r{r}_r{s}_n{n}"), vec![(a, 1.0), (b, 1.0)], RowSense::Le, 1.0);
                }
            }
            // Nulling capacity.
            let terms: Vec<_> =
                (0..nr).map(|r| cols.xi[n][i][r]).filter(|&j| live(&model, j)).map(|j| (j, 1.0)).collect();
            if terms.len() > cap {
                model.add_row(format!("capacity_i{i}_n{n}"), terms, RowSense::Le, cap as f64);
            }
        }

        // SINR with big-M deactivation.
        for r in 0..nr {
            let psi = scenario.robots[r].sinr_threshold;
            for b in 0..nb {
                if let Some(z) = cols.zb[n][b][r] {
                    let signal = tables.powers.p_direct[n][b][r] * tables.powers.gain_product;
                    let row = format!("sinr_b{b}_r{r}_n{n}");
                    add_sinr_row(&mut model, &cols, tables, options, n, r, psi, cols.xb[n][b][r], z, signal, None, row)?;
                    model.add_row(
                        format!("pair_b{b}_r{r}_n{n}"),
                        vec![(cols.xb[n][b][r], 1.0), (z, 1.0)],
                        RowSense::Eq,
                        1.0,
                    );
                }
            }
            for i in 0..ni {
                if let Some(z) = cols.zi[n][i][r] {
                    let signal = tables.powers.p_ris[n][i][r] * tables.powers.gain_product;
                    let row = format!("sinr_i{i}_r{r}_n{n}");
                    add_sinr_row(&mut model, &cols, tables, options, n, r, psi, cols.xi[n][i][r], z, signal, Some(i), row)?;
                    model.add_row(
                        format!("pair_i{i}_r{r}_n{n}"),
                        vec![(cols.xi[n][i][r], 1.0), (z, 1.0)],
                        RowSense::Eq,
                        1.0,
                    );
                }
            }
        }

        // History: D·Y ≥ Σ_window X.
        let start = (n + 1).saturating_sub(delay);
        for i in 0..ni {
            for r in 0..nr {
                let y = cols.y[n][i][r];
                if !live(&model, y) {
                    continue;
                }
                let mut terms: Vec<_> =
                    (start..=n).map(|m| cols.xi[m][i][r]).filter(|&j| live(&model, j)).map(|j| (j, 1.0)).collect();
                terms.push((y, -(delay as f64)));
                model.add_row(format!("history_i{i}_r{r}_n{n}"), terms, RowSense::Le, 0.0);
            }
            // Readiness: |R|·C ≥ ΣY - U.
            let c = cols.c[n][i];
            if live(&model, c) {
                let mut terms: Vec<_> =
                    (0..nr).map(|r| cols.y[n][i][r]).filter(|&j| live(&model, j)).map(|j| (j, 1.0)).collect();
                terms.push((c, -(nr as f64)));
                model.add_row(format!("ready_i{i}_n{n}"), terms, RowSense::Le, cap as f64);
            }
        }

        for r in 0..nr {
            // Fewer than K_r outages in every full window.
            let k = scenario.robots[r].outage_limit as usize;
            if n + 1 >= k {
                let terms = (n + 1 - k..=n).map(|m| (cols.o[m][r], 1.0)).collect();
                model.add_row(format!("outage_r{r}_n{n}"), terms, RowSense::Le, (k - 1) as f64);
            }

            // Outage unless served by a BS or a ready RIS.
            let mut terms = vec![(cols.o[n][r], 1.0)];
            terms.extend((0..ni).map(|i| cols.w[n][i][r]).filter(|&j| live(&model, j)).map(|j| (j, 1.0)));
            terms.extend((0..nb).map(|b| cols.xb[n][b][r]).filter(|&j| live(&model, j)).map(|j| (j, 1.0)));
            model.add_row(format!("served_r{r}_n{n}"), terms, RowSense::Ge, 1.0);

            for i in 0..ni {
                let w = cols.w[n][i][r];
                if !live(&model, w) {
                    continue;
                }
                // A RIS link counts only while the RIS is ready.
                model.add_row(
                    format!("ready_x_i{i}_r{r}_n{n}"),
                    vec![(w, 1.0), (cols.xi[n][i][r], -1.0)],
                    RowSense::Le,
                    0.0,
                );
                let c = cols.c[n][i];
                if live(&model, c) {
                    model.add_row(format!("ready_c_i{i}_r{r}_n{n}"), vec![(w, 1.0), (c, 1.0)], RowSense::Le, 1.0);
                }
            }
        }
    }
    Ok(model)
}

/// `X + μ'Z - Σ a_k X_k ≥ ρ`, the SINR row scaled by the link's SNR, where
/// `ρ = Ψ/SNR` and `a_k = Ψ·ξ_k/S`. The caller guarantees `ρ ≤ 1`.
#[allow(clippy::too_many_arguments)]
fn add_sinr_row(
    model: &mut MilpModel,
    cols: &Columns,
    tables: &DerivedTables,
    options: &BuildOptions,
    n: usize,
    r: usize,
    psi: f64,
    x: usize,
    z: usize,
    signal: f64,
    own_ris: Option<usize>,
    row: String,
) -> Result<(), BuildError> {
    let snr = signal / tables.noise_power_w;
    let rho = psi / snr;
    let margin = 1.0 - rho;
    let mut terms = vec![(x, 1.0)];
    let mut total = 0.0;
    let mut push = |j: usize, xi: f64, terms: &mut Vec<(usize, f64)>| {
        if xi > 0.0 && model.variables[j].upper > 0.0 {
            // Any weight above the margin already rules the pair out.
            let a = (psi * xi / signal).min(1.0 + margin);
            terms.push((j, -a));
            total += a;
        }
    };
    for other in (0..cols.nr).filter(|&o| o != r) {
        for b in 0..cols.nb {
            push(cols.xb[n][b][other], tables.powers.xi_bs[n][b][other][r], &mut terms);
        }
        for i in (0..cols.ni).filter(|&i| Some(i) != own_ris) {
            push(cols.xi[n][i][other], tables.powers.xi_ris[n][i][other][r], &mut terms);
        }
    }
    if total <= margin {
        return Ok(());
    }
    // Switched off (X = 0, Z = 1) the row must hold with every interferer on.
    let required = rho + total;
    let mu = match options.big_m {
        BigM::Tight => 2.0 * required,
        BigM::Fixed(mu) if mu / snr >= required => mu / snr,
        BigM::Fixed(mu) => return Err(BuildError::BigMTooSmall { row, mu, required: required * snr }),
    };
    terms.insert(1, (z, mu));
    model.add_row(row, terms, RowSense::Ge, rho);
    Ok(())
}
