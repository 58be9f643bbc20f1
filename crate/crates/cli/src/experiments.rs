//! Seeded studies around the partial vine copula map: its discontinuity, its
//! non-optimality, the nowhere-dense diagnostic and two convergence labs.

use std::time::Instant;

use pvcopula::disintegration::{j_functional, simplifiedness_delta};
use pvcopula::families::{
    bstar, bstarstar, cube_copula, efgm_sequence_member, independence, pi_analytic,
};
use pvcopula::metrics::{d1, d_inf, tv, wcc_profile, DinfOptions, MetricReport};
use pvcopula::pvc::pvc3;
use pvcopula::quadrature::gl8_unit;
use pvcopula::{convex_combine, GridCopula};
use serde::{Deserialize, Serialize};

use crate::battery::{cube_rank_pattern, empirical_of};
use crate::{rng, CliError};

/// Certified enclosure `[lower, upper]` of a reported value.
pub fn bounds(r: &MetricReport) -> (f64, f64) {
    let lower = r.lower.unwrap_or(r.value);
    let upper = r.upper.unwrap_or(r.value + r.exactness.budget());
    (lower, upper)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscontinuityRow {
    pub n: usize,
    pub seed: u64,
    /// Enclosure of `d_inf(C_n, Cube)`.
    pub dinf_sample_lower: f64,
    pub dinf_sample_upper: f64,
    /// Enclosure of `d_inf(psi(C_n), psi(Cube)) = d_inf(psi(C_n), Pi)`.
    pub dinf_psi_lower: f64,
    pub dinf_psi_upper: f64,
    /// `TV(C_n, psi(C_n))`, zero since empirical copulas are simplified.
    pub tv_fixed_point: f64,
    pub seconds: f64,
}

/// Sample `n` points from the cube copula, build the empirical copula and
/// compare distances before and after applying `psi`.
pub fn discontinuity_row(
    n: usize,
    seed: u64,
    opts: &DinfOptions,
) -> Result<DiscontinuityRow, CliError> {
    let start = Instant::now();
    let cube = cube_copula();
    let e = empirical_of(&cube, n, &mut rng(seed))?;
    let psi = pvc3(&e)?.psi;
    let pi = independence(3, None)?;
    let (sl, su) = bounds(&d_inf(&e, &cube, opts)?);
    let (pl, pu) = bounds(&d_inf(&psi, &pi, opts)?);
    Ok(DiscontinuityRow {
        n,
        seed,
        dinf_sample_lower: sl,
        dinf_sample_upper: su,
        dinf_psi_lower: pl,
        dinf_psi_upper: pu,
        tv_fixed_point: tv(&e, &psi)?.value,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn discontinuity(
    ns: &[usize],
    seed: u64,
    opts: &DinfOptions,
) -> Result<Vec<DiscontinuityRow>, CliError> {
    if ns.contains(&0) {
        return Err(CliError::Usage("sample sizes must be at least 1".into()));
    }
    ns.iter()
        .map(|&n| discontinuity_row(n, seed, opts))
        .collect()
}

/// A simplified copula closer to the cube copula than its partial vine copula.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonOptWitness {
    pub label: String,
    pub n: usize,
    /// `Delta(D)`; zero certifies that `D` is simplified.
    pub delta: f64,
    pub dinf_lower: f64,
    pub dinf_upper: f64,
    /// `d_inf(Cube, psi(Cube))`.
    pub dinf_psi: f64,
    pub pass: bool,
}

fn witness(
    label: &str,
    d: &GridCopula,
    dinf_psi: f64,
    opts: &DinfOptions,
) -> Result<NonOptWitness, CliError> {
    let cube = cube_copula();
    let (delta, _) = simplifiedness_delta(d)?;
    let (lo, hi) = bounds(&d_inf(&cube, d, opts)?);
    Ok(NonOptWitness {
        label: label.to_string(),
        n: d.resolutions()[0],
        delta,
        dinf_lower: lo,
        dinf_upper: hi,
        dinf_psi,
        pass: delta <= 1e-12 && hi < dinf_psi,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonOptReport {
    pub seed: u64,
    pub witnesses: Vec<NonOptWitness>,
    pub pass: bool,
}

/// Exhibit simplified `D` with `d_inf(Cube, D) < d_inf(Cube, psi(Cube))`. The
/// witness is an empirical copula of `n` cube draws; the deterministic 8-point
/// pattern is reported alongside and only ties.
pub fn nonopt(n: usize, seed: u64, opts: &DinfOptions) -> Result<NonOptReport, CliError> {
    let cube = cube_copula();
    let psi = pvc3(&cube)?.psi;
    let dinf_psi = d_inf(&cube, &psi, opts)?.value;
    let e = empirical_of(&cube, n, &mut rng(seed))?;
    let witnesses = vec![
        witness("empirical sample", &e, dinf_psi, opts)?,
        witness("rank pattern", &cube_rank_pattern(), dinf_psi, opts)?,
    ];
    // One strictly better simplified copula is enough.
    let pass = witnesses.iter().any(|w| w.pass);
    Ok(NonOptReport {
        seed,
        witnesses,
        pass,
    })
}

/// Independent value of `Delta(Cube)`: the two slab copulas of the cube are
/// 2x2 checkerboards whose difference has constant sign on each quadrant, so
/// tensor Gauss-Legendre on the quadrants is exact.
pub fn cube_delta_oracle() -> f64 {
    fn checker(m: [[f64; 2]; 2], u: f64, v: f64) -> f64 {
        let mut s = 0.0;
        for (i, row) in m.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                s +=
                    w * (2.0 * u - i as f64).clamp(0.0, 1.0) * (2.0 * v - j as f64).clamp(0.0, 1.0);
            }
        }
        s
    }
    let lower = [[0.5, 0.0], [0.0, 0.5]];
    let upper = [[0.0, 0.5], [0.5, 0.0]];
    let (x, w) = gl8_unit();
    let mut total = 0.0;
    for qa in 0..2 {
        for qb in 0..2 {
            for (xi, wi) in x.iter().zip(w.iter()) {
                for (yj, wj) in x.iter().zip(w.iter()) {
                    let u = 0.5 * (qa as f64 + xi);
                    let v = 0.5 * (qb as f64 + yj);
                    total += 0.25 * wi * wj * (checker(lower, u, v) - checker(upper, u, v)).abs();
                }
            }
        }
    }
    total
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JRow {
    pub label: String,
    pub j: f64,
    pub error: f64,
    /// Whether `D` is simplified; only those rows are held to the lower bound.
    pub simplified: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NowhereDenseReport {
    pub seed: u64,
    pub delta: f64,
    pub delta_error: f64,
    pub delta_oracle: f64,
    /// `Delta(Cube) / 2`.
    pub bound: f64,
    pub rows: Vec<JRow>,
    pub pass: bool,
}

/// `Delta(Cube)` and `J(D, Cube)` for a battery of simplified `D`; every `J`
/// must be at least `Delta / 2`.
pub fn nowheredense(seed: u64) -> Result<NowhereDenseReport, CliError> {
    let cube = cube_copula();
    let (delta, delta_error) = simplifiedness_delta(&cube)?;
    let bound = delta / 2.0;
    let mut r = rng(seed);
    let battery: Vec<(&str, GridCopula)> = vec![
        (
            "empirical(pi, 500)",
            empirical_of(&independence(3, None)?, 500, &mut r)?,
        ),
        ("empirical(cube, 500)", empirical_of(&cube, 500, &mut r)?),
        ("cube rank pattern", cube_rank_pattern()),
        ("pi[1,1,1]", independence(3, None)?),
        ("pi[4,4,4]", independence(3, Some(&[4, 4, 4]))?),
        ("bstar x pi", bstar().product_extend(3)?),
        ("bstarstar x pi", bstarstar().product_extend(3)?),
        ("psi(cube)", pvc3(&cube)?.psi),
        ("cube", cube.clone()),
    ];
    let mut rows = Vec::new();
    for (label, d) in battery {
        let (j, error) = j_functional(&d, &cube)?;
        let (dd, de) = simplifiedness_delta(&d)?;
        let simplified = dd <= 1e-12 + de;
        let pass = if simplified {
            j >= bound - 1e-6
        } else {
            j <= 1e-12 + error
        };
        rows.push(JRow {
            label: label.to_string(),
            j,
            error,
            simplified,
            pass,
        });
    }
    let pass = (delta - cube_delta_oracle()).abs() <= 1e-9 && rows.iter().all(|x| x.pass);
    Ok(NowhereDenseReport {
        seed,
        delta,
        delta_error,
        delta_oracle: cube_delta_oracle(),
        bound,
        rows,
        pass,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EfgmSeqRow {
    pub m: u32,
    pub k: u64,
    pub d1: f64,
    pub d1_error: f64,
    pub d1_expected: f64,
    pub wcc_sup: f64,
}

/// For `m = 1..=m_max`: `D_1(C_m, Pi)` and the supremum of the weak
/// conditional convergence profile of the first sequence member at level `m`.
pub fn efgm_seq(m_max: u32) -> Result<Vec<EfgmSeqRow>, CliError> {
    let pi = pi_analytic(3);
    // Midpoints of 512 v-cells reach into every J_{m,1} up to m = 9.
    let v_grid: Vec<f64> = (0..512).map(|i| (i as f64 + 0.5) / 512.0).collect();
    (1..=m_max)
        .map(|m| {
            let c = efgm_sequence_member(m, 1, 3)?;
            let r = d1(&c, &pi)?;
            let prof = wcc_profile(&c, &pi, &v_grid, 16)?;
            let sup = prof.iter().map(|x| x.distance).fold(0.0, f64::max);
            Ok(EfgmSeqRow {
                m,
                k: 1,
                d1: r.value,
                d1_error: r.exactness.budget(),
                d1_expected: 0.5f64.powi(m as i32) / 36.0,
                wcc_sup: sup,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub n: usize,
    /// `D_1(psi(C_n), psi(C))` for `C_n = (1 - 1/n) C + (1/n) Pi`.
    pub d1_psi: f64,
    pub d1_error: f64,
    pub scaled: f64,
}

/// The reference copula of the continuity lab: a non-simplified mixture with bounded density.
pub fn continuity_reference() -> Result<GridCopula, CliError> {
    Ok(convex_combine(
        &[0.7, 0.3],
        &[cube_copula(), bstar().product_extend(3)?],
    )?)
}

/// `D_1(psi(C_n), psi(C))` along `n = 1, 2, 4, ..., n_max`; the column `n * d1`
/// stays bounded when the map is Lipschitz along the path.
pub fn d1_continuity(n_max: usize) -> Result<Vec<ContinuityRow>, CliError> {
    let c = continuity_reference()?;
    let pi = independence(3, None)?;
    let psi_c = pvc3(&c)?.psi;
    let mut rows = Vec::new();
    let mut n = 1;
    while n <= n_max {
        let w = 1.0 / n as f64;
        let cn = convex_combine(&[1.0 - w, w], &[c.clone(), pi.clone()])?;
        let r = d1(&pvc3(&cn)?.psi, &psi_c)?;
        rows.push(ContinuityRow {
            n,
            d1_psi: r.value,
            d1_error: r.exactness.budget(),
            scaled: n as f64 * r.value,
        });
        n *= 2;
    }
    Ok(rows)
}
