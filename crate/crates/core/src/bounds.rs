//! Envelope of packed total variation at fixed unpacked distance.
//!
//! For any pair with `d_TV(P, Q) = tau`, `d_TV(P^m, Q^m)` lies between
//!
//! - the minimum over `alpha in [0, 1 - tau]` of the TV between the
//!   m-fold products of `[1 - alpha, alpha]` and `[1 - alpha - tau, alpha + tau]`;
//! - `1 - (1 - tau)^m`, attained by `U[0,1]` against `U[tau,1]`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dist::{self, DiscreteDist, DEFAULT_ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::region::region_boundary_packed;

/// Largest packing degree accepted by the binomial evaluation.
pub const MAX_BINOMIAL_DEGREE: usize = 64;

/// Coarse grid size for the alpha search.
pub const ALPHA_GRID: usize = 1024;

/// Target bracket width of the golden-section refinement.
pub const ALPHA_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    tau: f64,
    m: usize,
}

impl BoundQuery {
    pub fn new(tau: f64, m: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Domain(format!("tau must lie in [0, 1], got {tau}")));
        }
        if m == 0 {
            return Err(Error::Domain("packing degree must be positive".into()));
        }
        if m > MAX_BINOMIAL_DEGREE {
            return Err(Error::Domain(format!(
                "packing degree {m} exceeds {MAX_BINOMIAL_DEGREE}"
            )));
        }
        Ok(Self { tau, m })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

/// `1 - (1 - tau)^m`.
pub fn dtv_upper_bound(q: BoundQuery) -> f64 {
    1.0 - (1.0 - q.tau).powi(q.m as i32)
}

/// Binomial(m, a) probabilities with the multiplicative coefficient
/// recurrence `C(m, k+1) = C(m, k) (m - k) / (k + 1)`.
fn binomial_pmf(m: usize, a: f64) -> impl Iterator<Item = f64> {
    let mut coeff = 1.0;
    (0..=m).map(move |k| {
        let p = coeff * a.powi(k as i32) * (1.0 - a).powi((m - k) as i32);
        coeff = coeff * (m - k) as f64 / (k + 1) as f64;
        p
    })
}

/// TV between the m-fold products of `[1-alpha, alpha]` and
/// `[1-alpha-tau, alpha+tau]`, evaluated through the binomial counts of the
/// second atom (a sufficient statistic).
pub fn binomial_dtv(alpha: f64, tau: f64, m: usize) -> Result<f64> {
    let q = BoundQuery::new(tau, m)?;
    let hi = 1.0 - tau;
    if !(alpha >= -1e-12 && alpha <= hi + 1e-12) {
        return Err(Error::Domain(format!(
            "alpha must lie in [0, {hi}], got {alpha}"
        )));
    }
    Ok(binomial_dtv_unchecked(alpha.clamp(0.0, hi), q.tau, q.m))
}

fn binomial_dtv_unchecked(alpha: f64, tau: f64, m: usize) -> f64 {
    let shifted = (alpha + tau).min(1.0);
    let l1: f64 = binomial_pmf(m, alpha)
        .zip(binomial_pmf(m, shifted))
        .map(|(a, b)| (a - b).abs())
        .sum();
    (0.5 * l1).min(1.0)
}

/// Minimizer of `f` on `[a, b]` by golden-section search, assuming
/// unimodality on the bracket.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub alpha: f64,
    pub value: f64,
}

/// Global minimum over alpha: a 1024-point grid, then golden-section
/// refinement around the best grid point. Ties go to the smallest alpha.
pub fn dtv_lower_bound(q: BoundQuery) -> LowerBound {
    dtv_lower_bound_with(q, Execution::default())
}

pub fn dtv_lower_bound_with(q: BoundQuery, exec: Execution) -> LowerBound {
    let width = 1.0 - q.tau;
    let f = |a: f64| binomial_dtv_unchecked(a, q.tau, q.m);
    if width <= 0.0 {
        return LowerBound {
            alpha: 0.0,
            value: f(0.0),
        };
    }
    let step = width / (ALPHA_GRID - 1) as f64;
    let grid = |i: usize| {
        if i == ALPHA_GRID - 1 {
            width
        } else {
            i as f64 * step
        }
    };
    let values = exec.map(ALPHA_GRID, |i| f(grid(i)));
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let best = values.iter().position(|&v| v <= min + 1e-15).unwrap_or(0);

    let lo = grid(best.saturating_sub(1));
    let hi = grid((best + 1).min(ALPHA_GRID - 1));
    let (alpha, value) = golden_section_min(f, lo, hi, ALPHA_TOLERANCE);
    if value < values[best] - 1e-15 {
        LowerBound { alpha, value }
    } else {
        LowerBound {
            alpha: grid(best),
            value: values[best],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub dtv: f64,
    pub area: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Packed TV, region area and both bounds for `m = 1..=m_max`, with
/// `tau = d_TV(p, q)` computed from the inputs.
pub fn packing_sweep(p: &DiscreteDist, q: &DiscreteDist, m_max: usize) -> Result<Vec<SweepRow>> {
    packing_sweep_with(p, q, m_max, DEFAULT_ENUMERATION_LIMIT, Execution::default())
}

pub fn packing_sweep_with(
    p: &DiscreteDist,
    q: &DiscreteDist,
    m_max: usize,
    limit: usize,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    p.check_same_labels(q)?;
    if m_max == 0 {
        return Err(Error::Domain("m_max must be positive".into()));
    }
    // Fail before doing any work if the last degree is too large.
    let m_cap = u32::try_from(m_max).unwrap_or(u32::MAX);
    if p.len().checked_pow(m_cap).is_none_or(|size| size > limit) {
        return Err(Error::TooLarge {
            atoms: p.len(),
            degree: m_max,
            limit,
        });
    }
    let tau = dist::total_variation(p, q)?;
    let mut pm = dist::pack_with(p, 1, limit, exec)?;
    let mut qm = dist::pack_with(q, 1, limit, exec)?;
    let mut rows = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        if m > 1 {
            pm = pm.extended(limit, exec)?;
            qm = qm.extended(limit, exec)?;
        }
        let query = BoundQuery::new(tau, m)?;
        rows.push(SweepRow {
            m,
            dtv: pm.total_variation_with(&qm, exec)?,
            area: region_boundary_packed(&pm, &qm)?.area(),
            lower: dtv_lower_bound_with(query, exec).value,
            upper: dtv_upper_bound(query),
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("m,dtv,area,lower,upper\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.m, r.dtv, r.area, r.lower, r.upper);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub tau: f64,
    pub m: usize,
    pub lower: f64,
    pub upper: f64,
}

/// Both bounds on every `(tau, m)` in the product of the inputs, tau-major.
pub fn bounds_curve(taus: &[f64], ms: &[usize], exec: Execution) -> Result<Vec<BoundRow>> {
    let queries = taus
        .iter()
        .flat_map(|&t| ms.iter().map(move |&m| BoundQuery::new(t, m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(exec.map(queries.len(), |i| {
        let q = queries[i];
        BoundRow {
            tau: q.tau,
            m: q.m,
            lower: dtv_lower_bound_with(q, Execution::Sequential).value,
            upper: dtv_upper_bound(q),
        }
    }))
}

pub fn bounds_curve_csv(rows: &[BoundRow]) -> String {
    let mut s = String::from("tau,m,lower,upper\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.tau, r.m, r.lower, r.upper);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{common_refinement, pack, PiecewiseUniformDist};
    use approx::assert_abs_diff_eq;

    fn q(t: f64, m: usize) -> BoundQuery {
        BoundQuery::new(t, m).unwrap()
    }

    #[test]
    fn upper_bound_values() {
        assert_abs_diff_eq!(dtv_upper_bound(q(0.2, 1)), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(dtv_upper_bound(q(0.2, 2)), 0.36, epsilon = 1e-15);
        for m in 1..10 {
            assert_eq!(dtv_upper_bound(q(0.0, m)), 0.0);
            assert_eq!(dtv_upper_bound(q(1.0, m)), 1.0);
        }
    }

    #[test]
    fn query_validation() {
        assert!(BoundQuery::new(-0.1, 2).is_err());
        assert!(BoundQuery::new(1.1, 2).is_err());
        assert!(BoundQuery::new(0.5, 0).is_err());
        assert!(BoundQuery::new(0.5, 65).is_err());
    }

    #[test]
    fn binomial_examples() {
        for alpha in [0.0, 0.3, 0.8] {
            assert_abs_diff_eq!(binomial_dtv(alpha, 0.2, 1).unwrap(), 0.2, epsilon = 1e-15);
        }
        // 0.5 * (|1 - 0.64| + |0 - 0.32| + |0 - 0.04|)
        assert_abs_diff_eq!(binomial_dtv(0.0, 0.2, 2).unwrap(), 0.36, epsilon = 1e-15);
        assert!(matches!(binomial_dtv(0.85, 0.2, 2), Err(Error::Domain(_))));
        assert!(binomial_dtv(-0.1, 0.2, 2).is_err());
    }

    #[test]
    fn binomial_matches_packed_enumeration() {
        for &(alpha, tau) in &[(0.1, 0.2), (0.35, 0.4), (0.0, 0.9), (0.5, 0.5)] {
            let p = DiscreteDist::from_probs(vec![1.0 - alpha, alpha]).unwrap();
            let qd = DiscreteDist::from_probs(vec![1.0 - alpha - tau, alpha + tau]).unwrap();
            for m in 1..=8 {
                let brute = pack(&p, m)
                    .unwrap()
                    .total_variation(&pack(&qd, m).unwrap())
                    .unwrap();
                assert_abs_diff_eq!(binomial_dtv(alpha, tau, m).unwrap(), brute, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        // A smooth minimum is only resolved to about sqrt(EPSILON) in x.
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(fx, 1.0, epsilon = 1e-15);
        let (x, _) = golden_section_min(|x| (x - 0.3).abs(), 0.0, 1.0, 1e-10);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-10);
    }

    #[test]
    fn lower_bound_degree_one_is_tau() {
        let lb = dtv_lower_bound(q(0.2, 1));
        assert_abs_diff_eq!(lb.value, 0.2, epsilon = 1e-15);
        assert_eq!(lb.alpha, 0.0);
    }

    #[test]
    fn lower_bound_disjoint() {
        for m in 1..6 {
            assert_eq!(dtv_lower_bound(q(1.0, m)).value, 1.0);
        }
    }

    #[test]
    fn lower_bound_matches_dense_grid() {
        for &(tau, m) in &[(0.2, 2), (0.2, 3), (0.05, 4), (0.6, 5)] {
            let n = 100_000;
            let dense = (0..=n)
                .map(|i| binomial_dtv_unchecked((1.0 - tau) * i as f64 / n as f64, tau, m))
                .fold(f64::INFINITY, f64::min);
            let lb = dtv_lower_bound(q(tau, m));
            assert!(
                lb.value <= dense + 1e-9,
                "tau={tau} m={m}: {} > {dense}",
                lb.value
            );
            // Each binomial pmf has L1 derivative at most 2m in alpha, so the
            // objective is 2m-Lipschitz and the grid is within 2m * spacing.
            assert!(lb.value >= dense - 2.0 * m as f64 * (1.0 - tau) / n as f64);
            assert_abs_diff_eq!(
                binomial_dtv(lb.alpha, tau, m).unwrap(),
                lb.value,
                epsilon = 1e-15
            );
            assert!(lb.value <= dtv_upper_bound(q(tau, m)));
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let a = dtv_lower_bound_with(q(0.3, 7), Execution::Sequential);
        let b = dtv_lower_bound_with(q(0.3, 7), Execution::Parallel);
        assert_eq!(a, b);
    }

    fn toy_pairs() -> (DiscreteDist, DiscreteDist, DiscreteDist, DiscreteDist) {
        let p = PiecewiseUniformDist::uniform(0.0, 1.0).unwrap();
        let q1 = PiecewiseUniformDist::uniform(0.2, 1.0).unwrap();
        let q2 = PiecewiseUniformDist::mixture(&[(0.3, 0.0, 0.5), (0.7, 0.5, 1.0)]).unwrap();
        let (a, b) = common_refinement(&p, &q1);
        let (c, d) = common_refinement(&p, &q2);
        (a, b, c, d)
    }

    #[test]
    fn toy_sweeps() {
        let (p1, q1, p2, q2) = toy_pairs();
        let rows = packing_sweep(&p1, &q1, 3).unwrap();
        for (r, want) in rows.iter().zip([0.2, 0.36, 0.488]) {
            assert_abs_diff_eq!(r.dtv, want, epsilon = 1e-12);
            assert!(r.lower - 1e-9 <= r.dtv && r.dtv <= r.upper + 1e-9);
        }
        let rows2 = packing_sweep(&p2, &q2, 2).unwrap();
        assert_abs_diff_eq!(rows2[1].dtv, 0.24, epsilon = 1e-12);
        let same = packing_sweep(&p1, &p1, 4).unwrap();
        assert!(same.iter().all(|r| r.dtv == 0.0 && r.area == 0.0));
    }

    #[test]
    fn sweep_guard_and_csv() {
        let (p1, q1, ..) = toy_pairs();
        assert!(matches!(
            packing_sweep_with(&p1, &q1, 5, 16, Execution::Sequential),
            Err(Error::TooLarge { .. })
        ));
        let rows = packing_sweep(&p1, &q1, 1).unwrap();
        assert!(sweep_csv(&rows).starts_with("m,dtv,area,lower,upper\n1,"));
    }

    #[test]
    fn curve_rows() {
        let rows = bounds_curve(&[0.0, 0.5], &[1, 2], Execution::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[3].tau, rows[3].m), (0.5, 2));
        assert_abs_diff_eq!(rows[3].upper, 0.75, epsilon = 1e-15);
        assert!(bounds_curve_csv(&rows).starts_with("tau,m,lower,upper\n0,1,0,0\n"));
    }
}
