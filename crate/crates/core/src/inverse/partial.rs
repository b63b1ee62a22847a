//! Partial-data boundary determination and the special solutions that vanish
//! below a diagonal line.

use nalgebra::{DMatrix, DVector};

use super::oracle::DNOracle;
use crate::error::{Error, Result};
use crate::lattice::{diagonal_line, Family, Frame, HexDomain, LineSpec, Side};
use crate::linalg;
use crate::vertex::DNMatrix;

/// Rank gate: `σ_min/σ_max` below this is a uniqueness violation.
pub const RANK_TOL: f64 = 1e-12;
/// Residual gate, relative to the data scale.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Dirichlet data and the vertex-model D-N image on the whole boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub f: Vec<f64>,
    pub lambda_f: Vec<f64>,
}

/// Complete `f₂` (given off `free_side`) so that `(Λf)|_L = g`.
///
/// Entries of `f2` on `free_side` are ignored.  The system
/// `Λ_{L,S} x = g − Λ_{L,∂Ω∖S} f₂` is solved by least squares with rank and
/// residual gates.
pub fn solve_partial_data(dn: &DNMatrix, domain: &HexDomain, free_side: Side, f2: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let m = domain.boundary().len();
    if dn.dim() != m || f2.len() != m {
        return Err(Error::InvalidArgument(format!(
            "D-N map of size {} and data of length {} do not fit a domain with {m} boundary vertices",
            dn.dim(),
            f2.len()
        )));
    }
    let left = domain.side_range(Side::Left);
    if g.len() != left.len() {
        return Err(Error::InvalidArgument(format!(
            "Neumann data has {} entries, left side has {}",
            g.len(),
            left.len()
        )));
    }
    if free_side == Side::Left {
        return Err(Error::InvalidArgument("the free side cannot carry the Neumann data".into()));
    }
    let free = domain.side_range(free_side);
    let mut a = DMatrix::zeros(left.len(), free.len());
    let mut b = DVector::from_column_slice(g);
    for (r, i) in left.clone().enumerate() {
        for j in 0..m {
            if free.contains(&j) {
                a[(r, j - free.start)] = dn.matrix[(i, j)];
            } else {
                b[r] -= dn.matrix[(i, j)] * f2[j];
            }
        }
    }
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let sol = linalg::lstsq(&a, &bm, 0.0);
    let smax = sol.singular_values.first().copied().unwrap_or(0.0);
    let smin = sol.singular_values.get(free.len() - 1).copied().unwrap_or(0.0);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if sol.singular_values.len() < free.len() || ratio < RANK_TOL {
        return Err(Error::UniquenessViolation { lambda: dn.lambda, ratio });
    }
    let x = sol.x.column(0).clone_owned();
    let resid = (&a * &x - &b).amax();
    let scale = b.amax() + a.amax() * x.amax() + f64::MIN_POSITIVE;
    if resid > RESIDUAL_TOL * scale {
        return Err(Error::Inconsistency {
            lambda: dn.lambda,
            residual: resid / scale,
        });
    }
    let mut f = f2.to_vec();
    for (r, j) in free.enumerate() {
        f[j] = x[r];
    }
    Ok(f)
}

/// Boundary data of the special solution through the `k`-th top vertex:
/// `f = 1` there, `f = 0` off the exit side, zero Neumann data on the left side.
pub fn special_solution_from_dn(dn: &DNMatrix, domain: &HexDomain, line: &LineSpec) -> Result<CauchyData> {
    let m = domain.boundary().len();
    let mut f2 = vec![0.0; m];
    let entry = domain
        .boundary_index(line.entry())
        .ok_or_else(|| Error::InvalidArgument("line does not start on the boundary".into()))?;
    f2[entry] = 1.0;
    let g = vec![0.0; domain.side_range(Side::Left).len()];
    let mut f = solve_partial_data(dn, domain, line.exit_side, &f2, &g)?;
    // pinned, not solved
    f[entry] = 1.0;
    let lf = (&dn.matrix * DVector::from_column_slice(&f)).iter().copied().collect();
    Ok(CauchyData { f, lambda_f: lf })
}

pub fn special_solution_data(
    oracle: &dyn DNOracle,
    domain: &HexDomain,
    k: usize,
    lambda: f64,
) -> Result<(CauchyData, LineSpec)> {
    let line = diagonal_line(domain, k, Family::Original)?;
    let dn = oracle.dn(domain.frame(), lambda)?;
    check_order(&dn, domain, domain.frame())?;
    Ok((special_solution_from_dn(&dn, domain, &line)?, line))
}

pub(crate) fn check_order(dn: &DNMatrix, domain: &HexDomain, frame: Frame) -> Result<()> {
    let ok = dn.boundary_order.len() == domain.boundary().len()
        && dn
            .boundary_order
            .iter()
            .zip(domain.boundary())
            .all(|(p, b)| *p == b.position);
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "D-N record for frame {frame} has a boundary order that does not match the domain"
        )))
    }
}
