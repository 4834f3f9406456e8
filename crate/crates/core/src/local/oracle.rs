//! Independent checks of the main solver.
//!
//! The CHSH test decides locality exactly for two qubits with two settings
//! each (no-signaling input assumed). The vertex test rebuilds the local
//! polytope by enumerating deterministic strategies with an odometer and runs
//! a plain dense-tableau phase one under Bland's rule. It shares no code with
//! the revised simplex and is only meant for small scenarios.

use super::VerdictKind;
use crate::error::{Error, Result};
use crate::measurement::Behavior;

/// Largest number of deterministic strategies the vertex test accepts.
pub const VERTEX_ORACLE_CAP: usize = 10_000;

const CHSH_MARGIN: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

fn require_chsh_scenario(behavior: &Behavior) -> Result<()> {
    let s = behavior.scenario();
    if s.local_dim() != 2 || s.settings() != [2, 2] {
        return Err(Error::Scenario(format!(
            "the CHSH test needs two qubits with two settings each, got d={} settings={}",
            s.local_dim(),
            s
        )));
    }
    Ok(())
}

fn correlator(behavior: &Behavior, x: usize, y: usize) -> f64 {
    let mut e = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let sign = if a == b { 1.0 } else { -1.0 };
            e += sign * behavior.prob(&[x, y], &[a, b]);
        }
    }
    e
}

/// The four CHSH expressions, each with the minus sign on a different
/// correlator: `E00+E01+E10−E11`, `E00+E01−E10+E11`, `E00−E01+E10+E11`,
/// `−E00+E01+E10+E11`.
pub fn chsh_values(behavior: &Behavior) -> Result<[f64; 4]> {
    require_chsh_scenario(behavior)?;
    let e = [
        correlator(behavior, 0, 0),
        correlator(behavior, 0, 1),
        correlator(behavior, 1, 0),
        correlator(behavior, 1, 1),
    ];
    let total: f64 = e.iter().sum();
    Ok([
        total - 2.0 * e[3],
        total - 2.0 * e[2],
        total - 2.0 * e[1],
        total - 2.0 * e[0],
    ])
}

/// Largest `|S|` over the eight CHSH variants.
pub fn max_abs_chsh(behavior: &Behavior) -> Result<f64> {
    Ok(chsh_values(behavior)?.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Nonlocal iff some CHSH variant exceeds 2.
pub fn chsh_oracle(behavior: &Behavior) -> Result<VerdictKind> {
    Ok(if max_abs_chsh(behavior)? > 2.0 + CHSH_MARGIN {
        VerdictKind::Nonlocal
    } else {
        VerdictKind::Local
    })
}

/// Decides membership in the local polytope by brute force.
pub fn vertex_membership_oracle(behavior: &Behavior, tol: f64) -> Result<VerdictKind> {
    let s = behavior.scenario();
    let d = s.local_dim();
    let total_settings: usize = s.settings().iter().sum();
    let count = (d as u128).checked_pow(total_settings as u32).unwrap_or(u128::MAX);
    if count > VERTEX_ORACLE_CAP as u128 {
        return Err(Error::CapExceeded { required: count, cap: VERTEX_ORACLE_CAP as u64 });
    }
    let n = count as usize;
    let table = behavior.table();
    let m = table.len() + 1;

    // rows: behavior entries then normalization; columns: vertices then
    // artificials then rhs
    let width = n + m + 1;
    let mut t = vec![0.0; m * width];
    let mut odometer = vec![0usize; total_settings];
    for j in 0..n {
        for kidx in 0..s.num_setting_tuples() {
            let ks = s.setting_tuple(kidx);
            let mut offset = 0;
            let mut r = 0;
            for (party, &k) in ks.iter().enumerate() {
                r = r * d + odometer[offset + k];
                offset += s.settings()[party];
            }
            t[(kidx * s.num_outcome_tuples() + r) * width + j] = 1.0;
        }
        t[(m - 1) * width + j] = 1.0;
        for digit in odometer.iter_mut().rev() {
            *digit += 1;
            if *digit < d {
                break;
            }
            *digit = 0;
        }
    }
    for i in 0..m {
        let rhs = if i + 1 == m { 1.0 } else { table[i] };
        if rhs < 0.0 {
            for v in &mut t[i * width..(i + 1) * width] {
                *v = -*v;
            }
            t[i * width + width - 1] = -rhs;
        } else {
            t[i * width + width - 1] = rhs;
        }
        t[i * width + n + i] = 1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase-one reduced costs, kept as an extra tableau row
    let mut cost = vec![0.0; width];
    for i in 0..m {
        for (c, v) in cost.iter_mut().zip(&t[i * width..(i + 1) * width]) {
            *c -= v;
        }
    }
    for c in &mut cost[n..n + m] {
        *c += 1.0;
    }

    let max_pivots = 100 * (n + m);
    for _ in 0..max_pivots {
        let Some(q) = (0..n + m).find(|&j| cost[j] < -PRICE_TOL) else {
            return Ok(if -cost[width - 1] > tol {
                VerdictKind::Nonlocal
            } else {
                VerdictKind::Local
            });
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i * width + q];
            if a > PIVOT_TOL {
                let ratio = t[i * width + width - 1] / a;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        let slack = TIE_TOL * (1.0 + lr.abs());
                        ratio < lr - slack || (ratio <= lr + slack && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((p, _)) = leave else {
            return Err(Error::Solver("vertex test: unbounded phase one".into()));
        };
        let pivot = t[p * width + q];
        for v in &mut t[p * width..(p + 1) * width] {
            *v /= pivot;
        }
        let pivot_row: Vec<f64> = t[p * width..(p + 1) * width].to_vec();
        for i in 0..m {
            if i != p {
                let f = t[i * width + q];
                if f != 0.0 {
                    for (v, pr) in t[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                        *v -= f * pr;
                    }
                }
            }
        }
        let f = cost[q];
        for (v, pr) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * pr;
        }
        basis[p] = q;
    }
    Err(Error::Solver("vertex test: pivot limit reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Scenario;

    fn pr_box() -> Behavior {
        let s = Scenario::new(2, vec![2, 2]).unwrap();
        let mut table = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        if (a ^ b) == (x & y) {
                            table[(x * 2 + y) * 4 + a * 2 + b] = 0.5;
                        }
                    }
                }
            }
        }
        Behavior::new(s, table).unwrap()
    }

    fn white_noise() -> Behavior {
        let s = Scenario::new(2, vec![2, 2]).unwrap();
        Behavior::new(s, vec![0.25; 16]).unwrap()
    }

    #[test]
    fn pr_box_reaches_four() {
        let b = pr_box();
        assert!((max_abs_chsh(&b).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(chsh_oracle(&b).unwrap(), VerdictKind::Nonlocal);
        assert_eq!(vertex_membership_oracle(&b, 1e-8).unwrap(), VerdictKind::Nonlocal);
    }

    #[test]
    fn noise_is_local() {
        let b = white_noise();
        assert_eq!(max_abs_chsh(&b).unwrap(), 0.0);
        assert_eq!(chsh_oracle(&b).unwrap(), VerdictKind::Local);
        assert_eq!(vertex_membership_oracle(&b, 1e-8).unwrap(), VerdictKind::Local);
    }

    #[test]
    fn degenerate_interior_point_terminates() {
        let s = Scenario::new(2, vec![3, 3, 3]).unwrap();
        let len = s.behavior_len();
        let b = Behavior::new(s, vec![0.125; len]).unwrap();
        assert_eq!(vertex_membership_oracle(&b, 1e-8).unwrap(), VerdictKind::Local);
    }

    #[test]
    fn chsh_needs_two_by_two_qubits() {
        let s = Scenario::new(2, vec![2, 3]).unwrap();
        let b = Behavior::new(s, vec![0.25; 24]).unwrap();
        assert!(matches!(chsh_values(&b), Err(Error::Scenario(_))));
    }

    #[test]
    fn vertex_cap() {
        let s = Scenario::new(3, vec![3, 3, 3]).unwrap();
        let len = s.behavior_len();
        let b = Behavior::new(s, vec![1.0 / 27.0; len]).unwrap();
        assert!(matches!(vertex_membership_oracle(&b, 1e-8), Err(Error::CapExceeded { .. })));
    }
}
