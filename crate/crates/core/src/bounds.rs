//! Closed-form probability bounds: Bernstein's inequality, the finite- and
//! infinite-range misidentification bounds, the truncation coupling bound and
//! the analytic bracket for the variance proxy `v`.
//!
//! Values above 1 are returned unchanged and flagged as vacuous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PairwisePotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Bernstein,
    /// `4 exp(-n ε² / (8v + 4ε/3) + 2 (2L)^d)`
    FiniteRange,
    /// finite-range bound plus `n (2L)^d tail / (1 - r)`
    InfiniteRange,
    /// `tail / (1 - r)`
    Coupling,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: Option<u64>,
    pub epsilon: Option<f64>,
    pub v: Option<f64>,
    pub radius: Option<u32>,
    pub dimension: Option<usize>,
    pub r: Option<f64>,
    pub tail: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value: f64,
    pub inputs: BoundInputs,
}

impl BoundReport {
    /// A probability bound above 1 says nothing.
    pub fn is_vacuous(&self) -> bool {
        self.value > 1.0
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive, got {value}"
        )))
    }
}

fn positive_int(name: &str, value: u64) -> Result<()> {
    if value > 0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive")))
    }
}

fn contraction(r: f64) -> Result<()> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!(
            "Dobrushin coefficient must be >= 0, got {r}"
        )));
    }
    if r >= 1.0 {
        return Err(Error::DobrushinViolated { r });
    }
    Ok(())
}

/// `(2L)^d` as a real number.
fn block_exponent(radius: u32, dimension: usize) -> f64 {
    (2.0 * radius as f64).powi(dimension as i32)
}

/// `2 exp(-n ε² / (2 (v + b ε / 3)))`.
pub fn bernstein(n: u64, epsilon: f64, v: f64, b: f64) -> Result<f64> {
    positive_int("n", n)?;
    positive("epsilon", epsilon)?;
    positive("v", v)?;
    positive("b", b)?;
    let n = n as f64;
    Ok(2.0 * (-n * epsilon * epsilon / (2.0 * (v + b * epsilon / 3.0))).exp())
}

/// Misidentification bound for a potential of range at most `L`.
pub fn misid_bound_finite(
    n: u64,
    epsilon: f64,
    v: f64,
    radius: u32,
    dimension: usize,
) -> Result<BoundReport> {
    positive_int("n", n)?;
    positive("epsilon", epsilon)?;
    positive("v", v)?;
    positive_int("L", radius.into())?;
    positive_int("d", dimension as u64)?;
    let exponent = -(n as f64) * epsilon * epsilon / (8.0 * v + 4.0 * epsilon / 3.0)
        + 2.0 * block_exponent(radius, dimension);
    Ok(BoundReport {
        kind: BoundKind::FiniteRange,
        value: 4.0 * exponent.exp(),
        inputs: BoundInputs {
            n: Some(n),
            epsilon: Some(epsilon),
            v: Some(v),
            radius: Some(radius),
            dimension: Some(dimension),
            ..BoundInputs::default()
        },
    })
}

/// Misidentification bound for a potential of unbounded range under
/// Dobrushin's condition `r < 1`.
#[allow(clippy::too_many_arguments)]
pub fn misid_bound_infinite(
    n: u64,
    epsilon: f64,
    v: f64,
    radius: u32,
    dimension: usize,
    r: f64,
    tail: f64,
) -> Result<BoundReport> {
    contraction(r)?;
    if !(tail >= 0.0) {
        return Err(Error::invalid(format!("tail sum must be >= 0, got {tail}")));
    }
    let finite = misid_bound_finite(n, epsilon, v, radius, dimension)?;
    let coupling = n as f64 * block_exponent(radius, dimension) * tail / (1.0 - r);
    Ok(BoundReport {
        kind: BoundKind::InfiniteRange,
        value: finite.value + coupling,
        inputs: BoundInputs {
            r: Some(r),
            tail: Some(tail),
            ..finite.inputs
        },
    })
}

/// Per-site bound on the probability that the chains under `J` and its
/// truncation `J^L` disagree: `tail_sum(J, L) / (1 - r)`.
pub fn coupling_bound(potential: &PairwisePotential, radius: u32) -> Result<BoundReport> {
    let r = potential.dobrushin_coefficient().r;
    contraction(r)?;
    let tail = potential.tail_sum(radius)?;
    Ok(BoundReport {
        kind: BoundKind::Coupling,
        value: tail / (1.0 - r),
        inputs: BoundInputs {
            radius: Some(radius),
            dimension: Some(potential.dimension()),
            r: Some(r),
            tail: Some(tail),
            ..BoundInputs::default()
        },
    })
}

/// Analytic bracket for `v`:
/// `((2 / (1 + e^{2r})) 2^{-(2L)^d}, ((1 + e^{2r}) / e^{2r})^{-(2L)^d})`.
pub fn v_analytic_bounds(r: f64, radius: u32, dimension: usize) -> Result<(f64, f64)> {
    contraction(r)?;
    positive_int("L", radius.into())?;
    positive_int("d", dimension as u64)?;
    let k = block_exponent(radius, dimension);
    let e2r = (2.0 * r).exp();
    let lower = 2.0 / (1.0 + e2r) * 2f64.powf(-k);
    let upper = ((1.0 + e2r) / e2r).powf(-k);
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeBox, LatticePoint};
    use approx::assert_relative_eq;

    #[test]
    fn bernstein_values() {
        assert_relative_eq!(
            bernstein(100, 0.1, 0.25, 1.0).unwrap(),
            0.34247428588957635,
            max_relative = 1e-13
        );
        assert_relative_eq!(bernstein(1, 1e-9, 1.0, 1.0).unwrap(), 2.0, epsilon = 1e-12);
        let one = bernstein(50, 0.2, 0.3, 1.0).unwrap();
        let two = bernstein(100, 0.2, 0.3, 1.0).unwrap();
        assert_relative_eq!(two, one * one / 2.0, max_relative = 1e-12);
        assert!(bernstein(0, 0.1, 0.1, 1.0).is_err());
        assert!(bernstein(1, 0.0, 0.1, 1.0).is_err());
        assert!(bernstein(1, 0.1, -0.1, 1.0).is_err());
        assert!(bernstein(1, 0.1, 0.1, 0.0).is_err());
    }

    #[test]
    fn finite_range_values() {
        let rep = misid_bound_finite(1_000_000, 0.01, 0.9, 1, 2).unwrap();
        assert_relative_eq!(rep.value, 0.011368352221717806, max_relative = 1e-12);
        assert!(!rep.is_vacuous());
        assert_eq!(rep.inputs.n, Some(1_000_000));
        assert!(misid_bound_finite(u64::MAX, 0.01, 0.9, 1, 2).unwrap().value < 1e-300);
        assert!(misid_bound_finite(1000, 0.05, 0.9, 1, 2)
            .unwrap()
            .is_vacuous());
        assert!(
            misid_bound_finite(10_000, 0.05, 1.0, 1, 2).unwrap().value
                > misid_bound_finite(10_000, 0.05, 0.5, 1, 2).unwrap().value
        );
        assert!(misid_bound_finite(10, 0.1, 0.5, 0, 2).is_err());
        assert!(misid_bound_finite(10, 0.1, 0.5, 1, 0).is_err());
    }

    #[test]
    fn infinite_range_values() {
        let finite = misid_bound_finite(5000, 0.02, 0.8, 1, 2).unwrap();
        let zero_tail = misid_bound_infinite(5000, 0.02, 0.8, 1, 2, 0.5, 0.0).unwrap();
        assert_eq!(zero_tail.value, finite.value);
        let with_tail = misid_bound_infinite(5000, 0.02, 0.8, 1, 2, 0.5, 1e-6).unwrap();
        assert_relative_eq!(
            with_tail.value - finite.value,
            5000.0 * 4.0 * 1e-6 / 0.5,
            max_relative = 1e-9
        );
        let near_one = misid_bound_infinite(5000, 0.02, 0.8, 1, 2, 1.0 - 1e-15, 0.1).unwrap();
        assert!(near_one.is_vacuous());
        assert!(matches!(
            misid_bound_infinite(5000, 0.02, 0.8, 1, 2, 1.0, 0.0),
            Err(Error::DobrushinViolated { .. })
        ));
        assert!(misid_bound_infinite(5000, 0.02, 0.8, 1, 2, 0.5, -1.0).is_err());
    }

    #[test]
    fn coupling_bound_values() {
        let volume = LatticeBox::centered(1, 3).sites();
        let p = |c: i32| LatticePoint::new(vec![c]);
        // r = 0.8 at site 0, with 0.4 of it beyond distance 1
        let pot =
            PairwisePotential::new(volume.clone(), [(p(0), p(1), 0.4), (p(0), p(3), 0.4)]).unwrap();
        let rep = coupling_bound(&pot, 1).unwrap();
        assert_relative_eq!(rep.value, 2.0, max_relative = 1e-12);
        assert!(rep.is_vacuous());
        assert_eq!(coupling_bound(&pot, 3).unwrap().value, 0.0);
        assert!(coupling_bound(&pot, 2).unwrap().value <= rep.value);

        let strong = PairwisePotential::nearest_neighbor(volume, 0.6).unwrap();
        assert!(matches!(
            coupling_bound(&strong, 1),
            Err(Error::DobrushinViolated { .. })
        ));
    }

    #[test]
    fn analytic_v_bracket() {
        assert_eq!(v_analytic_bounds(0.0, 1, 1).unwrap(), (0.25, 0.25));
        for r in [0.0, 0.1, 0.5, 0.9, 0.999] {
            for l in 1..=3 {
                for d in 1..=3 {
                    let (lo, hi) = v_analytic_bounds(r, l, d).unwrap();
                    assert!(lo <= hi, "r={r} L={l} d={d}: {lo} > {hi}");
                    assert!(lo >= 0.0);
                }
            }
        }
        assert!(v_analytic_bounds(1.0, 1, 1).is_err());
        assert!(v_analytic_bounds(-0.1, 1, 1).is_err());
    }

    #[test]
    fn report_serializes() {
        let rep = misid_bound_finite(100, 0.1, 0.5, 1, 2).unwrap();
        let text = toml::to_string(&rep).unwrap();
        assert!(text.contains("kind = \"finite_range\""));
        let back: BoundReport = toml::from_str(&text).unwrap();
        assert_eq!(back, rep);
    }
}
