//! Exponential saturation fits `p ≈ 1 − a e^{−b x}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What `x` counts in a settings-growth fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XDefinition {
    /// Number of settings of the party whose count varies.
    SettingsOfOneParty,
    /// Product of all parties' setting counts.
    ProductOfSettings,
}

impl XDefinition {
    /// The `x` value of a settings list.
    pub fn x_of(self, settings: &[usize], varying_party: usize) -> f64 {
        match self {
            XDefinition::SettingsOfOneParty => settings[varying_party] as f64,
            XDefinition::ProductOfSettings => settings.iter().product::<usize>() as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square residual in probability units.
    pub residual_rms: f64,
    pub x_definition: XDefinition,
    /// Points that entered the fit.
    pub points_used: usize,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        1.0 - self.a * (-self.b * x).exp()
    }

    /// Whether the fit describes saturation from below (`a, b > 0`).
    pub fn is_valid(&self) -> bool {
        self.a > 0.0 && self.b > 0.0
    }
}

/// Least-squares line through `(x, ln(1 − p))`.
///
/// Points with `p ≥ 1` have no logarithm and are dropped with a warning; at
/// least three points must remain.
pub fn fit_exponential(points: &[(f64, f64)], x_definition: XDefinition) -> Result<FitResult> {
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Argument("fit abscissae must be strictly increasing".into()));
    }
    if let Some(&(x, p)) = points.iter().find(|(_, p)| !(*p >= 0.0)) {
        return Err(Error::Argument(format!("probability {p} at x = {x} is negative")));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, p)| {
            let keep = p < 1.0;
            if !keep {
                log::warn!("dropping point x = {x} with p = {p} from the exponential fit");
            }
            keep
        })
        .collect();
    if usable.len() < 3 {
        return Err(Error::Argument(format!(
            "exponential fit needs at least 3 points with p < 1, got {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_z = usable.iter().map(|p| (1.0 - p.1).ln()).sum::<f64>() / n;
    let (sxz, sxx) = usable.iter().fold((0.0, 0.0), |(sxz, sxx), &(x, p)| {
        let dx = x - mean_x;
        (sxz + dx * ((1.0 - p).ln() - mean_z), sxx + dx * dx)
    });
    let slope = sxz / sxx;
    let intercept = mean_z - slope * mean_x;
    let mut fit = FitResult {
        a: intercept.exp(),
        b: -slope,
        residual_rms: 0.0,
        x_definition,
        points_used: usable.len(),
    };
    let ss: f64 = usable.iter().map(|&(x, p)| (fit.predict(x) - p).powi(2)).sum();
    fit.residual_rms = (ss / n).sqrt();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_planted_curve() {
        let pts: Vec<(f64, f64)> = (2..=6).map(|x| (x as f64, 1.0 - 0.9 * (-0.5 * x as f64).exp())).collect();
        let f = fit_exponential(&pts, XDefinition::SettingsOfOneParty).unwrap();
        assert!((f.a - 0.9).abs() < 1e-9);
        assert!((f.b - 0.5).abs() < 1e-9);
        assert!(f.residual_rms < 1e-12);
        assert!(f.is_valid());
    }

    #[test]
    fn two_points_are_not_enough() {
        assert!(fit_exponential(&[(1.0, 0.2), (2.0, 0.4)], XDefinition::ProductOfSettings).is_err());
    }

    #[test]
    fn saturated_points_are_dropped() {
        let mut pts: Vec<(f64, f64)> = (1..=4).map(|x| (x as f64, 1.0 - 0.5 * (-(x as f64)).exp())).collect();
        pts.push((5.0, 1.0));
        let f = fit_exponential(&pts, XDefinition::SettingsOfOneParty).unwrap();
        assert_eq!(f.points_used, 4);
        assert!((f.b - 1.0).abs() < 1e-9);
        pts.truncate(2);
        pts.push((3.0, 1.0));
        assert!(fit_exponential(&pts, XDefinition::SettingsOfOneParty).is_err());
    }

    #[test]
    fn rejects_unsorted_input() {
        assert!(fit_exponential(&[(2.0, 0.1), (1.0, 0.2), (3.0, 0.3)], XDefinition::SettingsOfOneParty).is_err());
    }

    #[test]
    fn x_definitions() {
        assert_eq!(XDefinition::SettingsOfOneParty.x_of(&[5, 2], 0), 5.0);
        assert_eq!(XDefinition::ProductOfSettings.x_of(&[5, 2], 0), 10.0);
    }
}
