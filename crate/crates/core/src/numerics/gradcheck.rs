//! Central finite-difference gradient checking.
//!
//! ReLU networks are only piecewise smooth, so a perturbation of `step` can
//! straddle a kink and corrupt one difference quotient. Coordinates that fail
//! at `step` are re-probed at `step/10` and `step/100`; the derivative at the
//! base point is unchanged by this, only the probe width. The number of such
//! coordinates is reported.

use std::ops::Range;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor for the relative error, so exact zeros and gradients
    /// below finite-difference resolution do not divide by ~0.
    pub abs_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BlockReport {
    pub name: String,
    pub len: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    /// Coordinates that needed a narrower probe to pass.
    pub refined: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, b| m.max(b.max_rel_error))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() < self.tolerance
    }
}

fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` (the gradient of `loss` at `params`) against central
/// differences, one parameter block at a time.
pub fn check_gradients<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    blocks: &[(String, Range<usize>)],
    config: &GradCheckConfig,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length must match parameters");
    let mut probe = params.to_vec();
    let mut central = |probe: &mut Vec<f64>, i: usize, h: f64| {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = loss(probe);
        probe[i] = orig - h;
        let down = loss(probe);
        probe[i] = orig;
        (up - down) / (2.0 * h)
    };

    let mut reports = Vec::with_capacity(blocks.len());
    for (name, range) in blocks {
        let mut report = BlockReport {
            name: name.clone(),
            len: range.len(),
            max_rel_error: 0.0,
            worst_index: range.start,
            refined: 0,
        };
        for i in range.clone() {
            let mut err = rel_error(analytic[i], central(&mut probe, i, config.step), config.abs_floor);
            if err >= config.tolerance {
                for shrink in [10.0, 100.0] {
                    let e = rel_error(
                        analytic[i],
                        central(&mut probe, i, config.step / shrink),
                        config.abs_floor,
                    );
                    err = err.min(e);
                }
                if err < config.tolerance {
                    report.refined += 1;
                }
            }
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_index = i;
            }
        }
        reports.push(report);
    }
    GradCheckReport {
        blocks: reports,
        tolerance: config.tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p = vec![0.5, -1.5, 2.0, 3.25];
        let loss = |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let report = check_gradients(
            loss,
            &p,
            &p,
            &[("all".into(), 0..4)],
            &GradCheckConfig::default(),
        );
        assert!(report.passed());
        assert!(report.max_rel_error() < 1e-9);
        assert_eq!(report.blocks[0].refined, 0);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let p = vec![1.0, 2.0];
        let loss = |x: &[f64]| x[0] * x[0] + x[1];
        let report = check_gradients(
            loss,
            &p,
            &[2.0, 1.5],
            &[("a".into(), 0..1), ("b".into(), 1..2)],
            &GradCheckConfig::default(),
        );
        assert!(!report.passed());
        assert!(report.blocks[0].max_rel_error < 1e-8);
        assert!(report.blocks[1].max_rel_error > 0.2);
        assert_eq!(report.blocks[1].worst_index, 1);
    }

    #[test]
    fn kink_near_base_point_is_refined() {
        // |x| at x = 3e-6: the step-1e-5 probe straddles the kink at 0.
        let p = vec![3e-6];
        let loss = |x: &[f64]| x[0].abs();
        let report = check_gradients(
            loss,
            &p,
            &[1.0],
            &[("x".into(), 0..1)],
            &GradCheckConfig::default(),
        );
        assert!(report.passed());
        assert_eq!(report.blocks[0].refined, 1);
    }
}
