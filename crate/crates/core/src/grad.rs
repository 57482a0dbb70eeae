//! Analytic gradients of the Chamfer-family losses.
//!
//! Gradients are taken under a frozen nearest-neighbour assignment: the
//! matched pairs and the query counts `n` are constants of the current
//! configuration, which gives the usual subgradient at assignment switches.
//! The density-aware loss always uses squared distances in the exponent and
//! the training exponent `n^lambda`.

use serde::{Deserialize, Serialize};

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::metrics::{
    self, frequency_weight, ChamferVariant, CloudPair, DcdParams, ExponentMode, UnequalVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    #[serde(rename = "cd-t")]
    CdT,
    #[serde(rename = "cd-p")]
    CdP,
    #[serde(rename = "dcd")]
    Dcd,
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::CdT => "cd-t",
            Loss::CdP => "cd-p",
            Loss::Dcd => "dcd",
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cd-t" | "cdt" | "cd_t" => Ok(Loss::CdT),
            "cd-p" | "cdp" | "cd_p" => Ok(Loss::CdP),
            "dcd" => Ok(Loss::Dcd),
            other => Err(Error::InvalidParam(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wrt {
    S1,
    S2,
    Both,
}

impl Wrt {
    fn s1(self) -> bool {
        matches!(self, Wrt::S1 | Wrt::Both)
    }
    fn s2(self) -> bool {
        matches!(self, Wrt::S2 | Wrt::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub loss_value: f64,
    pub grad_s1: Option<Vec<Point3>>,
    pub grad_s2: Option<Vec<Point3>>,
}

/// Params used by the loss: squared exponent regardless of the requested mode.
fn loss_params(params: &DcdParams) -> DcdParams {
    params.with_mode(ExponentMode::Squared)
}

/// Loss value through the metric implementations (the reference path for
/// finite differences).
pub fn loss_value(s1: &PointCloud, s2: &PointCloud, loss: Loss, params: &DcdParams) -> Result<f64> {
    Ok(match loss {
        Loss::CdT => metrics::chamfer(s1, s2, ChamferVariant::T).value,
        Loss::CdP => metrics::chamfer(s1, s2, ChamferVariant::P).value,
        Loss::Dcd => {
            metrics::dcd_unequal(s1, s2, &loss_params(params), UnequalVariant::Naive)?.value
        }
    })
}

pub fn loss_and_grad(
    s1: &PointCloud,
    s2: &PointCloud,
    loss: Loss,
    params: &DcdParams,
    wrt: Wrt,
) -> Result<GradientField> {
    if loss == Loss::Dcd {
        params.validate()?;
    }
    let pair = CloudPair::new(s1, s2);
    let mut g1 = vec![Point3::ORIGIN; s1.len()];
    let mut g2 = vec![Point3::ORIGIN; s2.len()];
    // Unequal sizes follow the ratio-weighted (naive) extension.
    let eta = s1.len() as f64 / s2.len() as f64;
    let forward = Direction { src: s1, tgt: s2, assign: &pair.forward, ratio: eta };
    let backward = Direction { src: s2, tgt: s1, assign: &pair.backward, ratio: 1.0 / eta };
    let lv = forward.accumulate(loss, params, &mut g1, &mut g2)
        + backward.accumulate(loss, params, &mut g2, &mut g1);
    Ok(GradientField {
        loss_value: lv,
        grad_s1: wrt.s1().then_some(g1),
        grad_s2: wrt.s2().then_some(g2),
    })
}

struct Direction<'a> {
    src: &'a PointCloud,
    tgt: &'a PointCloud,
    assign: &'a [(usize, f64)],
    ratio: f64,
}

impl Direction<'_> {
    /// Adds this directed term's gradient into `gsrc`/`gtgt`; returns its value.
    fn accumulate(&self, loss: Loss, params: &DcdParams, gsrc: &mut [Point3], gtgt: &mut [Point3]) -> f64 {
        let n = self.src.len() as f64;
        let counts = match loss {
            Loss::Dcd => metrics::QueryFrequency::from_assignment(self.assign, self.tgt.len()).counts,
            _ => Vec::new(),
        };
        let mut value = 0.0;
        for (i, &(j, d2)) in self.assign.iter().enumerate() {
            let diff = self.src.get(i) - self.tgt.get(j);
            let (term, coef) = match loss {
                Loss::CdT => (d2 / n, 2.0 / n),
                Loss::CdP => {
                    let d = d2.sqrt();
                    (d / n, if d > 0.0 { 1.0 / (n * d) } else { 0.0 })
                }
                Loss::Dcd => {
                    let w = self.ratio * frequency_weight(counts[j], params.lambda);
                    let e = (-params.alpha * d2).exp();
                    let scale = 0.5 / n;
                    ((1.0 - w * e) * scale, scale * w * e * 2.0 * params.alpha)
                }
            };
            value += term;
            let g = diff * coef;
            gsrc[i] = gsrc[i] + g;
            gtgt[j] = gtgt[j] - g;
        }
        value
    }
}

/// Per-pair gradient magnitude `dL/dl` of a single matched pair at distance
/// `l`, before any averaging over the cloud. For DCD this is
/// `2 alpha l exp(-alpha l^2) / n^lambda`.
pub fn gradient_profile(loss: Loss, params: &DcdParams, l_grid: &[f64], n: u32) -> Vec<(f64, f64)> {
    l_grid
        .iter()
        .map(|&l| {
            let g = match loss {
                Loss::CdT => 2.0 * l,
                Loss::CdP => 1.0,
                Loss::Dcd => {
                    2.0 * params.alpha * l * (-params.alpha * l * l).exp()
                        * frequency_weight(n.max(1), params.lambda)
                }
            };
            (l, g)
        })
        .collect()
}

/// Location of the DCD per-pair gradient peak, `1 / sqrt(2 alpha)`.
pub fn dcd_peak_distance(alpha: f64) -> f64 {
    1.0 / (2.0 * alpha).sqrt()
}

/// Upper bound of the DCD per-pair gradient, `sqrt(2 alpha / e) / n^lambda`.
pub fn dcd_peak_gradient(alpha: f64, n: u32, lambda: f64) -> f64 {
    (2.0 * alpha / std::f64::consts::E).sqrt() * frequency_weight(n.max(1), lambda)
}

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    /// Some perturbation changed a nearest-neighbour id; the comparison sits
    /// on a subgradient and is not meaningful.
    pub switched: bool,
    pub components: usize,
}

impl FdCheck {
    pub fn passes(&self, tol: f64) -> bool {
        !self.switched && self.max_rel_error < tol
    }
}

/// Central finite differences of [`loss_value`] against [`loss_and_grad`].
pub fn finite_difference_check(
    s1: &PointCloud,
    s2: &PointCloud,
    loss: Loss,
    params: &DcdParams,
    wrt: Wrt,
    h: f64,
    floor: f64,
) -> Result<FdCheck> {
    let analytic = loss_and_grad(s1, s2, loss, params, wrt)?;
    let base = CloudPair::new(s1, s2);
    let ids = |p: &CloudPair| -> Vec<usize> {
        p.forward.iter().chain(&p.backward).map(|&(j, _)| j).collect()
    };
    let base_ids = ids(&base);
    let mut check = FdCheck { max_rel_error: 0.0, switched: false, components: 0 };

    let mut probe = |which: usize, grad: &[Point3]| -> Result<()> {
        let cloud = if which == 0 { s1 } else { s2 };
        for i in 0..cloud.len() {
            for axis in 0..3 {
                let mut vals = [0.0; 2];
                for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                    let mut pts = cloud.points().to_vec();
                    *pts[i].coord_mut(axis) += sign * h;
                    let moved = PointCloud::new(pts)?;
                    let (a, b) = if which == 0 { (&moved, s2) } else { (s1, &moved) };
                    if ids(&CloudPair::new(a, b)) != base_ids {
                        check.switched = true;
                    }
                    vals[slot] = loss_value(a, b, loss, params)?;
                }
                let numeric = (vals[0] - vals[1]) / (2.0 * h);
                let exact = grad[i].coord(axis);
                let denom = exact.abs().max(numeric.abs()).max(floor);
                check.max_rel_error = check.max_rel_error.max((exact - numeric).abs() / denom);
                check.components += 1;
            }
        }
        Ok(())
    };
    if let Some(g) = &analytic.grad_s1 {
        probe(0, g)?;
    }
    if let Some(g) = &analytic.grad_s2 {
        probe(1, g)?;
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_arrays(rows).unwrap()
    }

    #[test]
    fn zero_gradient_at_identity() {
        let a = cloud(&[[0.0, 0.0, 0.0], [0.2, 0.1, 0.0], [0.5, 0.5, 0.5]]);
        for loss in [Loss::CdT, Loss::Dcd, Loss::CdP] {
            let g = loss_and_grad(&a, &a, loss, &DcdParams::training(50.0, 1.0), Wrt::Both).unwrap();
            assert_eq!(g.loss_value, 0.0);
            for p in g.grad_s1.unwrap().iter().chain(g.grad_s2.as_ref().unwrap()) {
                assert_eq!(*p, Point3::ORIGIN, "{loss:?}");
            }
        }
    }

    #[test]
    fn single_pair_dcd_gradient() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        let p = DcdParams::training(1.0, 1.0);
        let per_pair = gradient_profile(Loss::Dcd, &p, &[1.0], 1)[0].1;
        assert!((per_pair - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((per_pair - 0.73576).abs() < 1e-5);
        // Both directed terms carry 1/(2|S|) = 1/2 and both pull along the x axis.
        let g = loss_and_grad(&a, &b, Loss::Dcd, &p, Wrt::Both).unwrap();
        let ga = g.grad_s1.unwrap()[0];
        assert!((ga.x + per_pair).abs() < 1e-15);
        assert_eq!((ga.y, ga.z), (0.0, 0.0));
        assert!((g.grad_s2.unwrap()[0].x - per_pair).abs() < 1e-15);
        assert!((g.loss_value - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn cd_p_has_unit_pair_gradient() {
        for l in [1e-3, 0.5, 7.0] {
            let a = cloud(&[[0.0, 0.0, 0.0]]);
            let b = cloud(&[[0.0, l, 0.0]]);
            let g = loss_and_grad(&a, &b, Loss::CdP, &DcdParams::default(), Wrt::S1).unwrap();
            // two directed terms, each of unit magnitude
            assert!((g.grad_s1.unwrap()[0].y + 2.0).abs() < 1e-12);
            assert!(g.grad_s2.is_none());
        }
        let prof = gradient_profile(Loss::CdP, &DcdParams::default(), &[0.0, 0.1, 3.0], 1);
        assert!(prof.iter().all(|&(_, g)| g == 1.0));
    }

    #[test]
    fn profile_peak_and_frequency_scaling() {
        let p = DcdParams::training(50.0, 1.0);
        let grid: Vec<f64> = (0..=2000).map(|i| i as f64 * 1e-4).collect();
        let prof = gradient_profile(Loss::Dcd, &p, &grid, 1);
        let (peak_l, peak_g) = prof.iter().copied().fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        assert!((peak_l - dcd_peak_distance(50.0)).abs() <= 1e-4);
        assert!((peak_l - 0.1).abs() <= 1e-4);
        assert!(peak_g <= dcd_peak_gradient(50.0, 1, 1.0));
        let doubled = gradient_profile(Loss::Dcd, &p, &grid, 2);
        for (a, b) in prof.iter().zip(&doubled) {
            assert!((a.1 - 2.0 * b.1).abs() <= 1e-15 * a.1.abs().max(1.0));
        }
        assert_eq!(gradient_profile(Loss::CdT, &p, &[0.0], 1)[0].1, 0.0);
    }

    #[test]
    fn loss_value_agrees_with_metrics() {
        let a = cloud(&[[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.3, 0.1]]);
        let b = cloud(&[[0.05, 0.0, 0.0], [0.2, 0.2, 0.0], [0.0, 0.25, 0.1]]);
        let p = DcdParams::training(40.0, 0.5);
        for loss in [Loss::CdT, Loss::CdP, Loss::Dcd] {
            let g = loss_and_grad(&a, &b, loss, &p, Wrt::Both).unwrap();
            let v = loss_value(&a, &b, loss, &p).unwrap();
            assert!((g.loss_value - v).abs() <= 1e-12 * v.abs().max(1e-300));
        }
    }

    #[test]
    fn finite_differences_on_small_instances() {
        let a = cloud(&[[0.0, 0.0, 0.0], [0.13, 0.02, 0.0], [0.0, 0.31, 0.1], [0.4, 0.4, 0.2]]);
        let b = cloud(&[[0.05, 0.01, 0.03], [0.22, 0.18, 0.0], [0.02, 0.25, 0.14], [0.35, 0.45, 0.1]]);
        let p = DcdParams::training(50.0, 1.0);
        for loss in [Loss::CdT, Loss::CdP, Loss::Dcd] {
            let c = finite_difference_check(&a, &b, loss, &p, Wrt::Both, 1e-6, 1e-5).unwrap();
            assert!(c.passes(1e-4), "{loss:?}: {c:?}");
            assert_eq!(c.components, 24);
        }
        // unequal sizes go through the ratio-weighted extension
        let c3 = cloud(&[[0.0, 0.0, 0.0], [0.3, 0.3, 0.1]]);
        let c = finite_difference_check(&a, &c3, Loss::Dcd, &p, Wrt::Both, 1e-6, 1e-5).unwrap();
        assert!(c.passes(1e-4), "{c:?}");
    }

    #[test]
    fn switch_is_flagged() {
        // x sits exactly halfway between two targets
        let a = cloud(&[[0.5, 0.0, 0.0], [5.0, 5.0, 5.0]]);
        let b = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let c = finite_difference_check(&a, &b, Loss::CdT, &DcdParams::default(), Wrt::S1, 1e-6, 1e-5)
            .unwrap();
        assert!(c.switched);
        assert!(!c.passes(1e-4));
    }

    #[test]
    fn lambda_softens_shared_pairs() {
        let a = cloud(&[[0.0, 0.0, 0.0], [0.02, 0.0, 0.0]]);
        let b = cloud(&[[0.05, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        let mut prev = f64::INFINITY;
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let g = loss_and_grad(&a, &b, Loss::Dcd, &DcdParams::training(50.0, lambda), Wrt::S1).unwrap();
            let mag = g.grad_s1.unwrap()[0].norm();
            assert!(mag <= prev);
            prev = mag;
        }
    }
}
