//! The clipping operator in its three practical modes.
//!
//! Global-norm clipping `min(1, lambda / ||g||) g` is what the theory uses;
//! coordinate-wise clamping and per-slice (layer-wise) global clipping exist
//! for Adam-family experiment parity.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipMode {
    Global,
    Coordinate,
    Layer,
}

/// Clipping mode and level; `layers` holds `[start, end)` slices and is
/// required (and validated) only for layer mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipSpec {
    pub mode: ClipMode,
    pub lambda: f64,
    pub layers: Vec<(usize, usize)>,
}

impl ClipSpec {
    pub fn global(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { mode: ClipMode::Global, lambda, layers: Vec::new() })
    }

    pub fn coordinate(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { mode: ClipMode::Coordinate, lambda, layers: Vec::new() })
    }

    pub fn layer(lambda: f64, layers: Vec<(usize, usize)>) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { mode: ClipMode::Layer, lambda, layers })
    }

    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            ClipMode::Global => clip_global(g, self.lambda),
            ClipMode::Coordinate => clip_coordinate(g, self.lambda),
            ClipMode::Layer => clip_layer(g, &self.layers, self.lambda),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("clip level must be positive, got {lambda}")));
    }
    Ok(())
}

fn check_finite(g: &[f64]) -> Result<()> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(invalid("clip: non-finite gradient component"));
    }
    Ok(())
}

/// `clip(g, lambda) = min(1, lambda / ||g||) g`, with `clip(0, lambda) = 0`.
///
/// ```
/// let clipped = clipgrad::clipping::clip_global(&[3.0, 4.0], 2.5).unwrap();
/// assert_eq!(clipped, vec![1.5, 2.0]);
/// ```
pub fn clip_global(g: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_finite(g)?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= lambda {
        return Ok(g.to_vec());
    }
    let scale = lambda / norm;
    Ok(g.iter().map(|v| scale * v).collect())
}

/// Componentwise clamp to `[-lambda, lambda]`.
pub fn clip_coordinate(g: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_finite(g)?;
    Ok(g.iter().map(|v| v.clamp(-lambda, lambda)).collect())
}

/// Global clipping applied independently to each `[start, end)` slice.
/// The layout must partition the coordinate set.
pub fn clip_layer(g: &[f64], layout: &[(usize, usize)], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_finite(g)?;
    let mut covered = vec![false; g.len()];
    for &(start, end) in layout {
        if start >= end || end > g.len() {
            return Err(invalid(format!(
                "layer range [{start}, {end}) invalid for dimension {}",
                g.len()
            )));
        }
        for c in &mut covered[start..end] {
            if *c {
                return Err(invalid("layer ranges overlap"));
            }
            *c = true;
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(invalid("layer ranges do not cover all coordinates"));
    }
    let mut out = vec![0.0; g.len()];
    for &(start, end) in layout {
        out[start..end].copy_from_slice(&clip_global(&g[start..end], lambda)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn global_examples() {
        assert_eq!(clip_global(&[3.0, 4.0], 10.0).unwrap(), vec![3.0, 4.0]);
        let c = clip_global(&[3.0, 4.0], 1.0).unwrap();
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
        assert_eq!(clip_global(&[0.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn coordinate_examples() {
        assert_eq!(clip_coordinate(&[3.0, -4.0], 1.0).unwrap(), vec![1.0, -1.0]);
        assert_eq!(clip_coordinate(&[0.5, 0.5], 1.0).unwrap(), vec![0.5, 0.5]);
        assert_eq!(clip_coordinate(&[-2.0, 0.0], 2.0).unwrap(), vec![-2.0, 0.0]);
    }

    #[test]
    fn layer_examples() {
        let g = [3.0, 4.0, 0.0, 0.5];
        let out = clip_layer(&g, &[(0, 2), (2, 4)], 1.0).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);
        assert_eq!(&out[2..], &[0.0, 0.5]);

        // single slice over everything is global clipping
        assert_eq!(
            clip_layer(&g, &[(0, 4)], 1.0).unwrap(),
            clip_global(&g, 1.0).unwrap()
        );
        // one slice per coordinate is coordinate clipping
        let singles: Vec<_> = (0..4).map(|i| (i, i + 1)).collect();
        assert_eq!(
            clip_layer(&g, &singles, 1.0).unwrap(),
            clip_coordinate(&g, 1.0).unwrap()
        );
    }

    #[test]
    fn layer_layout_validation() {
        let g = [1.0, 2.0, 3.0];
        assert!(clip_layer(&g, &[(0, 2), (1, 3)], 1.0).is_err()); // overlap
        assert!(clip_layer(&g, &[(0, 2)], 1.0).is_err()); // incomplete
        assert!(clip_layer(&g, &[(0, 4)], 1.0).is_err()); // out of range
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(clip_global(&[1.0], 0.0).is_err());
        assert!(clip_global(&[f64::NAN], 1.0).is_err());
        assert!(clip_coordinate(&[1.0], -1.0).is_err());
    }

    proptest! {
        #[test]
        fn global_nonexpansive_and_idempotent(
            g in prop::collection::vec(-100.0f64..100.0, 1..6),
            lambda in 0.01f64..50.0,
        ) {
            let c = clip_global(&g, lambda).unwrap();
            prop_assert!(norm(&c) <= norm(&g).min(lambda) * (1.0 + 1e-12));
            let cc = clip_global(&c, lambda).unwrap();
            for (a, b) in c.iter().zip(&cc) {
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
            }
        }

        #[test]
        fn coordinate_idempotent(
            g in prop::collection::vec(-100.0f64..100.0, 1..6),
            lambda in 0.01f64..50.0,
        ) {
            let c = clip_coordinate(&g, lambda).unwrap();
            prop_assert_eq!(clip_coordinate(&c, lambda).unwrap(), c);
        }

        #[test]
        fn global_identity_below_level(
            g in prop::collection::vec(-10.0f64..10.0, 1..6),
            c in 0.01f64..1.0,
        ) {
            // scale equivariance below the level: if ||c g|| <= lambda then
            // clip(c g) = c g exactly
            let scaled: Vec<f64> = g.iter().map(|v| c * v).collect();
            let lambda = norm(&scaled).max(1e-9) * 1.0001;
            prop_assert_eq!(clip_global(&scaled, lambda).unwrap(), scaled);
        }
    }
}
