//! Pixel to qubit mapping. Each pixel `y_i` in `[0, 1]` becomes the
//! single-qubit state `cos(pi f/2)|0> + sin(pi f/2)|1>` with `f = f_v(y_i)`,
//! where `f_v` is a smooth rescaling that sends the midpoint `v` to the equal
//! superposition.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};

use crate::qcore::{GateOp, StateVector};
use crate::{QcsError, Result};

const EDGE: f64 = 1e-12;

/// A real-valued signal with every pixel in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pixels: Vec<f64>,
}

impl Signal {
    pub fn new(pixels: Vec<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(QcsError::invalid("a signal needs at least one pixel"));
        }
        for &y in &pixels {
            check_unit("pixel", y)?;
        }
        Ok(Signal { pixels })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Per-pixel midpoints `v_i`, each strictly inside `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelMap {
    midpoints: Vec<f64>,
}

impl PixelMap {
    pub fn new(midpoints: Vec<f64>) -> Result<Self> {
        if midpoints.is_empty() {
            return Err(QcsError::invalid("a pixel map needs at least one midpoint"));
        }
        for &v in &midpoints {
            check_midpoint(v)?;
        }
        Ok(PixelMap { midpoints })
    }

    /// All midpoints at 0.5, where `f_v` is the identity.
    pub fn uniform(n_pixels: usize) -> Self {
        PixelMap {
            midpoints: vec![0.5; n_pixels],
        }
    }

    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    pub fn len(&self) -> usize {
        self.midpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.midpoints.is_empty()
    }
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QcsError::OutOfRange {
            name,
            value: x,
            range: "[0, 1]",
        });
    }
    Ok(())
}

fn check_midpoint(v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(QcsError::OutOfRange {
            name: "midpoint",
            value: v,
            range: "(0, 1)",
        });
    }
    Ok(())
}

/// `f_v(x) = 1/2 [1 + (2/pi) arctan(tan(pi(x - 1/2)) - tan(pi(v - 1/2)))]`,
/// with the endpoints fixed at their limits.
pub fn f_v(x: f64, v: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_midpoint(v)?;
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let x = x.clamp(EDGE, 1.0 - EDGE);
    let t = (PI * (x - 0.5)).tan() - (PI * (v - 0.5)).tan();
    Ok(0.5 * (1.0 + FRAC_2_PI * t.atan()))
}

/// Inverse of [`f_v`] in `x`.
pub fn f_v_inverse(f: f64, v: f64) -> Result<f64> {
    check_unit("f", f)?;
    check_midpoint(v)?;
    if f == 0.0 || f == 1.0 {
        return Ok(f);
    }
    let f = f.clamp(EDGE, 1.0 - EDGE);
    let t = (PI * (f - 0.5)).tan() + (PI * (v - 0.5)).tan();
    Ok((0.5 + t.atan() / PI).clamp(0.0, 1.0))
}

/// Ry rotation angle that encodes pixel `y` at midpoint `v`.
pub fn encoding_angle(y: f64, v: f64) -> Result<f64> {
    Ok(PI * f_v(y, v)?)
}

pub fn encode_pixel(y: f64, v: f64) -> Result<StateVector> {
    let half = encoding_angle(y, v)? / 2.0;
    StateVector::from_real(&[half.cos(), half.sin()])
}

/// Product state of per-pixel encodings, prepared by one Ry per qubit on
/// `|0...0>`. Qubit `i` carries pixel `i`.
pub fn encode_signal(y: &Signal, map: &PixelMap) -> Result<StateVector> {
    if y.len() != map.len() {
        return Err(QcsError::DimensionMismatch {
            expected: map.len(),
            found: y.len(),
        });
    }
    let mut state = StateVector::zero_state(y.len());
    for (q, (&yi, &vi)) in y.pixels().iter().zip(map.midpoints()).enumerate() {
        let gate = GateOp::ry(q, encoding_angle(yi, vi)?);
        state.apply_unitary(gate.targets(), gate.unitary())?;
    }
    Ok(state)
}

/// Pixel estimate from the observed probability of `|1>`.
pub fn decode_frequency(p1: f64, v: f64) -> Result<f64> {
    check_unit("p1", p1)?;
    check_midpoint(v)?;
    let f = (FRAC_2_PI * p1.sqrt().asin()).clamp(0.0, 1.0);
    f_v_inverse(f, v)
}
