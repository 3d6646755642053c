//! Unit scaling and the seven per-modality signals: the three raw axes plus
//! four magnitude signals.
//!
//! The magnitude signals are the per-sample Euclidean norm of
//!
//! * the raw axes (`smv`),
//! * the first gradient of each axis (`smv_dt1`),
//! * the second gradient of each axis (`smv_dt2`),
//! * the cumulative trapezoid integral of each axis (`smv_integral`).
//!
//! Gradient and integral are linear and applied identically to every axis,
//! so for a rotation `R` they satisfy `T(R v) = R T(v)`; the norm then
//! removes `R`. All four magnitude signals are therefore exactly invariant
//! to the sensor orientation, up to floating point rounding.
//!
//! Gradients and integrals use unit (sample index) spacing.

use std::f64::consts::PI;

use crate::data::{Axis, ModalityKind, ModalityMask, RawWindow, WINDOW_LEN};
use crate::error::{Error, Result};

const ACC_SCALE: f64 = 9.81;
const GYR_SCALE: f64 = 2.0 * PI;
const MAG_SCALE: f64 = 100.0;

/// Divisor that converts raw units (m/s², rad/s, µT) to g, Hz and Gauss.
pub fn unit_divisor(m: ModalityKind) -> f64 {
    match m {
        ModalityKind::Acc => ACC_SCALE,
        ModalityKind::Gyr => GYR_SCALE,
        ModalityKind::Mag => MAG_SCALE,
    }
}

pub fn scale_units(mut w: RawWindow) -> RawWindow {
    for m in ModalityKind::ALL {
        let d = unit_divisor(m);
        for axis in w.modality_mut(m) {
            axis.iter_mut().for_each(|v| *v /= d);
        }
    }
    w
}

pub fn smv(x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::Shape(format!(
            "axis lengths differ: {}, {}, {}",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
        .collect())
}

fn require_len(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least 2 samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Central differences inside, one-sided first differences at both ends.
pub fn gradient1(x: &[f64]) -> Result<Vec<f64>> {
    require_len(x)?;
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    out.push(x[1] - x[0]);
    out.extend(x.windows(3).map(|w| (w[2] - w[0]) / 2.0));
    out.push(x[n - 1] - x[n - 2]);
    Ok(out)
}

pub fn gradient2(x: &[f64]) -> Result<Vec<f64>> {
    gradient1(&gradient1(x)?)
}

/// Cumulative trapezoid with a leading 0, so the output keeps the input length.
pub fn integral(x: &[f64]) -> Result<Vec<f64>> {
    require_len(x)?;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    for w in x.windows(2) {
        acc += (w[0] + w[1]) / 2.0;
        out.push(acc);
    }
    Ok(out)
}

/// One of the seven signals extracted per modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalKind {
    X,
    Y,
    Z,
    Smv,
    SmvDt1,
    SmvDt2,
    SmvIntegral,
}

impl SignalKind {
    pub const ALL: [SignalKind; 7] = [
        SignalKind::X,
        SignalKind::Y,
        SignalKind::Z,
        SignalKind::Smv,
        SignalKind::SmvDt1,
        SignalKind::SmvDt2,
        SignalKind::SmvIntegral,
    ];
    pub const AXES: [SignalKind; 3] = [SignalKind::X, SignalKind::Y, SignalKind::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalKind::X => "x",
            SignalKind::Y => "y",
            SignalKind::Z => "z",
            SignalKind::Smv => "smv",
            SignalKind::SmvDt1 => "smv_dt1",
            SignalKind::SmvDt2 => "smv_dt2",
            SignalKind::SmvIntegral => "smv_integral",
        }
    }
}

/// The seven signals of one modality, indexed by [`SignalKind::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySignals {
    pub signals: [Vec<f64>; 7],
}

impl ModalitySignals {
    pub fn from_axes(axes: &[Vec<f64>; 3]) -> Result<Self> {
        let [x, y, z] = axes;
        let per_axis = |f: fn(&[f64]) -> Result<Vec<f64>>| -> Result<Vec<f64>> {
            let (a, b, c) = (f(x)?, f(y)?, f(z)?);
            smv(&a, &b, &c)
        };
        Ok(Self {
            signals: [
                x.clone(),
                y.clone(),
                z.clone(),
                smv(x, y, z)?,
                per_axis(gradient1)?,
                per_axis(gradient2)?,
                per_axis(integral)?,
            ],
        })
    }

    pub fn get(&self, kind: SignalKind) -> &[f64] {
        &self.signals[kind.index()]
    }
}

/// Derived signals for every available modality of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSignalSet {
    pub modalities: [Option<ModalitySignals>; 3],
}

impl DerivedSignalSet {
    pub fn get(&self, m: ModalityKind) -> Option<&ModalitySignals> {
        self.modalities[m.index()].as_ref()
    }

    pub fn signal_count(&self) -> usize {
        self.modalities.iter().flatten().count() * SignalKind::ALL.len()
    }
}

/// Derive signals from a scaled window. The masked modality, if any, is
/// skipped; with `mask = None` all three modalities are derived.
pub fn derive_signals(w: &RawWindow, mask: Option<ModalityMask>) -> Result<DerivedSignalSet> {
    let mut modalities: [Option<ModalitySignals>; 3] = [None, None, None];
    for m in ModalityKind::ALL {
        if mask.is_some_and(|mk| mk.missing == m) {
            continue;
        }
        let axes = w.modality(m);
        for (a, axis) in Axis::ALL.iter().zip(axes) {
            if axis.len() != WINDOW_LEN {
                return Err(Error::Shape(format!(
                    "{}_{} has {} samples, expected {WINDOW_LEN}",
                    m,
                    a.name(),
                    axis.len()
                )));
            }
        }
        modalities[m.index()] = Some(ModalitySignals::from_axes(axes)?);
    }
    Ok(DerivedSignalSet { modalities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, SynthOptions};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn scaling_constants() {
        let mut w = RawWindow::zeros(0);
        w.channels[0][0][0] = 9.81;
        w.channels[1][1][0] = 2.0 * PI;
        w.channels[2][2][0] = 250.0;
        let s = scale_units(w);
        assert!((s.channels[0][0][0] - 1.0).abs() < 1e-15);
        assert!((s.channels[1][1][0] - 1.0).abs() < 1e-15);
        assert_eq!(s.channels[2][2][0], 2.5);
        assert_eq!(s.channels[2][0][3], 0.0);
    }

    #[test]
    fn masked_modality_stays_zero_after_scaling() {
        let mut w = synth_dataset(&SynthOptions::new(1, 1, 2))
            .unwrap()
            .remove(0);
        w.mask(ModalityKind::Mag);
        let s = scale_units(w);
        assert!(s.is_zero(ModalityKind::Mag));
    }

    #[test]
    fn smv_values() {
        assert_eq!(smv(&[3.0], &[4.0], &[0.0]).unwrap(), vec![5.0]);
        assert_eq!(smv(&[0.0], &[0.0], &[0.0]).unwrap(), vec![0.0]);
        assert!((smv(&[1.0], &[1.0], &[1.0]).unwrap()[0] - 1.732_050_8).abs() < 1e-7);
        assert!(smv(&[1.0, 2.0], &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn gradient1_values() {
        assert_eq!(gradient1(&[0.0, 1.0, 2.0, 3.0]).unwrap(), vec![1.0; 4]);
        assert_eq!(gradient1(&[4.0; 6]).unwrap(), vec![0.0; 6]);
        assert_eq!(
            gradient1(&[0.0, 0.0, 4.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 2.0, 0.0, -2.0, 0.0]
        );
        assert!(gradient1(&[1.0]).is_err());
        assert_eq!(gradient1(&[1.0, 3.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn gradient2_values() {
        let line: Vec<f64> = (0..10).map(|t| 3.0 * t as f64 - 2.0).collect();
        assert!(close(&gradient2(&line).unwrap(), &[0.0; 10], 1e-12));
        assert_eq!(gradient2(&[7.0; 5]).unwrap(), vec![0.0; 5]);

        // t² on 0..4: dt1 = [1, 2, 4, 6, 7]; dt2 = [1, 1.5, 2, 1.5, 1].
        let quad = [0.0, 1.0, 4.0, 9.0, 16.0];
        let g2 = gradient2(&quad).unwrap();
        assert_eq!(g2, vec![1.0, 1.5, 2.0, 1.5, 1.0]);
        // Interior points whose stencil never touches an endpoint.
        assert_eq!(gradient1(&quad).unwrap()[1..4], [2.0, 4.0, 6.0]);
        assert_eq!(g2[2], 2.0);
    }

    #[test]
    fn quadratic_second_gradient_interior_is_constant() {
        // Away from the boundary, two central differences of t² give
        // ((t+2)² - 2t² + (t-2)²) / 4 = 2.
        let quad: Vec<f64> = (0..20).map(|t| (t * t) as f64).collect();
        let g2 = gradient2(&quad).unwrap();
        assert!(g2[2..18].iter().all(|&v| v == 2.0));
    }

    #[test]
    fn integral_values() {
        assert_eq!(integral(&[1.0; 4]).unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(integral(&[0.0, 2.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(
            integral(&[0.0, 1.0, 2.0, 3.0]).unwrap(),
            vec![0.0, 0.5, 2.0, 4.5]
        );
        assert!(integral(&[]).is_err());
    }

    #[test]
    fn derived_signal_counts() {
        let w = scale_units(
            synth_dataset(&SynthOptions::new(1, 1, 0))
                .unwrap()
                .remove(0),
        );
        for m in ModalityMask::ALL {
            let d = derive_signals(&w, Some(m)).unwrap();
            assert_eq!(d.signal_count(), 14);
            assert!(d.get(m.missing).is_none());
        }
        assert_eq!(derive_signals(&w, None).unwrap().signal_count(), 21);
    }

    #[test]
    fn constant_modality_has_zero_gradient_magnitudes() {
        let mut w = RawWindow::zeros(0);
        for axis in w.modality_mut(ModalityKind::Acc) {
            axis.iter_mut().for_each(|v| *v = 0.7);
        }
        let d = derive_signals(&w, None).unwrap();
        let acc = d.get(ModalityKind::Acc).unwrap();
        assert!(acc.get(SignalKind::SmvDt1).iter().all(|&v| v == 0.0));
        assert!(acc.get(SignalKind::SmvDt2).iter().all(|&v| v == 0.0));
        assert!(acc
            .get(SignalKind::Smv)
            .iter()
            .all(|&v| (v - 0.7 * 3f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn zero_modality_gives_zero_signals() {
        let d = derive_signals(&RawWindow::zeros(0), None).unwrap();
        for m in ModalityKind::ALL {
            for s in &d.get(m).unwrap().signals {
                assert!(s.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn integral_then_gradient_is_smoothed_signal() {
        let x: Vec<f64> = (0..50).map(|t| ((t * 37) % 11) as f64 - 4.3).collect();
        let g = gradient1(&integral(&x).unwrap()).unwrap();
        for t in 1..x.len() - 1 {
            let oracle = (x[t - 1] + 2.0 * x[t] + x[t + 1]) / 4.0;
            assert!((g[t] - oracle).abs() < 1e-12);
        }
    }
}
