use std::fmt::Write as _;

use serde::Serialize;

use super::{sci, Check, ExperimentConfig, Report};
use crate::error::{Error, Result};
use crate::geometry::{perimeter_2s, Mask, Window};

/// Half-width of the square pixel domain of the built-in masks.
const EXTENT: f64 = 1.5;

/// {x₁ < 0} on m × m pixels covering [−1.5, 1.5]².
pub fn half_plane_mask(m: usize) -> Mask {
    Mask::from_fn(m, m, [-EXTENT, -EXTENT], 2.0 * EXTENT / m as f64, |x| x[0] < 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerimeterReport {
    pub s: f64,
    pub window_radius: f64,
    /// (pixels per side, P_2s of the half-plane)
    pub half_plane: Vec<(usize, f64)>,
    pub complement: f64,
    pub inner_window: f64,
    pub empty: f64,
    pub mask_file: Option<f64>,
}

impl Report for PerimeterReport {
    fn title(&self) -> &'static str {
        "perimeter-2s"
    }

    fn summary(&self) -> Vec<String> {
        let mut v: Vec<String> =
            self.half_plane.iter().map(|(m, p)| format!("half-plane, {m} px: P = {p:.6}")).collect();
        if let Some(p) = self.mask_file {
            v.push(format!("mask file: P = {p:.6}"));
        }
        v
    }

    fn checks(&self) -> Vec<Check> {
        let base = self.half_plane[0].1;
        let mut v = vec![
            Check::new("complement symmetry exact", self.complement == base, format!("{:e} vs {:e}", self.complement, base)),
            Check::new("empty set has zero perimeter", self.empty == 0.0, format!("{:e}", self.empty)),
            Check::new(
                "monotone under window inclusion",
                self.inner_window <= base,
                format!("P(half radius) = {:.6} <= {:.6}", self.inner_window, base),
            ),
            Check::new("half-plane value finite and positive", base.is_finite() && base > 0.0, format!("{base:.6}")),
        ];
        for w in self.half_plane.windows(2) {
            let rel = (w[1].1 - w[0].1).abs() / w[1].1.abs();
            v.push(Check::new(
                format!("refinement {} -> {} px within 3%", w[0].0, w[1].0),
                rel <= 0.03,
                format!("{:.2}%", 100.0 * rel),
            ));
        }
        v
    }

    fn tables(&self) -> Vec<(String, String)> {
        let mut csv = String::from("case,pixels,window_radius,perimeter\n");
        for (m, p) in &self.half_plane {
            let _ = writeln!(csv, "half_plane,{m},{},{}", sci(self.window_radius), sci(*p));
        }
        let m0 = self.half_plane[0].0;
        let _ = writeln!(csv, "complement,{m0},{},{}", sci(self.window_radius), sci(self.complement));
        let _ = writeln!(csv, "inner_window,{m0},{},{}", sci(0.5 * self.window_radius), sci(self.inner_window));
        let _ = writeln!(csv, "empty,{m0},{},{}", sci(self.window_radius), sci(self.empty));
        if let Some(p) = self.mask_file {
            let _ = writeln!(csv, "mask_file,,{},{}", sci(self.window_radius), sci(p));
        }
        vec![("perimeter.csv".into(), csv)]
    }
}

/// Half-plane refinement pair, complement and window checks, and the
/// optional user mask. A malformed mask aborts with its validation error.
pub fn run_perimeter(cfg: &ExperimentConfig) -> Result<PerimeterReport> {
    cfg.validate()?;
    let window = Window { center: [0.0, 0.0], radius: cfg.window_radius };
    if cfg.window_radius > EXTENT {
        return Err(Error::Config(format!("window_radius must not exceed {EXTENT}")));
    }
    let mask_file = match &cfg.mask_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mask = Mask::from_pgm(&text, cfg.mask_origin, cfg.mask_h)?;
            Some(perimeter_2s(&mask, &window, cfg.s)?)
        }
        None => None,
    };
    let mut half_plane = Vec::new();
    for &m in &cfg.pixels {
        half_plane.push((m, perimeter_2s(&half_plane_mask(m), &window, cfg.s)?));
    }
    let coarse = half_plane_mask(cfg.pixels[0]);
    let complement = perimeter_2s(&coarse.complement(), &window, cfg.s)?;
    let inner = Window { center: window.center, radius: 0.5 * window.radius };
    let inner_window = perimeter_2s(&coarse, &inner, cfg.s)?;
    let blank = Mask::from_fn(coarse.width, coarse.height, coarse.origin, coarse.h, |_| false);
    let empty = perimeter_2s(&blank, &window, cfg.s)?;
    Ok(PerimeterReport { s: cfg.s, window_radius: cfg.window_radius, half_plane, complement, inner_window, empty, mask_file })
}
