//! Wafer-level statistics: relative standard deviation per (mode, pitch),
//! Q/k² trends against frequency, and a seeded Monte Carlo variation model.

use crate::circuit::ModeMetrics;
use crate::dispersion::{frequency_at_pitch, sensitivity, DispersionError, LambMode, PlateSpec};
use crate::layout::ChipPlacement;
use crate::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least 2 values, got {0}")]
    TooFew(usize),
    #[error("values must be positive and finite, got {0}")]
    NonPositive(f64),
    #[error("no sites")]
    Empty,
    #[error("invalid variation model: {0}")]
    InvalidModel(String),
    #[error("nominal dispersion failed for {mode} at pitch {pitch:e} m: {source}")]
    Dispersion {
        mode: LambMode,
        pitch: f64,
        #[source]
        source: DispersionError,
    },
}

/// Population relative standard deviation in percent.
pub fn relstd(values: &[f64]) -> Result<f64, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFew(values.len()));
    }
    if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(StatsError::NonPositive(v));
    }
    let (mean, std) = mean_std(values);
    Ok(100.0 * std / mean)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One design measured (or simulated) at one chip location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaferSite {
    pub site_id: usize,
    pub x_mm: f64,
    pub y_mm: f64,
    pub pitch: f64,
    pub metrics: BTreeMap<LambMode, ModeMetrics>,
    /// Set when the fit (or the perturbed solve) failed for this site.
    #[serde(default)]
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_thickness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_pitch: Option<f64>,
}

/// Grouping key: pitch rounded to the picometre.
fn pitch_key(p: f64) -> i64 {
    (p * 1e12).round() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub mode: LambMode,
    pub pitch: f64,
    pub mean_f_hz: f64,
    pub relstd_pct: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
    /// Sites dropped because they were flagged as failed.
    pub excluded: usize,
    pub warnings: Vec<String>,
}

impl DeviationReport {
    pub fn row(&self, mode: LambMode, pitch: f64) -> Option<&DeviationRow> {
        self.rows.iter().find(|r| r.mode == mode && pitch_key(r.pitch) == pitch_key(pitch))
    }

    /// CSV with header `mode,pitch,mean_f_Hz,relstd_pct,n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,pitch,mean_f_Hz,relstd_pct,n\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:e},{:e},{:.6},{}", r.mode, r.pitch, r.mean_f_hz, r.relstd_pct, r.n);
        }
        out
    }
}

type Groups = BTreeMap<(LambMode, i64), (f64, Vec<ModeMetrics>)>;

fn group(sites: &[WaferSite]) -> Result<(Groups, usize), StatsError> {
    if sites.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut groups: Groups = BTreeMap::new();
    let mut excluded = 0;
    for s in sites {
        if s.failed {
            excluded += 1;
            continue;
        }
        for (&mode, m) in &s.metrics {
            groups
                .entry((mode, pitch_key(s.pitch)))
                .or_insert_with(|| (s.pitch, Vec::new()))
                .1
                .push(*m);
        }
    }
    Ok((groups, excluded))
}

/// Groups sites by (mode, pitch) and reports the resonance spread.
/// Failed sites are excluded and counted; groups with fewer than two sites
/// are omitted with a warning.
pub fn per_mode_deviation(sites: &[WaferSite]) -> Result<DeviationReport, StatsError> {
    let (groups, excluded) = group(sites)?;
    let mut report = DeviationReport {
        excluded,
        ..Default::default()
    };
    for ((mode, _), (pitch, ms)) in groups {
        let f: Vec<f64> = ms.iter().map(|m| m.f_r).collect();
        if f.len() < 2 {
            report
                .warnings
                .push(format!("{mode} at pitch {pitch:e} m has {} site(s); omitted", f.len()));
            continue;
        }
        report.rows.push(DeviationRow {
            mode,
            pitch,
            mean_f_hz: mean_std(&f).0,
            relstd_pct: relstd(&f)?,
            n: f.len(),
        });
    }
    if excluded > 0 {
        report.warnings.push(format!("{excluded} failed site(s) excluded"));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub pitch: f64,
    pub mean_f_hz: f64,
    pub q_mean: f64,
    pub q_std: f64,
    pub k_mean: f64,
    pub k_std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Increasing,
    Decreasing,
    Flat,
    Mixed,
}

fn trend(v: &[f64]) -> Trend {
    let up = v.windows(2).all(|w| w[1] >= w[0]);
    let down = v.windows(2).all(|w| w[1] <= w[0]);
    match (up, down) {
        (true, true) => Trend::Flat,
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        _ => Trend::Mixed,
    }
}

/// Mean of the longest tail (at least three points) staying within
/// `rel_tol` of its own mean.
pub fn plateau(v: &[f64], rel_tol: f64) -> Option<f64> {
    let mut best = None;
    for start in (0..v.len().saturating_sub(2)).rev() {
        let tail = &v[start..];
        let (m, _) = mean_std(tail);
        if tail.iter().all(|x| (x - m).abs() <= rel_tol * m.abs()) {
            best = Some(m);
        } else {
            break;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub mode: LambMode,
    /// Sorted by mean resonance frequency.
    pub points: Vec<MetricPoint>,
    pub q_plateau: Option<f64>,
    pub k_trend: Trend,
}

/// Per-mode Q and k² series against mean frequency. Non-finite Q values
/// (lossless fits) are left out of the Q statistics.
pub fn metrics_vs_frequency(sites: &[WaferSite]) -> Result<Vec<MetricSeries>, StatsError> {
    let (groups, _) = group(sites)?;
    let mut by_mode: BTreeMap<LambMode, Vec<MetricPoint>> = BTreeMap::new();
    for ((mode, _), (pitch, ms)) in groups {
        if ms.len() < 2 {
            continue;
        }
        let f: Vec<f64> = ms.iter().map(|m| m.f_r).collect();
        let q: Vec<f64> = ms.iter().map(|m| m.q_r).filter(|q| q.is_finite()).collect();
        let k: Vec<f64> = ms.iter().map(|m| m.k_eff_sq).collect();
        let (q_mean, q_std) = if q.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&q) };
        let (k_mean, k_std) = mean_std(&k);
        by_mode.entry(mode).or_default().push(MetricPoint {
            pitch,
            mean_f_hz: mean_std(&f).0,
            q_mean,
            q_std,
            k_mean,
            k_std,
            n: ms.len(),
        });
    }
    if by_mode.is_empty() {
        return Err(StatsError::TooFew(sites.len().min(1)));
    }
    Ok(by_mode
        .into_iter()
        .map(|(mode, mut points)| {
            points.sort_by(|a, b| a.mean_f_hz.total_cmp(&b.mean_f_hz));
            let q: Vec<f64> = points.iter().map(|p| p.q_mean).collect();
            let k: Vec<f64> = points.iter().map(|p| p.k_mean).collect();
            MetricSeries {
                mode,
                q_plateau: plateau(&q, 0.05),
                k_trend: trend(&k),
                points,
            }
        })
        .collect())
}

/// CSV of every series: `mode,pitch,mean_f_Hz,q_mean,q_std,k_mean,k_std,n`.
pub fn metrics_csv(series: &[MetricSeries]) -> String {
    let mut out = String::from("mode,pitch,mean_f_Hz,q_mean,q_std,k_mean,k_std,n\n");
    for s in series {
        for p in &s.points {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:.6},{:.6},{:.6e},{:.6e},{}",
                s.mode, p.pitch, p.mean_f_hz, p.q_mean, p.q_std, p.k_mean, p.k_std, p.n
            );
        }
    }
    out
}

/// Heatmap CSV `x_mm,y_mm,f_Hz` for one mode and pitch, skipping failed sites.
pub fn heatmap_csv(sites: &[WaferSite], mode: LambMode, pitch: f64) -> String {
    let mut out = String::from("x_mm,y_mm,f_Hz\n");
    for s in sites.iter().filter(|s| !s.failed && pitch_key(s.pitch) == pitch_key(pitch)) {
        if let Some(m) = s.metrics.get(&mode) {
            let _ = writeln!(out, "{:.4},{:.4},{:e}", s.x_mm, s.y_mm, m.f_r);
        }
    }
    out
}

/// Across-wafer thickness and pitch variation.
///
/// Thickness at radius r is `thickness_center − thickness_edge_drop·(r/R)²`
/// plus Gaussian noise; every design on a chip sees the same film, while
/// pitch errors are drawn per design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationModel {
    pub thickness_center: f64,
    pub thickness_edge_drop: f64,
    pub thickness_noise_sigma: f64,
    pub pitch_sigma: f64,
    pub seed: u64,
    /// Re-solve the dispersion at every site instead of first-order propagation.
    pub full_resolve: bool,
    /// Q and k² attached to simulated metrics.
    pub nominal_q: f64,
    pub nominal_k_eff_sq: f64,
}

impl Default for VariationModel {
    /// Centre 420 nm dropping 40 nm at the rim, 5 nm local noise and 5 nm
    /// pitch error, giving roughly 2 % thickness spread over the site map.
    fn default() -> Self {
        Self {
            thickness_center: 420e-9,
            thickness_edge_drop: 40e-9,
            thickness_noise_sigma: 5e-9,
            pitch_sigma: 5e-9,
            seed: 42,
            full_resolve: false,
            nominal_q: 500.0,
            nominal_k_eff_sq: 0.05,
        }
    }
}

impl VariationModel {
    /// No variation: flat film at `h`.
    pub fn flat(h: f64, seed: u64) -> Self {
        Self {
            thickness_center: h,
            thickness_edge_drop: 0.0,
            thickness_noise_sigma: 0.0,
            pitch_sigma: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            thickness_edge_drop: self.thickness_edge_drop * s,
            thickness_noise_sigma: self.thickness_noise_sigma * s,
            pitch_sigma: self.pitch_sigma * s,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |m: &str| Err(StatsError::InvalidModel(m.into()));
        for (name, v) in [
            ("thickness_edge_drop", self.thickness_edge_drop),
            ("thickness_noise_sigma", self.thickness_noise_sigma),
            ("pitch_sigma", self.pitch_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be finite and non-negative"));
            }
        }
        if !(self.thickness_center > self.thickness_edge_drop) {
            return bad("thickness must stay positive at the wafer edge");
        }
        if !(self.nominal_q > 0.0 && self.nominal_k_eff_sq > 0.0 && self.nominal_k_eff_sq < 1.0) {
            return bad("nominal Q must be positive and 0 < k² < 1");
        }
        Ok(())
    }

    pub fn profile(&self, r_mm: f64, radius_mm: f64) -> f64 {
        let u = (r_mm / radius_mm).powi(2);
        self.thickness_center - self.thickness_edge_drop * u
    }
}

struct Nominal {
    pitch: f64,
    mode: LambMode,
    f0: f64,
    s_h: f64,
    s_p: f64,
}

/// Simulates every (placement, pitch) site. Each placement draws from its
/// own ChaCha stream (master seed, stream = placement index), so results do
/// not depend on execution order. A perturbed solve that fails flags the
/// site instead of aborting.
pub fn simulate_wafer(
    model: &VariationModel,
    pitches: &[f64],
    modes: &[LambMode],
    plate: &PlateSpec,
    placements: &[ChipPlacement],
    wafer_radius_mm: f64,
    exec: Execution,
) -> Result<Vec<WaferSite>, StatsError> {
    model.validate()?;
    if placements.is_empty() || pitches.is_empty() || modes.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut nominal = Vec::with_capacity(pitches.len() * modes.len());
    for &pitch in pitches {
        for &mode in modes {
            let wrap = |source| StatsError::Dispersion { mode, pitch, source };
            let f0 = frequency_at_pitch(plate, mode, pitch).map_err(wrap)?;
            let s = sensitivity(plate, mode, PI / pitch).map_err(wrap)?;
            nominal.push(Nominal {
                pitch,
                mode,
                f0,
                s_h: s.dlnf_dlnh,
                s_p: s.dlnf_dlnp,
            });
        }
    }
    let thick_noise = Normal::new(0.0, model.thickness_noise_sigma).expect("validated sigma");
    let pitch_noise = Normal::new(0.0, model.pitch_sigma).expect("validated sigma");
    let per_chip = exec.map(placements, |pl| {
        let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
        rng.set_stream(pl.index as u64);
        let r = pl.x_mm.hypot(pl.y_mm);
        let h = model.profile(r, wafer_radius_mm) + thick_noise.sample(&mut rng);
        let local = plate.with_thickness(h.max(plate.h * 1e-3));
        pitches
            .iter()
            .enumerate()
            .map(|(j, &pitch)| {
                let p = pitch + pitch_noise.sample(&mut rng);
                let mut metrics = BTreeMap::new();
                let mut failed = !(h > 0.0 && p > 0.0);
                if !failed {
                    for nom in &nominal[j * modes.len()..(j + 1) * modes.len()] {
                        let f = if model.full_resolve {
                            frequency_at_pitch(&local, nom.mode, p).ok()
                        } else {
                            let df = nom.s_h * (h - plate.h) / plate.h + nom.s_p * (p - nom.pitch) / nom.pitch;
                            Some(nom.f0 * (1.0 + df))
                        };
                        match f {
                            Some(f) if f > 0.0 => {
                                metrics.insert(
                                    nom.mode,
                                    ModeMetrics::from_coupling(f, model.nominal_q, model.nominal_k_eff_sq),
                                );
                            }
                            _ => failed = true,
                        }
                    }
                }
                WaferSite {
                    site_id: pl.index,
                    x_mm: pl.x_mm,
                    y_mm: pl.y_mm,
                    pitch,
                    metrics,
                    failed,
                    local_thickness: Some(h),
                    local_pitch: Some(p),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(per_chip.into_iter().flatten().collect())
}

/// Population relstd (%) of the simulated film thickness, one value per chip.
pub fn thickness_relstd(sites: &[WaferSite]) -> Result<f64, StatsError> {
    let mut seen = BTreeMap::new();
    for s in sites {
        if let Some(h) = s.local_thickness {
            seen.entry(s.site_id).or_insert(h);
        }
    }
    relstd(&seen.into_values().collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(id: usize, pitch: f64, f: f64) -> WaferSite {
        let mut metrics = BTreeMap::new();
        metrics.insert(LambMode::S0, ModeMetrics::from_coupling(f, 500.0, 0.05));
        WaferSite {
            site_id: id,
            x_mm: 0.0,
            y_mm: 0.0,
            pitch,
            metrics,
            failed: false,
            local_thickness: None,
            local_pitch: None,
        }
    }

    #[test]
    fn relstd_examples() {
        assert_eq!(relstd(&[1e9, 1e9, 1e9]).unwrap(), 0.0);
        let r = relstd(&[0.99e9, 1.00e9, 1.01e9]).unwrap();
        assert!((r - 0.816_496_580_927_726).abs() < 1e-9);
        let r2 = relstd(&[1.98e9, 2.00e9, 2.02e9]).unwrap();
        assert!((r - r2).abs() < 1e-12);
        assert!(matches!(relstd(&[1.0]), Err(StatsError::TooFew(1))));
        assert!(relstd(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn grouping_exclusion_and_warnings() {
        let mut sites = vec![site(0, 1e-6, 1e9), site(1, 1e-6, 1e9), site(2, 2e-6, 5e8)];
        let mut bad = site(3, 1e-6, 9e9);
        bad.failed = true;
        sites.push(bad);
        let rep = per_mode_deviation(&sites).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].relstd_pct, 0.0);
        assert_eq!(rep.rows[0].n, 2);
        assert_eq!(rep.excluded, 1);
        assert_eq!(rep.warnings.len(), 2);
        assert!(per_mode_deviation(&[]).is_err());
    }

    #[test]
    fn plateau_and_trend() {
        assert_eq!(plateau(&[100.0, 400.0, 690.0, 700.0, 710.0], 0.05), Some(700.0));
        assert_eq!(plateau(&[1.0, 2.0, 3.0], 0.05), None);
        assert_eq!(trend(&[0.08, 0.07, 0.06]), Trend::Decreasing);
        assert_eq!(trend(&[0.05, 0.05]), Trend::Flat);
    }

    #[test]
    fn csv_headers() {
        let rep = per_mode_deviation(&[site(0, 1e-6, 1e9), site(1, 1e-6, 1.01e9)]).unwrap();
        let csv = rep.to_csv();
        assert!(csv.starts_with("mode,pitch,mean_f_Hz,relstd_pct,n\nS0,1e-6,"));
        let hm = heatmap_csv(&[site(0, 1e-6, 1e9)], LambMode::S0, 1e-6);
        assert_eq!(hm, "x_mm,y_mm,f_Hz\n0.0000,0.0000,1e9\n");
    }

    #[test]
    fn model_validation() {
        VariationModel::default().validate().unwrap();
        let m = VariationModel { pitch_sigma: -1.0, ..VariationModel::default() };
        assert!(m.validate().is_err());
        let m = VariationModel { thickness_edge_drop: 500e-9, ..VariationModel::default() };
        assert!(m.validate().is_err());
    }
}
