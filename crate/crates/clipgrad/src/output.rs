//! Artifact emission: CSVs, JSON summaries, a minimal SVG band plot.
//!
//! Every write is atomic (temp file in the target directory, then rename)
//! and floats are formatted with the shortest round-trip representation, so
//! identical ensembles produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::harness::{TrackedMetric, TrajectoryEnsemble};

/// Write `contents`, replacing `path` only once the data is fully on disk.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| invalid(format!("not a file path: {}", path.display())))?;
    let mut tmp: PathBuf = dir.map(Path::to_path_buf).unwrap_or_default();
    tmp.push(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Full per-seed trajectory dump:
/// `seed,step,x,suboptimality,sq_dist,grad_norm_sq,b` rows.
pub fn ensemble_csv(ensemble: &TrajectoryEnsemble) -> String {
    let mut out = String::from("seed,step,x,suboptimality,sq_dist,grad_norm_sq,b\n");
    for (seed, traj) in ensemble.seeds.iter().zip(&ensemble.trajectories) {
        for r in &traj.records {
            let _ = writeln!(
                out,
                "{seed},{},{},{},{},{},{}",
                r.t, r.x, r.suboptimality, r.sq_dist, r.grad_norm_sq, r.b
            );
        }
    }
    out
}

/// Percentile bands as `step,prob,value` rows (one row per step and level).
pub fn bands_csv(levels: &[f64], bands: &[Vec<f64>]) -> String {
    let mut out = String::from("step,prob,value\n");
    if let Some(first) = bands.first() {
        for step in 0..first.len() {
            for (level, band) in levels.iter().zip(bands) {
                let _ = writeln!(out, "{step},{level},{}", band[step]);
            }
        }
    }
    out
}

/// Histogram of samples over `bins` equal-width bins of `[lo, hi)`;
/// `bin_lo,bin_hi,count` rows plus one trailing overflow row per side.
pub fn histogram_csv(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<String> {
    if !(hi > lo) || bins == 0 {
        return Err(invalid("histogram needs hi > lo and at least one bin"));
    }
    let mut counts = vec![0usize; bins];
    let (mut below, mut above) = (0usize, 0usize);
    let width = (hi - lo) / bins as f64;
    for &s in samples {
        if s < lo {
            below += 1;
        } else if s >= hi {
            above += 1;
        } else {
            let idx = (((s - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    let mut out = String::from("bin_lo,bin_hi,count\n");
    let _ = writeln!(out, "-inf,{lo},{below}");
    for (i, count) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        let b = lo + (i + 1) as f64 * width;
        let _ = writeln!(out, "{a},{b},{count}");
    }
    let _ = writeln!(out, "{hi},inf,{above}");
    Ok(out)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| invalid(format!("serialization failed: {e}")))
}

/// Minimal band plot: one polyline per percentile level, log10 y scale,
/// axis labels. Non-finite values break the polyline.
pub fn bands_svg(title: &str, metric: TrackedMetric, levels: &[f64], bands: &[Vec<f64>]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let steps = bands.first().map(Vec::len).unwrap_or(0);
    let finite: Vec<f64> = bands
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    let (y_lo, y_hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v.log10()), hi.max(v.log10()))
        });
    let (y_lo, y_hi) = if y_lo.is_finite() && y_hi > y_lo {
        (y_lo, y_hi)
    } else {
        (-1.0, 1.0)
    };
    let x_of = |step: usize| {
        MARGIN + (W - 2.0 * MARGIN) * step as f64 / (steps.max(2) - 1) as f64
    };
    let y_of = |v: f64| {
        let t = (v.log10() - y_lo) / (y_hi - y_lo);
        H - MARGIN - (H - 2.0 * MARGIN) * t
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        W / 2.0,
        title
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n\
         <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{0}\" stroke=\"black\"/>",
        H - MARGIN,
        W - MARGIN
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">step</text>",
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" \
         text-anchor=\"middle\">log10 {}</text>",
        H / 2.0,
        H / 2.0,
        metric.name()
    );
    let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
    for (i, (level, band)) in levels.iter().zip(bands).enumerate() {
        let color = colors[i % colors.len()];
        let mut segments: Vec<String> = Vec::new();
        let mut current = String::new();
        for (step, v) in band.iter().enumerate() {
            if v.is_finite() && *v > 0.0 {
                let _ = write!(current, "{:.2},{:.2} ", x_of(step), y_of(*v));
            } else if !current.is_empty() {
                segments.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            segments.push(current);
        }
        for points in segments {
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                points.trim_end()
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">p{}</text>",
            W - MARGIN + 4.0,
            MARGIN + 14.0 * i as f64,
            level * 100.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{StepRecord, Trajectory};
    use tempfile::tempdir;

    fn tiny_ensemble() -> TrajectoryEnsemble {
        let rec = |t, x: f64| StepRecord {
            t,
            x,
            suboptimality: 0.5 * x * x,
            sq_dist: x * x,
            grad_norm_sq: x * x,
            b: 1.0 + t as f64,
        };
        TrajectoryEnsemble {
            config_hash: "abc".into(),
            seeds: vec![0, 1],
            trajectories: vec![
                Trajectory { records: vec![rec(0, 2.0), rec(1, 1.0)], failed: false },
                Trajectory { records: vec![rec(0, 2.0), rec(1, 0.5)], failed: false },
            ],
            steps: 1,
        }
    }

    #[test]
    fn atomic_write_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        atomic_write(&path, b"a,b\n1,2\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n1,2\n");
        // overwrite goes through the same rename path
        atomic_write(&path, b"x\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "x\n");
        // no temp files left behind
        let leftovers: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn ensemble_csv_round_trips() {
        let ensemble = tiny_ensemble();
        let csv = ensemble_csv(&ensemble);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seed,step,x,suboptimality,sq_dist,grad_norm_sq,b"
        );
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 4);
        // shortest-roundtrip formatting parses back to the exact value
        assert_eq!(rows[1][2], 1.0);
        assert_eq!(rows[3][3], 0.5 * 0.5 * 0.5);
    }

    #[test]
    fn bands_csv_layout() {
        let csv = bands_csv(&[0.1, 0.9], &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(
            csv,
            "step,prob,value\n0,0.1,1\n0,0.9,3\n1,0.1,2\n1,0.9,4\n"
        );
    }

    #[test]
    fn histogram_counts_and_overflow() {
        let csv = histogram_csv(&[-5.0, 0.1, 0.2, 0.9, 3.0], 0.0, 1.0, 2).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "-inf,0,1");
        assert_eq!(lines[2], "0,0.5,2");
        assert_eq!(lines[3], "0.5,1,1");
        assert_eq!(lines[4], "1,inf,1");
        assert!(histogram_csv(&[], 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn svg_has_polylines_and_breaks_on_infinity() {
        let svg = bands_svg(
            "demo",
            TrackedMetric::SquaredDistance,
            &[0.5],
            &[vec![1.0, f64::INFINITY, 4.0, 2.0]],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        // the infinity splits the band into two polylines
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
