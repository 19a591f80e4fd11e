//! Static SVG figures rendered from sweep CSV files.
//!
//! Plots are a convenience view; every acceptance decision reads the CSV
//! numbers. Rendering is deterministic: the same CSV yields the same bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("CSV is missing required columns: {0:?}")]
    MissingColumns(Vec<String>),
    #[error("CSV has no data rows")]
    Empty,
    #[error("render error: {0}")]
    Render(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    ThroughputVsLoad,
    EnergyVsLoad,
    CollisionVsLoad,
    Density,
    Contention,
}

impl std::str::FromStr for FigureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "throughput" => Ok(FigureKind::ThroughputVsLoad),
            "energy" => Ok(FigureKind::EnergyVsLoad),
            "collision" => Ok(FigureKind::CollisionVsLoad),
            "density" => Ok(FigureKind::Density),
            "contention" => Ok(FigureKind::Contention),
            other => Err(format!(
                "unknown figure kind {other:?} (throughput, energy, collision, density, contention)"
            )),
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn load(path: &Path) -> Result<Self, PlotError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlotError::Io(path.display().to_string(), e))?;
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or(PlotError::Empty)?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows: Vec<Vec<String>> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        if rows.is_empty() {
            return Err(PlotError::Empty);
        }
        Ok(Self { header, rows })
    }

    fn require(&self, columns: &[&str]) -> Result<Vec<usize>, PlotError> {
        let mut idx = Vec::new();
        let mut missing = Vec::new();
        for &c in columns {
            match self.header.iter().position(|h| h == c) {
                Some(i) => idx.push(i),
                None => missing.push(c.to_string()),
            }
        }
        if missing.is_empty() {
            Ok(idx)
        } else {
            Err(PlotError::MissingColumns(missing))
        }
    }

    fn f64(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col].parse().unwrap_or(f64::NAN)
    }
}

const SERIES_COLORS: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn draw_series(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &BTreeMap<String, Vec<(f64, f64)>>,
) -> Result<(), PlotError> {
    let xs: Vec<f64> = series.values().flatten().map(|&(x, _)| x).collect();
    let ys: Vec<f64> = series
        .values()
        .flatten()
        .map(|&(_, y)| y)
        .filter(|y| y.is_finite())
        .collect();
    if xs.is_empty() || ys.is_empty() {
        return Err(PlotError::Empty);
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);

    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE)
        .map_err(|e| PlotError::Render(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(44)
        .y_label_area_size(76)
        .build_cartesian_2d(x_min..x_max, y_min..y_max)
        .map_err(|e| PlotError::Render(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(|e| PlotError::Render(e.to_string()))?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let mut pts = points.clone();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let finite: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.1.is_finite()).collect();
        chart
            .draw_series(LineSeries::new(
                finite.iter().copied(),
                color.stroke_width(2),
            ))
            .map_err(|e| PlotError::Render(e.to_string()))?
            .label(name.clone())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
            });
        chart
            .draw_series(
                finite
                    .iter()
                    .map(|&(x, y)| Circle::new((x, y), 3, color.filled())),
            )
            .map_err(|e| PlotError::Render(e.to_string()))?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.85))
        .draw()
        .map_err(|e| PlotError::Render(e.to_string()))?;
    root.present()
        .map_err(|e| PlotError::Render(e.to_string()))?;
    Ok(())
}

fn bounds(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 0.5 - lo.abs() * 0.1, hi + 0.5 + hi.abs() * 0.1)
    } else {
        let pad = (hi - lo) * 0.06;
        (lo - pad, hi + pad)
    }
}

/// Renders the requested figure from an aggregated sweep CSV (or the
/// contention CSV) into `out_dir`, returning the files written.
pub fn emit_plots(csv: &Path, kind: FigureKind, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| PlotError::Io(out_dir.display().to_string(), e))?;
    let table = Table::load(csv)?;
    match kind {
        FigureKind::ThroughputVsLoad => {
            let f = agg_figure(
                &table,
                "throughput_mean",
                out_dir,
                "throughput_vs_load.svg",
                "Distance-weighted throughput vs offered load",
                "offered load (packets/s)",
                "throughput (packet·m/s)",
            )?;
            Ok(vec![f])
        }
        FigureKind::EnergyVsLoad => {
            let f = agg_figure(
                &table,
                "energy_mean",
                out_dir,
                "energy_vs_load.svg",
                "Energy per delivered packet vs offered load",
                "offered load (packets/s)",
                "energy per packet (J)",
            )?;
            Ok(vec![f])
        }
        FigureKind::CollisionVsLoad => {
            let f = agg_figure(
                &table,
                "collision_mean",
                out_dir,
                "collision_vs_load.svg",
                "Data collision rate vs offered load",
                "offered load (packets/s)",
                "collision rate",
            )?;
            Ok(vec![f])
        }
        FigureKind::Density => {
            let idx = table.require(&["protocol", "param_value", "n", "throughput_mean"])?;
            let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in 0..table.rows.len() {
                let name = format!("{} ({})", table.rows[r][idx[0]], table.rows[r][idx[1]]);
                series
                    .entry(name)
                    .or_default()
                    .push((table.f64(r, idx[2]), table.f64(r, idx[3])));
            }
            let path = out_dir.join("throughput_vs_density.svg");
            draw_series(
                &path,
                "Throughput vs node count",
                "nodes",
                "throughput (packet·m/s)",
                &series,
            )?;
            Ok(vec![path])
        }
        FigureKind::Contention => {
            let idx =
                table.require(&["n_prime", "w", "t_cp_us", "q_analytic", "delay_analytic_us"])?;
            let mut files = Vec::new();

            // Panel 1: successes vs contenders, one curve per window, at
            // the smallest contention budget.
            let t0 = (0..table.rows.len())
                .map(|r| table.f64(r, idx[2]))
                .fold(f64::INFINITY, f64::min);
            let mut by_w: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in 0..table.rows.len() {
                if table.f64(r, idx[2]) == t0 {
                    by_w.entry(format!("W={}", table.rows[r][idx[1]]))
                        .or_default()
                        .push((table.f64(r, idx[0]), table.f64(r, idx[3])));
                }
            }
            let p1 = out_dir.join("contention_successes_vs_contenders.svg");
            draw_series(
                &p1,
                "Successful requests per frame vs contenders",
                "contenders within carrier-sense range",
                "expected successes",
                &by_w,
            )?;
            files.push(p1);

            // Panels 2 and 3: successes and normalized delay vs budget,
            // one curve per contender count, best point over the windows.
            let mut q_by_n: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            let mut d_by_n: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in 0..table.rows.len() {
                let name = format!("N'={}", table.rows[r][idx[0]]);
                let t_cp = table.f64(r, idx[2]);
                let q = table.f64(r, idx[3]);
                let d = table.f64(r, idx[4]) / 100_000.0;
                let qs = q_by_n.entry(name.clone()).or_default();
                match qs.iter_mut().find(|(x, _)| *x == t_cp) {
                    Some(pt) => pt.1 = pt.1.max(q),
                    None => qs.push((t_cp, q)),
                }
                let ds = d_by_n.entry(name).or_default();
                match ds.iter_mut().find(|(x, _)| *x == t_cp) {
                    Some(pt) => pt.1 = pt.1.min(d),
                    None => ds.push((t_cp, d)),
                }
            }
            let p2 = out_dir.join("contention_successes_vs_budget.svg");
            draw_series(
                &p2,
                "Successful requests per frame vs contention budget",
                "contention time per frame (µs)",
                "expected successes",
                &q_by_n,
            )?;
            files.push(p2);
            let p3 = out_dir.join("contention_delay_vs_budget.svg");
            draw_series(
                &p3,
                "Request delay vs contention budget",
                "contention time per frame (µs)",
                "delay (frames)",
                &d_by_n,
            )?;
            files.push(p3);
            Ok(files)
        }
    }
}

fn agg_figure(
    table: &Table,
    metric: &str,
    out_dir: &Path,
    file: &str,
    title: &str,
    x_label: &str,
    y_label: &str,
) -> Result<PathBuf, PlotError> {
    let idx = table.require(&["protocol", "param_value", "load_pps", metric])?;
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in 0..table.rows.len() {
        let name = format!("{} ({})", table.rows[r][idx[0]], table.rows[r][idx[1]]);
        series
            .entry(name)
            .or_default()
            .push((table.f64(r, idx[2]), table.f64(r, idx[3])));
    }
    let path = out_dir.join(file);
    draw_series(&path, title, x_label, y_label, &series)?;
    Ok(path)
}
