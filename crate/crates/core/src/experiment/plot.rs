use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GW_HEADER, RESPONSE_HEADER, VALLEY_HEADER, VIBRATION_HEADER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Valley,
    Vibration,
    FreqResponse,
    Gw,
}

impl PlotKind {
    fn header(self) -> &'static [&'static str] {
        match self {
            PlotKind::Valley => &VALLEY_HEADER,
            PlotKind::Vibration => &VIBRATION_HEADER,
            PlotKind::FreqResponse => &RESPONSE_HEADER,
            PlotKind::Gw => &GW_HEADER,
        }
    }

    fn detect(header: &[String]) -> Option<Self> {
        [PlotKind::Valley, PlotKind::Vibration, PlotKind::FreqResponse, PlotKind::Gw]
            .into_iter()
            .find(|k| k.header().iter().map(|s| s.to_string()).eq(header.iter().cloned()))
    }
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valley" | "valley-sweep" => Ok(PlotKind::Valley),
            "vibration" => Ok(PlotKind::Vibration),
            "freq-response" | "freq_response" => Ok(PlotKind::FreqResponse),
            "gw" => Ok(PlotKind::Gw),
            other => Err(Error::Config(format!("unknown plot kind `{other}`"))),
        }
    }
}

struct Table {
    columns: Vec<Vec<f64>>,
}

fn read_table(path: &Path, kind: Option<PlotKind>) -> Result<(PlotKind, Table)> {
    let schema = |reason: String| Error::Schema { path: path.to_path_buf(), reason };
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let kind = match kind {
        Some(k) => {
            if !k.header().iter().map(|s| s.to_string()).eq(header.iter().cloned()) {
                return Err(schema(format!("expected columns {:?}, found {header:?}", k.header())));
            }
            k
        }
        None => PlotKind::detect(&header).ok_or_else(|| schema(format!("unrecognised columns {header:?}")))?,
    };
    let mut columns = vec![Vec::new(); header.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        for (k, field) in record.iter().enumerate() {
            let x: f64 = field
                .trim()
                .parse()
                .map_err(|_| schema(format!("row {}: `{field}` is not a number", line + 2)))?;
            columns[k].push(x);
        }
    }
    if columns[0].is_empty() {
        return Err(schema("no data rows".into()));
    }
    Ok((kind, Table { columns }))
}

fn bounds(xs: &[f64]) -> (f64, f64) {
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    color: RGBColor,
) -> Result<()>
where
    DB::ErrorType: 'static,
{
    let (x0, x1) = bounds(xs);
    let (y0, y1) = bounds(ys);
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(80)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .y_label_formatter(&|v| format!("{v:.2e}"))
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(xs.iter().copied().zip(ys.iter().copied()), &color))
        .map_err(plot_err)?;
    Ok(())
}

/// Renders `csv` as an SVG next to it (or at `out`). The CSV is only read.
pub fn plot(csv: &Path, kind: Option<PlotKind>, out: Option<&Path>) -> Result<PathBuf> {
    let (kind, table) = read_table(csv, kind)?;
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| csv.with_extension("svg"));
    draw(kind, &table, &target)?;
    Ok(target)
}

fn draw(kind: PlotKind, table: &Table, target: &Path) -> Result<()> {
    let c = &table.columns;
    let root = SVGBackend::new(target, (900, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    match kind {
        PlotKind::Valley => {
            panel(&root, "steady-state log negativity", "f = (T + dt)/L0", "E_N", &c[0], &c[1], BLUE)?;
        }
        PlotKind::Vibration => {
            let parts = root.split_evenly((2, 1));
            panel(&parts[0], "log negativity per cycle", "cycle", "E_N", &c[0], &c[2], BLUE)?;
            panel(&parts[1], "2<q1 p2> per cycle", "cycle", "2<q1 p2>", &c[0], &c[3], RED)?;
        }
        PlotKind::FreqResponse => {
            let log_gamma: Vec<f64> = c[2].iter().map(|g| g.log10()).collect();
            panel(&root, "frequency response", "log10(gamma/omega1)", "max |2<q1 p2>|", &log_gamma, &c[1], BLUE)?;
        }
        PlotKind::Gw => {
            let parts = root.split_evenly((3, 1));
            panel(&parts[0], "log negativity per cycle", "cycle", "E_N", &c[0], &c[2], BLUE)?;
            panel(&parts[1], "2<q1 p2> per cycle", "cycle", "2<q1 p2>", &c[0], &c[3], RED)?;
            panel(&parts[2], "cavity length", "cycle", "L", &c[0], &c[4], BLACK)?;
        }
    }
    root.present().map_err(plot_err)
}
