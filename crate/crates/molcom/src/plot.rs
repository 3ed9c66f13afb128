//! Log-scale SVG line plots straight from sweep CSVs.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRequest {
    pub input: PathBuf,
    pub output: PathBuf,
    pub x: String,
    /// One or more y columns; each gets its own series per group.
    pub y: Vec<String>,
    /// Columns whose joined values name a series. Defaults to
    /// `experiment,scheme` or `alphabet_size`, whichever the CSV has.
    pub group: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub series: Vec<Series>,
    /// Values left out because they cannot sit on a log y axis.
    pub dropped: usize,
    pub log_x: bool,
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn { path: path.to_owned(), column: name.to_owned() })
}

fn default_group(headers: &csv::StringRecord) -> Vec<String> {
    let has = |c: &str| headers.iter().any(|h| h == c);
    if has("scheme") {
        ["experiment", "scheme"].iter().filter(|c| has(c)).map(|c| c.to_string()).collect()
    } else if has("alphabet_size") {
        vec!["alphabet_size".to_owned()]
    } else {
        Vec::new()
    }
}

/// Reads the series to plot. Series follow the CSV column order of the y
/// columns, then the order in which each group first appears; empty cells
/// and non-positive y values are dropped.
pub fn load(req: &PlotRequest) -> Result<PlotData> {
    let path = req.input.as_path();
    let csv_err = |source| Error::Csv { path: path.to_owned(), source };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if req.y.is_empty() {
        return Err(Error::config("plot needs at least one y column"));
    }
    let xi = column(&headers, &req.x, path)?;
    let mut ys: Vec<(usize, &str)> =
        req.y.iter().map(|y| Ok((column(&headers, y, path)?, y.as_str()))).collect::<Result<_>>()?;
    ys.sort_by_key(|&(i, _)| i);
    ys.dedup();
    let group = req.group.clone().unwrap_or_else(|| default_group(&headers));
    let gi: Vec<usize> = group.iter().map(|g| column(&headers, g, path)).collect::<Result<_>>()?;

    let mut groups: Vec<String> = Vec::new();
    // (group index, x, one y per y column)
    let mut rows: Vec<(usize, f64, Vec<Option<f64>>)> = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |i: usize, name: &str| -> Result<Option<f64>> {
            let v = rec.get(i).unwrap_or("").trim();
            if v.is_empty() {
                return Ok(None);
            }
            v.parse::<f64>().map(Some).map_err(|_| Error::BadValue {
                path: path.to_owned(),
                row: row + 1,
                column: name.to_owned(),
                value: v.to_owned(),
            })
        };
        let Some(x) = parse(xi, &req.x)? else { continue };
        let yv = ys.iter().map(|&(i, name)| parse(i, name)).collect::<Result<Vec<_>>>()?;
        let name = gi.iter().map(|&i| rec.get(i).unwrap_or("")).collect::<Vec<_>>().join(" ");
        let g = match groups.iter().position(|n| *n == name) {
            Some(g) => g,
            None => {
                groups.push(name);
                groups.len() - 1
            }
        };
        rows.push((g, x, yv));
    }

    let log_x = !rows.is_empty() && rows.iter().all(|(_, x, _)| *x > 0.0);
    let mut series = Vec::new();
    let mut dropped = 0;
    for (k, &(_, y_name)) in ys.iter().enumerate() {
        for (g, group_name) in groups.iter().enumerate() {
            let mut points = Vec::new();
            for (_, x, yv) in rows.iter().filter(|r| r.0 == g) {
                match yv[k].filter(|y| *y > 0.0 && y.is_finite()) {
                    Some(y) => points.push((*x, y)),
                    None => dropped += 1,
                }
            }
            if points.is_empty() {
                continue;
            }
            let name = match (ys.len(), group_name.is_empty()) {
                (1, _) => group_name.clone(),
                (_, true) => y_name.to_owned(),
                (_, false) => format!("{group_name} {y_name}"),
            };
            series.push(Series { name, points });
        }
    }
    Ok(PlotData { series, dropped, log_x })
}

/// Range padded so that a single point or a flat series still spans an axis.
fn span(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return if log { (0.1, 1.0) } else { (0.0, 1.0) };
    }
    if log {
        let (lo, hi) = if lo == hi { (lo / 2.0, hi * 2.0) } else { (lo, hi) };
        (lo / 1.2, hi * 1.2)
    } else if lo == hi {
        (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0))
    } else {
        let pad = 0.02 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Writes the SVG and returns the data that went into it.
pub fn plot(req: &PlotRequest) -> Result<PlotData> {
    let data = load(req)?;
    if data.dropped > 0 {
        eprintln!("plot: {} value(s) that are zero, negative or empty left off the log axis", data.dropped);
    }
    draw(&data, req).map_err(|e| Error::Plot { path: req.output.clone(), message: e.to_string() })?;
    Ok(data)
}

fn draw(data: &PlotData, req: &PlotRequest) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let points = || data.series.iter().flat_map(|s| s.points.iter().copied());
    let (x0, x1) = span(points().map(|p| p.0), data.log_x);
    let (y0, y1) = span(points().map(|p| p.1), true);

    let root = SVGBackend::new(&req.output, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(20).x_label_area_size(45).y_label_area_size(70);

    macro_rules! render {
        ($chart:expr) => {{
            let mut chart = $chart;
            chart.configure_mesh().x_desc(req.x.as_str()).y_desc(req.y.join(", ")).draw()?;
            for (i, s) in data.series.iter().enumerate() {
                let colour = Palette99::pick(i).to_rgba();
                chart
                    .draw_series(LineSeries::new(s.points.iter().copied(), colour.stroke_width(2)))?
                    .label(s.name.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], colour.stroke_width(2)));
                chart.draw_series(s.points.iter().map(|&p| Circle::new(p, 3, colour.filled())))?;
            }
            if data.series.iter().any(|s| !s.name.is_empty()) {
                chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
            }
        }};
    }
    if data.log_x {
        render!(builder.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())?);
    } else {
        render!(builder.build_cartesian_2d(x0..x1, (y0..y1).log_scale())?);
    }
    root.present()?;
    Ok(())
}
