//! SVG figures. Every figure is drawn from its CSV sibling alone.

use std::f64::consts::PI;
use std::path::Path;

use plotters::prelude::*;

use crate::error::{CliError, CliResult};
use crate::table::Table;

/// Heatmaps are thinned to at most this many cells per axis.
pub const HEATMAP_CELLS: usize = 96;

fn plot_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Output(format!("plot: {e}"))
}

fn palette(i: usize) -> RGBColor {
    const C: [RGBColor; 6] = [
        RGBColor(31, 119, 180),
        RGBColor(214, 39, 40),
        RGBColor(44, 160, 44),
        RGBColor(148, 103, 189),
        RGBColor(255, 127, 14),
        RGBColor(23, 190, 207),
    ];
    C[i % C.len()]
}

fn padded_range(ys: impl Iterator<Item = f64>) -> std::ops::Range<f64> {
    let (lo, hi) = ys
        .filter(|y| y.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        return -1.0..1.0;
    }
    let pad = 0.05 * (hi - lo).max(1e-12);
    (lo - pad)..(hi + pad)
}

fn save(path: &Path, svg: String) -> CliResult<()> {
    crate::record::write_atomic(path, svg.as_bytes())
}

/// Profiles `p(phi)` from a `mu,phi,p,dp` table, two frequencies per panel.
pub fn legendre_overlay(csv: &Path, svg: &Path) -> CliResult<()> {
    let t = Table::read(csv)?;
    let (mu, phi, p) = (t.floats("mu")?, t.floats("phi")?, t.floats("p")?);
    let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for i in 0..mu.len() {
        match groups.last_mut() {
            Some((m, pts)) if *m == mu[i] => pts.push((phi[i], p[i])),
            _ => groups.push((mu[i], vec![(phi[i], p[i])])),
        }
    }
    let panels = groups.len().div_ceil(2).max(1);
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, (420 * panels as u32, 360)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let areas = root.split_evenly((1, panels));
        for (area, pair) in areas.iter().zip(groups.chunks(2)) {
            let yr = padded_range(pair.iter().flat_map(|g| g.1.iter().map(|q| q.1)));
            let mut ch = ChartBuilder::on(area)
                .margin(12)
                .x_label_area_size(32)
                .y_label_area_size(44)
                .build_cartesian_2d(0.0..PI / 2.0, yr)
                .map_err(plot_err)?;
            ch.configure_mesh()
                .x_desc("phi")
                .y_desc("p")
                .draw()
                .map_err(plot_err)?;
            for (c, (m, pts)) in pair.iter().enumerate() {
                let col = palette(c);
                ch.draw_series(LineSeries::new(pts.iter().copied(), col.stroke_width(2)))
                    .map_err(plot_err)?
                    .label(format!("mu = {m}"))
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], col));
            }
            ch.configure_series_labels()
                .border_style(BLACK)
                .background_style(WHITE)
                .draw()
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    save(svg, s)
}

fn diverging(t: f64) -> RGBColor {
    // t in [-1, 1]: blue, white, red
    let t = t.clamp(-1.0, 1.0);
    let w = |a: f64| (255.0 * (1.0 - a)) as u8;
    if t >= 0.0 {
        RGBColor(255, w(t), w(t))
    } else {
        RGBColor(w(-t), w(-t), 255)
    }
}

/// Heatmap of `value` over `(theta, phi)` from an `x,phi,value` table with
/// `x = m theta`, mirrored across `theta = 0` for display.
pub fn wedge_heatmap(csv: &Path, svg: &Path, m: usize, title: &str) -> CliResult<()> {
    let t = Table::read(csv)?;
    let (x, phi, val) = (t.floats("x")?, t.floats("phi")?, t.floats("value")?);
    let mut xs: Vec<f64> = x.clone();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut ps: Vec<f64> = phi.clone();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    if xs.len() < 2 || ps.len() < 2 {
        return Err(CliError::Output("heatmap needs a 2d grid".into()));
    }
    let sx = xs.len().div_ceil(HEATMAP_CELLS).max(1);
    let sp = ps.len().div_ceil(HEATMAP_CELLS).max(1);
    let dth = (xs[1] - xs[0]) * sx as f64 / m as f64;
    let dph = (ps[1] - ps[0]) * sp as f64;
    let vmax = val.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let th_max = xs[xs.len() - 1] / m as f64;
    let ph_max = ps[ps.len() - 1];

    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, (560, 360)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut ch = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(32)
            .y_label_area_size(44)
            .build_cartesian_2d(-th_max - dth / 2.0..th_max + dth / 2.0, -dph / 2.0..ph_max + dph / 2.0)
            .map_err(plot_err)?;
        ch.configure_mesh()
            .disable_mesh()
            .x_desc("theta")
            .y_desc("phi")
            .draw()
            .map_err(plot_err)?;
        let ix = |v: f64| xs.binary_search_by(|p| p.total_cmp(&v)).unwrap_or(0);
        let jp = |v: f64| ps.binary_search_by(|p| p.total_cmp(&v)).unwrap_or(0);
        let cells = (0..val.len()).filter_map(|n| {
            let (i, j) = (ix(x[n]), jp(phi[n]));
            if i % sx != 0 || j % sp != 0 {
                return None;
            }
            Some((x[n] / m as f64, phi[n], val[n]))
        });
        ch.draw_series(cells.flat_map(|(th, ph, v)| {
            let c = diverging(v / vmax).filled();
            [1.0, -1.0].into_iter().map(move |sgn| {
                let tc = sgn * th;
                Rectangle::new(
                    [(tc - dth / 2.0, ph - dph / 2.0), (tc + dth / 2.0, ph + dph / 2.0)],
                    c,
                )
            })
        }))
        .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    save(svg, s)
}

/// `h(phi)` from a `phi,h,dh` table.
pub fn profile(csv: &Path, svg: &Path, title: &str) -> CliResult<()> {
    let t = Table::read(csv)?;
    let (phi, h) = (t.floats("phi")?, t.floats("h")?);
    let xr = padded_range(phi.iter().copied());
    let yr = padded_range(h.iter().copied());
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, (480, 360)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut ch = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(32)
            .y_label_area_size(50)
            .build_cartesian_2d(xr, yr)
            .map_err(plot_err)?;
        ch.configure_mesh()
            .x_desc("phi")
            .y_desc("h")
            .draw()
            .map_err(plot_err)?;
        ch.draw_series(LineSeries::new(
            phi.iter().copied().zip(h.iter().copied()),
            palette(0).stroke_width(2),
        ))
        .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    save(svg, s)
}

/// The contact set on the equatorial disk from a
/// `sector,theta_center,half_width` table.
pub fn contact_set(csv: &Path, svg: &Path) -> CliResult<()> {
    let t = Table::read(csv)?;
    let (centers, half) = (t.floats("theta_center")?, t.floats("half_width")?);
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, (420, 420)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut ch = ChartBuilder::on(&root)
            .margin(10)
            .build_cartesian_2d(-1.05..1.05, -1.05..1.05)
            .map_err(plot_err)?;
        let circle = (0..=360).map(|i| {
            let a = i as f64 * PI / 180.0;
            (a.cos(), a.sin())
        });
        ch.draw_series(std::iter::once(PathElement::new(circle.collect::<Vec<_>>(), BLACK)))
            .map_err(plot_err)?;
        let fill = RGBColor(60, 60, 60).filled();
        ch.draw_series(centers.iter().zip(&half).map(|(&c, &w)| {
            let steps = 24;
            let mut pts = vec![(0.0, 0.0)];
            for i in 0..=steps {
                let a = c - w + 2.0 * w * i as f64 / steps as f64;
                pts.push((a.cos(), a.sin()));
            }
            Polygon::new(pts, fill)
        }))
        .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    save(svg, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::fmt;

    #[test]
    fn contact_figure_has_one_polygon_per_sector() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("contact.csv");
        let mut t = Table::new(&["sector", "theta_center", "half_width"]);
        for j in 0..6 {
            t.push(vec![j.to_string(), fmt(j as f64 * PI / 3.0), fmt(0.4 * PI / 3.0)]);
        }
        t.write(&csv).unwrap();
        let svg = dir.path().join("contact.svg");
        contact_set(&csv, &svg).unwrap();
        let s = std::fs::read_to_string(&svg).unwrap();
        assert_eq!(s.matches("<polygon").count(), 6);
    }

    #[test]
    fn figures_regenerate_identically() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("h.csv");
        let mut t = Table::new(&["phi", "h", "dh"]);
        for i in 0..50 {
            let p = i as f64 * 0.03;
            t.push(vec![fmt(p), fmt(p.sin()), fmt(p.cos())]);
        }
        t.write(&csv).unwrap();
        let a = dir.path().join("a.svg");
        let b = dir.path().join("b.svg");
        profile(&csv, &a, "h").unwrap();
        profile(&csv, &b, "h").unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
