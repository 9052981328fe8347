use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::harness::experiment::PolicyAggregate;

const SIZE: (u32, u32) = (800, 500);
const PALETTE: [RGBColor; 5] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
];

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo.min(0.0), hi + pad)
}

fn line_chart(path: &Path, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let x_max = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.0))
        .fold(1.0, f64::max);
    let (y_lo, y_hi) = range(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..x_max, y_lo..y_hi)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("subframe")
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn bar_chart(path: &Path, y_label: &str, aggs: &[PolicyAggregate], get: fn(&PolicyAggregate) -> Vec<f64>) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let n_players = aggs.iter().map(|a| get(a).len()).max().unwrap_or(1).max(1);
    let (_, y_hi) = range(aggs.iter().flat_map(get));
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..n_players as f64, 0.0..y_hi.max(1.0))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_desc("player")
        .y_desc(y_label)
        .x_label_formatter(&|x| format!("{}", x.floor() as usize + 1))
        .draw()
        .map_err(plot_err)?;
    let width = 0.8 / aggs.len().max(1) as f64;
    for (i, a) in aggs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let values = get(a);
        chart
            .draw_series(values.iter().enumerate().map(|(d, &v)| {
                let x0 = d as f64 + 0.1 + i as f64 * width;
                Rectangle::new([(x0, 0.0), (x0 + width, v)], color.filled())
            }))
            .map_err(plot_err)?
            .label(a.policy.name())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Regret, throughput and per-player bar charts as SVG files in `dir`.
pub fn write_plots(aggs: &[PolicyAggregate], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let x = |a: &PolicyAggregate| a.subframes.iter().map(|&n| n as f64).collect::<Vec<_>>();

    let def2: Vec<_> = aggs
        .iter()
        .map(|a| (a.policy.name().to_string(), x(a).into_iter().zip(a.regret_def2.iter().map(|m| m.mean)).collect()))
        .collect();
    files.push(PathBuf::from("regret_def2.svg"));
    line_chart(&dir.join("regret_def2.svg"), "regret", &def2)?;

    let def3: Vec<_> = aggs
        .iter()
        .filter_map(|a| {
            let s = a.regret_def3.as_ref()?;
            Some((a.policy.name().to_string(), x(a).into_iter().zip(s.iter().map(|m| m.mean)).collect()))
        })
        .collect();
    if !def3.is_empty() {
        files.push(PathBuf::from("regret_def3.svg"));
        line_chart(&dir.join("regret_def3.svg"), "ranked regret", &def3)?;
    }

    for a in aggs {
        if let Some(adv) = &a.regret_adversarial {
            let name = format!("regret_adv_{}.svg", a.policy.name());
            let s = vec![(a.policy.name().to_string(), x(a).into_iter().zip(adv.iter().map(|m| m.mean)).collect())];
            line_chart(&dir.join(&name), "adversarial regret", &s)?;
            files.push(PathBuf::from(name));
        }
        let name = format!("throughput_{}.svg", a.policy.name());
        let xs = x(a);
        let s = vec![
            ("sum D2D".to_string(), xs.iter().copied().zip(a.sum_tput_d2d.iter().map(|m| m.mean)).collect()),
            ("sum CU".to_string(), xs.iter().copied().zip(a.sum_tput_cu.iter().map(|m| m.mean)).collect()),
            ("r_tgt".to_string(), xs.iter().map(|&n| (n, a.r_tgt)).collect()),
        ];
        line_chart(&dir.join(&name), "bit/s", &s)?;
        files.push(PathBuf::from(name));
    }

    bar_chart(&dir.join("collision.svg"), "collision %", aggs, |a| {
        a.collision_pct.iter().map(|m| m.mean).collect()
    })?;
    bar_chart(&dir.join("fairness.svg"), "fairness %", aggs, |a| {
        a.fairness_pct.iter().map(|m| m.mean).collect()
    })?;
    files.extend([PathBuf::from("collision.svg"), PathBuf::from("fairness.svg")]);
    Ok(files)
}
