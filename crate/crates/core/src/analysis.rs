//! Curves, comparison reports and plot files derived from entropy grids.

use std::fmt::Write as _;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baseline::CurvePoint;
use crate::kv::{fmt_f64, KeyValues};
use crate::landscape::EntropyGrid;
use crate::nn::Task;
use crate::{Error, Result};

/// `S` in y-bin `iy`, linearly interpolated in `x` between column centers.
fn column_interp(grid: &EntropyGrid, x: f64, iy: usize) -> f64 {
    let ax = &grid.spec().x;
    let u = ((x - ax.lo) / ax.width() - 0.5).clamp(0.0, (ax.bins - 1) as f64);
    let i0 = (u.floor() as usize).min(ax.bins - 2);
    let t = u - i0 as f64;
    (1.0 - t) * grid.s(i0, iy) + t * grid.s(i0 + 1, iy)
}

/// y-bins whose centers lie below the y-wall.
fn valid_rows(grid: &EntropyGrid) -> Vec<usize> {
    let sp = grid.spec();
    (0..sp.y.bins).filter(|&iy| sp.y.center(iy) <= sp.y_max).collect()
}

fn check_x(grid: &EntropyGrid, x: f64) -> Result<()> {
    let sp = grid.spec();
    if !sp.x.contains(x) {
        return Err(Error::InvalidConfig(format!("x = {x} outside the grid")));
    }
    if x > sp.x_max {
        return Err(Error::InvalidConfig(format!("x = {x} lies in the wall region")));
    }
    Ok(())
}

/// Entropy-weighted mean of the y-bin centers at `x`, wall rows excluded.
pub fn equilibrium_accuracy(grid: &EntropyGrid, x: f64) -> Result<f64> {
    check_x(grid, x)?;
    let rows = valid_rows(grid);
    if rows.is_empty() {
        return Err(Error::InvalidConfig("every y-bin lies in the wall region".into()));
    }
    let s: Vec<f64> = rows.iter().map(|&iy| column_interp(grid, x, iy)).collect();
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (&iy, &si) in rows.iter().zip(&s) {
        let w = (si - m).exp();
        num += w * grid.spec().y.center(iy);
        den += w;
    }
    Ok(num / den)
}

/// Columns whose centers lie below the x-wall.
fn valid_columns(grid: &EntropyGrid) -> impl Iterator<Item = usize> + '_ {
    let sp = grid.spec();
    (0..sp.x.bins).filter(move |&ix| sp.x.center(ix) <= sp.x_max)
}

fn column_visits(grid: &EntropyGrid, ix: usize) -> u64 {
    (0..grid.shape().1).map(|iy| grid.visits(ix, iy)).sum()
}

/// [`equilibrium_accuracy`] at every valid column center; `count` holds the
/// column's visits.
pub fn equilibrium_curve(grid: &EntropyGrid) -> Result<Vec<CurvePoint>> {
    valid_columns(grid)
        .map(|ix| {
            let x = grid.spec().x.center(ix);
            Ok(CurvePoint {
                x,
                value: equilibrium_accuracy(grid, x)?,
                count: column_visits(grid, ix) as usize,
                stderr: f64::NAN,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntropyPoint {
    pub x: f64,
    pub y: f64,
    /// Number of y-bins sharing the maximum, minus one.
    pub ties: usize,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntropyCurve {
    pub points: Vec<MaxEntropyPoint>,
    /// Columns where more than one y-bin attained the maximum.
    pub tie_columns: usize,
}

/// Argmax of `S` over the valid y-bins of every valid column. Ties go to
/// the higher y for classification and the lower y for regression.
pub fn max_entropy_curve(grid: &EntropyGrid, task: Task) -> MaxEntropyCurve {
    let rows = valid_rows(grid);
    let mut points = Vec::new();
    let mut tie_columns = 0;
    for ix in valid_columns(grid) {
        let Some(m) = rows.iter().map(|&iy| grid.s(ix, iy)).reduce(f64::max) else {
            continue;
        };
        let best: Vec<usize> = rows.iter().copied().filter(|&iy| grid.s(ix, iy) == m).collect();
        let iy = if task.is_classification() { *best.last().unwrap() } else { best[0] };
        if best.len() > 1 {
            tie_columns += 1;
        }
        points.push(MaxEntropyPoint {
            x: grid.spec().x.center(ix),
            y: grid.spec().y.center(iy),
            ties: best.len() - 1,
            visits: column_visits(grid, ix),
        });
    }
    MaxEntropyCurve { points, tie_columns }
}

/// Landscape prediction at `x`: equilibrium accuracy for classification,
/// the max-entropy y of the column holding `x` for regression.
pub fn landscape_metric(grid: &EntropyGrid, x: f64, task: Task) -> Result<f64> {
    check_x(grid, x)?;
    match task {
        Task::Classification { .. } => equilibrium_accuracy(grid, x),
        Task::Regression => {
            let ix = grid.spec().x.index(x).0;
            let rows = valid_rows(grid);
            let m = rows.iter().map(|&iy| grid.s(ix, iy)).fold(f64::NEG_INFINITY, f64::max);
            let iy = rows
                .iter()
                .copied()
                .find(|&iy| grid.s(ix, iy) == m)
                .ok_or_else(|| Error::InvalidConfig("every y-bin lies in the wall region".into()))?;
            Ok(grid.spec().y.center(iy))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageRow {
    pub x: f64,
    pub landscape: f64,
    pub sgd: f64,
    pub sgd_stderr: f64,
    pub count: usize,
    /// `landscape - sgd`, in y units.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageReport {
    pub task: Task,
    pub rows: Vec<AdvantageRow>,
    /// Comparison at the mean final `(x, y)` of the trained runs.
    pub at_final: Option<AdvantageRow>,
}

/// Compares the landscape prediction with an SGD curve bin by bin. SGD
/// points outside the grid's valid x-range are skipped.
pub fn advantage_report(
    grid: &EntropyGrid,
    sgd: &[CurvePoint],
    task: Task,
    final_sgd: Option<(f64, f64)>,
) -> Result<AdvantageReport> {
    let row = |x: f64, y: f64, se: f64, count: usize| -> Result<AdvantageRow> {
        let landscape = landscape_metric(grid, x, task)?;
        Ok(AdvantageRow { x, landscape, sgd: y, sgd_stderr: se, count, gap: landscape - y })
    };
    let sp = grid.spec();
    let rows = sgd
        .iter()
        .filter(|p| sp.x.contains(p.x) && p.x <= sp.x_max)
        .map(|p| row(p.x, p.value, p.stderr, p.count))
        .collect::<Result<Vec<_>>>()?;
    let at_final = match final_sgd {
        Some((x, y)) if sp.x.contains(x) && x <= sp.x_max => Some(row(x, y, f64::NAN, 0)?),
        _ => None,
    };
    Ok(AdvantageReport { task, rows, at_final })
}

impl AdvantageReport {
    /// Flat summary: task, row count, mean gap and the final-point comparison.
    pub fn summary(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("task", if self.task.is_classification() { "classification" } else { "regression" });
        kv.set("rows", self.rows.len());
        if !self.rows.is_empty() {
            let mean = self.rows.iter().map(|r| r.gap).sum::<f64>() / self.rows.len() as f64;
            kv.set("mean_gap", fmt_f64(mean));
        }
        if let Some(f) = &self.at_final {
            kv.set("final_x", fmt_f64(f.x));
            kv.set("final_landscape", fmt_f64(f.landscape));
            kv.set("final_sgd", fmt_f64(f.sgd));
            kv.set("final_gap", fmt_f64(f.gap));
        }
        kv
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,landscape,sgd,sgd_stderr,count,gap\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                fmt_f64(r.x),
                fmt_f64(r.landscape),
                fmt_f64(r.sgd),
                fmt_f64(r.sgd_stderr),
                r.count,
                fmt_f64(r.gap)
            );
        }
        s
    }

    /// Writes `report.txt` and `report.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.summary().write(&dir.join("report.txt"))?;
        let p = dir.join("report.csv");
        std::fs::write(&p, self.to_csv()).map_err(|e| Error::io(&p, e))
    }
}

/// CSV with columns `curve,x,value,count,stderr`.
pub fn curves_csv(curves: &[(&str, &[CurvePoint])]) -> String {
    let mut s = String::from("curve,x,value,count,stderr\n");
    for (name, pts) in curves {
        for p in *pts {
            let _ = writeln!(s, "{name},{},{},{},{}", fmt_f64(p.x), fmt_f64(p.value), p.count, fmt_f64(p.stderr));
        }
    }
    s
}

pub fn export_curves(path: &Path, curves: &[(&str, &[CurvePoint])]) -> Result<()> {
    std::fs::write(path, curves_csv(curves)).map_err(|e| Error::io(path, e))
}

/// Averages the curves of several replicas point by point on their shared
/// x values. `count` sums the inputs; `stderr` is the standard error across
/// replicas.
pub fn merge_curves(curves: &[Vec<CurvePoint>]) -> Vec<CurvePoint> {
    let mut xs: Vec<f64> = curves.iter().flatten().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            let pts: Vec<&CurvePoint> = curves.iter().filter_map(|c| c.iter().find(|p| p.x == x)).collect();
            let n = pts.len() as f64;
            let mean = pts.iter().map(|p| p.value).sum::<f64>() / n;
            let stderr = if pts.len() > 1 {
                (pts.iter().map(|p| (p.value - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                f64::NAN
            };
            CurvePoint { x, value: mean, count: pts.iter().map(|p| p.count).sum(), stderr }
        })
        .collect()
}

/// Bin-wise mean of `S` over grids with identical specs; visits are summed.
pub fn mean_grid(grids: &[EntropyGrid]) -> Result<EntropyGrid> {
    let first = grids.first().ok_or_else(|| Error::InvalidConfig("no grids to average".into()))?;
    if grids.iter().any(|g| g.spec() != first.spec()) {
        return Err(Error::InvalidConfig("grids differ in layout".into()));
    }
    let mut out = EntropyGrid::new(first.spec().clone())?;
    let (nx, ny) = first.shape();
    let n = grids.len() as f64;
    for ix in 0..nx {
        for iy in 0..ny {
            out.set_s(ix, iy, grids.iter().map(|g| g.s(ix, iy)).sum::<f64>() / n);
            out.add_visits(ix, iy, grids.iter().map(|g| g.visits(ix, iy)).sum());
        }
    }
    out.provenance = format!("mean of {} grids", grids.len());
    Ok(out)
}

const STOPS: [(f64, [f64; 3]); 5] = [
    (0.0, [68.0, 1.0, 84.0]),
    (0.25, [59.0, 82.0, 139.0]),
    (0.5, [33.0, 145.0, 140.0]),
    (0.75, [94.0, 201.0, 98.0]),
    (1.0, [253.0, 231.0, 37.0]),
];

/// Piecewise-linear dark-blue to yellow map on `[0, 1]`.
pub fn color(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let k = STOPS.windows(2).position(|w| t <= w[1].0).unwrap_or(STOPS.len() - 2);
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let u = (t - t0) / (t1 - t0);
    let ch = |i: usize| (c0[i] + u * (c1[i] - c0[i])).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

const CELL: usize = 8;
const MARGIN: usize = 40;

/// SVG heatmap of `S` over the valid region. Wall bins are grey, unvisited
/// valid bins carry a white half-transparent overlay.
pub fn heatmap_svg(grid: &EntropyGrid) -> String {
    let sp = grid.spec();
    let (nx, ny) = grid.shape();
    let valid = |ix: usize, iy: usize| sp.x.center(ix) <= sp.x_max && sp.y.center(iy) <= sp.y_max;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for ix in 0..nx {
        for iy in 0..ny {
            if valid(ix, iy) {
                lo = lo.min(grid.s(ix, iy));
                hi = hi.max(grid.s(ix, iy));
            }
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (nx * CELL + 2 * MARGIN, ny * CELL + 2 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let mut overlay = String::new();
    for ix in 0..nx {
        for iy in 0..ny {
            let px = MARGIN + ix * CELL;
            let py = MARGIN + (ny - 1 - iy) * CELL;
            let fill = if valid(ix, iy) { color((grid.s(ix, iy) - lo) / span) } else { "#bbbbbb".to_string() };
            let _ = writeln!(s, r#"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="{fill}"/>"#);
            if valid(ix, iy) && grid.visits(ix, iy) == 0 {
                let _ = writeln!(
                    overlay,
                    r#"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="white" fill-opacity="0.5"/>"#
                );
            }
        }
    }
    let _ = write!(s, "<g id=\"unvisited\">\n{overlay}</g>\n");
    let (bx, by) = (MARGIN + nx * CELL, MARGIN + ny * CELL);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" font-size="10">{:.3}</text>"#, by + 14, sp.x.lo);
    let _ = writeln!(s, r#"<text x="{bx}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, by + 14, sp.x.hi);
    let _ = writeln!(s, r#"<text x="{}" y="{by}" font-size="10" text-anchor="end">{:.3}</text>"#, MARGIN - 4, sp.y.lo);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{:.3}</text>"#, MARGIN - 4, MARGIN + 8, sp.y.hi);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10" text-anchor="middle">ln(train loss)</text>"#, w / 2, h - 6);
    let _ = writeln!(s, r#"<text x="{bx}" y="{}" font-size="10" text-anchor="end">S {:.3} to {:.3}</text>"#, MARGIN - 10, lo, hi);
    s.push_str("</svg>\n");
    s
}

pub fn export_heatmap(grid: &EntropyGrid, path: &Path) -> Result<()> {
    std::fs::write(path, heatmap_svg(grid)).map_err(|e| Error::io(path, e))
}

/// Ranks starting at 1, ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with a two-sided p-value from the
/// t-approximation on `n - 2` degrees of freedom.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} samples", a.len(), b.len())));
    }
    let n = a.len();
    if n < 3 {
        return Err(Error::InvalidConfig("need at least 3 samples".into()));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let m = (n as f64 + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - m) * (y - m);
        saa += (x - m) * (x - m);
        sbb += (y - m) * (y - m);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok((0.0, 1.0));
    }
    let rho = sab / (saa * sbb).sqrt();
    let df = (n - 2) as f64;
    if rho.abs() >= 1.0 {
        return Ok((rho.signum(), 0.0));
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok((rho, 2.0 * dist.sf(t.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{Axis, GridSpec};

    const CLS: Task = Task::Classification { num_classes: 2 };

    fn grid(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> EntropyGrid {
        let mut g = EntropyGrid::new(GridSpec::new(Axis::new(0.0, 1.0, nx), Axis::new(0.0, 1.0, ny))).unwrap();
        for ix in 0..nx {
            for iy in 0..ny {
                let (x, y) = (g.spec().x.center(ix), g.spec().y.center(iy));
                g.set_s(ix, iy, f(x, y));
            }
        }
        g
    }

    #[test]
    fn flat_column_gives_half() {
        let g = grid(4, 4, |_, _| 3.0);
        assert!((equilibrium_accuracy(&g, 0.4).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spike_gives_its_center() {
        let g = grid(4, 4, |_, y| if (y - 0.625).abs() < 1e-9 { 0.0 } else { -1e6 });
        assert!((equilibrium_accuracy(&g, 0.6).unwrap() - 0.625).abs() < 1e-12);
    }

    /// Three valid rows at 1/6, 1/2, 5/6 plus one row above the wall.
    #[test]
    fn weighted_three_bins() {
        let spec = GridSpec::new(Axis::new(0.0, 1.0, 4), Axis::new(0.0, 4.0 / 3.0, 4)).with_walls(f64::INFINITY, 1.0, 3000.0);
        let mut g = EntropyGrid::new(spec).unwrap();
        for ix in 0..4 {
            g.set_s(ix, 2, 3f64.ln());
        }
        let a = equilibrium_accuracy(&g, 0.5).unwrap();
        assert!((a - 0.633_333_333_333_333_3).abs() < 1e-12, "{a}");
        assert!((a - (1.0 / 6.0 + 0.5 + 3.0 * 5.0 / 6.0) / 5.0).abs() < 1e-15);
    }

    #[test]
    fn wall_column_rejected() {
        let spec = GridSpec::new(Axis::new(0.0, 1.0, 4), Axis::new(0.0, 1.0, 4)).with_walls(0.5, f64::INFINITY, 3000.0);
        let g = EntropyGrid::new(spec).unwrap();
        assert!(equilibrium_accuracy(&g, 0.8).is_err());
        assert!(equilibrium_accuracy(&g, 2.0).is_err());
        assert_eq!(max_entropy_curve(&g, CLS).points.len(), 2);
    }

    #[test]
    fn max_entropy_ridge() {
        let g = grid(8, 10, |_, y| -(y - 0.75) * (y - 0.75));
        let c = max_entropy_curve(&g, CLS);
        assert!(c.points.iter().all(|p| p.y == 0.75));
        assert_eq!(c.tie_columns, 0);

        // ridge y*(x) = center of bin ix + 1
        let g = grid(8, 10, |x, y| -(y - (x + 0.125).min(0.95)).abs());
        let c = max_entropy_curve(&g, CLS);
        for (ix, p) in c.points.iter().enumerate() {
            let want = g.spec().y.center(g.spec().y.index((g.spec().x.center(ix) + 0.125).min(0.95)).0);
            assert_eq!(p.y, want);
        }
    }

    #[test]
    fn tie_breaks_by_task() {
        let g = grid(4, 4, |_, y| if y < 0.5 { 1.0 } else { 0.0 });
        let c = max_entropy_curve(&g, CLS);
        assert!(c.points.iter().all(|p| p.y == 0.375 && p.ties == 1));
        assert_eq!(c.tie_columns, 4);
        let r = max_entropy_curve(&g, Task::Regression);
        assert!(r.points.iter().all(|p| p.y == 0.125));
    }

    #[test]
    fn advantage_gaps() {
        let g = grid(4, 4, |_, _| 0.0);
        let sgd: Vec<CurvePoint> = (0..4)
            .map(|i| CurvePoint { x: g.spec().x.center(i), value: 0.5, count: 1, stderr: f64::NAN })
            .collect();
        let r = advantage_report(&g, &sgd, CLS, Some((0.3, 0.5))).unwrap();
        assert!(r.rows.iter().all(|row| row.gap.abs() < 1e-15));
        assert!(r.at_final.unwrap().gap.abs() < 1e-15);

        let delta = 0.125;
        let shifted: Vec<CurvePoint> = sgd.iter().map(|p| CurvePoint { value: 0.5 - delta, ..*p }).collect();
        let r = advantage_report(&g, &shifted, CLS, None).unwrap();
        assert!(r.rows.iter().all(|row| (row.gap - delta).abs() < 1e-15));
        assert_eq!(r.summary().get("rows"), Some("4"));
    }

    #[test]
    fn spearman_cases() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&a, &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap().0, 1.0);
        assert_eq!(spearman(&a, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().0, -1.0);
        // ranks 1 2 3 4 5 vs 2 1 4 3 5: d^2 = 4, rho = 1 - 6*4/120 = 0.8
        let (rho, p) = spearman(&a, &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((rho - 0.8).abs() < 1e-12);
        assert!(p > 0.05 && p < 0.2, "{p}");
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn colors_are_fixed() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(0.5), "#21918c");
        assert_eq!(color(f64::NAN), "#440154");
    }

    #[test]
    fn merged_curves_average() {
        let p = |x: f64, v: f64| CurvePoint { x, value: v, count: 1, stderr: f64::NAN };
        let m = merge_curves(&[vec![p(0.0, 0.6), p(1.0, 0.2)], vec![p(0.0, 0.8)]]);
        assert_eq!(m.len(), 2);
        assert!((m[0].value - 0.7).abs() < 1e-15 && (m[0].stderr - 0.1).abs() < 1e-12);
        assert_eq!(m[1].count, 1);
    }
}
