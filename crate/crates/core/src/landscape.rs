//! Two-dimensional entropy store `S(x, y)` over collective variables.
//!
//! `x` is `ln(train loss)`; `y` is a test metric. Values live at bin centers.
//! The initial landscape carries quadratic walls
//! `c (x - x_max)^2 H(x - x_max) + c (y - y_max)^2 H(y - y_max)` that keep
//! the samplers inside `x <= x_max, y <= y_max`.
//!
//! # File format
//!
//! ```text
//! format=entropy-grid-v1
//! x_lo=..  x_hi=..  nx=..  y_lo=..  y_hi=..  ny=..
//! x_max=..  y_max=..  wall_constant=..  sigma=..  cutoff=..
//! clamp_events=..  provenance=..
//! [entropy]
//! nx lines of ny space-separated values (row = x bin)
//! [visits]
//! nx lines of ny space-separated counts
//! ```
//!
//! Floats use shortest round-trip decimal, so save/load is lossless.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::kv::{fmt_f64, KeyValues};
use crate::{Error, Result};

pub const DEFAULT_WALL_CONSTANT: f64 = 3000.0;
const FORMAT: &str = "entropy-grid-v1";

/// Uniform binning of one collective variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self { lo, hi, bins }
    }

    /// Axis covering `[lo, hi]` with bins no wider than `width`.
    pub fn with_width(lo: f64, hi: f64, width: f64) -> Self {
        let bins = ((hi - lo) / width).ceil().max(1.0) as usize;
        Self { lo, hi, bins }
    }

    /// Accuracy axis for `n_test` samples: one bin centered on each
    /// achievable value `k / n_test`.
    pub fn accuracy(n_test: usize) -> Self {
        let half = 0.5 / n_test as f64;
        Self {
            lo: -half,
            hi: 1.0 + half,
            bins: n_test + 1,
        }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Bin holding `v`, clamped to the axis; the flag reports clamping.
    #[inline]
    pub fn index(&self, v: f64) -> (usize, bool) {
        let u = ((v - self.lo) / self.width()).floor();
        if !(u >= 0.0) {
            (0, !self.contains(v))
        } else if u >= self.bins as f64 {
            (self.bins - 1, v > self.hi)
        } else {
            (u as usize, false)
        }
    }

    /// Fractional position between bin centers, clamped to `[0, bins-1]`.
    #[inline]
    fn node_coord(&self, v: f64) -> f64 {
        let u = (v - self.lo) / self.width() - 0.5;
        if u.is_nan() {
            return 0.0;
        }
        u.clamp(0.0, (self.bins - 1) as f64)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidConfig(format!("{name} range must be finite and increasing")));
        }
        if self.bins < 4 {
            return Err(Error::InvalidConfig(format!("{name} axis needs at least 4 bins")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub x: Axis,
    pub y: Axis,
    /// Wall positions; `f64::INFINITY` disables a wall.
    pub x_max: f64,
    pub y_max: f64,
    pub wall_constant: f64,
    /// Gaussian kernel width in CV units (both axes).
    pub sigma: f64,
    /// Per-axis truncation distance of the kernel.
    pub cutoff: f64,
}

impl GridSpec {
    /// Grid without walls; kernel width two bins of the narrower axis.
    pub fn new(x: Axis, y: Axis) -> Self {
        let sigma = 2.0 * x.width().min(y.width());
        Self {
            x,
            y,
            x_max: f64::INFINITY,
            y_max: f64::INFINITY,
            wall_constant: DEFAULT_WALL_CONSTANT,
            sigma,
            cutoff: 4.0 * sigma,
        }
    }

    /// Grid whose bins are `sigma / 2` wide on both axes.
    pub fn for_kernel(x_range: (f64, f64), y_range: (f64, f64), sigma: f64, cutoff: f64) -> Self {
        let w = sigma / 2.0;
        Self {
            sigma,
            cutoff,
            ..Self::new(
                Axis::with_width(x_range.0, x_range.1, w),
                Axis::with_width(y_range.0, y_range.1, w),
            )
        }
    }

    pub fn with_walls(mut self, x_max: f64, y_max: f64, wall_constant: f64) -> Self {
        self.x_max = x_max;
        self.y_max = y_max;
        self.wall_constant = wall_constant;
        self
    }

    pub fn with_kernel(mut self, sigma: f64, cutoff: f64) -> Self {
        self.sigma = sigma;
        self.cutoff = cutoff;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate("x")?;
        self.y.validate("y")?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig("sigma must be positive".into()));
        }
        if !(self.cutoff >= self.sigma) {
            return Err(Error::InvalidConfig("cutoff must be >= sigma".into()));
        }
        if !(self.wall_constant >= 0.0) {
            return Err(Error::InvalidConfig("wall constant must be >= 0".into()));
        }
        if self.x_max.is_nan() || self.y_max.is_nan() {
            return Err(Error::InvalidConfig("wall position is NaN".into()));
        }
        Ok(())
    }

    /// Initial entropy at `(x, y)`.
    pub fn wall(&self, x: f64, y: f64) -> f64 {
        let term = |v: f64, m: f64| {
            if v >= m {
                self.wall_constant * (v - m) * (v - m)
            } else {
                0.0
            }
        };
        term(x, self.x_max) + term(y, self.y_max)
    }

    pub fn is_valid(&self, x: f64, y: f64) -> bool {
        x <= self.x_max && y <= self.y_max
    }
}

/// Binned entropy estimate with visit counts.
#[derive(Debug)]
pub struct EntropyGrid {
    spec: GridSpec,
    s: Vec<f64>,
    visits: Vec<u64>,
    clamp_events: AtomicU64,
    pub provenance: String,
}

impl Clone for EntropyGrid {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            s: self.s.clone(),
            visits: self.visits.clone(),
            clamp_events: AtomicU64::new(self.clamp_events()),
            provenance: self.provenance.clone(),
        }
    }
}

impl PartialEq for EntropyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.s == other.s
            && self.visits == other.visits
            && self.clamp_events() == other.clamp_events()
            && self.provenance == other.provenance
    }
}

impl EntropyGrid {
    /// Grid holding only the initial walls.
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let (nx, ny) = (spec.x.bins, spec.y.bins);
        let mut s = vec![0.0; nx * ny];
        for ix in 0..nx {
            for iy in 0..ny {
                s[ix * ny + iy] = spec.wall(spec.x.center(ix), spec.y.center(iy));
            }
        }
        Ok(Self {
            spec,
            s,
            visits: vec![0; nx * ny],
            clamp_events: AtomicU64::new(0),
            provenance: String::new(),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.spec.x.bins, self.spec.y.bins)
    }

    #[inline]
    fn idx(&self, ix: usize, iy: usize) -> usize {
        ix * self.spec.y.bins + iy
    }

    pub fn s(&self, ix: usize, iy: usize) -> f64 {
        self.s[self.idx(ix, iy)]
    }

    pub fn set_s(&mut self, ix: usize, iy: usize, value: f64) {
        let i = self.idx(ix, iy);
        self.s[i] = value;
    }

    pub fn visits(&self, ix: usize, iy: usize) -> u64 {
        self.visits[self.idx(ix, iy)]
    }

    pub fn add_visits(&mut self, ix: usize, iy: usize, n: u64) {
        let i = self.idx(ix, iy);
        self.visits[i] += n;
    }

    pub fn entropy_values(&self) -> &[f64] {
        &self.s
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    pub fn total_entropy(&self) -> f64 {
        self.s.iter().sum()
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events.load(Ordering::Relaxed)
    }

    fn note_clamp(&self) {
        self.clamp_events.fetch_add(1, Ordering::Relaxed);
    }

    /// Bin center lies in `x <= x_max, y <= y_max`.
    pub fn is_valid_bin(&self, ix: usize, iy: usize) -> bool {
        self.spec
            .is_valid(self.spec.x.center(ix), self.spec.y.center(iy))
    }

    /// Bin holding `(x, y)`, clamped to the grid with the clamp counted.
    pub fn bin_of(&self, x: f64, y: f64) -> (usize, usize) {
        let (ix, cx) = self.spec.x.index(x);
        let (iy, cy) = self.spec.y.index(y);
        if cx || cy {
            self.note_clamp();
        }
        (ix, iy)
    }

    /// Bin holding `(x, y)`, clamped to the grid without counting.
    pub fn bin_index(&self, x: f64, y: f64) -> (usize, usize) {
        (self.spec.x.index(x).0, self.spec.y.index(y).0)
    }

    /// Adds `ln_f` to the bin holding `(x, y)` and counts the visit.
    pub fn deposit_point(&mut self, x: f64, y: f64, ln_f: f64) {
        debug_assert!(ln_f > 0.0);
        let (ix, iy) = self.bin_of(x, y);
        let i = self.idx(ix, iy);
        self.s[i] += ln_f;
        self.visits[i] += 1;
    }

    /// Clamps a kernel center into the grid range, counting the clamp.
    fn clamp_center(&self, x: f64, y: f64) -> (f64, f64) {
        let (xs, ys) = (&self.spec.x, &self.spec.y);
        if !xs.contains(x) || !ys.contains(y) {
            self.note_clamp();
        }
        let cx = if x.is_nan() { xs.lo } else { x.clamp(xs.lo, xs.hi) };
        let cy = if y.is_nan() { ys.lo } else { y.clamp(ys.lo, ys.hi) };
        (cx, cy)
    }

    fn kernel_range(axis: &Axis, c: f64, cutoff: f64) -> std::ops::RangeInclusive<usize> {
        let w = axis.width();
        let lo = ((c - cutoff - axis.lo) / w - 0.5).ceil().max(0.0) as usize;
        let hi = ((c + cutoff - axis.lo) / w - 0.5).floor();
        let hi = if hi < 0.0 { 0 } else { (hi as usize).min(axis.bins - 1) };
        lo.saturating_sub(1)..=(hi + 1).min(axis.bins - 1)
    }

    fn for_each_kernel_bin(&self, x: f64, y: f64, mut f: impl FnMut(usize, f64)) {
        let sp = &self.spec;
        let two_s2 = 2.0 * sp.sigma * sp.sigma;
        for ix in Self::kernel_range(&sp.x, x, sp.cutoff) {
            let dx = sp.x.center(ix) - x;
            if dx.abs() > sp.cutoff {
                continue;
            }
            for iy in Self::kernel_range(&sp.y, y, sp.cutoff) {
                let dy = sp.y.center(iy) - y;
                if dy.abs() > sp.cutoff {
                    continue;
                }
                f(self.idx(ix, iy), (-(dx * dx + dy * dy) / two_s2).exp());
            }
        }
    }

    /// Sum of the truncated unit kernel over bin centers, for a center at
    /// `(x, y)` (clamped like [`deposit_gaussian`](Self::deposit_gaussian)).
    pub fn kernel_mass(&self, x: f64, y: f64) -> f64 {
        let sp = &self.spec;
        let cx = x.clamp(sp.x.lo, sp.x.hi);
        let cy = y.clamp(sp.y.lo, sp.y.hi);
        let mut m = 0.0;
        self.for_each_kernel_bin(cx, cy, |_, k| m += k);
        m
    }

    /// Adds `amplitude * exp(-d^2 / 2 sigma^2)` to every bin within the
    /// cutoff of `(x, y)` on both axes. Returns the total mass added.
    pub fn deposit_gaussian(&mut self, x: f64, y: f64, amplitude: f64) -> f64 {
        debug_assert!(amplitude >= 0.0);
        let (cx, cy) = self.clamp_center(x, y);
        let mut updates = Vec::new();
        self.for_each_kernel_bin(cx, cy, |i, k| updates.push((i, k)));
        let mut mass = 0.0;
        for (i, k) in updates {
            self.s[i] += amplitude * k;
            mass += amplitude * k;
        }
        let (ix, iy) = (self.spec.x.index(cx).0, self.spec.y.index(cy).0);
        let i = self.idx(ix, iy);
        self.visits[i] += 1;
        mass
    }

    fn nodes(&self, x: f64, y: f64) -> (usize, usize, f64, f64) {
        let (sx, sy) = (&self.spec.x, &self.spec.y);
        if !sx.contains(x) || !sy.contains(y) {
            self.note_clamp();
        }
        let u = sx.node_coord(x);
        let v = sy.node_coord(y);
        let i0 = (u.floor() as usize).min(sx.bins - 2);
        let j0 = (v.floor() as usize).min(sy.bins - 2);
        (i0, j0, u - i0 as f64, v - j0 as f64)
    }

    fn bilinear(&self, i0: usize, j0: usize, t: f64, w: f64, f: impl Fn(usize, usize) -> f64) -> f64 {
        let f00 = f(i0, j0);
        let f10 = f(i0 + 1, j0);
        let f01 = f(i0, j0 + 1);
        let f11 = f(i0 + 1, j0 + 1);
        (1.0 - t) * ((1.0 - w) * f00 + w * f01) + t * ((1.0 - w) * f10 + w * f11)
    }

    /// Bilinear interpolation of `S` between bin centers.
    pub fn lookup(&self, x: f64, y: f64) -> f64 {
        let (i0, j0, t, w) = self.nodes(x, y);
        self.bilinear(i0, j0, t, w, |i, j| self.s(i, j))
    }

    fn node_grad_x(&self, i: usize, j: usize) -> f64 {
        let n = self.spec.x.bins;
        let h = self.spec.x.width();
        if i == 0 {
            (self.s(1, j) - self.s(0, j)) / h
        } else if i == n - 1 {
            (self.s(n - 1, j) - self.s(n - 2, j)) / h
        } else {
            (self.s(i + 1, j) - self.s(i - 1, j)) / (2.0 * h)
        }
    }

    fn node_grad_y(&self, i: usize, j: usize) -> f64 {
        let n = self.spec.y.bins;
        let h = self.spec.y.width();
        if j == 0 {
            (self.s(i, 1) - self.s(i, 0)) / h
        } else if j == n - 1 {
            (self.s(i, n - 1) - self.s(i, n - 2)) / h
        } else {
            (self.s(i, j + 1) - self.s(i, j - 1)) / (2.0 * h)
        }
    }

    /// `(dS/dx, dS/dy)`: finite differences at bin centers (one-sided at the
    /// edges), interpolated bilinearly.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let (i0, j0, t, w) = self.nodes(x, y);
        (
            self.bilinear(i0, j0, t, w, |i, j| self.node_grad_x(i, j)),
            self.bilinear(i0, j0, t, w, |i, j| self.node_grad_y(i, j)),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let sp = &self.spec;
        let mut kv = KeyValues::new();
        kv.set("format", FORMAT);
        kv.set("x_lo", fmt_f64(sp.x.lo));
        kv.set("x_hi", fmt_f64(sp.x.hi));
        kv.set("nx", sp.x.bins);
        kv.set("y_lo", fmt_f64(sp.y.lo));
        kv.set("y_hi", fmt_f64(sp.y.hi));
        kv.set("ny", sp.y.bins);
        kv.set("x_max", fmt_f64(sp.x_max));
        kv.set("y_max", fmt_f64(sp.y_max));
        kv.set("wall_constant", fmt_f64(sp.wall_constant));
        kv.set("sigma", fmt_f64(sp.sigma));
        kv.set("cutoff", fmt_f64(sp.cutoff));
        kv.set("clamp_events", self.clamp_events());
        kv.set("provenance", self.provenance.replace('\n', " "));
        let mut out = kv.to_text();
        let ny = sp.y.bins;
        out.push_str("[entropy]\n");
        for row in self.s.chunks(ny) {
            let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out.push_str("[visits]\n");
        for row in self.visits.chunks(ny) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(origin, m.to_string());
        let (header, rest) = text
            .split_once("[entropy]\n")
            .ok_or_else(|| bad("missing [entropy] section"))?;
        let (entropy, visits) = rest
            .split_once("[visits]\n")
            .ok_or_else(|| bad("missing [visits] section"))?;
        let kv = KeyValues::parse(header, origin)?;
        if kv.get("format") != Some(FORMAT) {
            return Err(bad("unsupported grid format"));
        }
        let num = |k: &str| -> Result<f64> { kv.parse_required(k) };
        let spec = GridSpec {
            x: Axis::new(num("x_lo")?, num("x_hi")?, kv.parse_required("nx")?),
            y: Axis::new(num("y_lo")?, num("y_hi")?, kv.parse_required("ny")?),
            x_max: num("x_max")?,
            y_max: num("y_max")?,
            wall_constant: num("wall_constant")?,
            sigma: num("sigma")?,
            cutoff: num("cutoff")?,
        };
        spec.validate()?;
        let n = spec.x.bins * spec.y.bins;
        let s: Vec<f64> = entropy
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad("bad entropy value")))
            .collect::<Result<_>>()?;
        let v: Vec<u64> = visits
            .split_whitespace()
            .map(|t| t.parse::<u64>().map_err(|_| bad("bad visit count")))
            .collect::<Result<_>>()?;
        if s.len() != n || v.len() != n {
            return Err(bad("grid body does not match nx * ny"));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(bad("non-finite entropy"));
        }
        Ok(Self {
            spec,
            s,
            visits: v,
            clamp_events: AtomicU64::new(kv.parse_required("clamp_events")?),
            provenance: kv.get("provenance").unwrap_or_default().to_string(),
        })
    }
}
