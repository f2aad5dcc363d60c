//! One-edge Schrödinger numerics: monodromy, Hill discriminant, η(λ), Dirichlet
//! eigenvalues and the band decomposition of the periodic (Hill) operator.
//!
//! Everything is driven by a fixed-step classical Runge–Kutta integration of
//! −φ″ + q₀φ = λφ over [0,1] for the two canonical initial data (1,0) and (0,1).
//! The same sweep optionally carries the λ-derivative of both solutions, which
//! gives D′(λ) without finite differences. The driver type is [`HillSolver`];
//! the free functions [`monodromy`] and [`discriminant`] are thin wrappers that
//! use the default configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::EdgePotential;

pub const DEFAULT_STEPS: usize = 4096;
pub const MIN_STEPS: usize = 64;

/// Tunables for the one-edge solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillConfig {
    /// RK4 steps over [0,1].
    pub steps: usize,
    /// Bracketing grid spacing in λ for sign-change scans.
    pub scan_step: f64,
    /// Absolute λ-tolerance for bisection and inversion.
    pub root_tol: f64,
    /// η(λ) is undefined when |M₁₂(λ)| falls below this.
    pub dirichlet_guard: f64,
    /// A critical value of D within this distance of ±2 is treated as a band touch.
    pub touch_tol: f64,
}

impl Default for HillConfig {
    fn default() -> Self {
        HillConfig {
            steps: DEFAULT_STEPS,
            scan_step: 0.05,
            root_tol: 1e-10,
            dirichlet_guard: 1e-8,
            touch_tol: 1e-9,
        }
    }
}

impl HillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < MIN_STEPS {
            return Err(Error::Domain(format!(
                "integration needs at least {MIN_STEPS} steps, got {}",
                self.steps
            )));
        }
        for (name, v) in [
            ("scan_step", self.scan_step),
            ("root_tol", self.root_tol),
            ("dirichlet_guard", self.dirichlet_guard),
            ("touch_tol", self.touch_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Transfer matrix of (φ, φ′) across one edge at energy λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodromyMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
    pub lambda: f64,
    pub steps: usize,
}

impl MonodromyMatrix {
    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }
}

/// Monodromy matrix together with its entrywise λ-derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyJet {
    pub value: MonodromyMatrix,
    /// ∂M/∂λ as (m11, m12, m21, m22).
    pub derivative: [f64; 4],
}

impl MonodromyJet {
    pub fn discriminant(&self) -> f64 {
        self.value.trace()
    }

    pub fn discriminant_derivative(&self) -> f64 {
        self.derivative[0] + self.derivative[3]
    }
}

/// A maximal λ-interval on which D is monotone and |D| ≤ 2.
///
/// When the scan range cuts a band, the band is clipped to the range and the
/// clipped end no longer satisfies |D| = 2; `d_lo`/`d_hi` record the values
/// actually attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillBand {
    /// 1-based ordinal within the scanned range.
    pub index: usize,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Sign of D′ on the band.
    pub direction: i8,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl HillBand {
    pub fn contains(&self, lambda: f64, tol: f64) -> bool {
        lambda >= self.lambda_lo - tol && lambda <= self.lambda_hi + tol
    }

    pub fn width(&self) -> f64 {
        self.lambda_hi - self.lambda_lo
    }

    /// Smallest and largest discriminant value on the band.
    pub fn d_range(&self) -> (f64, f64) {
        (self.d_lo.min(self.d_hi), self.d_lo.max(self.d_hi))
    }

    /// True when both ends sit on |D| = 2, i.e. the band was not clipped.
    pub fn is_complete(&self) -> bool {
        let (lo, hi) = self.d_range();
        lo == -2.0 && hi == 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpectrum {
    pub eigenvalues: Vec<f64>,
}

/// Fundamental solutions sampled on a uniform grid of [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSamples {
    pub x: Vec<f64>,
    /// Solution with (y, y′)(0) = (1, 0): values and derivatives.
    pub y1: Vec<(f64, f64)>,
    /// Solution with (y, y′)(0) = (0, 1): values and derivatives.
    pub y2: Vec<(f64, f64)>,
    pub monodromy: MonodromyMatrix,
}

/// Single-edge solver bound to one potential and configuration.
#[derive(Debug, Clone)]
pub struct HillSolver {
    potential: EdgePotential,
    config: HillConfig,
    // q₀ at the half-step nodes j·h/2, j = 0..=2·steps
    q_nodes: Vec<f64>,
}

impl HillSolver {
    pub fn new(potential: EdgePotential) -> Result<Self> {
        Self::with_config(potential, HillConfig::default())
    }

    pub fn with_config(potential: EdgePotential, config: HillConfig) -> Result<Self> {
        config.validate()?;
        if !potential.is_even() {
            return Err(Error::InvalidPotential(format!(
                "potential {potential} fails the evenness check (defect {:e})",
                potential.evenness_defect()
            )));
        }
        let nodes = 2 * config.steps;
        let q_nodes = (0..=nodes)
            .map(|j| potential.value_at(j as f64 / nodes as f64))
            .collect();
        Ok(HillSolver {
            potential,
            config,
            q_nodes,
        })
    }

    pub fn potential(&self) -> &EdgePotential {
        &self.potential
    }

    pub fn config(&self) -> &HillConfig {
        &self.config
    }

    pub fn monodromy(&self, lambda: f64) -> Result<MonodromyMatrix> {
        check_lambda(lambda)?;
        let s = self.sweep::<false>(lambda, None);
        Ok(self.pack(lambda, &s))
    }

    pub fn monodromy_jet(&self, lambda: f64) -> Result<MonodromyJet> {
        check_lambda(lambda)?;
        let s = self.sweep::<true>(lambda, None);
        Ok(MonodromyJet {
            value: self.pack(lambda, &s),
            derivative: [s[4], s[6], s[5], s[7]],
        })
    }

    /// D(λ) = tr M(λ).
    pub fn discriminant(&self, lambda: f64) -> Result<f64> {
        self.monodromy(lambda).map(|m| m.trace())
    }

    /// D′(λ) from the variational equations.
    pub fn discriminant_derivative(&self, lambda: f64) -> Result<f64> {
        self.monodromy_jet(lambda)
            .map(|j| j.discriminant_derivative())
    }

    /// η(λ) = φ′_{λ,1}(1)/φ′_{λ,1}(0), where φ_{λ,1} = y₂/M₁₂ is the solution
    /// vanishing at 0 and equal to 1 at 1. The ratio reduces to M₂₂.
    pub fn eta(&self, lambda: f64) -> Result<f64> {
        let m = self.monodromy(lambda)?;
        if m.m12.abs() < self.config.dirichlet_guard {
            return Err(Error::Pole { lambda, m12: m.m12 });
        }
        let dphi1_at_0 = 1.0 / m.m12;
        let dphi1_at_1 = m.m22 / m.m12;
        Ok(dphi1_at_1 / dphi1_at_0)
    }

    /// Zeros of λ ↦ M₁₂(λ) in `[lo, hi]`.
    pub fn dirichlet_eigenvalues(&self, lo: f64, hi: f64) -> Result<DirichletSpectrum> {
        check_range(lo, hi)?;
        let mut eigenvalues = Vec::new();
        if lo >= hi {
            return Ok(DirichletSpectrum { eigenvalues });
        }
        let m12 = |l: f64| self.monodromy(l).map(|m| m.m12);
        let grid = scan_grid(lo, hi, self.config.scan_step);
        let mut prev = (grid[0], m12(grid[0])?);
        if prev.1 == 0.0 {
            eigenvalues.push(prev.0);
        }
        for &l in &grid[1..] {
            let cur = (l, m12(l)?);
            if cur.1 == 0.0 {
                eigenvalues.push(cur.0);
            } else if prev.1 != 0.0 && prev.1.signum() != cur.1.signum() {
                eigenvalues.push(bisect(&m12, prev.0, cur.0, prev.1, self.config.root_tol)?);
            }
            prev = cur;
        }
        Ok(DirichletSpectrum { eigenvalues })
    }

    /// Bands of the Hill operator inside `[lo, hi]`.
    ///
    /// The range is split at the critical points of D (zeros of D′ bracketed on
    /// the scan grid). On each monotone piece the band is the part where
    /// |D| ≤ 2, with interior edges found by bisection on D ∓ 2. Critical values
    /// within `touch_tol` of ±2 count as touches, so the free operator yields
    /// bands that share their endpoints instead of hairline gaps.
    pub fn hill_bands(&self, lo: f64, hi: f64) -> Result<Vec<HillBand>> {
        check_range(lo, hi)?;
        if lo >= hi {
            return Ok(Vec::new());
        }
        let grid = scan_grid(lo, hi, self.config.scan_step);
        let jets = grid
            .iter()
            .map(|&l| self.monodromy_jet(l))
            .collect::<Result<Vec<_>>>()?;

        // breakpoints: (λ, D(λ), is_critical)
        let mut breaks = vec![(lo, jets[0].discriminant(), false)];
        let dprime = |l: f64| self.discriminant_derivative(l);
        for w in 0..grid.len() - 1 {
            let (a, b) = (grid[w], grid[w + 1]);
            let (ga, gb) = (
                jets[w].discriminant_derivative(),
                jets[w + 1].discriminant_derivative(),
            );
            if ga != 0.0 && gb != 0.0 && ga.signum() != gb.signum() {
                let c = bisect(&dprime, a, b, ga, self.config.root_tol)?;
                breaks.push((c, self.discriminant(c)?, true));
            } else if gb == 0.0 && w + 1 < grid.len() - 1 {
                breaks.push((b, jets[w + 1].discriminant(), true));
            }
        }
        breaks.push((hi, jets[grid.len() - 1].discriminant(), false));

        let mut bands = Vec::new();
        for pair in breaks.windows(2) {
            let (a, da, ca) = pair[0];
            let (b, db, cb) = pair[1];
            if b <= a {
                continue;
            }
            let da = self.snap(da, ca);
            let db = self.snap(db, cb);
            if let Some(band) = self.band_on_piece(a, b, da, db)? {
                bands.push(HillBand {
                    index: bands.len() + 1,
                    ..band
                });
            }
        }
        Ok(bands)
    }

    /// The unique λ in `band` with D(λ) = `target`.
    pub fn invert_discriminant(&self, band: &HillBand, target: f64) -> Result<f64> {
        match self.prepare_target(band, target)? {
            Target::Endpoint(l) => Ok(l),
            Target::Interior(t) => {
                self.solve_monotone(band.lambda_lo, band.lambda_hi, band.d_lo, t, None)
            }
        }
    }

    /// Tabulates D and D′ at `nodes` points of `band` so that repeated
    /// inversions start Newton from an accurate guess.
    pub fn band_inverse(&self, band: &HillBand, nodes: usize) -> Result<BandInverse<'_>> {
        let nodes = nodes.max(2);
        let mut table = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let l = if k == nodes - 1 {
                band.lambda_hi
            } else {
                band.lambda_lo + band.width() * k as f64 / (nodes - 1) as f64
            };
            let jet = self.monodromy_jet(l)?;
            table.push((l, jet.discriminant(), jet.discriminant_derivative()));
        }
        table[0].1 = band.d_lo;
        table[nodes - 1].1 = band.d_hi;
        Ok(BandInverse {
            solver: self,
            band: *band,
            table,
        })
    }

    fn prepare_target(&self, band: &HillBand, target: f64) -> Result<Target> {
        if !(-2.0..=2.0).contains(&target) {
            return Err(Error::Domain(format!(
                "inversion target {target} outside [-2, 2]"
            )));
        }
        let (d_min, d_max) = band.d_range();
        let slack = self.config.touch_tol;
        if target < d_min - slack || target > d_max + slack {
            return Err(Error::OutOfBand {
                band: band.index,
                target,
                d_min,
                d_max,
            });
        }
        let t = target.clamp(d_min, d_max);
        Ok(if t == band.d_lo {
            Target::Endpoint(band.lambda_lo)
        } else if t == band.d_hi {
            Target::Endpoint(band.lambda_hi)
        } else {
            Target::Interior(t)
        })
    }

    /// Safeguarded Newton on D(λ) − target inside a bracket where D is monotone.
    pub(crate) fn solve_monotone(
        &self,
        lo: f64,
        hi: f64,
        d_lo: f64,
        target: f64,
        start: Option<f64>,
    ) -> Result<f64> {
        let tol = self.config.root_tol;
        let (mut a, mut b) = (lo, hi);
        let sign_a = (d_lo - target).signum();
        let mut x = start.filter(|x| *x > a && *x < b).unwrap_or(0.5 * (a + b));
        for _ in 0..200 {
            let jet = self.monodromy_jet(x)?;
            let g = jet.discriminant() - target;
            if g == 0.0 {
                return Ok(x);
            }
            if g.signum() == sign_a {
                a = x;
            } else {
                b = x;
            }
            let slope = jet.discriminant_derivative();
            let newton = x - g / slope;
            let next = if slope != 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            let step = (next - x).abs();
            x = next;
            if step <= tol * 1e-2 || b - a <= tol {
                return Ok(x);
            }
        }
        Err(Error::Convergence(format!(
            "discriminant inversion for target {target} on [{lo}, {hi}]"
        )))
    }

    /// Integrates both fundamental solutions and samples them at `samples`
    /// uniformly spaced points (endpoints included). `steps` must be a
    /// multiple of `samples - 1`.
    pub fn fundamental_solutions(&self, lambda: f64, samples: usize) -> Result<FundamentalSamples> {
        check_lambda(lambda)?;
        if samples < 2 || !self.config.steps.is_multiple_of(samples - 1) {
            return Err(Error::Domain(format!(
                "sample count {samples} must be >= 2 and divide the {} integration steps into equal parts",
                self.config.steps
            )));
        }
        let stride = self.config.steps / (samples - 1);
        let mut record = Vec::with_capacity(samples);
        let s = self.sweep::<false>(lambda, Some((stride, &mut record)));
        let x = (0..samples)
            .map(|k| k as f64 / (samples - 1) as f64)
            .collect();
        Ok(FundamentalSamples {
            x,
            y1: record.iter().map(|r| (r[0], r[1])).collect(),
            y2: record.iter().map(|r| (r[2], r[3])).collect(),
            monodromy: self.pack(lambda, &s),
        })
    }

    fn snap(&self, d: f64, critical: bool) -> f64 {
        if critical && (d.abs() - 2.0).abs() <= self.config.touch_tol {
            2.0 * d.signum()
        } else {
            d
        }
    }

    fn band_on_piece(&self, a: f64, b: f64, da: f64, db: f64) -> Result<Option<HillBand>> {
        let direction: i8 = if db >= da { 1 } else { -1 };
        let (dmin, dmax) = (da.min(db), da.max(db));
        if dmax < -2.0 || dmin > 2.0 {
            return Ok(None);
        }
        let d = |l: f64| self.discriminant(l);
        let cross = |level: f64| -> Result<f64> {
            let g = |l: f64| d(l).map(|v| v - level);
            bisect(&g, a, b, da - level, self.config.root_tol)
        };
        // lower end of the band in λ
        let (lambda_lo, d_lo) = if da.abs() <= 2.0 {
            (a, da)
        } else {
            let level = da.signum() * 2.0;
            (cross(level)?, level)
        };
        let (lambda_hi, d_hi) = if db.abs() <= 2.0 {
            (b, db)
        } else {
            let level = db.signum() * 2.0;
            (cross(level)?, level)
        };
        if lambda_hi <= lambda_lo {
            return Ok(None);
        }
        Ok(Some(HillBand {
            index: 0,
            lambda_lo,
            lambda_hi,
            direction,
            d_lo,
            d_hi,
        }))
    }

    fn pack(&self, lambda: f64, s: &[f64; 8]) -> MonodromyMatrix {
        MonodromyMatrix {
            m11: s[0],
            m21: s[1],
            m12: s[2],
            m22: s[3],
            lambda,
            steps: self.config.steps,
        }
    }

    /// RK4 sweep over [0,1]. State layout: (y1, y1′, y2, y2′) and, when
    /// `JET` is set, their λ-derivatives in slots 4..8.
    fn sweep<const JET: bool>(
        &self,
        lambda: f64,
        mut record: Option<(usize, &mut Vec<[f64; 4]>)>,
    ) -> [f64; 8] {
        let n = self.config.steps;
        let h = 1.0 / n as f64;
        let mut s = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let rhs = |w: f64, s: &[f64; 8]| -> [f64; 8] {
            let mut d = [s[1], w * s[0], s[3], w * s[2], 0.0, 0.0, 0.0, 0.0];
            if JET {
                d[4] = s[5];
                d[5] = w * s[4] - s[0];
                d[6] = s[7];
                d[7] = w * s[6] - s[2];
            }
            d
        };
        let axpy = |s: &[f64; 8], k: &[f64; 8], c: f64| -> [f64; 8] {
            let mut out = *s;
            let len = if JET { 8 } else { 4 };
            for i in 0..len {
                out[i] += c * k[i];
            }
            out
        };
        if let Some((_, rec)) = record.as_mut() {
            rec.push([s[0], s[1], s[2], s[3]]);
        }
        for i in 0..n {
            let w0 = self.q_nodes[2 * i] - lambda;
            let wm = self.q_nodes[2 * i + 1] - lambda;
            let w1 = self.q_nodes[2 * i + 2] - lambda;
            let k1 = rhs(w0, &s);
            let k2 = rhs(wm, &axpy(&s, &k1, 0.5 * h));
            let k3 = rhs(wm, &axpy(&s, &k2, 0.5 * h));
            let k4 = rhs(w1, &axpy(&s, &k3, h));
            let len = if JET { 8 } else { 4 };
            for j in 0..len {
                s[j] += h / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
            }
            if let Some((stride, rec)) = record.as_mut() {
                if (i + 1) % *stride == 0 {
                    rec.push([s[0], s[1], s[2], s[3]]);
                }
            }
        }
        s
    }
}

enum Target {
    Endpoint(f64),
    Interior(f64),
}

/// Tabulated inverse of D on one band; see [`HillSolver::band_inverse`].
pub struct BandInverse<'a> {
    solver: &'a HillSolver,
    band: HillBand,
    // (λ, D, D′) at the table nodes
    table: Vec<(f64, f64, f64)>,
}

impl BandInverse<'_> {
    pub fn band(&self) -> &HillBand {
        &self.band
    }

    /// Same contract as [`HillSolver::invert_discriminant`].
    pub fn invert(&self, target: f64) -> Result<f64> {
        let t = match self.solver.prepare_target(&self.band, target)? {
            Target::Endpoint(l) => return Ok(l),
            Target::Interior(t) => t,
        };
        // position along the band measured so that it increases with λ
        let key = |d: f64| if self.band.direction >= 0 { d } else { -d };
        let k = self
            .table
            .partition_point(|node| key(node.1) <= key(t))
            .clamp(1, self.table.len() - 1);
        let (l0, d0, s0) = self.table[k - 1];
        let (l1, d1, s1) = self.table[k];
        if d0 == t {
            return Ok(l0);
        }
        let guess = hermite_inverse(l0, d0, s0, l1, d1, s1, t);
        self.solver.solve_monotone(l0, l1, d0, t, Some(guess))
    }
}

/// Solves the cubic Hermite interpolant of D on [l0, l1] for `target`.
fn hermite_inverse(l0: f64, d0: f64, s0: f64, l1: f64, d1: f64, s1: f64, target: f64) -> f64 {
    let h = l1 - l0;
    let p = |u: f64| {
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * d0
            + (u3 - 2.0 * u2 + u) * h * s0
            + (-2.0 * u3 + 3.0 * u2) * d1
            + (u3 - u2) * h * s1
    };
    let up = d1 >= d0;
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..48 {
        let m = 0.5 * (a + b);
        if (p(m) < target) == up {
            a = m;
        } else {
            b = m;
        }
    }
    l0 + 0.5 * (a + b) * h
}

/// M(λ) for potential `p` at the given resolution.
pub fn monodromy(lambda: f64, p: &EdgePotential, steps: usize) -> Result<MonodromyMatrix> {
    let config = HillConfig {
        steps,
        ..HillConfig::default()
    };
    HillSolver::with_config(p.clone(), config)?.monodromy(lambda)
}

/// D(λ) at the default resolution.
pub fn discriminant(lambda: f64, p: &EdgePotential) -> Result<f64> {
    HillSolver::new(p.clone())?.discriminant(lambda)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("λ must be finite, got {lambda}")))
    }
}

fn check_range(lo: f64, hi: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "λ-range [{lo}, {hi}] must be finite"
        )))
    }
}

/// lo, lo+step, ..., with hi always included as the last node.
fn scan_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let cells = ((hi - lo) / step).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..cells).map(|k| lo + k as f64 * step).collect();
    grid.push(hi);
    grid
}

/// Bisection on a bracket with f(a) having sign `fa`.
fn bisect(
    f: &impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    fa: f64,
    tol: f64,
) -> Result<f64> {
    let sa = fa.signum();
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}
