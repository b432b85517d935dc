use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::winding::winding_number;
use crate::model::{band_energies, momentum_to_beta, Band, BandLoop, Params};
use crate::scalar::Real;

/// Target for `|E(k_a) − E(k_b)|` after refinement.
pub const REFINE_TOLERANCE: f64 = 1e-9;

/// Crossings at a smaller angle than this are flagged as tangential.
pub const TANGENTIAL_ANGLE_DEG: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntersectionPoint<T> {
    pub mu: T,
    pub band: Band,
    pub energy: Complex<T>,
    pub k_pair: (T, T),
    pub beta_pair: (Complex<T>, Complex<T>),
    /// Both adjoining sub-loops have nonzero winding.
    pub qualifies_as_obc: bool,
    pub tangential: bool,
    /// Winding numbers sampled inside the two sub-loops meeting at the crossing.
    pub sector_windings: (i32, i32),
    /// `|E(k_a) − E(k_b)|` after refinement.
    pub gap: T,
}

#[derive(Clone, Copy)]
struct Segment<T> {
    a: Complex<T>,
    b: Complex<T>,
    min_x: T,
    max_x: T,
    min_y: T,
    max_y: T,
}

impl<T: Real> Segment<T> {
    fn new(a: Complex<T>, b: Complex<T>) -> Self {
        Self {
            a,
            b,
            min_x: a.re.min(b.re),
            max_x: a.re.max(b.re),
            min_y: a.im.min(b.im),
            max_y: a.im.max(b.im),
        }
    }
}

#[inline]
fn cross<T: Real>(u: Complex<T>, v: Complex<T>) -> T {
    u.re * v.im - u.im * v.re
}

/// Parameters `(s, t)` with `a₀ + s(a₁−a₀) = b₀ + t(b₁−b₀)`, if the lines are not parallel.
fn line_params<T: Real>(a0: Complex<T>, a1: Complex<T>, b0: Complex<T>, b1: Complex<T>) -> Option<(T, T)> {
    let r = a1 - a0;
    let u = b1 - b0;
    let denom = cross(r, u);
    if denom == T::zero() {
        return None;
    }
    let w = b0 - a0;
    Some((cross(w, u) / denom, cross(w, r) / denom))
}

/// Index pairs `(i, j)`, `i < j`, of non-adjacent segments of the closed
/// polyline that cross, with their line parameters.
fn crossings<T: Real>(points: &[Complex<T>]) -> Vec<(usize, usize, T, T)> {
    let n = points.len();
    let segs: Vec<Segment<T>> = (0..n).map(|i| Segment::new(points[i], points[(i + 1) % n])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| segs[i].min_x.partial_cmp(&segs[j].min_x).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        let si = segs[i];
        for &j in &order[pos + 1..] {
            let sj = segs[j];
            if sj.min_x > si.max_x {
                break;
            }
            if sj.min_y > si.max_y || sj.max_y < si.min_y {
                continue;
            }
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if hi == lo + 1 || (lo == 0 && hi == n - 1) {
                continue;
            }
            let (a, b) = (segs[lo], segs[hi]);
            if let Some((s, t)) = line_params(a.a, a.b, b.a, b.b) {
                let one = T::one();
                if s >= T::zero() && s < one && t >= T::zero() && t < one {
                    out.push((lo, hi, s, t));
                }
            }
        }
    }
    out.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    out
}

/// Transversal self-crossings of `band_loop`, refined on the model when
/// parameters are available and classified with the help of `companion`
/// (the other band, needed for the two-band winding number).
pub fn self_intersections<T: Real>(
    band_loop: &BandLoop<T>,
    companion: &BandLoop<T>,
) -> Result<Vec<IntersectionPoint<T>>> {
    if !band_loop.is_closed() {
        return Err(Error::OpenLoop);
    }
    let n = band_loop.len();
    if n < 4 {
        return Ok(vec![]);
    }
    let pts = band_loop.energies();
    let pair = [band_loop.clone(), companion.clone()];
    let period = band_loop.period();
    let sin_min = T::lit(TANGENTIAL_ANGLE_DEG.to_radians().sin());
    let mut out = Vec::new();

    for (i, j, s, t) in crossings(&pts) {
        let (a0, a1) = (pts[i], pts[(i + 1) % n]);
        let (b0, b1) = (pts[j], pts[(j + 1) % n]);
        let x_poly = a0 + (a1 - a0) * s;
        let u1 = (a1 - a0) / (a1 - a0).norm();
        let u2 = (b1 - b0) / (b1 - b0).norm();
        let tangential = cross(u1, u2).abs() < sin_min;

        let eps = (a1 - a0).norm().min((b1 - b0).norm()) * T::lit(0.25);
        let bis = u1 - u2;
        let sector_windings = if bis.norm() > T::zero() {
            let d = bis / bis.norm() * eps;
            let w1 = winding_number(&pair, x_poly + d).unwrap_or(0);
            let w2 = winding_number(&pair, x_poly - d).unwrap_or(0);
            (w1, w2)
        } else {
            (0, 0)
        };

        let k_at = |idx: usize, frac: T| {
            let k0 = band_loop.samples[idx].k;
            let mut k1 = band_loop.samples[(idx + 1) % n].k;
            if k1 <= k0 {
                k1 = k1 + period;
            }
            (k0, k1, k0 + (k1 - k0) * frac)
        };
        let (ka0, ka1, ka) = k_at(i, s);
        let (kb0, kb1, kb) = k_at(j, t);

        let (energy, k_pair, gap) = match band_loop.params {
            Some(p) => refine(&p, band_loop.mu, (ka0, ka1, a0, a1), (kb0, kb1, b0, b1))
                .unwrap_or((x_poly, (ka, kb), T::infinity())),
            None => (x_poly, (ka, kb), T::zero()),
        };
        out.push(IntersectionPoint {
            mu: band_loop.mu,
            band: band_loop.band,
            energy,
            k_pair,
            beta_pair: (
                momentum_to_beta(k_pair.0, band_loop.mu),
                momentum_to_beta(k_pair.1, band_loop.mu),
            ),
            qualifies_as_obc: sector_windings.0 != 0 && sector_windings.1 != 0,
            tangential,
            sector_windings,
            gap,
        });
    }
    Ok(out)
}

/// Energy on the branch nearest to `guide`.
fn branch_near<T: Real>(p: &Params<T>, k: T, mu: T, guide: Complex<T>) -> Result<Complex<T>> {
    let (e, _) = band_energies(p, momentum_to_beta(k, mu))?;
    Ok(if (e - guide).norm() <= (e + guide).norm() { e } else { -e })
}

type Interval<T> = (T, T, Complex<T>, Complex<T>);

/// Bisects both `k` intervals, keeping the pair of half-chords that cross,
/// until the two curve points agree to [`REFINE_TOLERANCE`].
fn refine<T: Real>(p: &Params<T>, mu: T, mut a: Interval<T>, mut b: Interval<T>) -> Result<(Complex<T>, (T, T), T)> {
    let tol = T::lit(REFINE_TOLERANCE);
    let mut best = None;
    for _ in 0..80 {
        let (s, t) = line_params(a.2, a.3, b.2, b.3).unwrap_or((T::lit(0.5), T::lit(0.5)));
        let ka = a.0 + (a.1 - a.0) * s;
        let kb = b.0 + (b.1 - b.0) * t;
        let ea = branch_near(p, ka, mu, a.2 + (a.3 - a.2) * s)?;
        let eb = branch_near(p, kb, mu, b.2 + (b.3 - b.2) * t)?;
        let gap = (ea - eb).norm();
        best = Some(((ea + eb) * T::lit(0.5), (ka, kb), gap));
        if gap < tol {
            break;
        }
        let split = |iv: Interval<T>| -> Result<[Interval<T>; 2]> {
            let km = (iv.0 + iv.1) * T::lit(0.5);
            let em = branch_near(p, km, mu, (iv.2 + iv.3) * T::lit(0.5))?;
            Ok([(iv.0, km, iv.2, em), (km, iv.1, em, iv.3)])
        };
        let ha = split(a)?;
        let hb = split(b)?;
        // prefer a half-pair that crosses; otherwise the pair whose crossing
        // parameters stray least outside [0, 1]
        let mut choice = None;
        let mut choice_excess = T::infinity();
        for x in ha {
            for y in hb {
                if let Some((s, t)) = line_params(x.2, x.3, y.2, y.3) {
                    let excess = (-s).max(s - T::one()).max(T::zero()) + (-t).max(t - T::one()).max(T::zero());
                    if excess < choice_excess {
                        choice_excess = excess;
                        choice = Some((x, y));
                    }
                }
            }
        }
        match choice {
            Some((x, y)) => {
                a = x;
                b = y;
            }
            None => break,
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("intersection refinement failed".into()))
}

/// Number of qualifying crossings in a list.
pub fn qualifying_count<T>(points: &[IntersectionPoint<T>]) -> usize {
    points.iter().filter(|p| p.qualifies_as_obc).count()
}
