#![allow(dead_code)]

use coxmeas::{Dataset, ErrorModel};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random nonnegative Lipschitz-`l` polyline on `[0, tau]`: breakpoints and values.
pub fn lipschitz_polyline<R: Rng>(rng: &mut R, tau: f64, l: f64, pieces: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ts: Vec<f64> = (0..pieces.saturating_sub(1)).map(|_| rng.random::<f64>() * tau).collect();
    ts.push(0.0);
    ts.push(tau);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut vs = vec![rng.random::<f64>() * 2.0];
    for k in 1..ts.len() {
        let slope = l * (2.0 * rng.random::<f64>() - 1.0);
        let v = (vs[k - 1] + slope * (ts[k] - ts[k - 1])).max(0.0);
        vs.push(v);
    }
    (ts, vs)
}

pub fn eval_polyline(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let j = ts.partition_point(|&x| x <= t).clamp(1, ts.len() - 1);
    let (t0, t1) = (ts[j - 1], ts[j]);
    let r = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
    vs[j - 1] + r * (vs[j] - vs[j - 1])
}

/// Lower McShane envelope `max(floor, max_k v_k - l |t - t_k|)`: the smallest
/// Lipschitz-`l` function above `floor` through the nodes.
pub fn mcshane(knots: &[f64], values: &[f64], l: f64, floor: f64, t: f64) -> f64 {
    knots.iter().zip(values).map(|(&k, &v)| v - l * (t - k).abs()).fold(floor, f64::max)
}

/// Sorted distinct random knots in `(0, tau]`.
pub fn random_knots<R: Rng>(rng: &mut R, tau: f64, count: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..count).map(|_| (rng.random::<f64>() * tau).max(1e-3)).collect();
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

/// Small random dataset on `[0, 1]` with one covariate and at least one event.
pub fn tiny_dataset<R: Rng>(rng: &mut R, n: usize) -> Dataset {
    loop {
        let mut d = Dataset::new(1.0, 1).unwrap();
        for _ in 0..n {
            let y = 0.05 + 0.9 * rng.random::<f64>();
            let delta = rng.random::<f64>() < 0.7;
            let w: f64 = StandardNormal.sample(rng);
            d.push(y, delta, &[0.6 * w]).unwrap();
        }
        if d.event_count() > 0 {
            return d;
        }
    }
}

pub fn random_error<R: Rng>(rng: &mut R) -> ErrorModel {
    match rng.random_range(0..3) {
        0 => ErrorModel::none(1),
        1 => ErrorModel::isotropic(1, 0.1 + 0.3 * rng.random::<f64>()).unwrap(),
        _ => ErrorModel::two_point(0.1 + 0.3 * rng.random::<f64>()).unwrap(),
    }
}

/// Maximizer of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    0.5 * (lo + hi)
}

/// Corrected objective of the envelope through `values` at `knots`, built
/// from [`mcshane`] and [`integral_exact`] only.
pub fn tent_objective(
    d: &Dataset,
    beta: f64,
    e: &ErrorModel,
    knots: &[f64],
    values: &[f64],
    l: f64,
    floor: f64,
) -> f64 {
    let mgf = e.mgf(&[beta]);
    let mut total = 0.0;
    for i in 0..d.len() {
        let y = d.y()[i];
        let w = d.w(i)[0];
        let c = (beta * w).exp() / mgf;
        let integral = integral_exact(knots, values, l, floor, y);
        if d.delta()[i] {
            let v = mcshane(knots, values, l, floor, y);
            if v <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += v.ln() + beta * w;
        }
        total -= c * integral;
    }
    total / d.len() as f64
}

/// `int_0^y` of the McShane envelope, integrating exactly between all its
/// kinks (knots, tent apexes and floor crossings).
pub fn integral_exact(knots: &[f64], values: &[f64], l: f64, floor: f64, y: f64) -> f64 {
    let mut pts = vec![0.0, y];
    for (&k, &v) in knots.iter().zip(values) {
        pts.push(k);
        if l > 0.0 {
            pts.push(k - (v - floor) / l);
            pts.push(k + (v - floor) / l);
        }
    }
    for w in knots.windows(2).zip(values.windows(2)) {
        let ((t0, t1), (v0, v1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
        if l > 0.0 {
            pts.push(0.5 * (t0 + t1) + 0.5 * (v0 - v1) / l);
        }
    }
    let mut pts: Vec<f64> = pts.into_iter().filter(|&p| (0.0..=y).contains(&p)).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let f = |t: f64| mcshane(knots, values, l, floor, t);
    pts.windows(2).map(|w| 0.5 * (f(w[0]) + f(w[1])) * (w[1] - w[0])).sum()
}

/// Brute-force maximum of [`tent_objective`] over node values on the grid
/// `floor + step * {0, 1, ...}` up to `vmax`, skipping non-Lipschitz tuples.
/// Returns the best value and the largest objective change for one grid
/// step along any coordinate at the best tuple.
#[allow(clippy::too_many_arguments)]
pub fn node_grid_max(
    d: &Dataset,
    beta: f64,
    e: &ErrorModel,
    knots: &[f64],
    l: f64,
    floor: f64,
    step: f64,
    vmax: f64,
) -> (f64, Vec<f64>, f64) {
    let k = knots.len();
    let levels = ((vmax - floor) / step).floor() as usize + 1;
    let mut idx = vec![0usize; k];
    let mut best = (f64::NEG_INFINITY, vec![floor; k]);
    let value_of = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| floor + step * i as f64).collect() };
    let feasible = |v: &[f64]| (1..k).all(|j| (v[j] - v[j - 1]).abs() <= l * (knots[j] - knots[j - 1]) + 1e-12);
    loop {
        let v = value_of(&idx);
        if feasible(&v) {
            let q = tent_objective(d, beta, e, knots, &v, l, floor);
            if q > best.0 {
                best = (q, v);
            }
        }
        let mut j = 0;
        while j < k {
            idx[j] += 1;
            if idx[j] < levels {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == k {
            break;
        }
    }
    let mut variation = 0.0f64;
    for j in 0..k {
        for s in [-step, step] {
            let mut v = best.1.clone();
            v[j] += s;
            if v[j] >= floor {
                let q = tent_objective(d, beta, e, knots, &v, l, floor);
                if q.is_finite() {
                    variation = variation.max((q - best.0).abs());
                }
            }
        }
    }
    (best.0, best.1, variation)
}
