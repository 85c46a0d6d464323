//! Box-projected Nelder-Mead ascent over the regression parameter.

use super::config::OuterSettings;
use crate::error::Result;
use crate::param::ParamBox;

#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Vertex {
    y: Vec<f64>,
    f: f64,
}

/// Maximizes `f` over the box from `start`. Trial points are clamped to the
/// box; degenerate coordinates stay fixed at their only value.
pub fn nelder_mead_max<F>(f: &mut F, start: &[f64], bx: &ParamBox, settings: &OuterSettings) -> Result<LocalResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut base = start.to_vec();
    bx.project(&mut base);
    let free = bx.free_coords();
    let mut evaluations = 0usize;

    let full = |y: &[f64]| -> Vec<f64> {
        let mut x = base.clone();
        for (&j, &yj) in free.iter().zip(y) {
            x[j] = yj.clamp(bx.lower()[j], bx.upper()[j]);
        }
        x
    };
    let mut eval = |y: &[f64], evaluations: &mut usize| -> Result<Vertex> {
        let x = full(y);
        *evaluations += 1;
        let value = f(&x)?;
        let y = free.iter().map(|&j| x[j]).collect();
        Ok(Vertex { y, f: if value.is_nan() { f64::NEG_INFINITY } else { value } })
    };

    let y0: Vec<f64> = free.iter().map(|&j| base[j]).collect();
    if free.is_empty() {
        let v = eval(&y0, &mut evaluations)?;
        return Ok(LocalResult { x: base, value: v.f, evaluations, converged: true });
    }

    let dim = free.len();
    let widths: Vec<f64> = free.iter().map(|&j| bx.width(j)).collect();
    let mut simplex = vec![eval(&y0, &mut evaluations)?];
    for (i, &j) in free.iter().enumerate() {
        let step = settings.initial_step * widths[i];
        let mut y = y0.clone();
        y[i] = if y0[i] + step <= bx.upper()[j] { y0[i] + step } else { y0[i] - step };
        simplex.push(eval(&y, &mut evaluations)?);
    }

    let combine =
        |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect() };
    let mut converged = false;
    loop {
        // best first; the sort is stable so earlier vertices win ties
        simplex.sort_by(|a, b| b.f.total_cmp(&a.f));
        let spread = simplex[1..]
            .iter()
            .flat_map(|v| v.y.iter().zip(&simplex[0].y).zip(&widths).map(|((a, b), w)| (a - b).abs() / w))
            .fold(0.0f64, f64::max);
        if spread <= settings.tolerance {
            converged = true;
            break;
        }
        if evaluations >= settings.max_evaluations {
            break;
        }
        let worst = simplex[dim].y.clone();
        let f_worst = simplex[dim].f;
        let f_next = simplex[dim - 1].f;
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, yi) in centroid.iter_mut().zip(&v.y) {
                *c += yi / dim as f64;
            }
        }
        let reflected = eval(&combine(&centroid, &worst, -1.0), &mut evaluations)?;
        if reflected.f > simplex[0].f {
            let expanded = eval(&combine(&centroid, &worst, -2.0), &mut evaluations)?;
            simplex[dim] = if expanded.f > reflected.f { expanded } else { reflected };
            continue;
        }
        if reflected.f > f_next {
            simplex[dim] = reflected;
            continue;
        }
        let contracted = if reflected.f > f_worst {
            let c = eval(&combine(&centroid, &reflected.y, 0.5), &mut evaluations)?;
            (c.f >= reflected.f).then_some(c)
        } else {
            let c = eval(&combine(&centroid, &worst, 0.5), &mut evaluations)?;
            (c.f > f_worst).then_some(c)
        };
        if let Some(c) = contracted {
            simplex[dim] = c;
            continue;
        }
        let best = simplex[0].y.clone();
        for i in 1..=dim {
            let y = combine(&best, &simplex[i].y, 0.5);
            simplex[i] = eval(&y, &mut evaluations)?;
        }
    }
    simplex.sort_by(|a, b| b.f.total_cmp(&a.f));
    let best = &simplex[0];
    Ok(LocalResult { x: full(&best.y), value: best.f, evaluations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_maximum() {
        let bx = ParamBox::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let mut f = |x: &[f64]| Ok(-(x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.7).powi(2));
        let r = nelder_mead_max(&mut f, &[1.0, 1.0], &bx, &OuterSettings::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 0.3).abs() < 1e-5 && (r.x[1] + 0.7).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn respects_box() {
        let bx = ParamBox::new(vec![0.0], vec![1.0]).unwrap();
        let mut f = |x: &[f64]| Ok(x[0]);
        let r = nelder_mead_max(&mut f, &[0.5], &bx, &OuterSettings::default()).unwrap();
        assert_eq!(r.x, vec![1.0]);
    }

    #[test]
    fn singleton_box_evaluates_once() {
        let bx = ParamBox::point(vec![0.4]).unwrap();
        let mut calls = 0;
        let mut f = |x: &[f64]| {
            calls += 1;
            Ok(x[0])
        };
        let r = nelder_mead_max(&mut f, &[0.0], &bx, &OuterSettings::default()).unwrap();
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.x, vec![0.4]);
        drop(r);
        assert_eq!(calls, 1);
    }
}
