//! Grid export: membership CSV and, in the plane, an SVG of the region with
//! the level-1 curves of every defining polynomial.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use anyhow::bail;
use liftinv::engine::{grid_points, max_value, RowOrigin};
use liftinv::polylift::Polynomial;

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub x: Vec<f64>,
    /// `max_i m_i(x)`.
    pub value: f64,
    pub member: bool,
}

/// Evaluates the description on a `res^n` grid, first coordinate fastest.
pub fn evaluate(polys: &[Polynomial], x_min: &[f64], x_max: &[f64], res: usize, tol: f64) -> anyhow::Result<Vec<GridRow>> {
    let n = x_min.len();
    if !(2..=3).contains(&n) {
        bail!("grid export supports n = 2 or 3, got {n}");
    }
    if x_max.len() != n || (0..n).any(|i| !(x_min[i] <= x_max[i])) {
        bail!("grid bounds must satisfy x_min <= x_max in {n} coordinates");
    }
    if res == 0 {
        bail!("grid resolution must be positive");
    }
    if let Some(p) = polys.iter().find(|p| p.dim() != n) {
        bail!("polynomial in {} variables on an {n}-dimensional grid", p.dim());
    }
    Ok(grid_points(x_min, x_max, res)
        .into_iter()
        .map(|x| {
            let value = max_value(polys, &x);
            GridRow {
                member: value <= 1.0 + tol,
                value,
                x,
            }
        })
        .collect())
}

pub fn to_csv(rows: &[GridRow], n: usize) -> String {
    let mut s = String::new();
    for i in 1..=n {
        let _ = write!(s, "x{i},");
    }
    s.push_str("max_value,member\n");
    for r in rows {
        for v in &r.x {
            let _ = write!(s, "{v},");
        }
        let _ = writeln!(s, "{},{}", r.value, u8::from(r.member));
    }
    s
}

/// How a defining polynomial is drawn.
#[derive(Clone, Copy, Debug)]
pub struct CurveStyle {
    pub origin: RowOrigin,
    /// Certified redundant by the SOS step.
    pub redundant: bool,
}

fn colour(o: RowOrigin) -> &'static str {
    match o {
        RowOrigin::Inherited => "#1f5fa8",
        RowOrigin::Added => "#c0392b",
        RowOrigin::Box => "#7f7f7f",
    }
}

/// A cell edge: `(horizontal, i, j)` starts at grid node `(i, j)` and runs
/// along `x1` if horizontal, along `x2` otherwise.
type Edge = (bool, usize, usize);

/// Polylines of `{f = level}` on a `res x res` grid of values (`x1`
/// fastest), in grid index coordinates.
pub fn contour(values: &[f64], res: usize, level: f64) -> Vec<Vec<(f64, f64)>> {
    let at = |i: usize, j: usize| values[i + res * j] - level;
    let point = |(h, i, j): Edge| {
        let (a, b) = if h { (at(i, j), at(i + 1, j)) } else { (at(i, j), at(i, j + 1)) };
        let t = if a == b { 0.5 } else { a / (a - b) };
        if h {
            (i as f64 + t, j as f64)
        } else {
            (i as f64, j as f64 + t)
        }
    };
    let mut segs: Vec<[Edge; 2]> = Vec::new();
    for j in 0..res.saturating_sub(1) {
        for i in 0..res - 1 {
            // corners and edges counter-clockwise from (i, j)
            let v = [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)];
            let edges = [(true, i, j), (false, i + 1, j), (true, i, j + 1), (false, i, j)];
            let cut: Vec<Edge> = (0..4)
                .filter(|&e| (v[e] > 0.0) != (v[(e + 1) % 4] > 0.0))
                .map(|e| edges[e])
                .collect();
            match cut.len() {
                2 => segs.push([cut[0], cut[1]]),
                // saddle: pair the crossings by the sign of the centre
                4 => {
                    let centre = v.iter().sum::<f64>() / 4.0;
                    if (centre > 0.0) == (v[0] > 0.0) {
                        segs.push([cut[0], cut[3]]);
                        segs.push([cut[1], cut[2]]);
                    } else {
                        segs.push([cut[0], cut[1]]);
                        segs.push([cut[2], cut[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    let mut touching: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, s) in segs.iter().enumerate() {
        for e in s {
            touching.entry(*e).or_default().push(k);
        }
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut chain: VecDeque<Edge> = segs[start].iter().copied().collect();
        // grow at the back, then at the front
        for front in [false, true] {
            loop {
                let end = if front { chain[0] } else { chain[chain.len() - 1] };
                let next = touching[&end].iter().copied().find(|&k| !used[k]);
                let Some(k) = next else { break };
                used[k] = true;
                let other = if segs[k][0] == end { segs[k][1] } else { segs[k][0] };
                if front {
                    chain.push_front(other);
                } else {
                    chain.push_back(other);
                }
            }
        }
        lines.push(chain.into_iter().map(point).collect());
    }
    lines
}

const SIZE: f64 = 600.0;

/// Planar picture: member cells shaded, one level-1 curve per polynomial.
/// Inherited, added and box-derived curves get distinct colours; curves of
/// SOS-redundant polynomials are dashed.
pub fn to_svg(
    rows: &[GridRow],
    res: usize,
    x_min: &[f64],
    x_max: &[f64],
    polys: &[Polynomial],
    styles: &[CurveStyle],
) -> anyhow::Result<String> {
    if x_min.len() != 2 || rows.len() != res * res {
        bail!("SVG export needs a planar grid");
    }
    if styles.len() != polys.len() {
        bail!("{} styles for {} polynomials", styles.len(), polys.len());
    }
    let (w, h) = (x_max[0] - x_min[0], x_max[1] - x_min[1]);
    let sx = |x: f64| if w > 0.0 { (x - x_min[0]) / w * SIZE } else { SIZE / 2.0 };
    let sy = |y: f64| if h > 0.0 { SIZE - (y - x_min[1]) / h * SIZE } else { SIZE / 2.0 };
    let step = |len: f64| if res > 1 { len / (res - 1) as f64 } else { len };
    let (cw, ch) = (step(w) / w.max(f64::MIN_POSITIVE) * SIZE, step(h) / h.max(f64::MIN_POSITIVE) * SIZE);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r##"<rect width="{SIZE}" height="{SIZE}" fill="#ffffff"/>"##);
    let _ = writeln!(s, r##"<g fill="#d9d9d9" stroke="none" shape-rendering="crispEdges">"##);
    // one rect per run of members along x1
    for line in rows.chunks(res) {
        let mut k = 0;
        while k < line.len() {
            if !line[k].member {
                k += 1;
                continue;
            }
            let first = &line[k];
            while k + 1 < line.len() && line[k + 1].member {
                k += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
                sx(first.x[0]) - cw / 2.0,
                sy(first.x[1]) - ch / 2.0,
                sx(line[k].x[0]) - sx(first.x[0]) + cw,
                ch
            );
            k += 1;
        }
    }
    s.push_str("</g>\n");
    if res > 1 {
        let to_x = |gi: f64| x_min[0] + gi * step(w);
        let to_y = |gj: f64| x_min[1] + gj * step(h);
        for (p, st) in polys.iter().zip(styles) {
            let values: Vec<f64> = rows.iter().map(|r| p.eval(&r.x)).collect();
            let mut d = String::new();
            for line in contour(&values, res, 1.0) {
                for (k, &(gi, gj)) in line.iter().enumerate() {
                    let _ = write!(d, "{}{:.2} {:.2}", if k == 0 { 'M' } else { 'L' }, sx(to_x(gi)), sy(to_y(gj)));
                }
            }
            if d.is_empty() {
                continue;
            }
            let dash = if st.redundant { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                colour(st.origin)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}
