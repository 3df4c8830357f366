use std::collections::HashMap;

use super::{
    BoundarySegment, BoundaryTag, GeometryParams, InterfaceSegment, InterfaceTag, Mesh2D,
    MeshError, Region, Scenario, Tape, Triangle,
};

/// Minimum number of elements across a bar or a tape.
const MIN_ELEMENTS_ACROSS: usize = 4;

fn divisions(len: f64, delta: f64) -> usize {
    ((len / delta) - 1e-9).ceil().max(1.0) as usize
}

/// Grid lines on `[outer_lo, outer_hi]`: uniform spacing at most `delta` on
/// every interval between consecutive `breaks` (which must lie inside), and a
/// geometric progression of ratio `grading` from the outermost break to the
/// box edges.
pub fn graded_lines(breaks: &[f64], outer_lo: f64, outer_hi: f64, delta: f64, grading: f64) -> Vec<f64> {
    let mut lines = Vec::new();
    let lo = breaks[0];
    let hi = *breaks.last().unwrap();
    let left = progression(lo - outer_lo, delta, grading);
    let mut x = outer_lo;
    lines.push(x);
    for h in left.iter().rev() {
        x += h;
        lines.push(x);
    }
    *lines.last_mut().unwrap() = lo;
    for w in breaks.windows(2) {
        let n = divisions(w[1] - w[0], delta);
        for k in 1..=n {
            lines.push(if k == n {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * k as f64 / n as f64
            });
        }
    }
    let right = progression(outer_hi - hi, delta, grading);
    let mut x = hi;
    for (k, h) in right.iter().enumerate() {
        x += h;
        lines.push(if k + 1 == right.len() { outer_hi } else { x });
    }
    lines
}

/// Step sizes growing from `delta * grading` that exactly fill `len`.
fn progression(len: f64, delta: f64, grading: f64) -> Vec<f64> {
    if len <= 0.0 {
        return Vec::new();
    }
    let mut steps = Vec::new();
    let mut h = delta;
    let mut sum = 0.0;
    while sum < len * (1.0 - 1e-9) {
        h *= grading;
        steps.push(h);
        sum += h;
    }
    if steps.len() > 1 && sum - len > 0.5 * steps[steps.len() - 1] {
        let last = steps.pop().unwrap();
        sum -= last;
    }
    let scale = len / sum;
    steps.iter().map(|s| s * scale).collect()
}

/// Structured triangulation of the tensor grid `xs × ys`. Each cell is split
/// along its lower-left to upper-right diagonal and gets the region returned
/// by `region_of` at the cell centre. Node `(i, j)` has index `j * xs.len() + i`.
pub fn tensor_mesh(
    xs: &[f64],
    ys: &[f64],
    region_of: impl Fn(f64, f64) -> Region,
) -> (Vec<[f64; 2]>, Vec<Triangle>) {
    let nx = xs.len();
    let mut nodes = Vec::with_capacity(nx * ys.len());
    for &y in ys {
        for &x in xs {
            nodes.push([x, y]);
        }
    }
    let mut tris = Vec::with_capacity(2 * (nx - 1) * (ys.len() - 1));
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let p00 = j * nx + i;
            let p10 = p00 + 1;
            let p01 = p00 + nx;
            let p11 = p01 + 1;
            let region = region_of(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
            tris.push(Triangle { nodes: [p00, p10, p11], region });
            tris.push(Triangle { nodes: [p00, p11, p01], region });
        }
    }
    (nodes, tris)
}

fn outer_boundary(nx: usize, ny: usize) -> Vec<BoundarySegment> {
    let id = |i: usize, j: usize| j * nx + i;
    let mut segs = Vec::new();
    let mut push = |a, b| segs.push(BoundarySegment { nodes: [a, b], tag: BoundaryTag::GammaE });
    for i in 0..nx - 1 {
        push(id(i, 0), id(i + 1, 0));
    }
    for j in 0..ny - 1 {
        push(id(nx - 1, j), id(nx - 1, j + 1));
    }
    for i in (0..nx - 1).rev() {
        push(id(i + 1, ny - 1), id(i, ny - 1));
    }
    for j in (0..ny - 1).rev() {
        push(id(0, j + 1), id(0, j));
    }
    segs
}

fn index_of(lines: &[f64], v: f64) -> usize {
    lines
        .iter()
        .position(|&x| (x - v).abs() < 1e-12)
        .expect("break value is a grid line")
}

/// Mesh of the scenario named in `params`.
pub fn build_mesh(params: &GeometryParams) -> Result<Mesh2D, MeshError> {
    match params.scenario {
        Scenario::StackedBar => build_stacked_bar_mesh(params),
        Scenario::SingleTape => build_tape_mesh(params),
    }
}

/// Two stacked bars (superconductor below, ferromagnet above) centred at the
/// origin inside a square air box. The interface of the superconducting bar is
/// stored counter-clockwise.
pub fn build_stacked_bar_mesh(params: &GeometryParams) -> Result<Mesh2D, MeshError> {
    params.validate()?;
    if params.scenario != Scenario::StackedBar {
        return Err(MeshError::InvalidParams("scenario must be STACKED_BAR".into()));
    }
    let (hw, h, l) = (0.5 * params.bar_width, params.bar_height, params.air_half_size);
    if l <= hw || l <= h {
        return Err(MeshError::InvalidParams("air box must enclose the bars".into()));
    }
    let across = divisions(h, params.delta).min(divisions(params.bar_width, params.delta));
    if across < MIN_ELEMENTS_ACROSS {
        return Err(MeshError::UnderResolved(format!(
            "{across} elements across a bar, need at least {MIN_ELEMENTS_ACROSS}"
        )));
    }
    let xs = graded_lines(&[-hw, hw], -l, l, params.delta, params.grading);
    let ys = graded_lines(&[-h, 0.0, h], -l, l, params.delta, params.grading);
    let (nodes, tris) = tensor_mesh(&xs, &ys, |x, y| {
        if x.abs() < hw && y > -h && y < 0.0 {
            Region::HSc
        } else if x.abs() < hw && y > 0.0 && y < h {
            Region::AFerro
        } else {
            Region::AAir
        }
    });
    let nx = xs.len();
    let id = |i: usize, j: usize| j * nx + i;
    let (i0, i1) = (index_of(&xs, -hw), index_of(&xs, hw));
    let (j0, j1) = (index_of(&ys, -h), index_of(&ys, 0.0));
    let mut interfaces = Vec::new();
    let mut push = |a, b, normal| {
        interfaces.push(InterfaceSegment { nodes: [a, b], tag: InterfaceTag::GammaM, normal, group: 0 })
    };
    for i in i0..i1 {
        push(id(i, j0), id(i + 1, j0), [0.0, -1.0]);
    }
    for j in j0..j1 {
        push(id(i1, j), id(i1, j + 1), [1.0, 0.0]);
    }
    for i in (i0..i1).rev() {
        push(id(i + 1, j1), id(i, j1), [0.0, 1.0]);
    }
    for j in (j0..j1).rev() {
        push(id(i0, j + 1), id(i0, j), [-1.0, 0.0]);
    }
    let boundary = outer_boundary(nx, ys.len());
    Mesh2D::from_parts(nodes, tris, boundary, interfaces, Vec::new(), params.delta)
}

/// A horizontal tape on `y = 0` centred at the origin inside a square air box.
pub fn build_tape_mesh(params: &GeometryParams) -> Result<Mesh2D, MeshError> {
    params.validate()?;
    if params.scenario != Scenario::SingleTape {
        return Err(MeshError::InvalidParams("scenario must be SINGLE_TAPE".into()));
    }
    let (hw, l) = (0.5 * params.tape_width, params.air_half_size);
    if l <= hw {
        return Err(MeshError::InvalidParams("air box must enclose the tape".into()));
    }
    let across = divisions(params.tape_width, params.delta);
    if across < MIN_ELEMENTS_ACROSS {
        return Err(MeshError::UnderResolved(format!(
            "{across} elements across the tape, need at least {MIN_ELEMENTS_ACROSS}"
        )));
    }
    let band = 0.5 * hw;
    let xs = graded_lines(&[-hw, hw], -l, l, params.delta, params.grading);
    let ys = graded_lines(&[-band, 0.0, band], -l, l, params.delta, params.grading);
    let (nodes, tris) = tensor_mesh(&xs, &ys, |_, _| Region::AAir);
    let nx = xs.len();
    let (i0, i1) = (index_of(&xs, -hw), index_of(&xs, hw));
    let j0 = index_of(&ys, 0.0);
    let interfaces: Vec<InterfaceSegment> = (i0..i1)
        .map(|i| InterfaceSegment {
            nodes: [j0 * nx + i, j0 * nx + i + 1],
            tag: InterfaceTag::GammaW,
            normal: [0.0, 1.0],
            group: 0,
        })
        .collect();
    let tape = Tape {
        minus: j0 * nx + i0,
        plus: j0 * nx + i1,
        thickness: params.tape_thickness,
    };
    let boundary = outer_boundary(nx, ys.len());
    Mesh2D::from_parts(nodes, tris, boundary, interfaces, vec![tape], params.delta)
}

/// Tensor-grid mesh with arbitrary regions. Outer boundary segments are
/// tagged `GAMMA_E` next to the a domain and `GAMMA_H` next to the h domain;
/// `GAMMA_M` is found from the region map and stored as closed or open chains
/// with the h domain on the left.
pub fn region_mesh(
    xs: &[f64],
    ys: &[f64],
    region_of: impl Fn(f64, f64) -> Region,
    delta: f64,
) -> Result<Mesh2D, MeshError> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(MeshError::InvalidParams("grid needs two lines per axis".into()));
    }
    let (nodes, tris) = tensor_mesh(xs, ys, region_of);
    let nx = xs.len();
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    let mut directed = Vec::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri.nodes[(k + 1) % 3], tri.nodes[(k + 2) % 3]);
            owner.insert((a, b), t);
            directed.push((a, b, t));
        }
    }
    let mut boundary = outer_boundary(nx, ys.len());
    for seg in boundary.iter_mut() {
        let t = owner[&(seg.nodes[0], seg.nodes[1])];
        if tris[t].region.in_h() {
            seg.tag = BoundaryTag::GammaH;
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &(a, b, t) in &directed {
        if !tris[t].region.in_h() {
            continue;
        }
        if let Some(&o) = owner.get(&(b, a)) {
            if tris[o].region.in_a() && next.insert(a, b).is_some() {
                return Err(MeshError::Interface(format!("interface branches at node {a}")));
            }
        }
    }
    let mut prev: HashMap<usize, usize> = next.iter().map(|(&a, &b)| (b, a)).collect();
    let mut interfaces = Vec::new();
    let mut group = 0;
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    for s0 in starts {
        if !next.contains_key(&s0) {
            continue;
        }
        // walk back to the chain start for open chains
        let mut start = s0;
        while let Some(&p) = prev.get(&start) {
            if p == s0 {
                start = s0;
                break;
            }
            start = p;
        }
        let mut a = start;
        while let Some(b) = next.remove(&a) {
            prev.remove(&b);
            let (p, q) = (nodes[a], nodes[b]);
            let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            let normal = [(q[1] - p[1]) / len, -(q[0] - p[0]) / len];
            interfaces.push(InterfaceSegment { nodes: [a, b], tag: InterfaceTag::GammaM, normal, group });
            a = b;
        }
        group += 1;
    }
    Mesh2D::from_parts(nodes, tris, boundary, interfaces, Vec::new(), delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lines_hit_breaks_and_box() {
        let xs = graded_lines(&[-0.01, 0.0, 0.01], -0.05, 0.05, 0.002, 1.3);
        assert_eq!(xs[0], -0.05);
        assert_eq!(*xs.last().unwrap(), 0.05);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(index_of(&xs, 0.0), index_of(&xs, -0.01) + 5);
    }

    #[test]
    fn progression_fills_length() {
        let s = progression(0.04, 0.002, 1.25);
        let sum: f64 = s.iter().sum();
        assert!((sum - 0.04).abs() < 1e-15);
    }
}
