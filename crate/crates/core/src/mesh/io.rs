use std::fmt::Write as _;
use std::str::FromStr;

use super::{
    BoundarySegment, BoundaryTag, InterfaceSegment, InterfaceTag, Mesh2D, MeshError, Region,
    Tape, Triangle,
};

/// Writes the native ASCII format. Ids are 0-based and follow storage order,
/// numbers use 17 significant digits, so a round trip is exact.
pub fn write_native(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    s.push_str("$Meta\n");
    let _ = writeln!(s, "delta {:.16e}", mesh.delta());
    for t in mesh.tapes() {
        let _ = writeln!(s, "tape {} {} {:.16e}", t.minus, t.plus, t.thickness);
    }
    s.push_str("$EndMeta\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.n_nodes());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(s, "{i} {:.16e} {:.16e}", p[0], p[1]);
    }
    s.push_str("$EndNodes\n$Triangles\n");
    let _ = writeln!(s, "{}", mesh.triangles().len());
    for (i, t) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = t.nodes;
        let _ = writeln!(s, "{i} {a} {b} {c} {}", t.region.tag());
    }
    s.push_str("$EndTriangles\n$Segments\n");
    let _ = writeln!(s, "{}", mesh.boundary().len() + mesh.interfaces().len());
    let mut id = 0;
    for b in mesh.boundary() {
        let _ = writeln!(s, "{id} {} {} {}", b.nodes[0], b.nodes[1], b.tag.tag());
        id += 1;
    }
    for f in mesh.interfaces() {
        let _ = writeln!(
            s,
            "{id} {} {} {} {:.16e} {:.16e} {}",
            f.nodes[0],
            f.nodes[1],
            f.tag.tag(),
            f.normal[0],
            f.normal[1],
            f.group
        );
        id += 1;
    }
    s.push_str("$EndSegments\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, MeshError> {
        loop {
            match self.inner.next() {
                Some((n, l)) => {
                    self.line = n + 1;
                    let l = l.trim();
                    if !l.is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> MeshError {
        MeshError::Parse { line: self.line, msg: msg.into() }
    }

    fn expect(&mut self, header: &str) -> Result<(), MeshError> {
        let l = self.next()?;
        if l != header {
            return Err(self.err(format!("expected {header}, found {l}")));
        }
        Ok(())
    }

    fn count(&mut self) -> Result<usize, MeshError> {
        let l = self.next()?;
        l.parse().map_err(|_| self.err("bad count"))
    }

    fn field<T: FromStr>(&self, f: Option<&str>) -> Result<T, MeshError> {
        f.and_then(|v| v.parse().ok()).ok_or_else(|| self.err("bad field"))
    }
}

/// Parses the native ASCII format written by [`write_native`].
pub fn read_native(text: &str) -> Result<Mesh2D, MeshError> {
    let mut r = Lines { inner: text.lines().enumerate(), line: 0 };
    r.expect("$Meta")?;
    let mut delta = None;
    let mut tapes = Vec::new();
    loop {
        let l = r.next()?;
        if l == "$EndMeta" {
            break;
        }
        let mut f = l.split_whitespace();
        match f.next() {
            Some("delta") => delta = Some(r.field::<f64>(f.next())?),
            Some("tape") => tapes.push(Tape {
                minus: r.field(f.next())?,
                plus: r.field(f.next())?,
                thickness: r.field(f.next())?,
            }),
            _ => return Err(r.err(format!("unknown meta entry {l}"))),
        }
    }
    let delta = delta.ok_or_else(|| r.err("missing delta"))?;

    r.expect("$Nodes")?;
    let n = r.count()?;
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut f = r.next()?.split_whitespace();
        let id: usize = r.field(f.next())?;
        if id != i {
            return Err(r.err("node ids must be consecutive from 0"));
        }
        nodes.push([r.field(f.next())?, r.field(f.next())?]);
    }
    r.expect("$EndNodes")?;

    r.expect("$Triangles")?;
    let n = r.count()?;
    let mut triangles = Vec::with_capacity(n);
    for _ in 0..n {
        let mut f = r.next()?.split_whitespace();
        let _id: usize = r.field(f.next())?;
        let nodes = [r.field(f.next())?, r.field(f.next())?, r.field(f.next())?];
        let tag = f.next().unwrap_or("");
        let region = Region::from_tag(tag).ok_or_else(|| r.err(format!("unknown region {tag}")))?;
        triangles.push(Triangle { nodes, region });
    }
    r.expect("$EndTriangles")?;

    r.expect("$Segments")?;
    let n = r.count()?;
    let mut boundary = Vec::new();
    let mut interfaces = Vec::new();
    for _ in 0..n {
        let mut f = r.next()?.split_whitespace();
        let _id: usize = r.field(f.next())?;
        let nodes = [r.field(f.next())?, r.field(f.next())?];
        match f.next() {
            Some("GAMMA_E") => boundary.push(BoundarySegment { nodes, tag: BoundaryTag::GammaE }),
            Some("GAMMA_H") => boundary.push(BoundarySegment { nodes, tag: BoundaryTag::GammaH }),
            Some(t @ ("GAMMA_M" | "GAMMA_W")) => {
                let tag = if t == "GAMMA_M" { InterfaceTag::GammaM } else { InterfaceTag::GammaW };
                interfaces.push(InterfaceSegment {
                    nodes,
                    tag,
                    normal: [r.field(f.next())?, r.field(f.next())?],
                    group: r.field(f.next())?,
                });
            }
            other => return Err(r.err(format!("unknown segment tag {other:?}"))),
        }
    }
    r.expect("$EndSegments")?;
    Mesh2D::from_parts(nodes, triangles, boundary, interfaces, tapes, delta)
}
