use std::collections::{BTreeMap, HashMap};

use super::{
    BoundarySegment, BoundaryTag, InterfaceSegment, InterfaceTag, Mesh2D, MeshError, Region,
    Tape, Triangle,
};

/// How physical groups of an MSH file map onto mesh tags. Names from
/// `$PhysicalNames` are matched against the tag strings (`OMEGA_H_SC`,
/// `GAMMA_M`, `DGW_MINUS`, ...) unless an explicit numeric entry exists.
#[derive(Debug, Clone)]
pub struct MshTagMap {
    pub by_number: HashMap<i64, String>,
    /// Thickness assigned to every `GAMMA_W` tape.
    pub tape_thickness: f64,
    /// Characteristic size; when `None` the longest interface segment is used.
    pub delta: Option<f64>,
}

impl Default for MshTagMap {
    fn default() -> Self {
        MshTagMap { by_number: HashMap::new(), tape_thickness: 1e-6, delta: None }
    }
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

/// Imports the ASCII MSH 2.2 subset: `$PhysicalNames`, `$Nodes`, and
/// `$Elements` of type 15 (point), 1 (line) and 2 (triangle).
pub fn read_msh22(text: &str, map: &MshTagMap) -> Result<Mesh2D, MeshError> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let mut names: HashMap<i64, String> = HashMap::new();
    let mut node_ids: HashMap<i64, usize> = HashMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut elements: Vec<(usize, i64, i64, Vec<i64>)> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        match lines[i] {
            "$MeshFormat" => {
                let v = lines.get(i + 1).ok_or_else(|| perr(i + 2, "missing format"))?;
                if !v.starts_with("2.2") {
                    return Err(perr(i + 2, format!("unsupported MSH version {v}")));
                }
                i += 2;
            }
            "$PhysicalNames" => {
                let n: usize = lines[i + 1].parse().map_err(|_| perr(i + 2, "bad count"))?;
                for k in 0..n {
                    let l = lines[i + 2 + k];
                    let mut f = l.split_whitespace();
                    let _dim = f.next();
                    let num: i64 = f
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| perr(i + 3 + k, "bad physical tag"))?;
                    let name = f.collect::<Vec<_>>().join(" ").trim_matches('"').to_string();
                    names.insert(num, name);
                }
                i += n + 2;
            }
            "$Nodes" => {
                let n: usize = lines[i + 1].parse().map_err(|_| perr(i + 2, "bad count"))?;
                for k in 0..n {
                    let f: Vec<&str> = lines[i + 2 + k].split_whitespace().collect();
                    let parse = |s: &str| s.parse::<f64>().map_err(|_| perr(i + 3 + k, "bad node"));
                    if f.len() < 3 {
                        return Err(perr(i + 3 + k, "bad node"));
                    }
                    let id: i64 = f[0].parse().map_err(|_| perr(i + 3 + k, "bad node id"))?;
                    node_ids.insert(id, nodes.len());
                    nodes.push([parse(f[1])?, parse(f[2])?]);
                }
                i += n + 2;
            }
            "$Elements" => {
                let n: usize = lines[i + 1].parse().map_err(|_| perr(i + 2, "bad count"))?;
                for k in 0..n {
                    let f: Vec<i64> = lines[i + 2 + k]
                        .split_whitespace()
                        .map(|v| v.parse().map_err(|_| perr(i + 3 + k, "bad element")))
                        .collect::<Result<_, _>>()?;
                    if f.len() < 3 || f.len() < 3 + f[2] as usize {
                        return Err(perr(i + 3 + k, "bad element"));
                    }
                    let ntags = f[2] as usize;
                    let phys = if ntags > 0 { f[3] } else { 0 };
                    elements.push((i + 3 + k, f[1], phys, f[3 + ntags..].to_vec()));
                }
                i += n + 2;
            }
            _ => i += 1,
        }
    }
    let name_of = |phys: i64| -> Option<String> {
        map.by_number.get(&phys).cloned().or_else(|| names.get(&phys).cloned())
    };
    let node = |line: usize, id: i64| {
        node_ids.get(&id).copied().ok_or_else(|| perr(line, format!("unknown node {id}")))
    };

    let mut triangles = Vec::new();
    let mut boundary = Vec::new();
    let mut m_segs = Vec::new();
    let mut w_segs = Vec::new();
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    for (line, ty, phys, conn) in &elements {
        let name = name_of(*phys).unwrap_or_default();
        match ty {
            2 => {
                let region = Region::from_tag(&name)
                    .ok_or_else(|| perr(*line, format!("triangle without region tag ({name})")))?;
                let mut nodes3 = [node(*line, conn[0])?, node(*line, conn[1])?, node(*line, conn[2])?];
                let [a, b, c] = nodes3.map(|v| nodes[v]);
                if (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]) < 0.0 {
                    nodes3.swap(1, 2);
                }
                triangles.push(Triangle { nodes: nodes3, region });
            }
            1 => {
                let seg = [node(*line, conn[0])?, node(*line, conn[1])?];
                match name.as_str() {
                    "GAMMA_E" => boundary.push(BoundarySegment { nodes: seg, tag: BoundaryTag::GammaE }),
                    "GAMMA_H" => boundary.push(BoundarySegment { nodes: seg, tag: BoundaryTag::GammaH }),
                    "GAMMA_M" => m_segs.push(seg),
                    "GAMMA_W" => w_segs.push(seg),
                    _ => {}
                }
            }
            15 => match name.as_str() {
                "DGW_MINUS" => minus.push(node(*line, conn[0])?),
                "DGW_PLUS" => plus.push(node(*line, conn[0])?),
                _ => {}
            },
            _ => {}
        }
    }

    let mut interfaces = Vec::new();
    let side_h = |seg: [usize; 2], tris: &[Triangle]| -> bool {
        // true if an h-domain triangle lies on the left of the segment
        let (p, q) = (nodes[seg[0]], nodes[seg[1]]);
        tris.iter().filter(|t| t.region.in_h()).any(|t| {
            t.nodes.contains(&seg[0]) && t.nodes.contains(&seg[1]) && {
                let c = t.nodes.iter().fold([0.0, 0.0], |acc, &v| {
                    [acc[0] + nodes[v][0] / 3.0, acc[1] + nodes[v][1] / 3.0]
                });
                (q[0] - p[0]) * (c[1] - p[1]) - (q[1] - p[1]) * (c[0] - p[0]) > 0.0
            }
        })
    };
    for (group, chain) in order_chains(&m_segs).into_iter().enumerate() {
        let chain = if side_h(chain[0], &triangles) { chain } else { reverse_chain(chain) };
        for seg in chain {
            let (p, q) = (nodes[seg[0]], nodes[seg[1]]);
            let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            let normal = [(q[1] - p[1]) / len, -(q[0] - p[0]) / len];
            interfaces.push(InterfaceSegment { nodes: seg, tag: InterfaceTag::GammaM, normal, group });
        }
    }
    let mut tapes = Vec::new();
    for (group, chain) in order_chains(&w_segs).into_iter().enumerate() {
        let first = chain[0][0];
        let last = chain[chain.len() - 1][1];
        let flip = if minus.contains(&last) || plus.contains(&first) {
            true
        } else if minus.contains(&first) || plus.contains(&last) {
            false
        } else {
            let (a, b) = (nodes[first], nodes[last]);
            (b[0], b[1]) < (a[0], a[1])
        };
        let chain = if flip { reverse_chain(chain) } else { chain };
        tapes.push(Tape {
            minus: chain[0][0],
            plus: chain[chain.len() - 1][1],
            thickness: map.tape_thickness,
        });
        for seg in chain {
            let (p, q) = (nodes[seg[0]], nodes[seg[1]]);
            let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            let normal = [-(q[1] - p[1]) / len, (q[0] - p[0]) / len];
            interfaces.push(InterfaceSegment { nodes: seg, tag: InterfaceTag::GammaW, normal, group });
        }
    }
    let delta = map.delta.unwrap_or_else(|| {
        interfaces
            .iter()
            .map(|s| {
                let (p, q) = (nodes[s.nodes[0]], nodes[s.nodes[1]]);
                ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    });
    Mesh2D::from_parts(nodes, triangles, boundary, interfaces, tapes, delta)
}

fn reverse_chain(chain: Vec<[usize; 2]>) -> Vec<[usize; 2]> {
    chain.into_iter().rev().map(|[a, b]| [b, a]).collect()
}

/// Splits unordered segments into connected polylines, each consistently
/// oriented. Open chains start at an endpoint; closed loops at their smallest node.
fn order_chains(segs: &[[usize; 2]]) -> Vec<Vec<[usize; 2]>> {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, s) in segs.iter().enumerate() {
        adj.entry(s[0]).or_default().push(k);
        adj.entry(s[1]).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut chains = Vec::new();
    let starts: Vec<usize> = adj
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(&n, _)| n)
        .chain(adj.keys().copied())
        .collect();
    for start in starts {
        let mut cur = start;
        let mut chain = Vec::new();
        while let Some(&k) = adj[&cur].iter().find(|&&k| !used[k]) {
            used[k] = true;
            let [a, b] = segs[k];
            let next = if a == cur { b } else { a };
            chain.push([cur, next]);
            cur = next;
        }
        if !chain.is_empty() {
            chains.push(chain);
        }
    }
    chains
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chains_open_and_closed() {
        let c = order_chains(&[[2, 1], [0, 1], [5, 6], [6, 7], [7, 5]]);
        assert_eq!(c[0], vec![[0, 1], [1, 2]]);
        assert_eq!(c[1].len(), 3);
        assert_eq!(c[1][0][0], c[1][2][1]);
    }
}
