use std::fmt::Write as _;

use super::{LinalgError, SparseMatrix, TripletBuilder};

/// MatrixMarket coordinate format. Symmetric matrices are written as their
/// lower triangle with the `symmetric` qualifier.
pub fn write_matrix_market(m: &SparseMatrix) -> String {
    let mut s = String::new();
    let sym = m.symmetric();
    let kind = if sym { "symmetric" } else { "general" };
    let _ = writeln!(s, "%%MatrixMarket matrix coordinate real {kind}");
    let entries: Vec<(usize, usize, f64)> = (0..m.nrows())
        .flat_map(|i| m.row(i).map(move |(j, v)| (i, j, v)))
        .filter(|&(i, j, _)| !sym || j <= i)
        .collect();
    let _ = writeln!(s, "{} {} {}", m.nrows(), m.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    s
}

pub fn read_matrix_market(text: &str) -> Result<SparseMatrix, LinalgError> {
    let perr = |m: &str| LinalgError::Parse(m.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| perr("empty file"))?.to_lowercase();
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(perr("unsupported header"));
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(perr("only real matrices are supported"));
    }
    let sym = match h[4] {
        "general" => false,
        "symmetric" => true,
        _ => return Err(perr("unsupported symmetry")),
    };
    let mut lines = lines.filter(|l| !l.trim().is_empty() && !l.starts_with('%'));
    let size: Vec<usize> = lines
        .next()
        .ok_or_else(|| perr("missing size line"))?
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| perr("bad size line")))
        .collect::<Result<_, _>>()?;
    if size.len() != 3 {
        return Err(perr("bad size line"));
    }
    let mut b = TripletBuilder::with_capacity(size[0], size[1], size[2] * if sym { 2 } else { 1 });
    for _ in 0..size[2] {
        let l = lines.next().ok_or_else(|| perr("missing entries"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(perr("bad entry"));
        }
        let i: usize = f[0].parse().map_err(|_| perr("bad row"))?;
        let j: usize = f[1].parse().map_err(|_| perr("bad column"))?;
        let v: f64 = f[2].parse().map_err(|_| perr("bad value"))?;
        if i == 0 || j == 0 || i > size[0] || j > size[1] {
            return Err(perr("index out of range"));
        }
        if sym {
            b.add_sym(i - 1, j - 1, v);
        } else {
            b.add(i - 1, j - 1, v);
        }
    }
    let m = b.build();
    Ok(if sym { m.with_symmetric(true) } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut b = TripletBuilder::new(3, 3);
        b.add(0, 0, 2.0);
        b.add_sym(2, 0, -0.1);
        b.add(1, 1, 1.0 / 3.0);
        let m = b.build().with_symmetric(true);
        let text = write_matrix_market(&m);
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
        assert_eq!(read_matrix_market(&text).unwrap(), m);
    }
}
