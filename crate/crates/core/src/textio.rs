//! Plain-text exchange formats.
//!
//! Edge lists hold one `x y c` triple per line, vertex functions one `x value`
//! pair per line. Blank lines and lines starting with `#` are ignored. Floats
//! are written in shortest round-trip form, so reading back what was written
//! reproduces every value bit for bit.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::network::{ConductanceNetwork, VertexFunction};
use crate::VertexId;

fn data_lines(r: impl BufRead) -> impl Iterator<Item = Result<(usize, String)>> {
    r.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(l) => {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse(format!("line {line}: missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {what} `{tok}`")))
}

pub fn read_edge_list(r: impl BufRead) -> Result<Vec<(VertexId, VertexId, f64)>> {
    data_lines(r)
        .map(|item| {
            let (n, line) = item?;
            let mut it = line.split_whitespace();
            let x = field(it.next(), n, "vertex")?;
            let y = field(it.next(), n, "vertex")?;
            let c = field(it.next(), n, "conductance")?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("line {n}: trailing fields")));
            }
            Ok((x, y, c))
        })
        .collect()
}

pub fn write_edge_list(mut w: impl Write, edges: &[(VertexId, VertexId, f64)]) -> Result<()> {
    for (x, y, c) in edges {
        writeln!(w, "{x} {y} {c:?}")?;
    }
    Ok(())
}

pub fn write_network(w: impl Write, net: &ConductanceNetwork) -> Result<()> {
    let edges: Vec<_> = net
        .edges()
        .map(|(i, j, c)| (net.ids()[i], net.ids()[j], c))
        .collect();
    write_edge_list(w, &edges)
}

/// Reads a network whose vertex ids are exactly `0..n` for the largest id seen.
pub fn read_network(r: impl BufRead) -> Result<ConductanceNetwork> {
    let edges = read_edge_list(r)?;
    let n = edges.iter().map(|&(x, y, _)| x.max(y) + 1).max().unwrap_or(0);
    ConductanceNetwork::new((0..n).collect(), edges)
}

pub fn read_vertex_function(r: impl BufRead) -> Result<Vec<(VertexId, f64)>> {
    data_lines(r)
        .map(|item| {
            let (n, line) = item?;
            let mut it = line.split_whitespace();
            let x = field(it.next(), n, "vertex")?;
            let v = field(it.next(), n, "value")?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("line {n}: trailing fields")));
            }
            Ok((x, v))
        })
        .collect()
}

/// Reads a function given at every vertex `0..len` exactly once.
pub fn read_dense_function(r: impl BufRead, len: usize) -> Result<VertexFunction> {
    let mut values = vec![None; len];
    for (x, v) in read_vertex_function(r)? {
        let slot = values.get_mut(x).ok_or(Error::UnknownVertex(x))?;
        if slot.replace(v).is_some() {
            return Err(Error::Parse(format!("vertex {x} given twice")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(x, v)| v.ok_or_else(|| Error::Parse(format!("no value for vertex {x}"))))
        .collect::<Result<_>>()?;
    Ok(VertexFunction(values))
}

pub fn write_vertex_function(mut w: impl Write, f: &[f64]) -> Result<()> {
    for (x, v) in f.iter().enumerate() {
        writeln!(w, "{x} {v:?}")?;
    }
    Ok(())
}
