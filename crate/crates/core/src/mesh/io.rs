use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{bbox_diagonal, MeshReport, SurfaceMesh};
use crate::output::fmt17;
use crate::{Error, Result, Vec3};

/// Relative tolerance (times the bounding-box diagonal) for merging STL vertices.
pub const WELD_TOL_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    AsciiStl,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "stl" => Some(MeshFormat::AsciiStl),
            _ => None,
        }
    }
}

/// Parses and validates mesh text in the declared format.
pub fn load_mesh(text: &str, format: MeshFormat) -> Result<(SurfaceMesh, MeshReport)> {
    let (vertices, triangles) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::AsciiStl => parse_stl(text)?,
    };
    SurfaceMesh::new(vertices, triangles)
}

/// Whitespace-separated tokens with their 1-based line numbers, `#` comments stripped.
fn tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().flat_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        line.split_whitespace().map(move |t| (i + 1, t))
    })
}

struct Tokens<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: std::iter::Peekable<I>,
    last_line: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Tokens<'a, I> {
    fn new(inner: I) -> Self {
        Tokens {
            inner: inner.peekable(),
            last_line: 1,
        }
    }

    fn next_raw(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((line, tok)) => {
                self.last_line = line;
                Ok((line, tok))
            }
            None => Err(Error::Parse {
                line: self.last_line,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    }

    fn next<T: FromStr>(&mut self, what: &str) -> Result<T> {
        let (line, tok) = self.next_raw(what)?;
        tok.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected {what}, found {tok:?}"),
        })
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let (line, tok) = self.next_raw(keyword)?;
        if tok.eq_ignore_ascii_case(keyword) {
            Ok(())
        } else {
            Err(Error::Parse {
                line,
                message: format!("expected {keyword:?}, found {tok:?}"),
            })
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|&(_, t)| t)
    }

    fn skip_line(&mut self, line: usize) {
        while matches!(self.inner.peek(), Some(&(l, _)) if l == line) {
            self.inner.next();
        }
    }
}

/// Parses an ASCII OFF file with triangular faces (0-based indices).
pub fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut tk = Tokens::new(tokens(text));
    let (line, head) = tk.next_raw("OFF header")?;
    if head != "OFF" {
        return Err(Error::Parse {
            line,
            message: format!("expected \"OFF\" header, found {head:?}"),
        });
    }
    let nv: usize = tk.next("vertex count")?;
    let nf: usize = tk.next("face count")?;
    let _ne: usize = tk.next("edge count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = tk.next("x coordinate")?;
        let y = tk.next("y coordinate")?;
        let z = tk.next("z coordinate")?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k: usize = tk.next("face vertex count")?;
        let line = tk.last_line;
        if k != 3 {
            return Err(Error::Parse {
                line,
                message: format!("only triangular faces are supported, found {k}-gon"),
            });
        }
        faces.push([
            tk.next("vertex index")?,
            tk.next("vertex index")?,
            tk.next("vertex index")?,
        ]);
    }
    if let Some(extra) = tk.peek() {
        let line = tk.inner.peek().map(|&(l, _)| l).unwrap_or(tk.last_line);
        return Err(Error::Parse {
            line,
            message: format!("trailing content {extra:?} after {nf} faces"),
        });
    }
    Ok((vertices, faces))
}

/// Serializes a mesh as OFF with 17-significant-digit coordinates.
pub fn write_off(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} 0", mesh.vertices().len(), mesh.n_faces());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", fmt17(v.x), fmt17(v.y), fmt17(v.z));
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    s
}

/// Parses ASCII STL and welds coincident vertices to recover connectivity.
///
/// Stored facet normals are ignored.
pub fn parse_stl(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut tk = Tokens::new(
        text.lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t))),
    );
    let (line, head) = tk.next_raw("solid")?;
    if !head.eq_ignore_ascii_case("solid") {
        return Err(Error::Parse {
            line,
            message: format!("expected \"solid\", found {head:?}"),
        });
    }
    tk.skip_line(line);

    let mut soup: Vec<[Vec3; 3]> = Vec::new();
    loop {
        let (line, tok) = tk.next_raw("facet or endsolid")?;
        if tok.eq_ignore_ascii_case("endsolid") {
            break;
        }
        if !tok.eq_ignore_ascii_case("facet") {
            return Err(Error::Parse {
                line,
                message: format!("expected \"facet\", found {tok:?}"),
            });
        }
        tk.expect("normal")?;
        for _ in 0..3 {
            let _: f64 = tk.next("normal component")?;
        }
        tk.expect("outer")?;
        tk.expect("loop")?;
        let mut tri = [Vec3::zeros(); 3];
        for v in &mut tri {
            tk.expect("vertex")?;
            *v = Vec3::new(tk.next("x")?, tk.next("y")?, tk.next("z")?);
        }
        tk.expect("endloop")?;
        tk.expect("endfacet")?;
        soup.push(tri);
    }
    Ok(weld(&soup))
}

/// Merges vertices closer than `WELD_TOL_REL × bbox diagonal` using a hash grid.
fn weld(soup: &[[Vec3; 3]]) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let all: Vec<Vec3> = soup.iter().flatten().copied().collect();
    let tol = WELD_TOL_REL * bbox_diagonal(&all);
    let cell = if tol > 0.0 { tol } else { 1.0 };
    let key = |p: &Vec3| {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    };

    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut find_or_insert = |p: Vec3| -> usize {
        let k = key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&id) = ids.iter().find(|&&id| (vertices[id] - p).norm() <= tol)
                        {
                            return id;
                        }
                    }
                }
            }
        }
        vertices.push(p);
        grid.entry(k).or_default().push(vertices.len() - 1);
        vertices.len() - 1
    };
    let triangles = soup
        .iter()
        .map(|t| {
            [
                find_or_insert(t[0]),
                find_or_insert(t[1]),
                find_or_insert(t[2]),
            ]
        })
        .collect();
    (vertices, triangles)
}
