//! JSON graph and molecule files, and atomic report output.
//!
//! Graph files look like
//!
//! ```json
//! {"H": [[0.1, 0.2], [0.3, 0.4]], "A": [[0, 1.5], [1.5, 0]], "omega": [0.5, 0.5]}
//! ```
//!
//! with `omega` optional (uniform when absent). Molecule files are
//! `{"n": 3, "node_features": [[...], ...], "edges": [[0, 1], [1, 2]], "edge_features": [[...], ...]}`
//! with `edge_features` optional.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::conformer::{parse_xyz, Conformer, Molecule2D};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| schema(format!("missing field {name:?}")))
}

fn number(v: &Value, path: impl FnOnce() -> String) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(format!("{} is not a number", path())))
}

fn parse_vector(v: &Value, name: &str) -> Result<Array1<f64>> {
    let arr = v.as_array().ok_or_else(|| schema(format!("{name} must be an array of numbers")))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, || format!("{name}[{i}]")))
        .collect()
}

/// Rectangular matrix from an array of rows; `cols` fixes the row length,
/// otherwise row 0 sets it.
fn parse_matrix(v: &Value, name: &str, cols: Option<usize>) -> Result<Array2<f64>> {
    let rows = v.as_array().ok_or_else(|| schema(format!("{name} must be an array of rows")))?;
    let mut width = cols;
    let mut data = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| schema(format!("{name}[{i}] is not an array")))?;
        let expected = *width.get_or_insert(row.len());
        if row.len() != expected {
            return Err(schema(format!("{name}[{i}] has length {}, expected {expected}", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            data.push(number(x, || format!("{name}[{i}][{j}]"))?);
        }
    }
    Array2::from_shape_vec((rows.len(), width.unwrap_or(0)), data).map_err(|e| schema(e.to_string()))
}

/// `(H, A, omega)` as read, before validation.
pub type GraphParts = (Array2<f64>, Array2<f64>, Option<Array1<f64>>);

/// Raw `(H, A, ω)` from a graph object, without any graph-level checks.
pub fn graph_parts_from_json(v: &Value) -> Result<GraphParts> {
    let obj = v.as_object().ok_or_else(|| schema("graph must be a JSON object"))?;
    let h = parse_matrix(field(obj, "H")?, "H", None)?;
    let a_rows = field(obj, "A")?
        .as_array()
        .ok_or_else(|| schema("A must be an array of rows"))?
        .len();
    if a_rows != h.nrows() {
        return Err(schema(format!("A has {a_rows} rows, expected {}", h.nrows())));
    }
    let a = parse_matrix(field(obj, "A")?, "A", Some(h.nrows()))?;
    let omega = match obj.get("omega") {
        None | Some(Value::Null) => None,
        Some(w) => {
            let w = parse_vector(w, "omega")?;
            if w.len() != h.nrows() {
                return Err(schema(format!("omega has length {}, expected {}", w.len(), h.nrows())));
            }
            Some(w)
        }
    };
    Ok((h, a, omega))
}

pub fn graph_from_json(v: &Value) -> Result<AttributedGraph> {
    let (h, a, omega) = graph_parts_from_json(v)?;
    AttributedGraph::new(h, a, omega)
}

pub fn graph_to_json(g: &AttributedGraph) -> Value {
    let rows = |m: ndarray::ArrayView2<'_, f64>| -> Vec<Vec<f64>> { m.rows().into_iter().map(|r| r.to_vec()).collect() };
    json!({
        "H": rows(g.features()),
        "A": rows(g.structure()),
        "omega": g.weights().to_vec(),
    })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_graph_json(path: impl AsRef<Path>) -> Result<AttributedGraph> {
    let path = path.as_ref();
    graph_from_json(&read_json(path)?).map_err(|e| prefix(path, e))
}

/// Reads a graph file without graph-level validation, for diagnostics.
pub fn read_graph_parts(path: impl AsRef<Path>) -> Result<GraphParts> {
    let path = path.as_ref();
    graph_parts_from_json(&read_json(path)?).map_err(|e| prefix(path, e))
}

fn prefix(path: &Path, e: Error) -> Error {
    match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        Error::InvalidGraph(m) => Error::InvalidGraph(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn write_graph_json(path: impl AsRef<Path>, g: &AttributedGraph) -> Result<()> {
    write_json_atomic(path, &graph_to_json(g))
}

pub fn molecule_from_json(v: &Value) -> Result<Molecule2D> {
    let obj = v.as_object().ok_or_else(|| schema("molecule must be a JSON object"))?;
    let x = parse_matrix(field(obj, "node_features")?, "node_features", None)?;
    if let Some(n) = obj.get("n") {
        let n = n.as_u64().ok_or_else(|| schema("n must be a non-negative integer"))?;
        if n as usize != x.nrows() {
            return Err(schema(format!("n = {n} but node_features has {} rows", x.nrows())));
        }
    }
    let edges_v = field(obj, "edges")?
        .as_array()
        .ok_or_else(|| schema("edges must be an array of [i, j] pairs"))?;
    let mut edges = Vec::with_capacity(edges_v.len());
    for (k, e) in edges_v.iter().enumerate() {
        let pair = e
            .as_array()
            .filter(|p| p.len() == 2)
            .ok_or_else(|| schema(format!("edges[{k}] must be a pair [i, j]")))?;
        let idx = |t: usize| -> Result<usize> {
            pair[t]
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| schema(format!("edges[{k}][{t}] is not a node index")))
        };
        edges.push((idx(0)?, idx(1)?));
    }
    let edge_features = match obj.get("edge_features") {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_matrix(v, "edge_features", None)?),
    };
    Molecule2D::new(x, edges, edge_features)
}

pub fn read_molecule_json(path: impl AsRef<Path>) -> Result<Molecule2D> {
    let path = path.as_ref();
    molecule_from_json(&read_json(path)?).map_err(|e| prefix(path, e))
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<Vec<Conformer>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_xyz(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn persist(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline, written to a temporary file in the
/// target directory and renamed into place.
pub fn write_json_atomic<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    persist(path.as_ref(), &bytes)
}

pub fn write_report_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    write_json_atomic(path, report)
}

/// CSV with a header row, written atomically.
pub fn write_csv_atomic(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    persist(path.as_ref(), &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dir = tempfile::tempdir().unwrap();
        for n in 1..6 {
            let h = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() * 1e3 - 500.0);
            let a0 = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
            let a = &a0 + &a0.t();
            let mut w = Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.1);
            w /= w.sum();
            let g = AttributedGraph::new(h, a, Some(w)).unwrap();
            let p = dir.path().join(format!("g{n}.json"));
            write_graph_json(&p, &g).unwrap();
            let back = read_graph_json(&p).unwrap();
            for (x, y) in back.features().iter().zip(g.features().iter()) {
                assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
            assert_eq!(back.structure(), g.structure());
            assert_eq!(back.weights(), g.weights());
        }
    }

    #[test]
    fn missing_omega_is_uniform() {
        let v = json!({"H": [[1.0], [2.0]], "A": [[0.0, 1.0], [1.0, 0.0]]});
        assert_eq!(graph_from_json(&v).unwrap().weights(), array![0.5, 0.5]);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let v = json!({"H": [[1, 2, 3, 4], [1, 2, 3, 4], [1, 2, 3, 4], [1, 2]], "A": []});
        assert_eq!(
            graph_from_json(&v).unwrap_err().to_string(),
            "schema error: H[3] has length 2, expected 4"
        );
        let v = json!({"H": [[1.0]], "A": [["x"]]});
        assert!(graph_from_json(&v).unwrap_err().to_string().contains("A[0][0] is not a number"));
        let v = json!({"H": [[1.0]]});
        assert!(graph_from_json(&v).unwrap_err().to_string().contains("missing field \"A\""));
        let v = json!({"H": [[1.0], [2.0]], "A": [[0.0, 1.0], [1.0, 0.0]], "omega": [1.0]});
        assert!(graph_from_json(&v).unwrap_err().to_string().contains("omega has length 1, expected 2"));
    }

    #[test]
    fn asymmetric_structure_rejected_but_readable_raw() {
        let v = json!({"H": [[1.0], [2.0]], "A": [[0.0, 1.0], [2.0, 0.0]]});
        assert!(graph_from_json(&v).unwrap_err().to_string().contains("asymmetric"));
        let (h, a, w) = graph_parts_from_json(&v).unwrap();
        assert_eq!((h.nrows(), a.dim(), w), (2, (2, 2), None));
    }

    #[test]
    fn molecules() {
        let v = json!({"n": 3, "node_features": [[1.0], [0.0], [1.0]], "edges": [[0, 1], [1, 2]]});
        let m = molecule_from_json(&v).unwrap();
        assert_eq!(m.edges(), &[(0, 1), (1, 2)]);
        let v = json!({"n": 2, "node_features": [[1.0], [0.0], [1.0]], "edges": []});
        assert!(molecule_from_json(&v).is_err());
        let v = json!({"node_features": [[1.0], [0.0]], "edges": [[0, 1, 2]]});
        assert!(molecule_from_json(&v).unwrap_err().to_string().contains("edges[0]"));
    }

    #[test]
    fn atomic_writes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_report_json(&p, &json!({"a": 0.1})).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "{\n  \"a\": 0.1\n}\n");
        let c = dir.path().join("r.csv");
        write_csv_atomic(&c, &["k", "v"], &[vec!["1".into(), "2.5".into()]]).unwrap();
        assert_eq!(std::fs::read_to_string(&c).unwrap(), "k,v\n1,2.5\n");
        assert!(write_report_json(dir.path().join("missing/dir/x.json"), &json!({})).is_err());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
