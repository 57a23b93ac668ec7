use std::fs;
use std::io::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, Normal};

use super::MlpAggregator;
use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Trainable parameters: initial user/item embeddings and, for the mlp
/// aggregation, the aggregator weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub users: Array2<f64>,
    pub items: Array2<f64>,
    pub aggregator: Option<MlpAggregator>,
}

impl EmbeddingState {
    /// I.i.d. `N(0, std^2)` entries from `seed`.
    pub fn init(
        num_users: usize,
        num_items: usize,
        dim: usize,
        std: f64,
        seed: u64,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, std)
            .map_err(|e| Error::config("propagation::EmbeddingState::init", e.to_string()))?;
        let mut rng = rng::seeded(seed, streams::INIT);
        let users = Array2::from_shape_simple_fn((num_users, dim), || normal.sample(&mut rng));
        let items = Array2::from_shape_simple_fn((num_items, dim), || normal.sample(&mut rng));
        Ok(Self {
            users,
            items,
            aggregator: None,
        })
    }

    pub fn with_aggregator(mut self, aggregator: MlpAggregator) -> Self {
        self.aggregator = Some(aggregator);
        self
    }

    pub fn dim(&self) -> usize {
        self.users.ncols()
    }

    pub fn is_finite(&self) -> bool {
        let agg_ok = self.aggregator.as_ref().is_none_or(|a| {
            a.weight.iter().all(|x| x.is_finite()) && a.bias.iter().all(|x| x.is_finite())
        });
        agg_ok
            && self.users.iter().all(|x| x.is_finite())
            && self.items.iter().all(|x| x.is_finite())
    }

    /// Writes the snapshot: a text header naming each matrix and its shape,
    /// a `data` line, then the matrices as row-major little-endian `f64`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut blocks: Vec<(&str, usize, usize, Vec<f64>)> = vec![
            (
                "users",
                self.users.nrows(),
                self.users.ncols(),
                self.users.iter().copied().collect(),
            ),
            (
                "items",
                self.items.nrows(),
                self.items.ncols(),
                self.items.iter().copied().collect(),
            ),
        ];
        if let Some(agg) = &self.aggregator {
            blocks.push((
                "agg_weight",
                agg.weight.nrows(),
                agg.weight.ncols(),
                agg.weight.iter().copied().collect(),
            ));
            blocks.push(("agg_bias", 1, agg.bias.len(), agg.bias.to_vec()));
        }
        write_blocks(path, "burger-embeddings 1", &blocks)
    }

    pub fn load(path: &Path) -> Result<Self> {
        const OP: &str = "propagation::EmbeddingState::load";
        if !path.exists() {
            return Err(Error::MissingSnapshot {
                op: OP,
                path: path.to_owned(),
            });
        }
        let blocks = read_blocks(OP, path, "burger-embeddings 1")?;
        let find = |name: &str| blocks.iter().find(|b| b.0 == name);
        let matrix = |name: &str| -> Result<Option<Array2<f64>>> {
            find(name)
                .map(|(_, r, c, data)| {
                    Array2::from_shape_vec((*r, *c), data.clone())
                        .map_err(|e| Error::input(OP, e.to_string()))
                })
                .transpose()
        };
        let users = matrix("users")?.ok_or_else(|| truncated(OP, path, "users"))?;
        let items = matrix("items")?.ok_or_else(|| truncated(OP, path, "items"))?;
        let aggregator = match (matrix("agg_weight")?, find("agg_bias")) {
            (Some(weight), Some((_, _, _, bias))) => Some(MlpAggregator {
                weight,
                bias: Array1::from(bias.clone()),
            }),
            _ => None,
        };
        Ok(Self {
            users,
            items,
            aggregator,
        })
    }
}

fn truncated(op: &'static str, path: &Path, what: &str) -> Error {
    Error::MissingSnapshot {
        op,
        path: path.join(format!("<{what}>")),
    }
}

/// Debug dump of per-layer matrices in the snapshot layout; blocks are named
/// `layer_<k>`.
pub fn write_matrix_dump(path: &Path, layers: &[Array2<f64>]) -> Result<()> {
    let names: Vec<String> = (0..layers.len()).map(|k| format!("layer_{k}")).collect();
    let blocks: Vec<(&str, usize, usize, Vec<f64>)> = layers
        .iter()
        .zip(&names)
        .map(|(m, name)| {
            (
                name.as_str(),
                m.nrows(),
                m.ncols(),
                m.iter().copied().collect(),
            )
        })
        .collect();
    write_blocks(path, "burger-layers 1", &blocks)
}

pub fn read_matrix_dump(path: &Path) -> Result<Vec<Array2<f64>>> {
    const OP: &str = "propagation::read_matrix_dump";
    read_blocks(OP, path, "burger-layers 1")?
        .into_iter()
        .map(|(_, r, c, data)| {
            Array2::from_shape_vec((r, c), data).map_err(|e| Error::input(OP, e.to_string()))
        })
        .collect()
}

fn write_blocks(path: &Path, magic: &str, blocks: &[(&str, usize, usize, Vec<f64>)]) -> Result<()> {
    const OP: &str = "propagation::write_blocks";
    let mut out = Vec::new();
    writeln!(out, "{magic}").expect("write to vec");
    for (name, r, c, _) in blocks {
        writeln!(out, "matrix {name} {r} {c}").expect("write to vec");
    }
    writeln!(out, "data").expect("write to vec");
    for (_, _, _, data) in blocks {
        for x in data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(OP, path, e))
}

type Block = (String, usize, usize, Vec<f64>);

fn read_blocks(op: &'static str, path: &Path, magic: &str) -> Result<Vec<Block>> {
    let bytes = fs::read(path).map_err(|e| Error::io(op, path, e))?;
    let mut cursor = 0;
    let next_line = |cursor: &mut usize| -> Option<String> {
        let end = bytes[*cursor..].iter().position(|&b| b == b'\n')? + *cursor;
        let line = String::from_utf8(bytes[*cursor..end].to_vec()).ok()?;
        *cursor = end + 1;
        Some(line)
    };
    let bad_header = |line: usize, msg: &str| Error::Parse {
        op,
        path: path.to_owned(),
        line,
        msg: msg.to_owned(),
    };
    if next_line(&mut cursor).as_deref() != Some(magic) {
        return Err(bad_header(1, "unrecognized header"));
    }
    let mut shapes = Vec::new();
    let mut line_no = 1;
    loop {
        line_no += 1;
        let line =
            next_line(&mut cursor).ok_or_else(|| bad_header(line_no, "header ends early"))?;
        if line == "data" {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["matrix", name, r, c] => {
                let (r, c) = r
                    .parse()
                    .ok()
                    .zip(c.parse().ok())
                    .ok_or_else(|| bad_header(line_no, "bad shape"))?;
                shapes.push((name.to_string(), r, c));
            }
            _ => {
                return Err(bad_header(
                    line_no,
                    "expected `matrix <name> <rows> <cols>`",
                ))
            }
        }
    }
    let mut blocks = Vec::with_capacity(shapes.len());
    for (name, r, c) in shapes {
        let len = r * c * 8;
        if cursor + len > bytes.len() {
            return Err(truncated(op, path, &name));
        }
        let data = bytes[cursor..cursor + len]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        cursor += len;
        blocks.push((name, r, c, data));
    }
    Ok(blocks)
}
