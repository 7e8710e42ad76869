//! Plain-text model files.
//!
//! Linear model:
//!
//! ```text
//! # fanwatch-format v1
//! # model kind=lr reduction=bin-2500-mean
//! intercept 1234.5
//! coef g1_acc_x_mean 0.25
//! ...
//! ```
//!
//! Forest: the hyperparameters, the column names, then one `tree` line per
//! tree followed by its nodes in index order, `S <feature> <threshold>
//! <left> <right>` for splits and `L <value> <count>` for leaves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fanwatch_core::eval::FittedModel;
use fanwatch_core::forest::{ForestModel, ForestParams, Node, RegressionTree};
use fanwatch_core::linreg::LinearModel;

use crate::error::{CliError, CliResult};
use crate::formats::{fmt_value, Header, FORMAT_LINE};

/// A model plus the header describing how its training data was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub header: Header,
    pub model: FittedModel,
}

pub fn to_text(model: &FittedModel, header: &Header) -> String {
    let header = header.clone().with("kind", model.kind());
    let mut out = format!("{FORMAT_LINE}\n{}\n", header.line());
    match model {
        FittedModel::Linear(m) => {
            writeln!(out, "intercept {}", fmt_value(m.intercept())).unwrap();
            for (name, c) in m.column_names().iter().zip(m.coefficients()) {
                writeln!(out, "coef {name} {}", fmt_value(*c)).unwrap();
            }
        }
        FittedModel::Forest(m) => {
            let p = m.params();
            writeln!(out, "n_trees {}", p.n_trees).unwrap();
            writeln!(out, "row_fraction {}", fmt_value(p.row_fraction)).unwrap();
            writeln!(out, "feature_fraction {}", fmt_value(p.feature_fraction)).unwrap();
            writeln!(out, "min_leaf {}", p.min_leaf).unwrap();
            match p.max_depth {
                Some(d) => writeln!(out, "max_depth {d}").unwrap(),
                None => writeln!(out, "max_depth none").unwrap(),
            }
            writeln!(out, "seed {}", p.seed).unwrap();
            for name in m.column_names() {
                writeln!(out, "column {name}").unwrap();
            }
            for (i, tree) in m.trees().iter().enumerate() {
                writeln!(out, "tree {i} {}", tree.nodes().len()).unwrap();
                for node in tree.nodes() {
                    match *node {
                        Node::Split { feature, threshold, left, right } => {
                            writeln!(out, "S {feature} {} {left} {right}", fmt_value(threshold)).unwrap()
                        }
                        Node::Leaf { value, count } => writeln!(out, "L {} {count}", fmt_value(value)).unwrap(),
                    }
                }
            }
        }
    }
    out
}

pub fn write_model(path: &Path, model: &FittedModel, header: &Header) -> CliResult<()> {
    fs::write(path, to_text(model, header)).map_err(|e| CliError::io(path, e))
}

pub fn read_model(path: &Path) -> CliResult<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_text(&text).map_err(|e| match e {
        CliError::Data(msg) => CliError::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_words(&mut self) -> Option<Vec<&'a str>> {
        let (i, l) = self.inner.next()?;
        self.line = i + 1;
        Some(l.split_whitespace().collect())
    }

    fn err(&self, msg: &str) -> CliError {
        CliError::data(format!("line {}: {msg}", self.line))
    }

    fn keyed(&mut self, key: &str) -> CliResult<&'a str> {
        match self.next_words().as_deref() {
            Some([k, v]) if *k == key => Ok(v),
            _ => Err(self.err(&format!("expected `{key} <value>`"))),
        }
    }

    fn keyed_num<T: std::str::FromStr>(&mut self, key: &str) -> CliResult<T> {
        let raw = self.keyed(key)?;
        self.num(raw)
    }

    fn num<T: std::str::FromStr>(&self, raw: &str) -> CliResult<T> {
        raw.parse().map_err(|_| self.err(&format!("bad number {raw:?}")))
    }
}

pub fn from_text(text: &str) -> CliResult<ModelFile> {
    let mut head = text.lines();
    if head.next() != Some(FORMAT_LINE) {
        return Err(CliError::data("not a fanwatch v1 file"));
    }
    let header = Header::parse_line(head.next().unwrap_or(""))?;
    if header.kind != "model" {
        return Err(CliError::data(format!("expected a model file, found {}", header.kind)));
    }
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    lines.next_words();
    lines.next_words();
    let model = match header.require("kind")? {
        "lr" => {
            let intercept = lines.keyed_num("intercept")?;
            let mut names = Vec::new();
            let mut coefs = Vec::new();
            while let Some(words) = lines.next_words() {
                match words[..] {
                    [] => continue,
                    ["coef", name, v] => {
                        names.push(name.to_string());
                        coefs.push(lines.num(v)?);
                    }
                    _ => return Err(lines.err("expected `coef <name> <value>`")),
                }
            }
            FittedModel::Linear(LinearModel::new(coefs, intercept, names)?)
        }
        "rf" => {
            let n_trees = lines.keyed_num("n_trees")?;
            let row_fraction = lines.keyed_num("row_fraction")?;
            let feature_fraction = lines.keyed_num("feature_fraction")?;
            let min_leaf = lines.keyed_num("min_leaf")?;
            let max_depth = match lines.keyed("max_depth")? {
                "none" => None,
                d => Some(d.parse().map_err(|_| lines.err("bad max_depth"))?),
            };
            let seed = lines.keyed_num("seed")?;
            let params = ForestParams { n_trees, row_fraction, feature_fraction, min_leaf, max_depth, seed };
            let mut names = Vec::new();
            let mut trees = Vec::new();
            let mut pending: Option<(usize, Vec<Node>)> = None;
            fn close(pending: &mut Option<(usize, Vec<Node>)>, trees: &mut Vec<RegressionTree>, lines: &Lines) -> CliResult<()> {
                if let Some((n, nodes)) = pending.take() {
                    if nodes.len() != n {
                        return Err(lines.err(&format!("tree {} declares {n} nodes, has {}", trees.len(), nodes.len())));
                    }
                    trees.push(RegressionTree::from_nodes(nodes)?);
                }
                Ok(())
            }
            while let Some(words) = lines.next_words() {
                match words[..] {
                    [] => continue,
                    ["column", name] if pending.is_none() && trees.is_empty() => names.push(name.to_string()),
                    ["tree", _, n] => {
                        close(&mut pending, &mut trees, &lines)?;
                        pending = Some((lines.num(n)?, Vec::new()));
                    }
                    ["S", f, t, l, r] => {
                        let node = Node::Split {
                            feature: lines.num(f)?,
                            threshold: lines.num(t)?,
                            left: lines.num(l)?,
                            right: lines.num(r)?,
                        };
                        pending.as_mut().ok_or_else(|| lines.err("node outside a tree"))?.1.push(node);
                    }
                    ["L", v, c] => {
                        let node = Node::Leaf { value: lines.num(v)?, count: lines.num(c)? };
                        pending.as_mut().ok_or_else(|| lines.err("node outside a tree"))?.1.push(node);
                    }
                    _ => return Err(lines.err("unexpected line")),
                }
            }
            close(&mut pending, &mut trees, &lines)?;
            FittedModel::Forest(ForestModel::from_trees(trees, params, names)?)
        }
        other => return Err(CliError::data(format!("unknown model kind {other:?}"))),
    };
    let mut header = header;
    header.fields.remove("kind");
    Ok(ModelFile { header, model })
}
