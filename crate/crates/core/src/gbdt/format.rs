//! Versioned, line-oriented model file. Floats use Rust's shortest
//! round-trip formatting, which is identical on every platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{GbdtParams, Node, Tree, WealthModel};
use crate::country::CountryCode;
use crate::error::{Error, Result};
use crate::ingest::{Moments, NormStats};

const FORMAT_TAG: &str = "wealthmap-gbdt v1";

impl WealthModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let _ = writeln!(out, "{FORMAT_TAG}");
        let _ = writeln!(out, "max_depth {}", p.max_depth);
        let _ = writeln!(out, "min_child_weight {}", p.min_child_weight);
        let _ = writeln!(out, "n_trees {}", p.n_trees);
        let _ = writeln!(out, "learning_rate {}", p.learning_rate);
        let _ = writeln!(out, "seed {}", p.seed);
        let _ = writeln!(out, "rows {}", self.n_rows);
        let _ = writeln!(out, "base_score {}", self.base_score);
        let _ = writeln!(out, "features {}", self.feature_names.len());
        for name in &self.feature_names {
            let _ = writeln!(out, "{name}");
        }
        match &self.norm_stats {
            None => {
                let _ = writeln!(out, "norm_stats 0");
            }
            Some(stats) => {
                let _ = writeln!(out, "norm_stats {}", stats.by_country.len());
                for (country, moments) in &stats.by_country {
                    let body: Vec<String> = moments.iter().map(|m| format!("{}:{}", m.mean, m.std)).collect();
                    let _ = writeln!(out, "{country} {}", body.join(","));
                }
            }
        }
        for (i, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "tree {i} {}", tree.nodes().len());
            for node in tree.nodes() {
                match *node {
                    Node::Split {
                        feature,
                        threshold,
                        gain,
                        ..
                    } => {
                        let _ = writeln!(out, "split {feature} {threshold} {gain}");
                    }
                    Node::Leaf { value, weight } => {
                        let _ = writeln!(out, "leaf {value} {weight}");
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
            current: 0,
        };
        if lines.next()? != FORMAT_TAG {
            return Err(lines.error("missing or unsupported model format tag"));
        }
        let params = GbdtParams {
            max_depth: lines.keyed("max_depth")?,
            min_child_weight: lines.keyed("min_child_weight")?,
            n_trees: lines.keyed("n_trees")?,
            learning_rate: lines.keyed("learning_rate")?,
            seed: lines.keyed("seed")?,
        };
        let n_rows = lines.keyed("rows")?;
        let base_score = lines.keyed("base_score")?;
        let n_features: usize = lines.keyed("features")?;
        let feature_names = (0..n_features)
            .map(|_| lines.next().map(str::to_string))
            .collect::<Result<Vec<_>>>()?;
        let n_countries: usize = lines.keyed("norm_stats")?;
        let norm_stats = if n_countries == 0 {
            None
        } else {
            let mut by_country = BTreeMap::new();
            for _ in 0..n_countries {
                let line = lines.next()?;
                let (code, body) = line
                    .split_once(' ')
                    .ok_or_else(|| lines.error("expected `<country> <mean:std,...>`"))?;
                let country = CountryCode::new(code).map_err(|e| lines.error(&e.to_string()))?;
                let moments = body
                    .split(',')
                    .map(|pair| {
                        let (m, s) = pair.split_once(':')?;
                        Some(Moments {
                            mean: m.parse().ok()?,
                            std: s.parse().ok()?,
                        })
                    })
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| lines.error("malformed normalization moments"))?;
                if moments.len() != n_features {
                    return Err(lines.error("moment count differs from feature count"));
                }
                by_country.insert(country, moments);
            }
            Some(NormStats {
                feature_names: feature_names.clone(),
                by_country,
            })
        };

        let mut trees = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let header = lines.next()?;
            let parts: Vec<&str> = header.split(' ').collect();
            if parts.len() != 3 || parts[0] != "tree" || parts[1] != t.to_string() {
                return Err(lines.error(&format!("expected `tree {t} <nodes>`")));
            }
            let count: usize = parts[2].parse().map_err(|_| lines.error("bad node count"))?;
            let mut raw = Vec::with_capacity(count);
            for _ in 0..count {
                let line = lines.next()?;
                let f: Vec<&str> = line.split(' ').collect();
                let num = |s: &str| s.parse::<f64>().ok();
                let node = match f.as_slice() {
                    ["split", feature, threshold, gain] => Some(RawNode::Split {
                        feature: feature.parse().map_err(|_| lines.error("bad feature index"))?,
                        threshold: num(threshold).ok_or_else(|| lines.error("bad threshold"))?,
                        gain: num(gain).ok_or_else(|| lines.error("bad gain"))?,
                    }),
                    ["leaf", value, weight] => Some(RawNode::Leaf {
                        value: num(value).ok_or_else(|| lines.error("bad leaf value"))?,
                        weight: num(weight).ok_or_else(|| lines.error("bad leaf weight"))?,
                    }),
                    _ => None,
                };
                raw.push(node.ok_or_else(|| lines.error("expected `split` or `leaf` row"))?);
            }
            trees.push(link_preorder(&raw).ok_or_else(|| lines.error("tree nodes do not form a binary tree"))?);
        }
        Ok(WealthModel {
            params,
            base_score,
            trees,
            feature_names,
            norm_stats,
            n_rows,
        })
    }
}

enum RawNode {
    Split { feature: usize, threshold: f64, gain: f64 },
    Leaf { value: f64, weight: f64 },
}

/// Rebuilds child links from a preorder listing.
fn link_preorder(raw: &[RawNode]) -> Option<Tree> {
    fn walk(raw: &[RawNode], pos: &mut usize, out: &mut Vec<Node>) -> Option<usize> {
        let i = *pos;
        let node = raw.get(i)?;
        *pos += 1;
        out.push(Node::Leaf {
            value: 0.0,
            weight: 0.0,
        });
        out[i] = match *node {
            RawNode::Leaf { value, weight } => Node::Leaf { value, weight },
            RawNode::Split {
                feature,
                threshold,
                gain,
            } => {
                let left = walk(raw, pos, out)?;
                let right = walk(raw, pos, out)?;
                Node::Split {
                    feature,
                    threshold,
                    gain,
                    left,
                    right,
                }
            }
        };
        Some(i)
    }
    let mut out = Vec::with_capacity(raw.len());
    let mut pos = 0;
    walk(raw, &mut pos, &mut out)?;
    if pos != raw.len() {
        return None;
    }
    Tree::from_nodes(out)
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    current: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn next(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, line)) => {
                self.current = i + 1;
                Ok(line)
            }
            None => Err(Error::ModelFormat {
                line: self.current + 1,
                message: "unexpected end of model file".into(),
            }),
        }
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| self.error(&format!("expected `{key} <value>`")))
    }

    fn error(&self, message: &str) -> Error {
        Error::ModelFormat {
            line: self.current,
            message: message.to_string(),
        }
    }
}
