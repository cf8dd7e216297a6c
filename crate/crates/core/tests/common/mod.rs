#![allow(dead_code)]

use fsed_core::fewshot::{ModelParams, ParamTensors};

/// Central finite differences of `loss` for every parameter entry,
/// step `h = 1e-5·(1+|θ|)`.
pub fn numeric_gradients<F>(params: &ModelParams, loss: F) -> ParamTensors
where
    F: Fn(&ModelParams) -> f64,
{
    let mut out = params.tensors.zeros_like();
    let mut work = params.clone();
    let names: Vec<&'static str> = params.tensors.iter().map(|(n, _)| n).collect();
    for name in names {
        let len = params.tensors.get(name).unwrap().len();
        for i in 0..len {
            let theta = params.tensors.get(name).unwrap().data[i];
            let h = 1e-5 * (1.0 + theta.abs());
            work.tensors.get_mut(name).unwrap().data[i] = theta + h;
            let up = loss(&work);
            work.tensors.get_mut(name).unwrap().data[i] = theta - h;
            let down = loss(&work);
            work.tensors.get_mut(name).unwrap().data[i] = theta;
            out.get_mut(name).unwrap().data[i] = (up - down) / (2.0 * h);
        }
    }
    out
}

/// Norms below this are compared absolutely.
pub const NORM_FLOOR: f64 = 1e-8;

/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂, NORM_FLOOR)`.
pub fn relative_error(a: &[f64], n: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn: f64 = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nn).max(NORM_FLOOR)
}

/// Worst per-tensor relative error with the offending tensor name.
pub fn worst_tensor_error(analytic: &ParamTensors, numeric: &ParamTensors) -> (&'static str, f64) {
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|((name, a), (_, n))| (name, relative_error(&a.data, &n.data)))
        .fold(("", 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
}

/// Every simple undirected path between `a` and `b`, checked for blocking by
/// `z` with the chain/fork/collider rules.
pub fn path_enumeration_separated(
    nodes: &[String],
    edges: &[(String, String)],
    xs: &[String],
    ys: &[String],
    z: &[String],
) -> bool {
    use std::collections::{BTreeMap, BTreeSet};
    let mut desc: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for n in nodes {
        let mut seen = BTreeSet::new();
        let mut stack = vec![n.as_str()];
        while let Some(v) = stack.pop() {
            for (p, c) in edges {
                if p == v && seen.insert(c.as_str()) {
                    stack.push(c.as_str());
                }
            }
        }
        desc.insert(n.as_str(), seen);
    }
    let zset: BTreeSet<&str> = z.iter().map(String::as_str).collect();
    let has_edge = |p: &str, c: &str| edges.iter().any(|(a, b)| a == p && b == c);
    let neighbours = |v: &str| -> Vec<&str> {
        nodes
            .iter()
            .map(String::as_str)
            .filter(|u| has_edge(v, u) || has_edge(u, v))
            .collect()
    };
    fn walk<'a>(
        path: &mut Vec<&'a str>,
        target: &str,
        out: &mut Vec<Vec<&'a str>>,
        neighbours: &dyn Fn(&str) -> Vec<&'a str>,
    ) {
        let last = *path.last().unwrap();
        if last == target {
            out.push(path.clone());
            return;
        }
        for n in neighbours(last) {
            if !path.contains(&n) {
                path.push(n);
                walk(path, target, out, neighbours);
                path.pop();
            }
        }
    }
    for x in xs {
        for y in ys {
            let mut paths = Vec::new();
            let mut path = vec![x.as_str()];
            walk(&mut path, y.as_str(), &mut paths, &neighbours);
            for p in paths {
                let mut open = true;
                for i in 1..p.len() - 1 {
                    let (a, m, b) = (p[i - 1], p[i], p[i + 1]);
                    let collider = has_edge(a, m) && has_edge(b, m);
                    if collider {
                        let active = zset.contains(m) || desc[m].iter().any(|d| zset.contains(d));
                        if !active {
                            open = false;
                        }
                    } else if zset.contains(m) {
                        open = false;
                    }
                }
                if open {
                    return false;
                }
            }
        }
    }
    true
}
