//! Two-dimensional placement of the displayed entities and the edge set.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::index::SemanticIndex;
use crate::network::{Edge, Node};
use crate::query::ScoredEntity;

/// Classical (Torgerson) multidimensional scaling into the plane.
///
/// `distances` is a row-major `n x n` matrix. The squared distances are
/// double-centered and the two leading eigenpairs give the coordinates,
/// `eigenvector * sqrt(eigenvalue)`. Axes with non-positive eigenvalues
/// collapse to zero. Each axis is oriented so that its largest-magnitude
/// coordinate is positive, and the result is centered at the origin.
pub fn mds_2d(distances: &[f64], n: usize) -> Result<Vec<[f64; 2]>> {
    if n == 0 {
        return Err(Error::DegenerateInput);
    }
    validate(distances, n)?;
    if n == 1 {
        return Ok(vec![[0.0, 0.0]]);
    }
    if n == 2 {
        let h = distances[1] / 2.0;
        return Ok(vec![[h, 0.0], [-h, 0.0]]);
    }

    let mut b: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let row_means: Vec<f64> = b.chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -0.5 * (b[i * n + j] - row_means[i] - row_means[j] + grand);
        }
    }

    let (values, vectors) = jacobi_eigen(b, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| values[c].total_cmp(&values[a]));
    let top = values[order[0]].max(0.0);

    let mut coords = vec![[0.0f64; 2]; n];
    for (axis, &col) in order.iter().take(2).enumerate() {
        let lambda = values[col];
        if lambda <= top * 1e-12 || lambda <= 0.0 {
            continue;
        }
        let scale = lambda.sqrt();
        for (i, c) in coords.iter_mut().enumerate() {
            c[axis] = vectors[i * n + col] * scale;
        }
    }

    for axis in 0..2 {
        let mean = coords.iter().map(|c| c[axis]).sum::<f64>() / n as f64;
        coords.iter_mut().for_each(|c| c[axis] -= mean);
        let mut pivot = 0;
        for i in 1..n {
            if coords[i][axis].abs() > coords[pivot][axis].abs() {
                pivot = i;
            }
        }
        if coords[pivot][axis] < 0.0 {
            coords.iter_mut().for_each(|c| c[axis] = -c[axis]);
        }
    }
    Ok(coords)
}

fn validate(d: &[f64], n: usize) -> Result<()> {
    if d.len() != n * n {
        return Err(Error::InvalidDistances(format!("{} values for a {n}x{n} matrix", d.len())));
    }
    let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        if d[i * n + i].abs() > 1e-12 * scale {
            return Err(Error::InvalidDistances(format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = d[i * n + j];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistances(format!("entry ({i},{j}) = {v}")));
            }
            if (v - d[j * n + i]).abs() > 1e-9 * scale {
                return Err(Error::InvalidDistances(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues and the row-major eigenvector matrix (column `k` is
/// the eigenvector of eigenvalue `k`).
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        if off <= total * 1e-30 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// Kruskal stress-1 of a layout against target distances.
pub fn stress(distances: &[f64], coords: &[[f64; 2]]) -> f64 {
    let n = coords.len();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = distances[i * n + j];
            let e = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            num += (d - e).powi(2);
            den += d * d;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

/// Positions query and ranked entities and connects them.
///
/// Node order is query entities first, then `ranked`. Each node links to its
/// `edges_per_node` most similar co-displayed nodes; each non-query node also
/// links to its most similar query node. Edges are undirected, stored once
/// with `source < target`, and sorted.
pub fn build_network(
    query: &[ScoredEntity],
    ranked: &[ScoredEntity],
    index: &SemanticIndex,
    edges_per_node: usize,
) -> Result<(Vec<Node>, Vec<Edge>)> {
    let members: Vec<(&ScoredEntity, bool)> = query
        .iter()
        .map(|s| (s, true))
        .chain(ranked.iter().map(|s| (s, false)))
        .collect();
    let n = members.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }

    let mut sim = vec![1.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let c = index.cosine_at(members[i].0.position, members[j].0.position);
            sim[i * n + j] = c;
            sim[j * n + i] = c;
        }
    }
    let dist: Vec<f64> = (0..n * n)
        .map(|k| if k / n == k % n { 0.0 } else { (1.0 - sim[k]).clamp(0.0, 2.0) })
        .collect();
    let coords = mds_2d(&dist, n)?;

    let mut pairs = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| sim[i * n + b].total_cmp(&sim[i * n + a]).then(a.cmp(&b)));
        for &j in others.iter().take(edges_per_node) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let query_nodes: Vec<usize> = (0..n).filter(|&i| members[i].1).collect();
    if !query_nodes.is_empty() {
        for j in (0..n).filter(|&j| !members[j].1) {
            let best = query_nodes
                .iter()
                .copied()
                .reduce(|a, b| if sim[j * n + b] > sim[j * n + a] { b } else { a })
                .expect("non-empty");
            pairs.insert((best.min(j), best.max(j)));
        }
    }

    let nodes = members
        .iter()
        .zip(&coords)
        .map(|((s, is_query), c)| Node {
            id: s.entity.to_string(),
            kind: s.entity.kind,
            label: s.entity.key.clone(),
            x: c[0],
            y: c[1],
            similarity: s.similarity,
            specificity: s.specificity,
            is_query: *is_query,
        })
        .collect();
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Edge { source: a, target: b, weight: sim[a * n + b] })
        .collect();
    Ok((nodes, edges))
}
