use std::collections::{HashMap, VecDeque};

use crate::model::LensIndex;

/// DBSCAN over micro-lens indices with the Euclidean metric. `min_pts`
/// counts the point itself. Noise is discarded; each cluster is sorted and
/// clusters are ordered by their smallest member, so the result does not
/// depend on the input order.
pub fn cluster_lenses(indices: &[LensIndex], eps: f64, min_pts: usize) -> Vec<Vec<LensIndex>> {
    let mut pts: Vec<LensIndex> = indices.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let lookup: HashMap<LensIndex, usize> = pts.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let reach = eps.max(0.0).floor() as isize;
    let neighbors = |p: LensIndex| -> Vec<usize> {
        let mut out = Vec::new();
        for dj in -reach..=reach {
            for di in -reach..=reach {
                if ((di * di + dj * dj) as f64).sqrt() > eps {
                    continue;
                }
                let (i, j) = (p.0 as isize + di, p.1 as isize + dj);
                if i < 0 || j < 0 {
                    continue;
                }
                if let Some(&k) = lookup.get(&(i as usize, j as usize)) {
                    out.push(k);
                }
            }
        }
        out
    };

    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSEEN; pts.len()];
    let mut clusters: Vec<Vec<LensIndex>> = Vec::new();
    for k in 0..pts.len() {
        if label[k] != UNSEEN {
            continue;
        }
        let nb = neighbors(pts[k]);
        if nb.len() < min_pts {
            label[k] = NOISE;
            continue;
        }
        let id = clusters.len();
        clusters.push(Vec::new());
        label[k] = id;
        let mut queue: VecDeque<usize> = nb.into_iter().collect();
        while let Some(q) = queue.pop_front() {
            if label[q] == NOISE {
                label[q] = id;
            }
            if label[q] != UNSEEN {
                continue;
            }
            label[q] = id;
            let nq = neighbors(pts[q]);
            if nq.len() >= min_pts {
                queue.extend(nq);
            }
        }
    }
    for (k, &l) in label.iter().enumerate() {
        if l < clusters.len() {
            clusters[l].push(pts[k]);
        }
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}
