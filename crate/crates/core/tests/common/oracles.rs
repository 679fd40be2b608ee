//! Independent brute-force oracles for the clustering functions.

pub fn brute_force_min_sse(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        if (0..k).all(|c| labels.contains(&c)) {
            let mut total = 0.0;
            for c in 0..k {
                let members: Vec<&Vec<f64>> = (0..n).filter(|&i| labels[i] == c).map(|i| &points[i]).collect();
                let dim = points[0].len();
                let mean: Vec<f64> = (0..dim)
                    .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                    .collect();
                total += members
                    .iter()
                    .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .sum::<f64>();
            }
            best = best.min(total);
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

pub fn sse_of(points: &[Vec<f64>], labels: &[u32]) -> f64 {
    let k = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let mut total = 0.0;
    for c in 0..k as u32 {
        let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let dim = points[0].len();
        let mean: Vec<f64> = (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
        total += members
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>();
    }
    total
}

/// Out-neighbors by exhaustive distance ranking; ties to the lower index.
pub fn knn_oracle(points: &[Vec<f64>], k: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..points.len() {
        let mut others: Vec<(f64, usize)> = (0..points.len())
            .filter(|&j| j != i)
            .map(|j| {
                let d: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum();
                (d, j)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nbrs: Vec<usize> = others.iter().take(k).map(|&(_, j)| j).collect();
        nbrs.sort_unstable();
        edges.extend(nbrs.into_iter().map(|j| (i, j)));
    }
    edges
}

pub fn normalized(mut e: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    e.sort_unstable();
    e
}
