use rayon::prelude::*;

/// Dense symmetric matrix of Euclidean distances.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn euclidean<P: AsRef<[f32]> + Sync>(points: &[P]) -> Self {
        let n = points.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            let a = points[i].as_ref();
            for (j, out) in row.iter_mut().enumerate() {
                if i != j {
                    *out = euclidean(a, points[j].as_ref());
                }
            }
        });
        DistanceMatrix { n, data }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[inline]
pub fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimum spanning tree over a complete graph, dense Prim in O(n^2).
/// Returns edges `(a, b, weight)` in the order they were added.
pub fn prim_mst(n: usize, weight: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize, f64)> {
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = weight(current, j);
            if w < best[j] {
                best[j] = w;
                from[j] = current;
            }
            if best[j] < next_w || next == usize::MAX {
                next_w = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next], next, best[next]));
        current = next;
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prim_on_a_line() {
        let xs = [0.0f32, 1.0, 3.0, 7.0];
        let pts: Vec<Vec<f32>> = xs.iter().map(|&x| vec![x]).collect();
        let d = DistanceMatrix::euclidean(&pts);
        let mst = prim_mst(4, |i, j| d.get(i, j));
        let total: f64 = mst.iter().map(|e| e.2).sum();
        assert_eq!(total, 7.0);
        assert_eq!(mst.len(), 3);
    }
}
