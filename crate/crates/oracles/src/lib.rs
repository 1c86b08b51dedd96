//! Slow, obviously-correct reference implementations. The test suites check
//! the production code against these on small inputs.

pub mod hdbscan {
    //! Density clustering computed directly on point sets.
    //!
    //! A cluster is a set of points alive over a range of density levels. At
    //! each step the set splits where its widest mutual-reachability bridge
    //! breaks; components that are large enough become child clusters, the
    //! rest fall out as noise at that level.

    /// Result of the reference fit. Labels are canonical: clusters are
    /// numbered from 0 in order of their smallest member.
    #[derive(Clone, Debug, PartialEq)]
    pub struct OracleClustering {
        pub labels: Vec<Option<usize>>,
        pub n_clusters: usize,
    }

    struct Node {
        /// Lambda at which the cluster appeared.
        birth: f64,
        /// (point, lambda) for every point leaving this cluster.
        fallen: Vec<(usize, f64)>,
        children: Vec<usize>,
        /// Size of each child when it was born.
        child_sizes: Vec<(f64, usize)>,
    }

    fn lambda(d: f64) -> f64 {
        if d > 0.0 {
            1.0 / d
        } else {
            f64::INFINITY
        }
    }

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    /// Full mutual-reachability matrix, core distance = k-th nearest other
    /// point with `k = min(min_samples, n - 1)`.
    pub fn mutual_reachability(points: &[Vec<f64>], min_samples: usize) -> Vec<Vec<f64>> {
        let n = points.len();
        let d: Vec<Vec<f64>> = points
            .iter()
            .map(|p| points.iter().map(|q| euclid(p, q)).collect())
            .collect();
        let k = min_samples.min(n.saturating_sub(1));
        let core: Vec<f64> = (0..n)
            .map(|i| {
                if k == 0 {
                    return 0.0;
                }
                let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i][j]).collect();
                row.sort_by(f64::total_cmp);
                row[k - 1]
            })
            .collect();
        (0..n)
            .map(|i| (0..n).map(|j| d[i][j].max(core[i]).max(core[j])).collect())
            .collect()
    }

    /// Connected components of `set` using only edges strictly below `cut`.
    fn components(set: &[usize], mr: &[Vec<f64>], cut: f64) -> Vec<Vec<usize>> {
        let mut seen = vec![false; set.len()];
        let mut out = Vec::new();
        for start in 0..set.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut i = 0;
            while i < comp.len() {
                let a = comp[i];
                for b in 0..set.len() {
                    if !seen[b] && mr[set[a]][set[b]] < cut {
                        seen[b] = true;
                        comp.push(b);
                    }
                }
                i += 1;
            }
            out.push(comp.into_iter().map(|x| set[x]).collect());
        }
        out
    }

    /// Smallest level at which `set` is connected: the minimax bridge.
    fn connect_level(set: &[usize], mr: &[Vec<f64>]) -> f64 {
        let mut levels: Vec<f64> = set
            .iter()
            .flat_map(|&a| set.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .map(|(a, b)| mr[a][b])
            .collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        for &l in &levels {
            if components(set, mr, f64::from_bits(l.to_bits() + 1)).len() == 1 {
                return l;
            }
        }
        unreachable!("a complete graph is connected at its largest edge")
    }

    /// Set when a level splits a set into more than two parts in a way whose
    /// outcome depends on how a binary dendrogram orders tied merges.
    struct Grow<'a> {
        mr: &'a [Vec<f64>],
        mcs: usize,
        ambiguous: bool,
    }

    fn grow(nodes: &mut Vec<Node>, id: usize, mut set: Vec<usize>, g: &mut Grow<'_>) {
        let (mr, mcs) = (g.mr, g.mcs);
        loop {
            if set.len() == 1 {
                // A lone survivor leaves at the level of its last bridge, which
                // the caller already recorded; nothing further to do.
                return;
            }
            let level = connect_level(&set, mr);
            let at = lambda(level);
            let parts = components(&set, mr, level);
            let big: Vec<Vec<usize>> = parts.iter().filter(|p| p.len() >= mcs).cloned().collect();
            let small_total: usize = parts.iter().filter(|p| p.len() < mcs).map(Vec::len).sum();
            // Tied merges can only change the outcome when some pairing of the
            // parts yields two sides of at least `mcs` points each.
            let two_big_sides = match big.len() {
                0 => small_total >= 2 * mcs,
                1 => small_total >= mcs,
                _ => true,
            };
            if parts.len() > 2 && two_big_sides {
                g.ambiguous = true;
            }
            for p in parts.iter().filter(|p| p.len() < mcs) {
                nodes[id].fallen.extend(p.iter().map(|&x| (x, at)));
            }
            match big.len() {
                0 => return,
                1 => set = big.into_iter().next().expect("one part"),
                _ => {
                    for p in big {
                        let child = nodes.len();
                        nodes.push(Node {
                            birth: at,
                            fallen: Vec::new(),
                            children: Vec::new(),
                            child_sizes: Vec::new(),
                        });
                        nodes[id].children.push(child);
                        nodes[id].child_sizes.push((at, p.len()));
                        grow(nodes, child, p, g);
                    }
                    return;
                }
            }
        }
    }

    fn stability(n: &Node) -> f64 {
        let span = |l: f64| if l == n.birth { 0.0 } else { l - n.birth };
        n.fallen.iter().map(|&(_, l)| span(l)).sum::<f64>()
            + n.child_sizes.iter().map(|&(l, s)| span(l) * s as f64).sum::<f64>()
    }

    /// Returns (selected clusters, subtree score).
    fn select(nodes: &[Node], id: usize, is_root: bool, allow_single: bool) -> (Vec<usize>, f64) {
        let mut chosen = Vec::new();
        let mut sum = 0.0;
        for &c in &nodes[id].children {
            let (sel, s) = select(nodes, c, false, allow_single);
            chosen.extend(sel);
            sum += s;
        }
        let own = stability(&nodes[id]);
        if is_root && !allow_single {
            return (chosen, sum);
        }
        if sum > own {
            (chosen, sum)
        } else {
            (vec![id], own)
        }
    }

    fn members(nodes: &[Node], id: usize, out: &mut Vec<(usize, f64)>) {
        out.extend_from_slice(&nodes[id].fallen);
        for &c in &nodes[id].children {
            members(nodes, c, out);
        }
    }

    /// Returns `None` when tied split levels make the answer depend on merge
    /// order.
    pub fn fit(
        points: &[Vec<f64>],
        min_cluster_size: usize,
        min_samples: usize,
        allow_single: bool,
    ) -> Option<OracleClustering> {
        let n = points.len();
        let mr = mutual_reachability(points, min_samples);
        let mut nodes = vec![Node {
            birth: 0.0,
            fallen: Vec::new(),
            children: Vec::new(),
            child_sizes: Vec::new(),
        }];
        let mut g = Grow {
            mr: &mr,
            mcs: min_cluster_size,
            ambiguous: false,
        };
        grow(&mut nodes, 0, (0..n).collect(), &mut g);
        if g.ambiguous {
            return None;
        }
        let (selected, _) = select(&nodes, 0, true, allow_single);

        let mut raw: Vec<Option<usize>> = vec![None; n];
        for (rank, &c) in selected.iter().enumerate() {
            let mut m = Vec::new();
            members(&nodes, c, &mut m);
            if c == 0 {
                let root = &nodes[0];
                let top = root
                    .fallen
                    .iter()
                    .map(|&(_, l)| l)
                    .chain(root.child_sizes.iter().map(|&(l, _)| l))
                    .fold(f64::NEG_INFINITY, f64::max);
                // Points anywhere below the root count, judged by their own exit level.
                for (p, l) in m {
                    if l >= top {
                        raw[p] = Some(rank);
                    }
                }
            } else {
                for (p, _) in m {
                    raw[p] = Some(rank);
                }
            }
        }
        Some(canonical(&raw))
    }

    /// A small random clustering problem.
    #[derive(Clone, Debug)]
    pub struct Instance {
        pub points: Vec<Vec<f32>>,
        pub min_cluster_size: usize,
        pub min_samples: usize,
        pub allow_single_cluster: bool,
    }

    /// 4 to 12 points in up to three loose groups along the x axis.
    pub fn random_instance(seed: u64) -> Instance {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..=12);
        let centers = rng.random_range(1..=3);
        let points = (0..n)
            .map(|i| {
                let c = (i % centers) as f32 * rng.random_range(3.0..9.0f32);
                vec![c + rng.random_range(-1.0..1.0f32), rng.random_range(-1.0..1.0f32)]
            })
            .collect();
        let min_cluster_size = rng.random_range(2..=4);
        let min_samples = rng.random_range(2..=n.min(4));
        Instance {
            points,
            min_cluster_size,
            min_samples,
            allow_single_cluster: rng.random_bool(0.5),
        }
    }

    /// [`fit`] on single-precision input.
    pub fn fit_instance(inst: &Instance) -> Option<OracleClustering> {
        let wide: Vec<Vec<f64>> = inst
            .points
            .iter()
            .map(|p| p.iter().map(|&x| x as f64).collect())
            .collect();
        fit(&wide, inst.min_cluster_size, inst.min_samples, inst.allow_single_cluster)
    }

    /// Renumbers clusters in order of first appearance.
    pub fn canonical(labels: &[Option<usize>]) -> OracleClustering {
        let mut map = std::collections::HashMap::new();
        let labels: Vec<Option<usize>> = labels
            .iter()
            .map(|l| {
                l.map(|c| {
                    let next = map.len();
                    *map.entry(c).or_insert(next)
                })
            })
            .collect();
        OracleClustering {
            labels,
            n_clusters: map.len(),
        }
    }
}

pub mod sudoku {
    //! Row-major backtracking over plain `[u8; 81]` grids, 0 = empty.

    fn fits(g: &[u8; 81], cell: usize, d: u8) -> bool {
        let (r, c) = (cell / 9, cell % 9);
        let (br, bc) = (r / 3 * 3, c / 3 * 3);
        (0..9).all(|i| {
            g[r * 9 + i] != d && g[i * 9 + c] != d && g[(br + i / 3) * 9 + bc + i % 3] != d
        })
    }

    fn givens_ok(g: &[u8; 81]) -> bool {
        let mut h = *g;
        (0..81).all(|cell| {
            let d = h[cell];
            if d == 0 {
                return true;
            }
            h[cell] = 0;
            let ok = fits(&h, cell, d);
            h[cell] = d;
            ok
        })
    }

    fn walk(g: &mut [u8; 81], limit: usize, found: &mut Vec<[u8; 81]>) {
        let Some(cell) = g.iter().position(|&d| d == 0) else {
            found.push(*g);
            return;
        };
        for d in 1..=9 {
            if fits(g, cell, d) {
                g[cell] = d;
                walk(g, limit, found);
                g[cell] = 0;
                if found.len() >= limit {
                    return;
                }
            }
        }
    }

    /// Up to `limit` solutions in lexicographic order.
    pub fn solutions(g: &[u8; 81], limit: usize) -> Vec<[u8; 81]> {
        if !givens_ok(g) {
            return Vec::new();
        }
        let mut work = *g;
        let mut found = Vec::new();
        walk(&mut work, limit.max(1), &mut found);
        found
    }

    pub fn solve(g: &[u8; 81]) -> Option<[u8; 81]> {
        solutions(g, 1).into_iter().next()
    }

    pub fn is_valid_solution(g: &[u8; 81]) -> bool {
        g.iter().all(|&d| (1..=9).contains(&d)) && givens_ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_far_groups() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.5, 0.0],
            vec![0.0, 0.7],
            vec![100.0, 0.0],
            vec![100.6, 0.0],
            vec![100.0, 0.4],
        ];
        let c = hdbscan::fit(&pts, 2, 2, false).unwrap();
        assert_eq!(c.n_clusters, 2);
        assert_eq!(c.labels, vec![Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)]);
    }

    #[test]
    fn backtracking_solves_and_counts() {
        let mut g = [0u8; 81];
        let s = sudoku::solve(&g).unwrap();
        assert!(sudoku::is_valid_solution(&s));
        g.copy_from_slice(&s);
        g[0] = 0;
        g[40] = 0;
        assert_eq!(sudoku::solutions(&g, 5), vec![s]);
        g[1] = g[2];
        assert!(sudoku::solutions(&g, 5).is_empty());
    }
}
