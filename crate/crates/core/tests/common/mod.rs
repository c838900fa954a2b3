//! Independent oracles for the acceptance suite. These deliberately avoid
//! the library's algorithms: the transport oracle is a generic min-cost
//! flow (no 1-D sorting shortcut), and the AUC oracle counts pairs.

/// Exact 1-Wasserstein between empirical distributions via a general
/// minimum-cost-flow LP on the bipartite transport graph. Masses are
/// rationalized to a common denominator so the flow is integral.
pub fn transport_lp_w1(a: &[f64], b: &[f64]) -> f64 {
    let na = a.len();
    let nb = b.len();
    assert!(na > 0 && nb > 0);
    let l = lcm(na, nb);
    let supply = l / na; // units per a-atom
    let demand = l / nb; // units per b-atom

    // node ids: 0 = source, 1..=na, na+1..=na+nb, sink = na+nb+1
    let n_nodes = na + nb + 2;
    let source = 0;
    let sink = na + nb + 1;
    let mut graph = Graph::new(n_nodes);
    for (i, _) in a.iter().enumerate() {
        graph.add_edge(source, 1 + i, supply as i64, 0.0);
    }
    for (i, &av) in a.iter().enumerate() {
        for (j, &bv) in b.iter().enumerate() {
            graph.add_edge(1 + i, 1 + na + j, l as i64, (av - bv).abs());
        }
    }
    for (j, _) in b.iter().enumerate() {
        graph.add_edge(1 + na + j, sink, demand as i64, 0.0);
    }

    let total_cost = graph.min_cost_flow(source, sink, l as i64);
    total_cost / l as f64
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
    flow: i64,
}

struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge {
            to,
            cap,
            cost,
            flow: 0,
        });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
            flow: 0,
        });
    }

    /// Successive shortest augmenting paths with Dijkstra over reduced
    /// costs (Johnson potentials). All original costs are nonnegative, so
    /// zero potentials are valid initially and reduced costs stay
    /// nonnegative; parent chains cannot cycle. Exact for integral
    /// capacities.
    fn min_cost_flow(&mut self, source: usize, sink: usize, mut need: i64) -> f64 {
        let n = self.adj.len();
        let mut potential = vec![0.0f64; n];
        let mut total_cost = 0.0;
        while need > 0 {
            let mut dist = vec![f64::INFINITY; n];
            let mut parent_edge = vec![usize::MAX; n];
            let mut done = vec![false; n];
            dist[source] = 0.0;
            // dense Dijkstra; the graph has at most a few dozen nodes
            for _ in 0..n {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
                for v in 0..n {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                for &eid in &self.adj[u] {
                    let e = &self.edges[eid];
                    if e.cap - e.flow <= 0 {
                        continue;
                    }
                    // clamp fp residue: reduced costs are >= 0 in exact math
                    let reduced = (e.cost + potential[u] - potential[e.to]).max(0.0);
                    if dist[u] + reduced < dist[e.to] {
                        dist[e.to] = dist[u] + reduced;
                        parent_edge[e.to] = eid;
                    }
                }
            }
            assert!(dist[sink].is_finite(), "transport network disconnected");
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            // bottleneck along the path, then augment
            let mut bottleneck = need;
            let mut v = sink;
            while v != source {
                let e = &self.edges[parent_edge[v]];
                bottleneck = bottleneck.min(e.cap - e.flow);
                v = self.edges[parent_edge[v] ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let eid = parent_edge[v];
                self.edges[eid].flow += bottleneck;
                self.edges[eid ^ 1].flow -= bottleneck;
                total_cost += self.edges[eid].cost * bottleneck as f64;
                v = self.edges[eid ^ 1].to;
            }
            need -= bottleneck;
        }
        total_cost
    }
}

/// O(N²) AUC: fraction of (positive, negative) pairs won, ties 0.5.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for (i, (&si, &li)) in scores.iter().zip(labels).enumerate() {
        if li != 1 {
            continue;
        }
        for (j, (&sj, &lj)) in scores.iter().zip(labels).enumerate() {
            if i == j || lj != 0 {
                continue;
            }
            pairs += 1;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs as f64
}
