/// Exact transportation problem `min Σ c_ij γ_ij` subject to
/// `Σ_j γ_ij = a_i`, `Σ_i γ_ij = b_j`, `γ ≥ 0`, by successive shortest
/// paths with Dijkstra on reduced costs.
///
/// The bipartite graph is dense, so each Dijkstra pass is `O((n + m)²)`.
/// Returns the plan as a row-major `n × m` matrix.
pub fn solve_transport(a: &[f64], b: &[f64], cost: &[f64]) -> Vec<f64> {
    let (n, m) = (a.len(), b.len());
    assert_eq!(cost.len(), n * m);
    let total: f64 = a.iter().sum::<f64>().max(b.iter().sum());
    let eps = 1e-14 * total;
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![0.0; n * m];
    // Potentials: rows then columns. Reduced cost of i→j is c_ij + π_i − π_j.
    let mut pi = vec![0.0; n + m];
    let mut dist = vec![0.0; n + m];
    let mut prev = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];

    loop {
        if supply.iter().all(|s| *s <= eps) || demand.iter().all(|d| *d <= eps) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        for i in 0..n {
            if supply[i] > eps {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (k, (&d, &fin)) in dist.iter().zip(&done).enumerate() {
                if !fin && d < best {
                    best = d;
                    u = k;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= n && demand[u - n] > eps {
                target = Some(u);
                break;
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[u * m + j] + pi[u] - pi[v]).max(0.0);
                    if best + rc < dist[v] {
                        dist[v] = best + rc;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] <= eps {
                        continue;
                    }
                    let rc = (-cost[i * m + j] + pi[u] - pi[i]).max(0.0);
                    if best + rc < dist[i] {
                        dist[i] = best + rc;
                        prev[i] = u;
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let dt = dist[t];
        for (p, d) in pi.iter_mut().zip(&dist) {
            *p += d.min(dt);
        }
        // Bottleneck along the path; backward arcs are limited by their flow.
        let mut amount = demand[t - n];
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        supply[v] -= amount;
        demand[t - n] -= amount;
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += amount;
            } else {
                let k = v * m + (u - n);
                flow[k] = (flow[k] - amount).max(0.0);
            }
            v = u;
        }
    }
    flow
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_mass_between_two_targets() {
        // One source of mass 1 to two sinks of mass 0.5.
        let plan = solve_transport(&[1.0], &[0.5, 0.5], &[1.0, 4.0]);
        assert_eq!(plan, vec![0.5, 0.5]);
    }

    #[test]
    fn rerouting_through_backward_arc() {
        // Greedy would send row 0 to column 0; optimal crosses.
        let cost = [1.0, 2.0, 1.0, 100.0];
        let plan = solve_transport(&[1.0, 1.0], &[1.0, 1.0], &cost);
        assert_eq!(plan, vec![0.0, 1.0, 1.0, 0.0]);
    }
}
