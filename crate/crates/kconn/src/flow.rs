//! Unit-capacity maximum flow (Dinic) with residual cut extraction.

use std::collections::VecDeque;

pub struct FlowNet {
    adj: Vec<Vec<u32>>,
    to: Vec<u32>,
    cap: Vec<u32>,
    base_cap: Vec<u32>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl FlowNet {
    pub fn new(nodes: usize) -> Self {
        FlowNet {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            base_cap: Vec::new(),
            level: vec![-1; nodes],
            iter: vec![0; nodes],
        }
    }

    pub fn add_arc(&mut self, u: usize, v: usize, cap: u32, back_cap: u32) {
        let id = self.to.len() as u32;
        self.adj[u].push(id);
        self.to.push(v as u32);
        self.cap.push(cap);
        self.adj[v].push(id + 1);
        self.to.push(u as u32);
        self.cap.push(back_cap);
        self.base_cap.push(cap);
        self.base_cap.push(back_cap);
    }

    /// Restore all capacities (cheap; lets one network serve many s-t pairs).
    pub fn reset(&mut self) {
        self.cap.copy_from_slice(&self.base_cap);
    }

    /// Max flow from `s` to `t`, stopping early once `limit` is reached.
    pub fn max_flow(&mut self, s: usize, t: usize, limit: u32) -> u32 {
        assert_ne!(s, t);
        let mut flow = 0;
        while flow < limit && self.bfs_levels(s, t) {
            self.iter.iter_mut().for_each(|i| *i = 0);
            while flow < limit {
                let pushed = self.augment(s, t);
                if pushed == 0 {
                    break;
                }
                flow += pushed;
            }
        }
        flow
    }

    fn bfs_levels(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(s as u32);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u as usize] {
                let v = self.to[a as usize];
                if self.cap[a as usize] > 0 && self.level[v as usize] < 0 {
                    self.level[v as usize] = self.level[u as usize] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    /// Push one augmenting path along the level graph (iterative DFS).
    fn augment(&mut self, s: usize, t: usize) -> u32 {
        let mut path: Vec<u32> = Vec::new();
        let mut nodes: Vec<usize> = vec![s];
        loop {
            let u = *nodes.last().unwrap();
            if u == t {
                let bottleneck = path.iter().map(|&a| self.cap[a as usize]).min().unwrap();
                for &a in &path {
                    self.cap[a as usize] -= bottleneck;
                    self.cap[(a ^ 1) as usize] += bottleneck;
                }
                return bottleneck;
            }
            let mut advanced = false;
            while self.iter[u] < self.adj[u].len() {
                let a = self.adj[u][self.iter[u]];
                let v = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && self.level[v] == self.level[u] + 1 {
                    path.push(a);
                    nodes.push(v);
                    advanced = true;
                    break;
                }
                self.iter[u] += 1;
            }
            if advanced {
                continue;
            }
            self.level[u] = -1; // dead end
            if nodes.len() == 1 {
                return 0;
            }
            nodes.pop();
            path.pop();
            let back = *nodes.last().unwrap();
            self.iter[back] += 1;
        }
    }

    /// Nodes reachable from `s` in the residual graph; call after `max_flow`.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut queue = VecDeque::new();
        queue.push_back(s as u32);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u as usize] {
                let v = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v as u32);
                }
            }
        }
        seen
    }
}
