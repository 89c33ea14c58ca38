//! Host-side stand-in for a task graph: kernel nodes with explicit
//! dependency edges, instantiated into a fixed launch order.

use std::collections::VecDeque;

use super::{ChainProgram, KernelStep, Parallelism, WorkloadState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelGraph {
    nodes: Vec<KernelStep>,
    /// `edges[n]` lists the nodes that must finish before node `n` runs.
    edges: Vec<Vec<usize>>,
}

impl KernelGraph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Adds a node depending on `deps` and returns its id.
    pub fn add_node(&mut self, step: KernelStep, deps: &[usize]) -> usize {
        self.nodes.push(step);
        self.edges.push(deps.to_vec());
        self.nodes.len() - 1
    }

    /// `batch_size` copies of the program linked into one linear chain.
    pub fn unrolled_chain(program: &ChainProgram, batch_size: u64) -> Self {
        let mut graph = Self::new();
        let mut last: Option<usize> = None;
        for _ in 0..batch_size {
            for &step in program.steps() {
                let deps: Vec<usize> = last.into_iter().collect();
                last = Some(graph.add_node(step, &deps));
            }
        }
        graph
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Fixes a launch order by topological sort. Ready nodes are taken in
    /// id order, so a linear chain runs exactly as it was built.
    pub fn instantiate(&self) -> Result<ExecutableGraph> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut dependents = vec![Vec::new(); n];
        for (node, deps) in self.edges.iter().enumerate() {
            for &d in deps {
                if d >= n {
                    return Err(Error::InvalidParameter(format!(
                        "node {node} depends on missing node {d}"
                    )));
                }
                indegree[node] += 1;
                dependents[d].push(node);
            }
        }
        let mut ready: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(node) = ready.pop_front() {
            order.push(self.nodes[node]);
            for &next in &dependents[node] {
                indegree[next] -= 1;
                if indegree[next] == 0 {
                    ready.push_back(next);
                }
            }
        }
        if order.len() != n {
            return Err(Error::InvalidParameter("kernel graph has a cycle".into()));
        }
        Ok(ExecutableGraph { order })
    }
}

impl Default for KernelGraph {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutableGraph {
    order: Vec<KernelStep>,
}

impl ExecutableGraph {
    pub fn launch(&self, state: &mut WorkloadState, par: Parallelism) -> Result<()> {
        for &step in &self.order {
            state.apply(step, par)?;
        }
        Ok(())
    }

    pub fn order(&self) -> &[KernelStep] {
        &self.order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_preserves_program_order() {
        let g = KernelGraph::unrolled_chain(&ChainProgram::fdtd(), 3);
        assert_eq!(g.len(), 6);
        let exec = g.instantiate().unwrap();
        assert_eq!(exec.order(), ChainProgram::fdtd().steps().repeat(3).as_slice());
    }

    #[test]
    fn cycles_and_dangling_edges_fail() {
        let mut g = KernelGraph::new();
        let a = g.add_node(KernelStep::VectorScale, &[1]);
        g.add_node(KernelStep::VectorScale, &[a]);
        assert!(g.instantiate().is_err());

        let mut g = KernelGraph::new();
        g.add_node(KernelStep::VectorScale, &[5]);
        assert!(g.instantiate().is_err());
    }

    #[test]
    fn out_of_order_edges_are_respected() {
        let mut g = KernelGraph::new();
        g.add_node(KernelStep::FdtdElectric, &[1]);
        g.add_node(KernelStep::FdtdMagnetic, &[]);
        let exec = g.instantiate().unwrap();
        assert_eq!(exec.order(), &[KernelStep::FdtdMagnetic, KernelStep::FdtdElectric]);
    }
}
