//! Agent graphs as the networks see them: one robot node plus one node per
//! pedestrian, fully connected in both directions with self-loops.

use std::rc::Rc;

use ndgrad::Tensor;

use crate::sim::Observation;

/// A single scene graph. Node 0 is the robot; pedestrians follow in order.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    pub robot: [f64; 5],
    pub pedestrians: Vec<[f64; 4]>,
    /// Directed (destination, source) pairs, self-loops included.
    pub edges: Vec<(usize, usize)>,
}

impl GraphBatch {
    pub fn new(robot: [f64; 5], pedestrians: Vec<[f64; 4]>) -> Self {
        let n = 1 + pedestrians.len();
        let mut edges = Vec::with_capacity(n * n);
        for dst in 0..n {
            for src in 0..n {
                edges.push((dst, src));
            }
        }
        GraphBatch { robot, pedestrians, edges }
    }

    pub fn from_observation(obs: &Observation) -> Self {
        GraphBatch::new(obs.robot, obs.peds.clone())
    }

    pub fn n_nodes(&self) -> usize {
        1 + self.pedestrians.len()
    }
}

/// Several graphs flattened into one disjoint union, with the index plumbing
/// the batched attention ops need.
pub struct BatchedGraphs {
    pub robot_feats: Tensor,
    pub ped_feats: Tensor,
    /// Node row of each graph's robot, length = graph count.
    pub robot_rows: Rc<Vec<usize>>,
    /// Node row of each pedestrian, length = total pedestrian count.
    pub ped_rows: Rc<Vec<usize>>,
    pub edge_dst: Rc<Vec<usize>>,
    pub edge_src: Rc<Vec<usize>>,
    /// Graph id of every node, for pooled readouts.
    pub graph_of_node: Rc<Vec<usize>>,
    pub n_nodes: usize,
    pub n_graphs: usize,
}

impl BatchedGraphs {
    pub fn from_graphs(graphs: &[GraphBatch]) -> Self {
        let n_graphs = graphs.len();
        let total_peds: usize = graphs.iter().map(|g| g.pedestrians.len()).sum();
        let n_nodes: usize = graphs.iter().map(|g| g.n_nodes()).sum();

        let mut robot_data = Vec::with_capacity(n_graphs * 5);
        let mut ped_data = Vec::with_capacity(total_peds * 4);
        let mut robot_rows = Vec::with_capacity(n_graphs);
        let mut ped_rows = Vec::with_capacity(total_peds);
        let mut edge_dst = Vec::new();
        let mut edge_src = Vec::new();
        let mut graph_of_node = Vec::with_capacity(n_nodes);

        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            robot_data.extend_from_slice(&g.robot);
            robot_rows.push(offset);
            for (pi, p) in g.pedestrians.iter().enumerate() {
                ped_data.extend_from_slice(p);
                ped_rows.push(offset + 1 + pi);
            }
            for &(dst, src) in &g.edges {
                edge_dst.push(offset + dst);
                edge_src.push(offset + src);
            }
            for _ in 0..g.n_nodes() {
                graph_of_node.push(gi);
            }
            offset += g.n_nodes();
        }

        BatchedGraphs {
            robot_feats: Tensor::from_vec(n_graphs, 5, robot_data),
            ped_feats: Tensor::from_vec(total_peds, 4, ped_data),
            robot_rows: Rc::new(robot_rows),
            ped_rows: Rc::new(ped_rows),
            edge_dst: Rc::new(edge_dst),
            edge_src: Rc::new(edge_src),
            graph_of_node: Rc::new(graph_of_node),
            n_nodes,
            n_graphs,
        }
    }

    pub fn from_observations(obs: &[Observation]) -> Self {
        let graphs: Vec<GraphBatch> = obs.iter().map(GraphBatch::from_observation).collect();
        Self::from_graphs(&graphs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_graph_topology_is_full_with_self_loops() {
        let g = GraphBatch::new([0.0; 5], vec![[1.0; 4], [2.0; 4]]);
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.edges.len(), 9);
        assert!(g.edges.contains(&(0, 0)));
        assert!(g.edges.contains(&(2, 1)));
    }

    #[test]
    fn batching_offsets_nodes_and_edges() {
        let g1 = GraphBatch::new([1.0; 5], vec![[0.5; 4]]);
        let g2 = GraphBatch::new([2.0; 5], vec![]);
        let b = BatchedGraphs::from_graphs(&[g1, g2]);
        assert_eq!(b.n_nodes, 3);
        assert_eq!(b.n_graphs, 2);
        assert_eq!(*b.robot_rows, vec![0, 2]);
        assert_eq!(*b.ped_rows, vec![1]);
        assert_eq!(b.edge_dst.len(), 4 + 1);
        // Second graph's single self-loop lands at the offset node.
        assert_eq!((b.edge_dst[4], b.edge_src[4]), (2, 2));
        assert_eq!(*b.graph_of_node, vec![0, 0, 1]);
        assert_eq!(b.robot_feats.shape(), (2, 5));
        assert_eq!(b.ped_feats.shape(), (1, 4));
    }
}
