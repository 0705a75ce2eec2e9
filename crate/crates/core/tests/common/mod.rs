//! The five reference systems shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use swarm_core::WeightedDigraph;

pub struct Example {
    pub name: &'static str,
    pub graph: WeightedDigraph,
    pub a: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub t_end: f64,
}

pub fn mat2(rows: [[f64; 2]; 2]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
}

fn adjacency(rows: [[f64; 6]; 6]) -> WeightedDigraph {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    WeightedDigraph::from_adjacency(&DMatrix::from_row_slice(6, 6, &flat)).unwrap()
}

/// Six agents, spanning tree, complex Laplacian spectrum.
pub fn loop_graph() -> WeightedDigraph {
    adjacency([
        [1., 1., 1., 1., 0., 0.],
        [1., 1., 1., 0., 0., 0.],
        [0., 1., 0., 0., 0., 1.],
        [0., 1., 1., 0., 1., 1.],
        [1., 0., 0., 0., 0., 0.],
        [0., 0., 0., 1., 1., 1.],
    ])
}

/// Six agents, two source components {5} and {2,6}.
pub fn split_graph(w35: f64) -> WeightedDigraph {
    adjacency([
        [0., 0., 1., 0., 1., 1.],
        [0., 1., 0., 0., 0., 1.],
        [0., 0., 0., 0., w35, 0.],
        [0., 1., 0., 0., 0., 0.],
        [0., 0., 0., 0., 0., 0.],
        [0., 1., 0., 0., 0., 1.],
    ])
}

pub fn loop_laplacian() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        6,
        6,
        &[
            3., -1., -1., -1., 0., 0., //
            -1., 2., -1., 0., 0., 0., //
            0., -1., 2., 0., 0., -1., //
            0., -1., -1., 4., -1., -1., //
            -1., 0., 0., 0., 1., 0., //
            0., 0., 0., -1., -1., 2.,
        ],
    )
}

pub fn example(k: usize) -> Example {
    let stable_a = mat2([[-1., 1.], [0., -2.]]);
    let stable_f = mat2([[-0.5, 0.5], [-0.5, -0.5]]);
    match k {
        1 => Example {
            name: "example 1",
            graph: loop_graph(),
            a: stable_a,
            f: stable_f,
            t_end: 7.0,
        },
        2 => Example {
            name: "example 2",
            graph: loop_graph(),
            a: mat2([[1., 1.], [-2., 0.]]),
            f: mat2([[-0.65, -1.65], [0.07, 0.40]]),
            t_end: 6.6,
        },
        3 => Example {
            name: "example 3",
            graph: split_graph(1.0),
            a: stable_a,
            f: stable_f,
            t_end: 7.0,
        },
        4 => Example {
            name: "example 4",
            graph: split_graph(0.3),
            a: mat2([[1., 1.], [-2., 0.]]),
            f: mat2([[7., 5.], [-4., -1.]]),
            t_end: 3.6,
        },
        5 => Example {
            name: "example 5",
            graph: split_graph(1.0),
            a: mat2([[1., 5.], [-0.4, 0.]]),
            f: mat2([[-1.67, 1.33], [22.85, 3.16]]),
            t_end: 5.0,
        },
        _ => panic!("no example {k}"),
    }
}
