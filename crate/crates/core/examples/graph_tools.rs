//! Leadership digraphs: parsing, levels, unions, joint rootedness and the
//! level-weighted matrix norm.

use flockbench::topology::{
    epsilon_norm, is_joint_rooted, leader_distance, union_graph, SquareMatrix, SwitchingSignal,
};
use flockbench::Digraph;

fn main() -> flockbench::Result<()> {
    let g = Digraph::parse_edge_list("digraph 5\n# leader follower\n0 1\n0 2\n1 3\n2 3\n3 4\n")?;
    println!(
        "hierarchical = {}, rooted at 0 = {}",
        g.is_hierarchical(),
        g.is_rooted(0)
    );
    let d = leader_distance(&g)?;
    println!("levels = {:?}, depth = {}", d.levels, d.depth);

    // Neither half is rooted on its own; together they are.
    let a = Digraph::new(4, [(0, 1), (2, 3)])?;
    let b = Digraph::new(4, [(0, 2)])?;
    let u = union_graph(&[&a, &b])?;
    print!("union:\n{}", u.to_edge_list());
    let graphs = vec![a, b];
    let signal = SwitchingSignal::Periodic(vec![0, 1]);
    println!(
        "rooted on [0,1): {}",
        is_joint_rooted(&graphs, &signal, 0, 1)?
    );
    println!(
        "rooted on [0,2): {}",
        is_joint_rooted(&graphs, &signal, 0, 2)?
    );

    let p = SquareMatrix::from_rows(&[vec![0.9, 0.0], vec![0.1, 0.9]])?;
    for eps in [0.25, 0.5, 0.9] {
        println!(
            "||P||_eps({eps}) = {:.4}, ||P||_inf = {}",
            epsilon_norm(&p, &[1, 2], eps)?,
            p.inf_norm()
        );
    }
    Ok(())
}
