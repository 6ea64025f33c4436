//! Exact optimal values and policy on the default Gridworld.
//!
//! ```text
//! cargo run --release --example gridworld_oracle [map-file]
//! ```

use uql::gridworld::ACTION_NAMES;
use uql::oracle::value_iteration;
use uql::{Gridworld, GridworldSpec};

fn main() -> uql::Result<()> {
    let spec = match std::env::args().nth(1) {
        Some(path) => GridworldSpec::from_map_file(path)?,
        None => GridworldSpec::default(),
    };
    let world = Gridworld::build(&spec)?;
    let truth = value_iteration(&world.mdp, 1e-10);
    let layout = &world.layout;

    println!("V* (slip {}, discount {}):", spec.slip_prob, spec.discount);
    for r in 0..layout.rows {
        let line: Vec<String> = (0..layout.cols)
            .map(|c| match layout.state(r, c) {
                Some(s) => format!("{:6.3}", truth.v_star[s]),
                None => "  ####".into(),
            })
            .collect();
        println!("{}", line.join(" "));
    }
    println!("\ngreedy actions:");
    for r in 0..layout.rows {
        let line: Vec<String> = (0..layout.cols)
            .map(|c| match layout.state(r, c) {
                Some(s) if s == layout.goal => "G".into(),
                Some(s) => ACTION_NAMES[truth.pi_star[s][0]].into(),
                None => "#".into(),
            })
            .map(|a: String| format!("{a:>3}"))
            .collect();
        println!("{}", line.join(""));
    }
    Ok(())
}
