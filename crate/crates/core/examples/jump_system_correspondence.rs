//! Samples a switching signal, builds the matching jump-system path, and
//! shows that both produce the same states once the fixed dwells are
//! squeezed out of the time axis.
//!
//! ```bash
//! cargo run -p switchstab --example jump_system_correspondence
//! ```

use switchstab::fixtures;
use switchstab::sim::{
    check_path_correspondence, jump_states, replica_rng, switch_states, time_identity_error, transform_paired_paths,
};

fn main() {
    let sys = fixtures::case(1).validate().expect("valid");
    let mut rng = replica_rng(7, 0);
    let (signal, jump) = transform_paired_paths(&sys, 0, 8.0, &mut rng);
    let x0 = [1.0, -1.0];
    let switched = switch_states(&sys, &signal, &x0);
    let jumped = jump_states(&sys, &jump, &x0);

    println!("{:>3} {:>4} {:>9} {:>9} {:>24} {:>24}", "k", "mode", "t_k", "t~_k", "x(t_k)", "xi(t~_k)");
    for (k, (s, j)) in signal.segments.iter().zip(&jump.segments).enumerate() {
        println!(
            "{k:>3} {:>4} {:>9.4} {:>9.4} {:>24} {:>24}",
            s.mode + 1,
            s.start,
            j.start,
            format!("[{:.4e}, {:.4e}]", switched[k][0], switched[k][1]),
            format!("[{:.4e}, {:.4e}]", jumped[k][0], jumped[k][1]),
        );
    }
    let dev = check_path_correspondence(&sys, &signal, &jump, &x0, 16).expect("state matches order");
    println!("largest relative state deviation: {dev:.2e}");
    println!("largest time identity error: {:.2e}", time_identity_error(&signal, &jump));
}
